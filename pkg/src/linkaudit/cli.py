"""Command line entry point: extract, audit, report, seeds, sim.

Exit codes: 0 success, 2 usage or configuration error, 3 empty dataset,
4 network abort (aggregator unreachable for every URL).
"""

from __future__ import annotations

import argparse
import collections
import datetime as dt
import json
import logging
import signal
import sys
import threading
from pathlib import Path

from . import archive_sim
from .analysis import AuditOutcome, read_outcomes
from .audit import AggregatorUnreachable, run_audit
from .corpus import dedupe_corpus, load_corpus, process_corpus, read_records, write_records
from .liveness import PolitenessPolicy, write_probe_results
from .memento import MementoConfig
from .normalize import Normalizer, load_blacklist, load_tld_set
from .reporting import EmptyDataset, build_report, render_report
from .seeds import FeedMeta, export_feed, export_plain_seeds

EXIT_OK, EXIT_USAGE, EXIT_EMPTY, EXIT_NETWORK = 0, 2, 3, 4

logger = logging.getLogger("linkaudit")


class UsageError(Exception):
    pass


def _load_config(path) -> dict:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError(f"config {path} must be a JSON object")
    return cfg


def _pick(flag, section: dict, key: str, default):
    if flag is not None:
        return flag
    return section.get(key, default)


def _require(path, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"{what} not found: {path}")
    return p


def _out(path):
    return open(path, "w", encoding="utf-8") if path and path != "-" else None


def _emit(text: str, path) -> None:
    fh = _out(path)
    if fh is None:
        sys.stdout.write(text)
    else:
        with fh:
            fh.write(text)


# -- extract ------------------------------------------------------------------


def cmd_extract(args, cfg) -> int:
    corpus = _require(args.corpus, "corpus directory")
    meta = _require(args.meta, "metadata file")
    tld_path = args.tlds or cfg.get("tld_file")
    bl_path = args.blacklist or cfg.get("blacklist_file")
    try:
        normalizer = Normalizer(load_tld_set(tld_path), load_blacklist(bl_path))
    except (OSError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    try:
        docs = list(load_corpus(corpus, meta))
        results = process_corpus(docs, normalizer, workers=args.workers)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    deduped = dedupe_corpus(r for res in results for r in res.records)
    write_records(deduped.records, args.output)

    reasons = collections.Counter(reason.kind.value for res in results for _, reason in res.discarded)
    print(f"papers: {len(results)}")
    print(f"raw links: {sum(r.raw_links for r in results)}")
    print(f"discarded: {sum(reasons.values())}")
    for kind, n in sorted(reasons.items()):
        print(f"  {kind}: {n}")
    print(f"records: {len(deduped.records)}")
    print(f"unique URLs: {deduped.distinct_urls}")
    return EXIT_OK


# -- audit --------------------------------------------------------------------


def _policy(args, cfg) -> PolitenessPolicy:
    sec = cfg.get("politeness", {})
    d = PolitenessPolicy()
    return PolitenessPolicy(
        max_concurrency=_pick(args.concurrency, sec, "max_concurrency", d.max_concurrency),
        max_per_host=_pick(args.per_host, sec, "max_per_host", d.max_per_host),
        per_host_delay=_pick(args.delay, sec, "per_host_delay", d.per_host_delay),
        timeout=_pick(args.timeout, sec, "timeout", d.timeout),
        timeout_retries=sec.get("timeout_retries", d.timeout_retries),
        timeout_backoff=sec.get("timeout_backoff", d.timeout_backoff),
        max_redirects=sec.get("max_redirects", d.max_redirects),
        user_agent=_pick(args.user_agent, sec, "user_agent", d.user_agent),
        proxy=_pick(args.proxy, sec, "proxy", d.proxy),
        trust_env=sec.get("trust_env", d.trust_env),
    )


def _memento_config(args, cfg) -> MementoConfig:
    sec = cfg.get("aggregator", {})
    d = MementoConfig()
    return MementoConfig(
        endpoint=_pick(args.endpoint, sec, "endpoint", d.endpoint),
        timemap_template=_pick(args.timemap_template, sec, "timemap_template", d.timemap_template),
        timegate_template=sec.get("timegate_template", d.timegate_template),
        attempts=_pick(args.attempts, sec, "attempts", d.attempts),
        backoff=_pick(args.backoff, sec, "backoff", d.backoff),
        deadline=sec.get("deadline", d.deadline),
        timeout=_pick(args.timeout, sec, "timeout", d.timeout),
        user_agent=_pick(args.user_agent, sec, "user_agent", d.user_agent),
        trust_env=sec.get("trust_env", d.trust_env),
    )


def _read_partial_outcomes(path: Path) -> list[AuditOutcome]:
    """Outcomes already on disk; a torn final line from an interrupted run is ignored."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            try:
                out.append(AuditOutcome.from_json(json.loads(line)))
            except (ValueError, KeyError):
                logger.warning("ignoring unreadable outcome line in %s", path)
    return out


def cmd_audit(args, cfg) -> int:
    records_path = _require(args.records, "records file")
    out_path = Path(args.output)
    if not out_path.parent.exists():
        raise UsageError(f"output directory does not exist: {out_path.parent}")
    policy = _policy(args, cfg)
    config = _memento_config(args, cfg)
    records = read_records(records_path)

    done: dict[tuple[str, str], AuditOutcome] = {}
    if args.resume and out_path.exists():
        for o in _read_partial_outcomes(out_path):
            done[(o.record.url, o.record.paper_id)] = o
        mode = "a"
    else:
        mode = "w"
    pending = [r for r in records if (r.url, r.paper_id) not in done]

    by_url: dict[str, list] = {}
    for r in pending:
        by_url.setdefault(r.url, []).append(r)
    urls = list(by_url)
    errors = {}
    probes = []
    with open(out_path, mode, encoding="utf-8") as fh:
        for start in range(0, len(urls), args.chunk):
            chunk = [r for u in urls[start:start + args.chunk] for r in by_url[u]]
            try:
                result = run_audit(chunk, policy, config, archive_workers=policy.max_concurrency)
            except AggregatorUnreachable as exc:
                if errors or done or start > 0:
                    # earlier chunks reached the aggregator; treat as data failures
                    logger.error("%s", exc)
                    errors.update({r.url: exc for r in chunk})
                    continue
                print(f"error: {exc}", file=sys.stderr)
                return EXIT_NETWORK
            for o in result.outcomes:
                fh.write(json.dumps(o.to_json(), sort_keys=True) + "\n")
                done[(o.record.url, o.record.paper_id)] = o
            fh.flush()
            errors.update(result.fetch_errors)
            probes.extend(result.probes)

    # compact: last write wins, input order
    with open(out_path, "w", encoding="utf-8") as fh:
        for r in records:
            o = done.get((r.url, r.paper_id))
            if o is not None:
                fh.write(json.dumps(o.to_json(), sort_keys=True) + "\n")

    err_path = out_path.with_name(out_path.name + ".fetch_errors.jsonl")
    if errors:
        with open(err_path, "w", encoding="utf-8") as fh:
            for url in sorted(errors):
                exc = errors[url]
                fh.write(json.dumps({"url": url, "error": str(exc),
                                     "attempts": getattr(exc, "attempts", None),
                                     "last_status": getattr(exc, "last_status", None)}, sort_keys=True) + "\n")
    elif err_path.exists():
        err_path.unlink()
    if args.probes:
        write_probe_results(probes, args.probes)

    print(f"records: {len(records)}")
    print(f"outcomes: {sum(1 for r in records if (r.url, r.paper_id) in done)}")
    print(f"fetch errors: {len(errors)}" + (f" (see {err_path})" if errors else ""))
    return EXIT_OK


# -- report -------------------------------------------------------------------


def cmd_report(args, cfg) -> int:
    path = _require(args.outcomes, "outcomes file")
    sec = cfg.get("report", {})
    month = _pick(args.month_days, sec, "month_days", 31)
    year = _pick(args.year_days, sec, "year_days", 365)
    outcomes = read_outcomes(path)
    try:
        report = build_report(outcomes, args.group_by, month, year)
    except EmptyDataset as exc:
        print(f"error: empty dataset: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    if args.format == "plot-data" and report.histogram is None:
        print("error: empty dataset: no archived outcomes to plot", file=sys.stderr)
        return EXIT_EMPTY
    _emit(render_report(report, args.format), args.output)
    return EXIT_OK


# -- seeds --------------------------------------------------------------------


def cmd_seeds(args, cfg) -> int:
    records = read_records(_require(args.records, "records file"))
    if args.format == "plain":
        _emit(export_plain_seeds(records), args.output)
        return EXIT_OK
    sec = cfg.get("feed", {})
    meta = FeedMeta(**{k: v for k, v in sec.items() if k in FeedMeta.__dataclass_fields__})
    if args.updated:
        try:
            when = dt.datetime.fromisoformat(args.updated.replace("Z", "+00:00"))
        except ValueError as exc:
            raise UsageError(f"bad --updated value {args.updated!r}") from exc
        if when.tzinfo is None:
            when = when.replace(tzinfo=dt.timezone.utc)
        clock = lambda: when  # noqa: E731
        _emit(export_feed(records, meta, clock), args.output)
    else:
        _emit(export_feed(records, meta), args.output)
    return EXIT_OK


# -- sim ----------------------------------------------------------------------


def cmd_sim(args, cfg) -> int:
    try:
        scenario = archive_sim.load_scenario(_require(args.scenario, "scenario file"))
    except archive_sim.ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    host, _, port = args.bind.rpartition(":")
    try:
        handle = archive_sim.serve(scenario, (host or "127.0.0.1", int(port)), hang_seconds=args.hang)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    stop = threading.Event()
    for sig in (signal.SIGINT, signal.SIGTERM):
        signal.signal(sig, lambda *_: stop.set())
    print(f"serving {len(scenario.resources)} resources at {handle.base_url} "
          f"(proxy for origins, TimeMaps at {handle.base_url}/timemap/link/<url>)", flush=True)
    try:
        stop.wait()
    finally:
        handle.stop()
    return EXIT_OK


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="linkaudit", description=__doc__.splitlines()[0],
                                formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--config", help="JSON config file; command line flags take precedence")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    e = sub.add_parser("extract", help="extract and normalize cited URLs", formatter_class=fmt)
    e.add_argument("corpus", help="directory of converted markup (.xml/.html) and text (.txt) files")
    e.add_argument("--meta", required=True, help="line-delimited JSON metadata file")
    e.add_argument("-o", "--output", required=True, help="citation record file to write")
    e.add_argument("--tlds", help="TLD list file (default: bundled snapshot)")
    e.add_argument("--blacklist", help="blacklist file (default: bundled list)")
    e.add_argument("--workers", type=int, default=1, help="documents processed in parallel")
    e.set_defaults(func=cmd_extract)

    a = sub.add_parser("audit", help="probe liveness and fetch TimeMaps", formatter_class=fmt)
    a.add_argument("records", help="citation record file")
    a.add_argument("-o", "--output", required=True, help="outcome file to write")
    a.add_argument("--endpoint", help="aggregator base URL (default http://localhost:1208)")
    a.add_argument("--timemap-template", help="TimeMap URL template with {endpoint} and {url}")
    a.add_argument("--proxy", help="HTTP proxy for liveness probes (e.g. a running simulator)")
    a.add_argument("--concurrency", type=int, help="global concurrent requests (default 8)")
    a.add_argument("--per-host", type=int, help="concurrent requests per host (default 1)")
    a.add_argument("--delay", type=float, help="seconds between requests to one host (default 1.0)")
    a.add_argument("--timeout", type=float, help="per-request timeout in seconds (default 15)")
    a.add_argument("--attempts", type=int, help="TimeMap fetch attempts (default 3)")
    a.add_argument("--backoff", type=float, help="first retry backoff in seconds (default 1.0)")
    a.add_argument("--user-agent", help="User-Agent header")
    a.add_argument("--chunk", type=int, default=500, help="URLs audited per checkpoint")
    a.add_argument("--resume", action="store_true", help="keep outcomes already in the output file")
    a.add_argument("--probes", help="also write liveness probe results here")
    a.set_defaults(func=cmd_audit)

    r = sub.add_parser("report", help="summarize an outcome file", formatter_class=fmt)
    r.add_argument("outcomes", help="outcome file")
    r.add_argument("--group-by", choices=["none", "subject"], default="none")
    r.add_argument("--format", choices=["csv", "json", "plot-data"], default="csv")
    r.add_argument("--month-days", type=int, help="'within a month' window (default 31)")
    r.add_argument("--year-days", type=int, help="'within a year' window (default 365)")
    r.add_argument("-o", "--output", help="write here instead of stdout")
    r.set_defaults(func=cmd_report)

    s = sub.add_parser("seeds", help="export crawler seeds", formatter_class=fmt)
    s.add_argument("records", help="citation record file")
    s.add_argument("--format", choices=["atom", "plain"], default="atom")
    s.add_argument("--updated", help="feed timestamp (ISO-8601); defaults to now")
    s.add_argument("-o", "--output", help="write here instead of stdout")
    s.set_defaults(func=cmd_seeds)

    m = sub.add_parser("sim", help="serve a simulated web and archive", formatter_class=fmt)
    m.add_argument("scenario", help="scenario file (line-delimited JSON)")
    m.add_argument("--bind", default="127.0.0.1:8808", help="host:port to listen on")
    m.add_argument("--hang", type=float, default=5.0, help="seconds a 'timeout' resource stalls")
    m.set_defaults(func=cmd_sim)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load_config(args.config)
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
