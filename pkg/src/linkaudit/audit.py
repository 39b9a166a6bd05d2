"""Audit orchestration: probe every cited URL, fetch its TimeMap, join outcomes."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

from .analysis import AuditOutcome, build_outcome
from .corpus import CitationRecord
from .liveness import PolitenessPolicy, ProbeResult, Prober
from .memento import FetchError, MementoConfig, TimeMap, fetch_timemap

logger = logging.getLogger(__name__)


class AggregatorUnreachable(RuntimeError):
    """Every TimeMap request failed: almost certainly a configuration problem."""


@dataclass
class AuditResult:
    outcomes: list[AuditOutcome]
    probes: list[ProbeResult]
    fetch_errors: dict[str, FetchError] = field(default_factory=dict)


def fetch_timemaps(urls: Sequence[str], config: MementoConfig, workers: int = 8) -> dict[str, TimeMap | None | FetchError]:
    """TimeMap (or None for not archived, or the FetchError) for each URL."""
    if not urls:
        return {}

    with config.client() as client:
        def one(url):
            try:
                return fetch_timemap(url, config, client)
            except FetchError as exc:
                return exc

        with ThreadPoolExecutor(max_workers=max(1, min(workers, len(urls)))) as pool:
            return dict(zip(urls, pool.map(one, urls)))


def run_audit(records: Sequence[CitationRecord], policy: PolitenessPolicy, config: MementoConfig,
              archive_workers: int = 8, second_pass: bool = True) -> AuditResult:
    """Audit records; each distinct URL is probed and looked up once.

    URLs whose TimeMap fetch still fails after a second pass are left out of
    the outcomes and returned in ``fetch_errors``. If every URL fails, the
    aggregator is treated as unreachable.
    """
    urls = list(dict.fromkeys(r.url for r in records))
    if not urls:
        return AuditResult([], [])

    with ThreadPoolExecutor(max_workers=2) as pool:
        probes_future = pool.submit(_probe_all, urls, policy)
        maps = fetch_timemaps(urls, config, archive_workers)
        probes = probes_future.result()

    failed = [u for u, v in maps.items() if isinstance(v, FetchError)]
    if failed and second_pass:
        logger.info("retrying %d TimeMap fetches", len(failed))
        maps.update(fetch_timemaps(failed, config, archive_workers))
        failed = [u for u in failed if isinstance(maps[u], FetchError)]
    if failed and len(failed) == len(urls):
        raise AggregatorUnreachable(f"all {len(urls)} TimeMap fetches failed; last error: {maps[failed[-1]]}")

    by_url = {p.url: p for p in probes}
    outcomes = [build_outcome(r, by_url[r.url], maps[r.url]) for r in records
                if not isinstance(maps[r.url], FetchError)]
    return AuditResult(outcomes, probes, {u: maps[u] for u in failed})


def _probe_all(urls, policy):
    with Prober(policy) as prober:
        return prober.probe_batch(urls)
