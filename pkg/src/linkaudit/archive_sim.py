"""Deterministic simulated web and Memento archive.

A scenario file is line-delimited JSON. An optional first record sets the
simulated "now"; every other record is one resource::

    {"clock": "2011-06-01T00:00:00Z"}
    {"url": "http://site.org/a", "live_status": 200, "snapshots": ["2005-06-01T00:00:00Z"]}
    {"url": "http://site.org/b", "live_status": 301, "redirect_to": "http://site.org/a"}
    {"url": "http://site.org/c", "live_status": "timeout", "archive": "error"}

``live_status`` is an HTTP status or one of the failure directives
``timeout`` / ``refuse``. ``head_status`` overrides the status for HEAD
requests (405 exercises the GET fallback). ``archive`` injects a fault on
the archive side for that URL: ``timeout``, ``refuse`` or ``error`` (503).
Blank lines and lines starting with ``#`` are ignored.

The running simulator acts as an HTTP proxy for origin requests (absolute
request targets) and serves ``/timemap/link/<url>``, ``/timegate/<url>``,
``/memento/<14-digit timestamp>/<url>`` and ``/health`` directly.
"""

from __future__ import annotations

import datetime as dt
import json
import random
import socket
import threading
import time
from collections import defaultdict
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Iterable, Sequence
from urllib.parse import urlsplit

from .analysis import AuditOutcome, classify
from .corpus import CitationRecord
from .memento import Memento, TimeMap, format_http_date, parse_http_date, serialize_timemap

DIRECTIVES = ("timeout", "refuse")
ARCHIVE_FAULTS = ("timeout", "refuse", "error")
MAX_REDIRECTS = 10


class ScenarioError(ValueError):
    pass


class OracleError(LookupError):
    pass


@dataclass(frozen=True)
class SimResource:
    url: str
    live_status: int | str = 200
    redirect_to: str | None = None
    snapshots: tuple[dt.datetime, ...] = ()
    head_status: int | None = None
    archive: str | None = None

    def to_json(self) -> dict:
        d = {"url": self.url, "live_status": self.live_status}
        if self.redirect_to:
            d["redirect_to"] = self.redirect_to
        if self.snapshots:
            d["snapshots"] = [s.strftime("%Y-%m-%dT%H:%M:%SZ") for s in self.snapshots]
        if self.head_status is not None:
            d["head_status"] = self.head_status
        if self.archive:
            d["archive"] = self.archive
        return d


@dataclass
class Scenario:
    resources: list[SimResource] = field(default_factory=list)
    clock: dt.datetime = dt.datetime(2011, 6, 1, tzinfo=dt.timezone.utc)

    def __post_init__(self):
        self.by_url: dict[str, SimResource] = {}
        for r in self.resources:
            if r.url in self.by_url:
                raise ScenarioError(f"duplicate resource URL {r.url}")
            self.by_url[r.url] = r

    def dump(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps({"clock": self.clock.strftime("%Y-%m-%dT%H:%M:%SZ")}) + "\n")
            for r in self.resources:
                fh.write(json.dumps(r.to_json(), sort_keys=True) + "\n")


def _parse_instant(value, where: str) -> dt.datetime:
    if not isinstance(value, str):
        raise ScenarioError(f"{where}: datetime must be an ISO-8601 string")
    try:
        when = dt.datetime.fromisoformat(value.replace("Z", "+00:00"))
    except ValueError as exc:
        raise ScenarioError(f"{where}: bad datetime {value!r}") from exc
    if when.tzinfo is None:
        when = when.replace(tzinfo=dt.timezone.utc)
    return when.astimezone(dt.timezone.utc)


def _parse_resource(entry: dict, where: str) -> SimResource:
    url = entry.get("url")
    if not isinstance(url, str) or not url.startswith(("http://", "https://")):
        raise ScenarioError(f"{where}: resource needs an absolute http(s) 'url'")
    where = f"{where} ({url})"
    unknown = set(entry) - {"url", "live_status", "redirect_to", "snapshots", "head_status", "archive"}
    if unknown:
        raise ScenarioError(f"{where}: unknown field(s) {sorted(unknown)}")
    status = entry.get("live_status", 200)
    if isinstance(status, bool) or not (
        (isinstance(status, int) and 100 <= status <= 599) or status in DIRECTIVES
    ):
        raise ScenarioError(f"{where}: live_status must be 100-599 or one of {DIRECTIVES}")
    redirect_to = entry.get("redirect_to")
    if redirect_to is not None and not (isinstance(status, int) and 300 <= status < 400):
        raise ScenarioError(f"{where}: redirect_to needs a 3xx live_status")
    head = entry.get("head_status")
    if head is not None and (isinstance(head, bool) or not isinstance(head, int) or not 100 <= head <= 599):
        raise ScenarioError(f"{where}: head_status must be an HTTP status")
    archive = entry.get("archive")
    if archive is not None and archive not in ARCHIVE_FAULTS:
        raise ScenarioError(f"{where}: archive fault must be one of {ARCHIVE_FAULTS}")
    raw_snaps = entry.get("snapshots", [])
    if not isinstance(raw_snaps, list):
        raise ScenarioError(f"{where}: snapshots must be a list")
    snaps = tuple(_parse_instant(s, where).replace(microsecond=0) for s in raw_snaps)
    for a, b in zip(snaps, snaps[1:]):
        if b <= a:
            raise ScenarioError(f"{where}: snapshots must be strictly increasing ({b.isoformat()} after {a.isoformat()})")
    return SimResource(url, status, redirect_to, snaps, head, archive)


def load_scenario(path: str | Path) -> Scenario:
    """Read and validate a scenario file; errors carry ``path:line``."""
    resources = []
    seen: dict[str, int] = {}
    clock = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            where = f"{path}:{lineno}"
            try:
                entry = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ScenarioError(f"{where}: invalid JSON: {exc}") from exc
            if not isinstance(entry, dict):
                raise ScenarioError(f"{where}: expected a JSON object")
            if "url" not in entry and "clock" in entry:
                if resources or clock is not None:
                    raise ScenarioError(f"{where}: clock record must come first")
                clock = _parse_instant(entry["clock"], where)
                continue
            res = _parse_resource(entry, where)
            if res.url in seen:
                raise ScenarioError(f"{where} ({res.url}): duplicate URL, first defined on line {seen[res.url]}")
            seen[res.url] = lineno
            resources.append(res)
    if clock is None:
        return Scenario(resources)
    return Scenario(resources, clock)


# -- ground truth -------------------------------------------------------------


def _reachable(scenario: Scenario, url: str) -> bool:
    current = scenario.by_url.get(url)
    hops = 0
    while True:
        if current is None:
            return False  # unknown URLs are served 404
        status = current.live_status
        if status in DIRECTIVES:
            return False
        if current.redirect_to and status in (301, 302, 303, 307, 308):
            if hops >= MAX_REDIRECTS:
                return False
            hops += 1
            current = scenario.by_url.get(current.redirect_to)
            continue
        return status < 400


def memento_uri(base: str, url: str, when: dt.datetime) -> str:
    return f"{base.rstrip('/')}/memento/{when.strftime('%Y%m%d%H%M%S')}/{url}"


def ground_truth(scenario: Scenario, records: Iterable[CitationRecord], archive_base: str = "http://archive.invalid") -> list[AuditOutcome]:
    """Expected outcomes computed straight from the scenario definition.

    Closest snapshots are found by scanning every snapshot, keeping the
    earlier one on equal distance. ``archive_base`` must match the served
    simulator's address for memento URIs to compare equal.
    """
    out = []
    for rec in records:
        res = scenario.by_url.get(rec.url)
        if res is None:
            raise OracleError(f"record URL {rec.url} is not in the scenario")
        reachable = _reachable(scenario, rec.url)
        archived = bool(res.snapshots)
        closest = delta = None
        if archived:
            pub = dt.datetime.combine(rec.publication_date, dt.time(), dt.timezone.utc)
            best = None
            best_gap = None
            for snap in res.snapshots:
                gap = abs((snap - pub).total_seconds())
                if best is None or gap < best_gap or (gap == best_gap and snap < best):
                    best, best_gap = snap, gap
            seconds = int((best - pub).total_seconds())
            delta = seconds // 86400
            closest = Memento(best, memento_uri(archive_base, res.url, best))
        out.append(AuditOutcome(rec, reachable, archived, closest, delta, classify(reachable, archived)))
    return out


# -- server -------------------------------------------------------------------


class Instrumentation:
    """Per-host in-flight counters, high-water marks and request start times."""

    def __init__(self):
        self._lock = threading.Lock()
        self.in_flight: dict[str, int] = defaultdict(int)
        self.high_water: dict[str, int] = defaultdict(int)
        self.starts: dict[str, list[float]] = defaultdict(list)
        self.global_in_flight = 0
        self.global_high_water = 0

    def enter(self, key: str) -> None:
        with self._lock:
            self.in_flight[key] += 1
            self.high_water[key] = max(self.high_water[key], self.in_flight[key])
            self.starts[key].append(time.monotonic())
            self.global_in_flight += 1
            self.global_high_water = max(self.global_high_water, self.global_in_flight)

    def leave(self, key: str) -> None:
        with self._lock:
            self.in_flight[key] -= 1
            self.global_in_flight -= 1

    def origin_high_water(self) -> int:
        with self._lock:
            return max((v for k, v in self.high_water.items() if k != ARCHIVE_KEY), default=0)

    def min_gap(self, key: str) -> float | None:
        with self._lock:
            s = sorted(self.starts.get(key, ()))
        gaps = [b - a for a, b in zip(s, s[1:])]
        return min(gaps) if gaps else None

    def reset(self) -> None:
        with self._lock:
            self.in_flight.clear()
            self.high_water.clear()
            self.starts.clear()
            self.global_in_flight = self.global_high_water = 0


ARCHIVE_KEY = "<archive>"


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server: "_SimServer"

    def log_message(self, format, *args):  # noqa: A002 - BaseHTTPRequestHandler signature
        pass

    def do_GET(self):
        self._dispatch("GET")

    def do_HEAD(self):
        self._dispatch("HEAD")

    def do_CONNECT(self):
        self._reply(501, b"tunnelling not supported\n", method="GET")

    def _reply(self, status: int, body: bytes = b"", headers: dict | None = None, method: str = "GET"):
        self.send_response(status)
        for k, v in (headers or {}).items():
            self.send_header(k, v)
        self.send_header("Content-Length", str(len(body)))
        # the client may send its next request as soon as headers arrive
        self._leave()
        self.end_headers()
        if method != "HEAD" and body:
            self.wfile.write(body)

    def _drop(self, hang: bool):
        if hang:
            self._wait_for_client_close(self.server.hang_seconds)
        self.close_connection = True

    def _wait_for_client_close(self, limit: float):
        """Stall until the client hangs up, ``limit`` passes or the server stops."""
        sock = self.connection
        deadline = time.monotonic() + limit
        while not self.server.stopping.is_set():
            left = deadline - time.monotonic()
            if left <= 0:
                return
            sock.settimeout(min(left, 0.25))
            try:
                if not sock.recv(1, socket.MSG_PEEK):
                    return
            except socket.timeout:
                continue
            except OSError:
                return
            # pipelined bytes: the client is still there
            self.server.stopping.wait(min(left, 0.05))

    def _enter(self, key: str):
        self._key = key
        self.server.stats.enter(key)

    def _leave(self):
        key = getattr(self, "_key", None)
        if key is not None:
            self._key = None
            self.server.stats.leave(key)

    def _dispatch(self, method: str):
        target = self.path
        if target.startswith(("http://", "https://")):
            parts = urlsplit(target)
            if parts.netloc == self.server.netloc:
                target = target[len(parts.scheme) + 3 + len(parts.netloc):] or "/"
            else:
                self._enter((parts.hostname or "").lower())
                try:
                    self._origin(method, target)
                finally:
                    self._leave()
                return
        self._enter(ARCHIVE_KEY)
        try:
            self._archive(method, target)
        finally:
            self._leave()

    def _origin(self, method: str, url: str):
        res = self.server.scenario.by_url.get(url)
        if res is None:
            return self._reply(404, b"not found\n", method=method)
        if res.live_status == "timeout":
            return self._drop(hang=True)
        if res.live_status == "refuse":
            return self._drop(hang=False)
        status = res.live_status
        if method == "HEAD" and res.head_status is not None:
            status = res.head_status
        headers = {"Location": res.redirect_to} if res.redirect_to and status == res.live_status else {}
        self._reply(status, b"simulated resource\n", headers, method)

    def _archive(self, method: str, path: str):
        scenario = self.server.scenario
        if path == "/health":
            body = json.dumps({"resources": len(scenario.resources)}).encode()
            return self._reply(200, body, {"Content-Type": "application/json"}, method)
        for prefix, route in (("/timemap/link/", self._timemap), ("/timegate/", self._timegate),
                              ("/memento/", self._memento)):
            if path.startswith(prefix):
                return route(method, path[len(prefix):])
        self._reply(404, b"unknown route\n", method=method)

    def _fault(self, res: SimResource | None) -> bool:
        if res is None or res.archive is None:
            return False
        if res.archive == "error":
            self._reply(503, b"archive unavailable\n")
        else:
            self._drop(hang=res.archive == "timeout")
        return True

    def _timemap(self, method: str, url: str):
        res = self.server.scenario.by_url.get(url)
        if self._fault(res):
            return
        if res is None or not res.snapshots:
            return self._reply(404, b"no mementos\n", method=method)
        base = self.server.base_url
        tm = TimeMap(
            original_uri=url,
            mementos=tuple(Memento(s, memento_uri(base, url, s)) for s in res.snapshots),
            timegate_uri=f"{base}/timegate/{url}",
            self_uri=f"{base}/timemap/link/{url}",
        )
        self._reply(200, serialize_timemap(tm).encode(), {"Content-Type": "application/link-format"}, method)

    def _timegate(self, method: str, url: str):
        res = self.server.scenario.by_url.get(url)
        if self._fault(res):
            return
        if res is None or not res.snapshots:
            return self._reply(404, b"no mementos\n", method=method)
        wanted = self.headers.get("Accept-Datetime")
        if wanted is None:
            chosen = res.snapshots[-1]
        else:
            try:
                when = parse_http_date(wanted)
            except ValueError:
                return self._reply(400, b"bad Accept-Datetime\n", method=method)
            chosen = min(res.snapshots, key=lambda s: (abs(s - when), s))
        headers = {
            "Location": memento_uri(self.server.base_url, url, chosen),
            "Vary": "accept-datetime",
            "Link": f'<{url}>; rel="original"',
        }
        self._reply(302, b"", headers, method)

    def _memento(self, method: str, rest: str):
        stamp, _, url = rest.partition("/")
        res = self.server.scenario.by_url.get(url)
        try:
            when = dt.datetime.strptime(stamp, "%Y%m%d%H%M%S").replace(tzinfo=dt.timezone.utc)
        except ValueError:
            return self._reply(404, b"bad memento path\n", method=method)
        if res is None or when not in res.snapshots:
            return self._reply(404, b"no such memento\n", method=method)
        headers = {"Memento-Datetime": format_http_date(when), "Link": f'<{url}>; rel="original"'}
        self._reply(200, b"archived copy\n", headers, method)


class _SimServer(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True
    request_queue_size = 256

    def __init__(self, address, scenario: Scenario, hang_seconds: float):
        super().__init__(address, _Handler)
        self.scenario = scenario
        self.hang_seconds = hang_seconds
        self.stats = Instrumentation()
        self.stopping = threading.Event()
        host, port = self.server_address[:2]
        self.netloc = f"{host}:{port}"
        self.base_url = f"http://{self.netloc}"


class SimulatorHandle:
    """A running simulator. Use as a context manager or call ``stop()``."""

    def __init__(self, server: _SimServer):
        self._server = server
        self._thread = threading.Thread(target=server.serve_forever, name="archive-sim", daemon=True)
        self._thread.start()

    @property
    def base_url(self) -> str:
        return self._server.base_url

    proxy_url = base_url

    @property
    def stats(self) -> Instrumentation:
        return self._server.stats

    @property
    def scenario(self) -> Scenario:
        return self._server.scenario

    def stop(self) -> None:
        self._server.stopping.set()
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.stop()


def serve(scenario: Scenario, bind_address: tuple[str, int] = ("127.0.0.1", 0), hang_seconds: float = 5.0) -> SimulatorHandle:
    """Start serving ``scenario`` in a background thread.

    ``hang_seconds`` is how long a ``timeout`` resource holds the connection
    before dropping it; clients should time out sooner. Port 0 picks a free
    port; the chosen address is in ``handle.base_url``.
    """
    try:
        server = _SimServer(bind_address, scenario, hang_seconds)
    except OSError as exc:
        raise OSError(f"cannot bind simulator to {bind_address[0]}:{bind_address[1]}: {exc}") from exc
    return SimulatorHandle(server)


# -- generation ---------------------------------------------------------------

DEFAULT_MIX = {"LiveArchived": 0.4, "LiveUnarchived": 0.3, "GoneArchived": 0.1, "GoneUnarchived": 0.2}


def _planted_counts(n: int, mix: dict[str, float]) -> dict[str, int]:
    counts = {k: int(round(n * v)) for k, v in mix.items()}
    largest = max(counts, key=counts.get)
    counts[largest] += n - sum(counts.values())
    return counts


def generate_scenario(n: int, mix: dict[str, float] | None = None, seed: int = 0,
                      hosts: int | None = None, faults: bool = True) -> Scenario:
    """Random scenario with ``n`` citable resources in planted class proportions.

    With ``faults`` the live and gone populations include redirects, HEAD
    rejection, timeouts, refused connections and redirect loops. Extra
    redirect-target resources are added beyond the ``n`` citable ones; their
    URLs live under ``/moved/`` paths.
    """
    rng = random.Random(seed)
    counts = _planted_counts(n, mix or DEFAULT_MIX)
    hosts = hosts or max(1, n // 4)
    host_names = [f"site{i:04d}.{rng.choice(['org', 'com', 'edu', 'net', 'gov', 'uk', 'de'])}" for i in range(hosts)]
    start = dt.datetime(1996, 1, 1, tzinfo=dt.timezone.utc)
    span = int((dt.datetime(2011, 6, 1, tzinfo=dt.timezone.utc) - start).total_seconds())
    plan = [cls for cls, k in counts.items() for _ in range(k)]
    rng.shuffle(plan)
    resources: list[SimResource] = []
    extra: list[SimResource] = []
    for i, cls in enumerate(plan):
        host = host_names[i % hosts]
        url = f"http://{host}/doc/{i}" + (rng.choice(["", "/", ".html", "?id=%d" % i]))
        snaps: tuple[dt.datetime, ...] = ()
        if cls.endswith("Archived") and not cls.endswith("Unarchived"):
            k = rng.randint(1, 6)
            picks = sorted({start + dt.timedelta(seconds=rng.randrange(span)) for _ in range(k)})
            snaps = tuple(picks)
        live = cls.startswith("Live")
        kind = rng.random() if faults else 1.0
        if live:
            if kind < 0.15:
                target = f"http://{host}/moved/{i}"
                extra.append(SimResource(target, 200))
                res = SimResource(url, rng.choice([301, 302, 307]), target, snaps)
            elif kind < 0.25:
                res = SimResource(url, 200, None, snaps, head_status=405)
            elif kind < 0.3:
                res = SimResource(url, rng.choice([204, 304, 399]), None, snaps)
            else:
                res = SimResource(url, 200, None, snaps)
        else:
            if kind < 0.05:
                res = SimResource(url, "timeout", None, snaps)
            elif kind < 0.1:
                res = SimResource(url, "refuse", None, snaps)
            elif kind < 0.2:
                target = f"http://{host}/moved/{i}"
                extra.append(SimResource(target, 404))
                res = SimResource(url, 301, target, snaps)
            elif kind < 0.23:
                res = SimResource(url, 302, url, snaps)  # self-loop
            else:
                res = SimResource(url, rng.choice([400, 403, 404, 404, 404, 410, 500, 503]), None, snaps)
        resources.append(res)
    return Scenario(resources + extra)


def citable_urls(scenario: Scenario) -> list[str]:
    return [r.url for r in scenario.resources if "/moved/" not in r.url]
