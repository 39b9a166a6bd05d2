"""Liveness probing of original URLs.

A URL counts as live when the final HTTP status, after following redirects,
is below 400. Requests are HEAD first, repeated as GET when the server
answers 405.
"""

from __future__ import annotations

import datetime as dt
import enum
import json
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence
from urllib.parse import urljoin, urlsplit

import httpx


class FailureKind(str, enum.Enum):
    TIMEOUT = "Timeout"
    CONNECTION_REFUSED = "ConnectionRefused"
    DNS_FAILURE = "DnsFailure"
    TOO_MANY_REDIRECTS = "TooManyRedirects"


@dataclass(frozen=True)
class ProbeResult:
    url: str
    final_status: int | None
    redirect_hops: int
    reachable: bool
    checked_at: dt.datetime
    failure_kind: FailureKind | None = None

    def __post_init__(self):
        if self.reachable != (self.final_status is not None and self.final_status < 400):
            raise ValueError("reachable must equal final_status < 400")
        if (self.failure_kind is None) != (self.final_status is not None):
            raise ValueError("failure_kind is set exactly when final_status is absent")

    def to_json(self) -> dict:
        return {
            "url": self.url,
            "final_status": self.final_status,
            "redirect_hops": self.redirect_hops,
            "reachable": self.reachable,
            "checked_at": self.checked_at.isoformat().replace("+00:00", "Z"),
            "failure_kind": self.failure_kind.value if self.failure_kind else None,
        }

    @classmethod
    def from_json(cls, d: dict) -> "ProbeResult":
        return cls(
            url=d["url"],
            final_status=d["final_status"],
            redirect_hops=d["redirect_hops"],
            reachable=d["reachable"],
            checked_at=dt.datetime.fromisoformat(d["checked_at"].replace("Z", "+00:00")),
            failure_kind=FailureKind(d["failure_kind"]) if d.get("failure_kind") else None,
        )


@dataclass
class PolitenessPolicy:
    max_concurrency: int = 8
    max_per_host: int = 1
    per_host_delay: float = 1.0
    timeout: float = 15.0
    timeout_retries: int = 1
    timeout_backoff: float = 1.0
    max_redirects: int = 10
    user_agent: str = "linkaudit/0.1"
    proxy: str | None = None
    trust_env: bool = True


_REDIRECTS = frozenset({301, 302, 303, 307, 308})


def _utcnow() -> dt.datetime:
    return dt.datetime.now(dt.timezone.utc).replace(microsecond=0)


class HostGate:
    """Per-host concurrency limit plus minimum spacing between requests to a host."""

    def __init__(self, max_per_host: int, delay: float):
        self.max_per_host = max_per_host
        self.delay = delay
        self._cond = threading.Condition()
        self._active: dict[str, int] = {}
        self._next_start: dict[str, float] = {}

    def acquire(self, host: str) -> None:
        with self._cond:
            while True:
                now = time.monotonic()
                ready_at = self._next_start.get(host, 0.0)
                if self._active.get(host, 0) < self.max_per_host and now >= ready_at:
                    self._active[host] = self._active.get(host, 0) + 1
                    self._next_start[host] = now + self.delay
                    return
                timeout = ready_at - now if now < ready_at else None
                self._cond.wait(timeout)

    def defer(self, host: str, seconds: float) -> None:
        """Hold off the next request to ``host`` for at least ``seconds``."""
        with self._cond:
            self._next_start[host] = max(self._next_start.get(host, 0.0), time.monotonic() + seconds)

    def release(self, host: str) -> None:
        with self._cond:
            # spacing also counts from completion, so the origin sees the gap too
            self._next_start[host] = max(self._next_start.get(host, 0.0), time.monotonic() + self.delay)
            self._active[host] -= 1
            self._cond.notify_all()


def _classify_transport_error(exc: httpx.TransportError) -> FailureKind:
    if isinstance(exc, httpx.TimeoutException):
        return FailureKind.TIMEOUT
    text = str(exc).lower()
    if isinstance(exc, httpx.ConnectError) and any(
        s in text for s in ("name or service not known", "nodename nor servname", "getaddrinfo", "name resolution",
                            "no address associated")
    ):
        return FailureKind.DNS_FAILURE
    return FailureKind.CONNECTION_REFUSED


class Prober:
    """Probes URLs with a shared HTTP client and per-host gate."""

    def __init__(self, policy: PolitenessPolicy | None = None, clock: Callable[[], dt.datetime] = _utcnow):
        self.policy = policy or PolitenessPolicy()
        self.clock = clock
        self.gate = HostGate(self.policy.max_per_host, self.policy.per_host_delay)
        self.client = httpx.Client(
            timeout=self.policy.timeout,
            follow_redirects=False,
            proxy=self.policy.proxy,
            trust_env=self.policy.trust_env,
            headers={"User-Agent": self.policy.user_agent},
            limits=httpx.Limits(max_connections=max(self.policy.max_concurrency, 1) * 2),
        )

    def close(self):
        self.client.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _send(self, method: str, url: str) -> tuple[int, str | None]:
        """One request; returns the status and Location header. Bodies are not read."""
        host = urlsplit(url).hostname or ""
        for attempt in range(self.policy.timeout_retries + 1):
            self.gate.acquire(host)
            try:
                with self.client.stream(method, url) as resp:
                    return resp.status_code, resp.headers.get("Location")
            except httpx.TimeoutException:
                # a stalled host gets a pause before it sees us again
                self.gate.defer(host, self.policy.timeout_backoff)
                if attempt == self.policy.timeout_retries:
                    raise
            finally:
                self.gate.release(host)
        raise AssertionError("unreachable")

    def probe(self, url) -> ProbeResult:
        """Dereference one URL; network failures are recorded, never raised."""
        url = str(url)
        current = url
        hops = 0
        try:
            while True:
                status, location = self._send("HEAD", current)
                if status == 405:
                    status, location = self._send("GET", current)
                if status in _REDIRECTS and location:
                    if hops >= self.policy.max_redirects:
                        return ProbeResult(url, None, hops, False, self.clock(), FailureKind.TOO_MANY_REDIRECTS)
                    hops += 1
                    current = urljoin(current, location)
                    continue
                return ProbeResult(url, status, hops, status < 400, self.clock())
        except httpx.TransportError as exc:
            return ProbeResult(url, None, hops, False, self.clock(), _classify_transport_error(exc))
        except httpx.InvalidURL:
            return ProbeResult(url, None, hops, False, self.clock(), FailureKind.DNS_FAILURE)

    def probe_batch(self, urls: Sequence) -> list[ProbeResult]:
        """Probe many URLs; results are aligned with the input order."""
        if not urls:
            return []
        workers = max(1, min(self.policy.max_concurrency, len(urls)))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(self.probe, urls))


def probe(url, policy: PolitenessPolicy | None = None) -> ProbeResult:
    with Prober(policy) as prober:
        return prober.probe(url)


def probe_batch(urls: Sequence, policy: PolitenessPolicy | None = None) -> list[ProbeResult]:
    with Prober(policy) as prober:
        return prober.probe_batch(urls)


def write_probe_results(results, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in results:
            fh.write(json.dumps(r.to_json(), sort_keys=True) + "\n")
