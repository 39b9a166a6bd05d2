"""Memento client: TimeMap parsing/serialization, TimeMap fetch, TimeGate lookup.

Header names and link relations follow RFC 7089 (``Accept-Datetime``,
``Memento-Datetime``, ``original``/``timegate``/``timemap``/``memento``).
"""

from __future__ import annotations

import datetime as dt
import logging
import re
import time
from dataclasses import dataclass, field
from typing import Iterator

import httpx

logger = logging.getLogger(__name__)

_DAYS = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")
_MONTHS = ("Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec")
_HTTP_DATE_RE = re.compile(
    r"^(?:Mon|Tue|Wed|Thu|Fri|Sat|Sun), (\d{2}) (Jan|Feb|Mar|Apr|May|Jun|Jul|Aug|Sep|Oct|Nov|Dec) "
    r"(\d{4}) (\d{2}):(\d{2}):(\d{2}) GMT$"
)


class MementoError(Exception):
    pass


class MalformedTimeMap(MementoError, ValueError):
    pass


class ProtocolError(MementoError):
    pass


class FetchError(MementoError):
    """Transient or unexplained failure; distinct from "not archived"."""

    def __init__(self, url: str, attempts: int, last_status: int | None, reason: str = ""):
        self.url = url
        self.attempts = attempts
        self.last_status = last_status
        self.reason = reason
        super().__init__(f"{url}: {reason or 'fetch failed'} after {attempts} attempt(s), last status {last_status}")


def format_http_date(when: dt.datetime) -> str:
    """RFC 1123 date in GMT, independent of locale."""
    when = to_utc(when)
    return (f"{_DAYS[when.weekday()]}, {when.day:02d} {_MONTHS[when.month - 1]} {when.year:04d} "
            f"{when.hour:02d}:{when.minute:02d}:{when.second:02d} GMT")


def parse_http_date(value: str) -> dt.datetime:
    """Parse a GMT RFC 1123 date. Other zones and formats are rejected."""
    m = _HTTP_DATE_RE.match(value.strip())
    if not m:
        raise ValueError(f"not an RFC 1123 GMT date: {value!r}")
    day, mon, year, hh, mm, ss = m.groups()
    return dt.datetime(int(year), _MONTHS.index(mon) + 1, int(day), int(hh), int(mm), int(ss),
                       tzinfo=dt.timezone.utc)


def to_utc(when: dt.datetime) -> dt.datetime:
    if when.tzinfo is None:
        raise ValueError("naive datetime; UTC required")
    return when.astimezone(dt.timezone.utc)


@dataclass(frozen=True, order=True)
class Memento:
    archived_at: dt.datetime
    uri: str

    def __post_init__(self):
        object.__setattr__(self, "archived_at", to_utc(self.archived_at).replace(microsecond=0))
        if not re.match(r"^[A-Za-z][A-Za-z0-9+.\-]*:", self.uri):
            raise ValueError(f"memento URI is not absolute: {self.uri!r}")


@dataclass(frozen=True)
class TimeMap:
    original_uri: str
    mementos: tuple[Memento, ...] = ()
    timegate_uri: str | None = None
    self_uri: str | None = None

    def __post_init__(self):
        # Memento orders by (archived_at, uri)
        object.__setattr__(self, "mementos", tuple(sorted(self.mementos)))


# -- link-format --------------------------------------------------------------


@dataclass
class LinkEntry:
    uri: str
    params: dict[str, str] = field(default_factory=dict)

    @property
    def rels(self) -> list[str]:
        return self.params.get("rel", "").lower().split()


def _iter_links(text: str) -> Iterator[LinkEntry]:
    """Tokenize a link-format document: ``<uri>; k="v"; k=v, <uri>...``."""
    i, n = 0, len(text)
    while True:
        while i < n and text[i] in " \t\r\n,":
            i += 1
        if i >= n:
            return
        if text[i] != "<":
            raise MalformedTimeMap(f"expected '<' at offset {i}")
        end = text.find(">", i + 1)
        if end == -1:
            raise MalformedTimeMap(f"unterminated URI starting at offset {i}")
        entry = LinkEntry(text[i + 1:end].strip())
        i = end + 1
        while True:
            while i < n and text[i] in " \t\r\n":
                i += 1
            if i >= n or text[i] == ",":
                break
            if text[i] != ";":
                raise MalformedTimeMap(f"expected ';' or ',' at offset {i}")
            i += 1
            while i < n and text[i] in " \t\r\n":
                i += 1
            start = i
            while i < n and text[i] not in "=;, \t\r\n":
                i += 1
            name = text[start:i].lower()
            if not name:
                raise MalformedTimeMap(f"empty parameter name at offset {start}")
            while i < n and text[i] in " \t\r\n":
                i += 1
            value = ""
            if i < n and text[i] == "=":
                i += 1
                while i < n and text[i] in " \t\r\n":
                    i += 1
                if i < n and text[i] == '"':
                    close = text.find('"', i + 1)
                    if close == -1:
                        raise MalformedTimeMap(f"unterminated quoted string at offset {i}")
                    value = text[i + 1:close]
                    i = close + 1
                else:
                    start = i
                    while i < n and text[i] not in ";,":
                        i += 1
                    value = text[start:i].strip()
            entry.params.setdefault(name, value)
        yield entry


def parse_timemap(body: str | bytes) -> TimeMap:
    """Parse a link-format TimeMap.

    Memento entries without a usable ``datetime`` are skipped with a warning;
    a document without exactly one ``original`` link raises MalformedTimeMap.
    """
    if isinstance(body, (bytes, bytearray)):
        try:
            body = bytes(body).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedTimeMap(f"body is not UTF-8: {exc}") from exc
    original = timegate = self_uri = None
    originals = 0
    mementos = []
    for entry in _iter_links(body):
        rels = entry.rels
        if "original" in rels:
            originals += 1
            original = entry.uri
        if "timegate" in rels:
            timegate = entry.uri
        if "self" in rels:
            self_uri = entry.uri
        if "memento" in rels:
            stamp = entry.params.get("datetime")
            if stamp is None:
                logger.warning("memento %s has no datetime; skipped", entry.uri)
                continue
            try:
                mementos.append(Memento(parse_http_date(stamp), entry.uri))
            except ValueError as exc:
                logger.warning("memento %s skipped: %s", entry.uri, exc)
    if originals != 1:
        raise MalformedTimeMap(f"expected exactly one original link, found {originals}")
    return TimeMap(original, tuple(mementos), timegate, self_uri)


def _check_uri(uri: str) -> str:
    if not uri or any(c in uri for c in "<>") or any(c.isspace() for c in uri):
        raise ValueError(f"URI cannot be written in link-format: {uri!r}")
    return uri


def serialize_timemap(tm: TimeMap) -> str:
    lines = [f'<{_check_uri(tm.original_uri)}>; rel="original"']
    if tm.timegate_uri:
        lines.append(f'<{_check_uri(tm.timegate_uri)}>; rel="timegate"')
    if tm.self_uri:
        lines.append(f'<{_check_uri(tm.self_uri)}>; rel="self"; type="application/link-format"')
    for m in tm.mementos:
        lines.append(f'<{_check_uri(m.uri)}>; rel="memento"; datetime="{format_http_date(m.archived_at)}"')
    return ",\n".join(lines) + "\n"


# -- network ------------------------------------------------------------------


@dataclass
class MementoConfig:
    endpoint: str = "http://localhost:1208"
    timemap_template: str = "{endpoint}/timemap/link/{url}"
    timegate_template: str = "{endpoint}/timegate/{url}"
    attempts: int = 3
    backoff: float = 1.0
    deadline: float = 30.0
    timeout: float = 15.0
    user_agent: str = "linkaudit/0.1"
    trust_env: bool = True

    def timemap_url(self, url) -> str:
        return self.timemap_template.format(endpoint=self.endpoint.rstrip("/"), url=url)

    def timegate_url(self, url) -> str:
        return self.timegate_template.format(endpoint=self.endpoint.rstrip("/"), url=url)

    def client(self) -> httpx.Client:
        return httpx.Client(timeout=self.timeout, trust_env=self.trust_env,
                            headers={"User-Agent": self.user_agent})


def fetch_timemap(url, config: MementoConfig | None = None, client: httpx.Client | None = None,
                  sleep=time.sleep) -> TimeMap | None:
    """Retrieve the TimeMap of ``url``.

    Returns None when the aggregator answers 404 (not archived). Timeouts,
    connection failures and other statuses are retried with exponential
    backoff; when the budget runs out FetchError is raised.
    """
    config = config or MementoConfig()
    own = client is None
    client = client or config.client()
    target = config.timemap_url(url)
    started = time.monotonic()
    last_status = None
    reason = ""
    attempt = 0
    try:
        while attempt < config.attempts:
            attempt += 1
            try:
                resp = client.get(target)
            except httpx.TimeoutException as exc:
                reason = f"timeout: {exc.__class__.__name__}"
            except httpx.TransportError as exc:
                reason = f"transport: {exc.__class__.__name__}: {exc}"
            else:
                last_status = resp.status_code
                if resp.status_code == 404:
                    return None
                if resp.status_code == 200:
                    try:
                        return parse_timemap(resp.content)
                    except MalformedTimeMap as exc:
                        raise FetchError(str(url), attempt, 200, f"malformed TimeMap: {exc}") from exc
                reason = f"status {resp.status_code}"
            delay = config.backoff * 2 ** (attempt - 1)
            if attempt >= config.attempts or time.monotonic() - started + delay > config.deadline:
                break
            sleep(delay)
    finally:
        if own:
            client.close()
    raise FetchError(str(url), attempt, last_status, reason)


def timegate_resolve(url, desired: dt.datetime, config: MementoConfig | None = None,
                     client: httpx.Client | None = None) -> Memento | None:
    """Ask a TimeGate for the memento closest to ``desired``.

    Sends ``Accept-Datetime``, follows the redirect to the memento and reads
    its ``Memento-Datetime``. Returns None when the TimeGate has no memento.
    """
    config = config or MementoConfig()
    own = client is None
    client = client or config.client()
    headers = {"Accept-Datetime": format_http_date(desired)}
    try:
        try:
            resp = client.get(config.timegate_url(url), headers=headers, follow_redirects=True)
        except httpx.TransportError as exc:
            raise FetchError(str(url), 1, None, f"{exc.__class__.__name__}: {exc}") from exc
        stamp = resp.headers.get("Memento-Datetime")
        if stamp is None:
            if resp.status_code >= 500:
                raise FetchError(str(url), 1, resp.status_code, "TimeGate error")
            if resp.history and resp.status_code < 400:
                raise ProtocolError(f"memento {resp.url} carries no Memento-Datetime header")
            return None
        try:
            when = parse_http_date(stamp)
        except ValueError as exc:
            raise ProtocolError(f"bad Memento-Datetime {stamp!r}") from exc
        return Memento(when, str(resp.url))
    finally:
        if own:
            client.close()
