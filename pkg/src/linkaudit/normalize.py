"""URL normalization and filtering for extracted citation links.

The pipeline applies seven rules in a fixed order and stops at the first
rule that rejects the candidate:

1. ASCII only; U+223C (tilde operator) is mapped to ``~`` first.
2. ``http://`` is prepended when no scheme is present.
3. A trailing ``/`` path is added when the URL has no path.
4. The top-level domain must be in the known TLD set.
5. Default ports are removed; non-numeric ports are rejected.
6. The scheme and host are lowercased.
7. Host/URL blacklist.

Structural problems found while splitting the URL (empty host, whitespace,
user info, unsupported scheme) are reported as ``Malformed`` and sit between
rules 3 and 4 in the ordering.
"""

from __future__ import annotations

import enum
import ipaddress
import logging
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable

logger = logging.getLogger(__name__)

TILDE_OPERATOR = "∼"
DEFAULT_PORTS = {"http": 80, "https": 443}

_SCHEME_RE = re.compile(r"^([A-Za-z][A-Za-z0-9+.\-]*)://")
_HOST_RE = re.compile(r"^[A-Za-z0-9_](?:[A-Za-z0-9_\-]*[A-Za-z0-9_])?(?:\.[A-Za-z0-9_](?:[A-Za-z0-9_\-]*[A-Za-z0-9_])?)*$")
_BAD_CHARS_RE = re.compile(r"[\x00-\x20\x7f]")


class DiscardKind(str, enum.Enum):
    NON_ASCII_IRREDUCIBLE = "NonAsciiIrreducible"
    MALFORMED = "Malformed"
    UNKNOWN_TLD = "UnknownTld"
    NON_NUMERIC_PORT = "NonNumericPort"
    BLACKLISTED = "Blacklisted"


# Position of each discard kind in the rule order.
RULE_ORDER = {
    DiscardKind.NON_ASCII_IRREDUCIBLE: 1,
    DiscardKind.MALFORMED: 3,
    DiscardKind.UNKNOWN_TLD: 4,
    DiscardKind.NON_NUMERIC_PORT: 5,
    DiscardKind.BLACKLISTED: 7,
}


@dataclass(frozen=True)
class DiscardReason:
    kind: DiscardKind
    detail: str = ""

    @property
    def rule(self) -> int:
        return RULE_ORDER[self.kind]


@dataclass(frozen=True)
class NormalizedUrl:
    scheme: str
    host: str
    port: int | None
    path: str
    query: str | None = None

    def __str__(self) -> str:
        netloc = self.host if self.port is None else f"{self.host}:{self.port}"
        url = f"{self.scheme}://{netloc}{self.path}"
        if self.query:
            url += "?" + self.query
        return url


@dataclass(frozen=True)
class Blacklist:
    """Host suffix patterns and URL prefix patterns."""

    hosts: frozenset[str] = frozenset()
    url_prefixes: tuple[str, ...] = ()

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "Blacklist":
        hosts: set[str] = set()
        prefixes: list[str] = []
        for lineno, raw in enumerate(lines, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            kind, sep, value = line.partition(":")
            value = value.strip()
            if not sep or not value or kind not in ("host", "url"):
                raise ValueError(f"blacklist line {lineno}: expected 'host:' or 'url:' pattern, got {raw.strip()!r}")
            if kind == "host":
                hosts.add(value.lower().rstrip("."))
            else:
                prefixes.append(value)
        return cls(frozenset(hosts), tuple(prefixes))


def _read_lines(path: str | Path | None, bundled: str) -> list[str]:
    if path is None:
        text = resources.files("linkaudit.data").joinpath(bundled).read_text(encoding="utf-8")
    else:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise OSError(f"cannot read {path}: {exc}") from exc
    return text.splitlines()


def load_tld_set(path: str | Path | None = None) -> frozenset[str]:
    """Load a TLD list (one per line, ``#`` comments). ``None`` loads the bundled snapshot."""
    tlds = set()
    for line in _read_lines(path, "tlds.txt"):
        line = line.split("#", 1)[0].strip().lower().lstrip(".")
        if line:
            tlds.add(line)
    if not tlds:
        logger.warning("TLD set loaded from %s is empty; every URL will be discarded as UnknownTld", path)
    return frozenset(tlds)


def load_blacklist(path: str | Path | None = None) -> Blacklist:
    """Load a blacklist file. ``None`` loads the bundled default."""
    return Blacklist.from_lines(_read_lines(path, "blacklist.txt"))


def is_blacklisted(url: NormalizedUrl, blacklist: Blacklist) -> tuple[bool, str | None]:
    """Return ``(matched, pattern)``; host rules match exactly or by domain suffix."""
    host = url.host
    labels = host.split(".")
    for i in range(len(labels)):
        candidate = ".".join(labels[i:])
        if candidate in blacklist.hosts:
            return True, "host:" + candidate
    rendered = str(url)
    for prefix in blacklist.url_prefixes:
        if rendered.startswith(prefix):
            return True, "url:" + prefix
    return False, None


def _is_ip_literal(host: str) -> bool:
    try:
        ipaddress.IPv4Address(host)
    except ValueError:
        return False
    return True


def normalize(raw: str, tld_set: frozenset[str] | set[str], blacklist: Blacklist) -> NormalizedUrl | DiscardReason:
    """Normalize one candidate link, or return the reason it was discarded."""
    s = raw.strip()

    # rule 1
    s = s.replace(TILDE_OPERATOR, "~")
    if not s.isascii():
        bad = next(ch for ch in s if not ch.isascii())
        return DiscardReason(DiscardKind.NON_ASCII_IRREDUCIBLE, f"U+{ord(bad):04X}")

    # rule 2
    m = _SCHEME_RE.match(s)
    if m:
        scheme = m.group(1).lower()
        rest = s[m.end():]
    else:
        scheme = "http"
        rest = s

    # fragments are never part of the normalized form
    rest = rest.split("#", 1)[0]

    # rule 3, plus structural split
    cut = len(rest)
    for ch in "/?":
        i = rest.find(ch)
        if i != -1:
            cut = min(cut, i)
    netloc, tail = rest[:cut], rest[cut:]
    path, _, query = tail.partition("?")
    if not path:
        path = "/"

    if scheme not in DEFAULT_PORTS:
        return DiscardReason(DiscardKind.MALFORMED, f"unsupported scheme {scheme!r}")
    if _BAD_CHARS_RE.search(rest):
        return DiscardReason(DiscardKind.MALFORMED, "whitespace or control character")
    if "@" in netloc:
        return DiscardReason(DiscardKind.MALFORMED, "user info in authority")
    host, sep, port_text = netloc.partition(":")
    if host.endswith("."):
        host = host[:-1]
    if not host:
        return DiscardReason(DiscardKind.MALFORMED, "empty host")
    if not _HOST_RE.match(host):
        return DiscardReason(DiscardKind.MALFORMED, f"invalid host {host!r}")
    if port_text.isdigit() and int(port_text) > 65535:
        return DiscardReason(DiscardKind.MALFORMED, f"port {port_text} out of range")

    # rule 4
    lower_host = host.lower()
    if not _is_ip_literal(lower_host):
        tld = lower_host.rsplit(".", 1)[-1]
        if tld not in tld_set:
            return DiscardReason(DiscardKind.UNKNOWN_TLD, tld)

    # rule 5
    port: int | None = None
    if sep and port_text:
        if not port_text.isdigit():
            return DiscardReason(DiscardKind.NON_NUMERIC_PORT, port_text)
        port = int(port_text)
        if port == DEFAULT_PORTS[scheme]:
            port = None

    # rule 6
    url = NormalizedUrl(scheme, lower_host, port, path, query or None)

    # rule 7
    matched, pattern = is_blacklisted(url, blacklist)
    if matched:
        return DiscardReason(DiscardKind.BLACKLISTED, pattern or "")
    return url


class Normalizer:
    """Bundles a TLD set and blacklist so callers can normalize many links."""

    def __init__(self, tld_set=None, blacklist=None):
        self.tld_set = load_tld_set() if tld_set is None else frozenset(tld_set)
        self.blacklist = load_blacklist() if blacklist is None else blacklist

    def __call__(self, raw: str) -> NormalizedUrl | DiscardReason:
        return normalize(raw, self.tld_set, self.blacklist)
