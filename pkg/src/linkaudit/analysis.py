"""Joining liveness and archive evidence into per-citation outcomes."""

from __future__ import annotations

import datetime as dt
import enum
import json
from dataclasses import dataclass
from typing import Iterable

from .corpus import CitationRecord
from .liveness import ProbeResult
from .memento import Memento, TimeMap, format_http_date, parse_http_date

DAY = dt.timedelta(days=1)


class AvailabilityClass(str, enum.Enum):
    LIVE_ARCHIVED = "LiveArchived"
    LIVE_UNARCHIVED = "LiveUnarchived"  # at risk
    GONE_ARCHIVED = "GoneArchived"
    GONE_UNARCHIVED = "GoneUnarchived"  # lost


class IntegrityError(Exception):
    """Evidence was joined to the wrong record."""


@dataclass(frozen=True)
class AuditOutcome:
    record: CitationRecord
    reachable: bool
    archived: bool
    closest: Memento | None
    delta_days: int | None
    availability: AvailabilityClass

    def __post_init__(self):
        if not (self.archived == (self.closest is not None) == (self.delta_days is not None)):
            raise ValueError("archived, closest and delta_days must agree")
        if self.availability is not classify(self.reachable, self.archived):
            raise ValueError("availability class inconsistent with reachable/archived")

    def to_json(self) -> dict:
        d = self.record.to_json()
        d.update(
            reachable=self.reachable,
            archived=self.archived,
            memento_uri=self.closest.uri if self.closest else None,
            memento_datetime=format_http_date(self.closest.archived_at) if self.closest else None,
            delta_days=self.delta_days,
            availability=self.availability.value,
        )
        return d

    @classmethod
    def from_json(cls, d: dict) -> "AuditOutcome":
        closest = None
        if d.get("memento_uri"):
            closest = Memento(parse_http_date(d["memento_datetime"]), d["memento_uri"])
        return cls(
            record=CitationRecord.from_json(d),
            reachable=d["reachable"],
            archived=d["archived"],
            closest=closest,
            delta_days=d["delta_days"],
            availability=AvailabilityClass(d["availability"]),
        )


def publication_instant(date: dt.date) -> dt.datetime:
    return dt.datetime(date.year, date.month, date.day, tzinfo=dt.timezone.utc)


def closest_memento(tm: TimeMap | Iterable[Memento], publication_date: dt.date) -> tuple[Memento, int]:
    """Memento nearest to midnight UTC of ``publication_date``.

    Ties go to the earlier memento. The returned day delta is the floor of
    ``archived_at - publication``, so it is negative for earlier captures.
    """
    mementos = tm.mementos if isinstance(tm, TimeMap) else tuple(tm)
    if not mementos:
        raise ValueError("closest_memento needs at least one memento")
    pub = publication_instant(publication_date)
    best = min(mementos, key=lambda m: (abs(m.archived_at - pub), m.archived_at, m.uri))
    return best, (best.archived_at - pub) // DAY


def classify(reachable: bool, archived: bool) -> AvailabilityClass:
    if reachable:
        return AvailabilityClass.LIVE_ARCHIVED if archived else AvailabilityClass.LIVE_UNARCHIVED
    return AvailabilityClass.GONE_ARCHIVED if archived else AvailabilityClass.GONE_UNARCHIVED


def build_outcome(record: CitationRecord, probe: ProbeResult, tm: TimeMap | None) -> AuditOutcome:
    """Combine a probe and a TimeMap (None when not archived) for one record."""
    if probe.url != record.url:
        raise IntegrityError(f"probe for {probe.url} joined to record {record.url}")
    if tm is not None and tm.original_uri != record.url:
        raise IntegrityError(f"TimeMap for {tm.original_uri} joined to record {record.url}")
    archived = tm is not None and len(tm.mementos) > 0
    closest = delta = None
    if archived:
        closest, delta = closest_memento(tm, record.publication_date)
    return AuditOutcome(record, probe.reachable, archived, closest, delta, classify(probe.reachable, archived))


def write_outcomes(outcomes: Iterable[AuditOutcome], path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for o in outcomes:
            fh.write(json.dumps(o.to_json(), sort_keys=True) + "\n")
            n += 1
    return n


def read_outcomes(path) -> list[AuditOutcome]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                try:
                    out.append(AuditOutcome.from_json(json.loads(line)))
                except (ValueError, KeyError) as exc:
                    raise ValueError(f"{path}:{lineno}: bad outcome record: {exc}") from exc
    return out
