"""Aggregate statistics over audit outcomes and their rendered reports."""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import asdict, dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Callable, Iterable, Sequence

from .analysis import AuditOutcome, AvailabilityClass

MONTH_DAYS = 31
YEAR_DAYS = 365

CLASSES = tuple(AvailabilityClass)


class EmptyDataset(ValueError):
    pass


def percent(part: int, whole: int) -> float:
    """``100*part/whole`` rounded half-up to one decimal."""
    if whole == 0:
        raise EmptyDataset("percentage of an empty set")
    value = (Decimal(part) * 100 / Decimal(whole)).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP)
    return float(value)


@dataclass(frozen=True)
class QuadrantSummary:
    total: int
    counts: dict[str, int]
    percents: dict[str, float]
    available_percent: float
    live_percent: float
    archived_percent: float
    # share of live resources that have no archived copy
    live_unarchived_of_live_percent: float | None

    def count(self, cls: AvailabilityClass) -> int:
        return self.counts[cls.value]

    def percent_of(self, cls: AvailabilityClass) -> float:
        return self.percents[cls.value]


def quadrant_percentages(outcomes: Iterable[AuditOutcome]) -> QuadrantSummary:
    counts = {c.value: 0 for c in CLASSES}
    for o in outcomes:
        counts[o.availability.value] += 1
    total = sum(counts.values())
    if total == 0:
        raise EmptyDataset("no outcomes")
    la, lu, ga, gu = (counts[c.value] for c in CLASSES)
    live = la + lu
    return QuadrantSummary(
        total=total,
        counts=counts,
        percents={k: percent(v, total) for k, v in counts.items()},
        available_percent=percent(total - gu, total),
        live_percent=percent(live, total),
        archived_percent=percent(la + ga, total),
        live_unarchived_of_live_percent=percent(lu, live) if live else None,
    )


def _archived_deltas(outcomes: Iterable[AuditOutcome]) -> list[int]:
    return [abs(o.delta_days) for o in outcomes if o.archived]


def within_window_percent(outcomes: Iterable[AuditOutcome], window_days: int) -> float:
    """Share of archived outcomes whose closest memento is within ``window_days``."""
    if window_days <= 0:
        raise ValueError("window_days must be positive")
    deltas = _archived_deltas(outcomes)
    if not deltas:
        raise EmptyDataset("no archived outcomes")
    return percent(sum(d <= window_days for d in deltas), len(deltas))


def mean_abs_delta(outcomes: Iterable[AuditOutcome]) -> float:
    deltas = _archived_deltas(outcomes)
    if not deltas:
        raise EmptyDataset("no archived outcomes")
    value = (Decimal(sum(deltas)) / len(deltas)).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP)
    return float(value)


@dataclass(frozen=True)
class GroupSummary:
    group_key: str
    quadrant: QuadrantSummary
    # window shares here are of the whole group, not of its archived part
    archived_within_month_percent: float
    archived_within_year_percent: float
    mean_abs_delta_days: float | None


def group_summaries(outcomes: Iterable[AuditOutcome],
                    key_fn: Callable[[AuditOutcome], Iterable[str]] | None = None,
                    month_days: int = MONTH_DAYS, year_days: int = YEAR_DAYS) -> list[GroupSummary]:
    """Summaries per group key, largest group first.

    The default key is the record's subject list, so an outcome with several
    subjects is counted once in each of them.
    """
    key_fn = key_fn or (lambda o: o.record.subjects)
    groups: dict[str, list[AuditOutcome]] = {}
    for o in outcomes:
        for key in dict.fromkeys(key_fn(o)):
            groups.setdefault(key, []).append(o)
    out = []
    for key, members in groups.items():
        deltas = _archived_deltas(members)
        out.append(GroupSummary(
            group_key=key,
            quadrant=quadrant_percentages(members),
            archived_within_month_percent=percent(sum(d <= month_days for d in deltas), len(members)),
            archived_within_year_percent=percent(sum(d <= year_days for d in deltas), len(members)),
            mean_abs_delta_days=mean_abs_delta(members) if deltas else None,
        ))
    out.sort(key=lambda g: (-g.quadrant.total, g.group_key))
    return out


class Scale(str, enum.Enum):
    LINEAR_DAYS = "linear"
    LOG_LOG = "loglog"


@dataclass(frozen=True)
class DelayHistogram:
    bins: tuple[tuple[int, int, int], ...]  # (lower, upper exclusive, count)
    scale: Scale

    @property
    def total(self) -> int:
        return sum(b[2] for b in self.bins)


def delay_histogram(outcomes: Iterable[AuditOutcome], scale: Scale | str = Scale.LOG_LOG) -> DelayHistogram:
    """Histogram of ``|delta_days|`` over archived outcomes.

    Linear bins are one day wide. Log bins are ``[2**k, 2**(k+1))``; a zero
    delay is counted in the first bin ``[1, 2)``. Empty bins between the
    first and last occupied bin are kept so the bins stay contiguous.
    """
    scale = Scale(scale)
    deltas = _archived_deltas(outcomes)
    if not deltas:
        raise EmptyDataset("no archived outcomes")
    if scale is Scale.LINEAR_DAYS:
        counts: dict[int, int] = {}
        for d in deltas:
            counts[d] = counts.get(d, 0) + 1
        lo, hi = min(counts), max(counts)
        bins = tuple((k, k + 1, counts.get(k, 0)) for k in range(lo, hi + 1))
    else:
        counts = {}
        for d in deltas:
            k = max(d, 1).bit_length() - 1
            counts[k] = counts.get(k, 0) + 1
        lo, hi = min(counts), max(counts)
        bins = tuple((2 ** k, 2 ** (k + 1), counts.get(k, 0)) for k in range(lo, hi + 1))
    return DelayHistogram(bins, scale)


# -- full report --------------------------------------------------------------


@dataclass
class AuditReport:
    quadrant: QuadrantSummary
    within_month_percent: float | None
    within_year_percent: float | None
    mean_abs_delta_days: float | None
    histogram: DelayHistogram | None
    groups: list[GroupSummary] = field(default_factory=list)
    month_days: int = MONTH_DAYS
    year_days: int = YEAR_DAYS


def build_report(outcomes: Sequence[AuditOutcome], group_by: str = "none",
                 month_days: int = MONTH_DAYS, year_days: int = YEAR_DAYS) -> AuditReport:
    if group_by not in ("none", "subject"):
        raise ValueError(f"unknown group_by {group_by!r}")
    quadrant = quadrant_percentages(outcomes)
    archived = any(o.archived for o in outcomes)
    return AuditReport(
        quadrant=quadrant,
        within_month_percent=within_window_percent(outcomes, month_days) if archived else None,
        within_year_percent=within_window_percent(outcomes, year_days) if archived else None,
        mean_abs_delta_days=mean_abs_delta(outcomes) if archived else None,
        histogram=delay_histogram(outcomes, Scale.LOG_LOG) if archived else None,
        groups=group_summaries(outcomes, month_days=month_days, year_days=year_days) if group_by == "subject" else [],
        month_days=month_days,
        year_days=year_days,
    )


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.1f}"
    return str(value)


def _quadrant_rows(q: QuadrantSummary, key: str) -> list[tuple[str, str, str, object]]:
    rows = [("quadrant", key, "total", q.total)]
    for c in CLASSES:
        rows.append(("quadrant", key, f"{c.value}_count", q.counts[c.value]))
        rows.append(("quadrant", key, f"{c.value}_percent", q.percents[c.value]))
    rows += [
        ("quadrant", key, "available_percent", q.available_percent),
        ("quadrant", key, "live_percent", q.live_percent),
        ("quadrant", key, "archived_percent", q.archived_percent),
        ("quadrant", key, "live_unarchived_of_live_percent", q.live_unarchived_of_live_percent),
    ]
    return rows


def _report_rows(r: AuditReport) -> list[tuple[str, str, str, object]]:
    rows = _quadrant_rows(r.quadrant, "all")
    rows += [
        ("windows", "all", f"within_{r.month_days}_days_percent", r.within_month_percent),
        ("windows", "all", f"within_{r.year_days}_days_percent", r.within_year_percent),
        ("windows", "all", "mean_abs_delta_days", r.mean_abs_delta_days),
    ]
    if r.histogram is not None:
        for lo, hi, n in r.histogram.bins:
            rows.append(("histogram", f"[{lo},{hi})", "count", n))
    for g in r.groups:
        rows += [(s.replace("quadrant", "group"), k, m, v) for s, k, m, v in _quadrant_rows(g.quadrant, g.group_key)]
        rows += [
            ("group", g.group_key, "archived_within_month_percent", g.archived_within_month_percent),
            ("group", g.group_key, "archived_within_year_percent", g.archived_within_year_percent),
            ("group", g.group_key, "mean_abs_delta_days", g.mean_abs_delta_days),
        ]
    return rows


def _to_plain(obj):
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, dict):
        return {k: _to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    return obj


def _plot_lines(h: DelayHistogram) -> list[str]:
    lines = []
    for lo, _, n in h.bins:
        if n == 0:
            continue
        if h.scale is Scale.LOG_LOG:
            lines.append(f"{math.log10(lo):.6f} {math.log10(n):.6f}")
        else:
            lines.append(f"{lo} {n}")
    return lines


def render_report(obj, fmt: str) -> str:
    """Render a QuadrantSummary, group list, DelayHistogram or AuditReport.

    Formats are ``csv``, ``json`` and ``plot-data``; output is byte-stable for
    equal input.
    """
    if fmt not in ("csv", "json", "plot-data"):
        raise ValueError(f"unknown report format {fmt!r}")

    if fmt == "plot-data":
        hist = obj.histogram if isinstance(obj, AuditReport) else obj
        if not isinstance(hist, DelayHistogram):
            raise ValueError("plot-data needs a delay histogram")
        header = "# log10(delay days) log10(count)" if hist.scale is Scale.LOG_LOG else "# delay_days count"
        return "\n".join([header, *_plot_lines(hist)]) + "\n"

    if fmt == "json":
        if isinstance(obj, list):
            payload = [_to_plain(asdict(g)) for g in obj]
        else:
            payload = _to_plain(asdict(obj))
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if isinstance(obj, QuadrantSummary):
        w.writerow(["class", "count", "percent"])
        for c in CLASSES:
            w.writerow([c.value, obj.counts[c.value], _fmt(obj.percents[c.value])])
    elif isinstance(obj, DelayHistogram):
        w.writerow(["lower_days", "upper_days", "count"])
        w.writerows(obj.bins)
    elif isinstance(obj, list):
        w.writerow(["group", "total", *[c.value for c in CLASSES], "available_percent", "archived_percent",
                    "archived_within_month_percent", "archived_within_year_percent", "mean_abs_delta_days"])
        for g in obj:
            q = g.quadrant
            w.writerow([g.group_key, q.total, *[q.counts[c.value] for c in CLASSES], _fmt(q.available_percent),
                        _fmt(q.archived_percent), _fmt(g.archived_within_month_percent),
                        _fmt(g.archived_within_year_percent), _fmt(g.mean_abs_delta_days)])
    elif isinstance(obj, AuditReport):
        w.writerow(["section", "key", "metric", "value"])
        for row in _report_rows(obj):
            w.writerow([*row[:3], _fmt(row[3])])
    else:
        raise TypeError(f"cannot render {type(obj).__name__}")
    return buf.getvalue()
