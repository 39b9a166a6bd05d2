import datetime as dt
import json
import math
import random

import pytest

from linkaudit.analysis import AuditOutcome, AvailabilityClass, classify
from linkaudit.corpus import CitationRecord
from linkaudit.memento import Memento
from linkaudit.reporting import (
    EmptyDataset,
    Scale,
    build_report,
    delay_histogram,
    group_summaries,
    mean_abs_delta,
    percent,
    quadrant_percentages,
    render_report,
    within_window_percent,
)

PUB = dt.date(2005, 1, 1)
LA, LU, GA, GU = AvailabilityClass


def outcome(cls=LA, delta=0, subjects=("cs",), url="http://a.org/", paper="p"):
    archived = cls in (LA, GA)
    reachable = cls in (LA, LU)
    rec = CitationRecord(url, paper, PUB, tuple(subjects))
    closest = None
    if archived:
        when = dt.datetime(2005, 1, 1, tzinfo=dt.timezone.utc) + dt.timedelta(days=delta)
        closest = Memento(when, f"http://arch/{delta}")
    return AuditOutcome(rec, reachable, archived, closest, delta if archived else None, classify(reachable, archived))


def mix(la, lu, ga, gu, **kw):
    return [outcome(LA, **kw)] * la + [outcome(LU, **kw)] * lu + [outcome(GA, **kw)] * ga + [outcome(GU, **kw)] * gu


def random_outcomes(rng, n, subjects=("math", "cs", "astro-ph")):
    out = []
    for i in range(n):
        cls = rng.choice(list(AvailabilityClass))
        subj = tuple(rng.sample(subjects, rng.randint(1, len(subjects))))
        out.append(outcome(cls, rng.randint(-3000, 3000), subj, f"http://r{i}.org/"))
    return out


def naive_percent(part, whole):
    # independent of the Decimal implementation: integer half-up on tenths
    tenths, rem = divmod(part * 1000, whole)
    if 2 * rem >= whole:
        tenths += 1
    return tenths / 10


def test_percent_rounds_half_up():
    assert percent(1, 8) == 12.5
    assert percent(1, 16) == 6.3  # 6.25
    assert percent(1, 3) == 33.3
    assert percent(2, 3) == 66.7
    with pytest.raises(EmptyDataset):
        percent(1, 0)


class TestQuadrant:
    def test_unt_shape(self):
        q = quadrant_percentages(mix(27, 18, 27, 28))
        assert q.total == 100
        assert q.available_percent == 72.0
        assert q.percent_of(GU) == 28.0
        assert q.archived_percent == 54.0

    def test_all_live_archived(self):
        q = quadrant_percentages(mix(5, 0, 0, 0))
        assert q.percents == {"LiveArchived": 100.0, "LiveUnarchived": 0.0, "GoneArchived": 0.0, "GoneUnarchived": 0.0}
        assert q.live_unarchived_of_live_percent == 0.0

    def test_no_live(self):
        assert quadrant_percentages(mix(0, 0, 1, 1)).live_unarchived_of_live_percent is None

    def test_empty(self):
        with pytest.raises(EmptyDataset):
            quadrant_percentages([])

    def test_recount_oracle(self):
        rng = random.Random(11)
        outcomes = random_outcomes(rng, 1000)
        q = quadrant_percentages(outcomes)
        for cls in AvailabilityClass:
            n = len([o for o in outcomes if o.availability == cls])
            assert q.count(cls) == n
            assert q.percent_of(cls) == naive_percent(n, 1000)
        assert sum(q.counts.values()) == q.total
        gone = len([o for o in outcomes if not o.reachable and not o.archived])
        assert q.available_percent == naive_percent(1000 - gone, 1000)
        rng.shuffle(outcomes)
        assert quadrant_percentages(outcomes) == q


class TestWindows:
    FIXTURE = [outcome(LA, d) for d in (5, -20, 40, -400)] + [outcome(LU)]

    def test_examples(self):
        assert within_window_percent(self.FIXTURE, 31) == 50.0
        assert within_window_percent(self.FIXTURE, 365) == 75.0

    def test_bad_window(self):
        with pytest.raises(ValueError):
            within_window_percent(self.FIXTURE, 0)

    def test_no_archived(self):
        with pytest.raises(EmptyDataset):
            within_window_percent([outcome(LU)], 31)
        with pytest.raises(EmptyDataset):
            mean_abs_delta([outcome(GU)])

    def test_mean(self):
        assert mean_abs_delta([outcome(LA, -10), outcome(GA, 30), outcome(GU)]) == 20.0
        assert mean_abs_delta([outcome(LA, 224)]) == 224.0

    def test_random_properties(self):
        rng = random.Random(5)
        for _ in range(50):
            outcomes = random_outcomes(rng, rng.randint(5, 80))
            deltas = [abs(o.delta_days) for o in outcomes if o.archived]
            if not deltas:
                continue
            assert within_window_percent(outcomes, 31) <= within_window_percent(outcomes, 365)
            assert within_window_percent(outcomes, 31) == naive_percent(sum(d <= 31 for d in deltas), len(deltas))
            assert math.isclose(mean_abs_delta(outcomes), round(sum(deltas) / len(deltas) + 1e-9, 1))


class TestGroups:
    def test_totals(self):
        groups = group_summaries([outcome(subjects=["math"]), outcome(subjects=["math"]), outcome(subjects=["cs"])])
        assert [(g.group_key, g.quadrant.total) for g in groups] == [("math", 2), ("cs", 1)]

    def test_multi_subject_counts_in_each(self):
        groups = group_summaries([outcome(subjects=["math", "cs"])])
        assert sorted(g.group_key for g in groups) == ["cs", "math"]

    def test_filter_then_recompute(self):
        rng = random.Random(9)
        outcomes = random_outcomes(rng, 400)
        for g in group_summaries(outcomes):
            subset = [o for o in outcomes if g.group_key in o.record.subjects]
            assert g.quadrant == quadrant_percentages(subset)
            assert g.archived_within_month_percent <= g.archived_within_year_percent <= g.quadrant.archived_percent
            deltas = [abs(o.delta_days) for o in subset if o.archived]
            assert g.mean_abs_delta_days == (mean_abs_delta(subset) if deltas else None)

    def test_single_subject_totals_sum(self):
        rng = random.Random(2)
        outcomes = [outcome(rng.choice(list(AvailabilityClass)), 1, [rng.choice("abc")]) for _ in range(100)]
        assert sum(g.quadrant.total for g in group_summaries(outcomes)) == 100


class TestHistogram:
    def test_linear(self):
        h = delay_histogram([outcome(LA, d) for d in (0, 1, -1, 3)], Scale.LINEAR_DAYS)
        assert [(lo, n) for lo, _, n in h.bins if n] == [(0, 1), (1, 2), (3, 1)]
        assert [lo for lo, _, _ in h.bins] == [0, 1, 2, 3]

    def test_log(self):
        h = delay_histogram([outcome(GA, d) for d in (1, 2, 3, 5, 9)], "loglog")
        assert h.bins == ((1, 2, 1), (2, 4, 2), (4, 8, 1), (8, 16, 1))

    def test_zero_in_first_bin(self):
        h = delay_histogram([outcome(LA, 0), outcome(LA, 1)])
        assert h.bins == ((1, 2, 2),)

    def test_empty(self):
        with pytest.raises(EmptyDataset):
            delay_histogram([outcome(LU)])

    def test_random_invariants(self):
        rng = random.Random(4)
        for scale in Scale:
            outcomes = random_outcomes(rng, 300)
            h = delay_histogram(outcomes, scale)
            assert h.total == sum(o.archived for o in outcomes)
            assert all(a[1] == b[0] for a, b in zip(h.bins, h.bins[1:]))
            for d in (abs(o.delta_days) for o in outcomes if o.archived):
                d = max(d, 1) if scale is Scale.LOG_LOG else d
                assert sum(lo <= d < hi for lo, hi, _ in h.bins) == 1


class TestRender:
    def test_quadrant_csv(self):
        text = render_report(quadrant_percentages(mix(27, 18, 27, 28)), "csv")
        assert text.splitlines() == [
            "class,count,percent", "LiveArchived,27,27.0", "LiveUnarchived,18,18.0",
            "GoneArchived,27,27.0", "GoneUnarchived,28,28.0",
        ]

    def test_deterministic(self):
        outcomes = random_outcomes(random.Random(1), 200)
        report = build_report(outcomes, "subject")
        for fmt in ("csv", "json", "plot-data"):
            assert render_report(report, fmt) == render_report(build_report(list(outcomes), "subject"), fmt)

    def test_json_matches_csv(self):
        report = build_report(mix(27, 18, 27, 28, delta=10), "subject")
        data = json.loads(render_report(report, "json"))
        rows = render_report(report, "csv").splitlines()
        assert data["quadrant"]["available_percent"] == 72.0
        assert "quadrant,all,available_percent,72.0" in rows
        assert data["groups"][0]["group_key"] == "cs"

    def test_plot_data(self):
        h = delay_histogram([outcome(GA, d) for d in (1, 2, 3, 5, 9, 9)])
        lines = render_report(h, "plot-data").splitlines()
        assert lines[0].startswith("#")
        pairs = [tuple(map(float, line.split())) for line in lines[1:]]
        expected = [(0.0, 0.0), (math.log10(2), math.log10(2)), (math.log10(4), 0.0), (math.log10(8), math.log10(2))]
        assert len(pairs) == len(expected)
        for got, want in zip(pairs, expected):
            assert got == pytest.approx(want, abs=1e-6)

    def test_plot_data_linear(self):
        h = delay_histogram([outcome(GA, d) for d in (0, 2, 2)], Scale.LINEAR_DAYS)
        assert render_report(h, "plot-data").splitlines()[1:] == ["0 1", "2 2"]

    def test_unknown_format(self):
        with pytest.raises(ValueError):
            render_report(quadrant_percentages(mix(1, 0, 0, 0)), "xml")

    def test_report_without_archived(self):
        report = build_report(mix(0, 3, 0, 1))
        assert report.histogram is None and report.mean_abs_delta_days is None
        assert "windows,all,mean_abs_delta_days," in render_report(report, "csv").splitlines()
        with pytest.raises(ValueError):
            render_report(report, "plot-data")
