"""
How long after publication were cited pages archived?
=====================================================

Builds outcomes with a long-tailed delay distribution and prints the window
shares, the mean delay and the log-log histogram data.
"""

import datetime as dt
import random

from linkaudit.analysis import AuditOutcome, classify
from linkaudit.corpus import CitationRecord
from linkaudit.memento import Memento
from linkaudit.reporting import (
    Scale,
    delay_histogram,
    group_summaries,
    mean_abs_delta,
    render_report,
    within_window_percent,
)

rng = random.Random(3)
pub = dt.date(2006, 3, 1)
outcomes = []
for i in range(2000):
    reachable = rng.random() < 0.7
    archived = rng.random() < 0.5
    delta = min(int(rng.paretovariate(0.6)), 5000) * rng.choice([-1, 1]) if archived else None
    closest = None
    if archived:
        when = dt.datetime(2006, 3, 1, tzinfo=dt.timezone.utc) + dt.timedelta(days=delta)
        closest = Memento(when, f"http://archive.example/{i}")
    subjects = (rng.choice(["math", "cs", "astro-ph", "physics"]),)
    rec = CitationRecord(f"http://site{i}.org/", f"paper{i // 5}", pub, subjects)
    outcomes.append(AuditOutcome(rec, reachable, archived, closest, delta, classify(reachable, archived)))

print("within a month:", within_window_percent(outcomes, 31), "%")
print("within a year: ", within_window_percent(outcomes, 365), "%")
print("mean |delay|:  ", mean_abs_delta(outcomes), "days")

hist = delay_histogram(outcomes, Scale.LOG_LOG)
for lo, hi, n in hist.bins:
    print(f"[{lo:5d}, {hi:5d}) {'#' * (n // 10)} {n}")

print(render_report(hist, "plot-data"))
print(render_report(group_summaries(outcomes), "csv"))
