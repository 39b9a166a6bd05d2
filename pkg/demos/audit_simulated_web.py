"""
Auditing against a simulated web and archive
============================================

The simulator plays both the origin servers (as an HTTP proxy) and a Memento
aggregator, so a whole audit runs offline and can be checked against the
scenario's own ground truth.
"""

import datetime as dt
import random

from linkaudit import archive_sim
from linkaudit.audit import run_audit
from linkaudit.corpus import CitationRecord
from linkaudit.liveness import PolitenessPolicy
from linkaudit.memento import MementoConfig
from linkaudit.reporting import build_report, render_report

scenario = archive_sim.generate_scenario(300, seed=42)
rng = random.Random(0)
records = [CitationRecord(url, f"paper{i % 40}", dt.date(2000, 1, 1) + dt.timedelta(days=rng.randrange(4000)), ("cs",))
           for i, url in enumerate(archive_sim.citable_urls(scenario))]

with archive_sim.serve(scenario, hang_seconds=2.0) as sim:
    # polite: one request at a time per host, short timeouts for the demo
    policy = PolitenessPolicy(max_concurrency=8, max_per_host=1, per_host_delay=0.0, timeout=0.5,
                              timeout_backoff=0.2, proxy=sim.base_url, trust_env=False)
    config = MementoConfig(endpoint=sim.base_url, backoff=0.05, timeout=1.0, trust_env=False)
    result = run_audit(records, policy, config)
    truth = archive_sim.ground_truth(scenario, records, sim.base_url)
    print("outcomes:", len(result.outcomes), "mismatches with ground truth:",
          sum(a != b for a, b in zip(result.outcomes, truth)))
    print("busiest host ever saw", sim.stats.origin_high_water(), "concurrent request(s)")

report = build_report(result.outcomes)
print(render_report(report.quadrant, "csv"))
print("available:", report.quadrant.available_percent, "%")
print("archived within 31 days:", report.within_month_percent, "%")
