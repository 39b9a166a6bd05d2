import datetime as dt

import pytest

from linkaudit import archive_sim
from linkaudit.liveness import PolitenessPolicy
from linkaudit.memento import MementoConfig

UTC = dt.timezone.utc


def utc(*args):
    return dt.datetime(*args, tzinfo=UTC)


@pytest.fixture
def serve_scenario():
    """Start simulators for the test; all are stopped afterwards."""
    handles = []

    def start(resources, hang_seconds=3.0):
        scenario = resources if isinstance(resources, archive_sim.Scenario) else archive_sim.Scenario(list(resources))
        handle = archive_sim.serve(scenario, hang_seconds=hang_seconds)
        handles.append(handle)
        return handle

    yield start
    for h in handles:
        h.stop()


def fast_policy(handle, **overrides):
    opts = dict(max_concurrency=8, max_per_host=1, per_host_delay=0.0, timeout=0.5,
                timeout_backoff=0.2, proxy=handle.base_url, trust_env=False)
    opts.update(overrides)
    return PolitenessPolicy(**opts)


def fast_memento(handle, **overrides):
    opts = dict(endpoint=handle.base_url, backoff=0.01, timeout=0.5, deadline=5.0, trust_env=False)
    opts.update(overrides)
    return MementoConfig(**opts)
