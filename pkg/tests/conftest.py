import numpy as np
import pytest

from embernet.ingest import ContactEvent, EventTable, Kind, build_underlying_graph


def ev(source, target, ts, kind=Kind.UNKNOWN, status=None):
    return ContactEvent(source, target, int(ts), kind, status)


def table_of(pairs_ts):
    """EventTable from (source, target, ts) tuples."""
    return EventTable.from_events(ev(s, t, ts) for s, t, ts in pairs_ts)


def graph_of(pairs_ts, t0=None, horizon=None):
    return build_underlying_graph(table_of(pairs_ts), t0, horizon)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_stream(rng, n_events=2000, n_users=200, t_max=10_000):
    """Unstructured random event stream (may contain parallel contacts)."""
    src = rng.integers(0, n_users, n_events)
    dst = (src + 1 + rng.integers(0, n_users - 1, n_events)) % n_users
    ts = np.sort(rng.integers(0, t_max, n_events))
    return [(f"u{s}", f"u{d}", int(t)) for s, d, t in zip(src, dst, ts)]
