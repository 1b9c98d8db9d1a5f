import gzip
import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from embernet.ingest import (ContactEvent, EventTable, Kind,
                             build_underlying_graph, deduplicate,
                             filter_window, load_osf_interactions,
                             parse_contacts, read_events_binary, write_csv,
                             write_events_binary, write_jsonl)

from conftest import ev, table_of


def test_parse_csv_drops_self_loops():
    raw = b"source,target,timestamp,kind\na,b,100,retweet\nb,c,200,reply\na,a,300,quote\n"
    events, stats = parse_contacts(raw, "csv")
    assert len(events) == 2
    assert stats.records_parsed == 2
    assert stats.self_loops_dropped == 1
    assert stats.malformed_lines == 0
    assert events[0] == ContactEvent("a", "b", 100, Kind.RETWEET)
    assert events[1] == ContactEvent("b", "c", 200, Kind.REPLY)


def test_parse_empty_input():
    events, stats = parse_contacts(b"", "csv")
    assert len(events) == 0
    assert stats.records_parsed == 0
    assert stats.malformed_lines == 0
    events, stats = parse_contacts(b"", "jsonl")
    assert len(events) == 0


def test_parse_corrupted_corpus_counts_match_plan(rng):
    # 10,000 lines with exactly 1% corrupted at planted positions
    n = 10_000
    bad = set(rng.choice(n, 100, replace=False).tolist())
    lines = ["source,target,timestamp,kind"]
    for i in range(n):
        if i in bad:
            lines.append("broken-line-without-fields")
        else:
            lines.append(f"u{i % 50},v{i % 37},{1000 + i},retweet")
    events, stats = parse_contacts("\n".join(lines).encode(), "csv")
    assert stats.records_parsed == len(events) == n - 100
    assert stats.malformed_lines == 100


def test_parse_jsonl_and_gzip_autodetect():
    rows = [{"source": "a", "target": "b", "timestamp": 5, "kind": "quote",
             "status_id": "s1"},
            {"source": "b", "target": "a", "timestamp": 6}]
    raw = "\n".join(json.dumps(r) for r in rows).encode()
    events, stats = parse_contacts(raw, "jsonl")
    assert len(events) == 2
    assert events[0].status_id == "s1"
    assert events[1].kind is Kind.UNKNOWN

    gz = gzip.compress(raw)
    events2, _ = parse_contacts(gz, "jsonl")
    assert list(events2) == list(events)


def test_parse_timestamp_coercion():
    raw = (b"source,target,timestamp\n"
           b"a,b,100.9\n"
           b"c,d,2020-02-01T00:00:00+00:00\n"
           b"e,f,not-a-time\n"
           b"g,h,-5\n")
    events, stats = parse_contacts(raw, "csv")
    assert [e.timestamp for e in events] == [100, 1580515200]
    assert stats.malformed_lines == 2


def test_parse_kind_defaults_to_unknown():
    events, _ = parse_contacts(b"source,target,timestamp\na,b,1\n", "csv")
    assert events[0].kind is Kind.UNKNOWN
    events, _ = parse_contacts(b"source,target,timestamp,kind\na,b,1,shout\n", "csv")
    assert events[0].kind is Kind.UNKNOWN


def test_parse_unreadable_stream_is_fatal(tmp_path):
    with pytest.raises(OSError):
        parse_contacts(str(tmp_path / "missing.csv"), "csv")


def test_dedup_collapses_triplicate():
    e = ev("a", "b", 100, Kind.RETWEET)
    out = deduplicate([e, e, e])
    assert list(out) == [e]


def test_dedup_identity_and_idempotence():
    events = [ev("a", "b", 1), ev("b", "c", 2), ev("a", "b", 3)]
    once = deduplicate(events)
    assert list(once) == events
    assert list(deduplicate(once)) == events


def test_dedup_planted_duplicates(rng):
    base = [ev(f"u{i}", f"v{i % 7}", 1000 + i, Kind.REPLY, f"s{i}")
            for i in range(863)]
    dup_positions = rng.choice(863, 137, replace=True)
    events = list(base)
    for p in dup_positions:
        events.insert(int(rng.integers(0, len(events))), base[int(p)])
    assert len(events) == 1000
    out = deduplicate(events)
    assert len(out) == 863
    assert sorted((e.source, e.timestamp) for e in out) == sorted(
        (e.source, e.timestamp) for e in base)


def test_dedup_keeps_distinct_timestamps():
    # same pair, same kind, different times: two real contacts
    events = [ev("a", "b", 1, Kind.RETWEET), ev("a", "b", 2, Kind.RETWEET)]
    assert len(deduplicate(events)) == 2


def test_filter_window_basics():
    events = [ev("a", "b", 50), ev("b", "c", 150), ev("c", "a", 250)]
    kept = filter_window(events, 100, 200)
    assert [e.timestamp for e in kept] == [150]
    assert list(filter_window(events, 0, 1000)) == events
    with pytest.raises(ValueError):
        filter_window(events, 200, 200)


def test_filter_window_matches_bruteforce(rng):
    ts = rng.integers(0, 1000, 500)
    events = [ev(f"u{i % 20}", f"v{i % 30}", t) for i, t in enumerate(ts)]
    kept = filter_window(events, 250, 750)
    oracle = [e for e in events if 250 <= e.timestamp < 750]
    assert list(kept) == oracle


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5),
                          st.integers(0, 100)), max_size=60),
       st.integers(0, 100), st.integers(0, 100), st.integers(0, 100))
def test_filter_window_split_property(raw, a, b, c):
    a, b, c = sorted((a, b, c))
    if a == b:
        b += 1
    if b >= c:
        c = b + 1
    events = [ev(f"u{s}", f"v{d}", t) for s, d, t in raw]
    whole = [(e.source, e.target, e.timestamp)
             for e in filter_window(events, a, c)]
    left = [(e.source, e.target, e.timestamp)
            for e in filter_window(events, a, b)]
    right = [(e.source, e.target, e.timestamp)
             for e in filter_window(events, b, c)]
    assert sorted(whole) == sorted(left + right)


def test_build_graph_basics():
    g = build_underlying_graph([ev("a", "b", 1), ev("b", "c", 2)])
    assert g.vertices == {"a", "b", "c"}
    assert g.n_events == 2
    assert g.n_vertices == 3

    empty = build_underlying_graph([])
    assert empty.n_events == 0 and empty.n_vertices == 0


def test_build_graph_sorts_and_validates():
    g = build_underlying_graph([ev("a", "b", 5), ev("b", "c", 2)], 0, 10)
    assert [e.timestamp for e in g.events] == [2, 5]
    with pytest.raises(ValueError):
        build_underlying_graph([ev("a", "b", 50)], 0, 10)


def test_build_graph_matches_generator_ledger(rng):
    from embernet.synth import RampConfig, SynthConfig, generate

    cfg = SynthConfig(n_users=500, duration=50_000,
                      ramp=RampConfig(30_000, 1.0, 10.0, 2000.0),
                      pa_strength=1.0, n_events=100_000, seed=3)
    events, ledger = generate(cfg)
    g = build_underlying_graph(events, 0, cfg.duration)
    assert g.n_events == ledger.n_events
    active_users = int((ledger.user_contacts > 0).sum())
    assert g.n_vertices == active_users
    assert g.n_vertices <= 2 * g.n_events


def test_vertex_bound_invariant(rng):
    events = [ev(f"u{i}", f"v{i}", i) for i in range(40)]
    g = build_underlying_graph(events)
    assert g.n_vertices <= 2 * g.n_events


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 8), st.integers(0, 8),
                          st.integers(0, 50), st.sampled_from(list(Kind)),
                          st.one_of(st.none(), st.text("ab", min_size=1,
                                                       max_size=2))),
                max_size=40))
def test_csv_round_trip(raw):
    # canonical events only: an empty status_id normalizes to None at parse
    events = [ContactEvent(f"u{s}", f"v{d}", t, k, z)
              for s, d, t, k, z in raw if f"u{s}" != f"v{d}"]
    buf = io.StringIO()
    write_csv(events, buf)
    reparsed, stats = parse_contacts(buf.getvalue().encode(), "csv")
    assert list(reparsed) == events
    assert stats.malformed_lines == 0


def test_jsonl_round_trip(tmp_path):
    events = [ev("a", "b", 1, Kind.QUOTE, "s9"), ev("b", "c", 2)]
    path = tmp_path / "events.jsonl"
    write_jsonl(events, str(path))
    reparsed, _ = parse_contacts(str(path), "jsonl")
    assert list(reparsed) == events


def test_binary_cache_round_trip(tmp_path):
    events = table_of([("a", "b", 5), ("b", "c", 7), ("c", "a", 7)])
    path = tmp_path / "events.bin"
    write_events_binary(str(path), events, 0, 10)
    back, t0, horizon = read_events_binary(str(path))
    assert (t0, horizon) == (0, 10)
    assert np.array_equal(back.ts, events.ts)
    assert list(back.users) == list(events.users)
    assert np.array_equal(back.src, events.src)


def test_osf_adapter_synonyms_and_overrides(tmp_path):
    raw = "user1,user2,created_at,interaction\nA,B,2020-02-02T00:00:00Z,retweet\nB,A,1580600000,reply\n"
    events, stats = load_osf_interactions(raw.encode())
    assert len(events) == 2
    assert events[0].kind is Kind.RETWEET
    assert events[0].timestamp == 1580601600

    raw2 = "x,y,when\nA,B,100\n"
    with pytest.raises(ValueError):
        load_osf_interactions(raw2.encode())
    events2, _ = load_osf_interactions(
        raw2.encode(), column_map={"source": "x", "target": "y",
                                   "timestamp": "when"})
    assert len(events2) == 1


def test_event_table_sequence_protocol():
    events = [ev("a", "b", 1), ev("b", "c", 2)]
    table = EventTable.from_events(events)
    assert len(table) == 2
    assert table[0] == events[0]
    assert list(table[0:1]) == [events[0]]
    assert table == events
    assert events[0] in table
