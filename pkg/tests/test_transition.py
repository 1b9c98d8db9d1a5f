import numpy as np
import pytest

from embernet.ingest import parse_iso_utc
from embernet.metrics import TimeSeries, annd_curve
from embernet.slicing import ACCUMULATIVE, TEMPORAL, SliceSpec, build_view
from embernet.transition import (PrecursorConfig, TransitionConfig,
                                 TransitionReport, annd_by_phase,
                                 detect_precursors, detect_transition,
                                 phase_windows)

from conftest import graph_of


def series_of(values, start_index=1):
    values = np.asarray(values, dtype=np.float64)
    idx = np.arange(start_index, start_index + values.shape[0])
    return TimeSeries(idx, values, "contacts")


def logistic_series(center, n=100, floor=10.0, ceiling=1000.0, width=5.0):
    i = np.arange(1, n + 1, dtype=np.float64)
    return series_of(floor + (ceiling - floor) / (1.0 + np.exp(-(i - center) / width)))


# tuned to the (floor 10, ceiling 1000, width 5) logistic family: the
# baseline median slides into the ramp, capping the usable ramp_factor
RAMP_CFG = TransitionConfig(baseline_window=30, ramp_factor=10.0, sustain=6,
                            decay=0.03)


def oracle_onset(values, cfg):
    """Independent re-statement of the onset rule with plain loops."""
    L = len(values)
    ws = cfg.sustain
    cond = [False] * L
    for i in range(ws, L):
        tm = sum(values[i - ws + 1:i + 1]) / ws
        b_hi = i - ws + 1
        b_lo = max(0, b_hi - cfg.baseline_window)
        baseline = float(np.median(values[b_lo:b_hi]))
        cond[i] = tm > cfg.ramp_factor * baseline
    run = 0
    for i in range(L):
        run = run + 1 if cond[i] else 0
        if run == ws:
            return i - ws + 1
    return None


def test_constant_series_no_transition():
    rep = detect_transition(series_of([7.0] * 120))
    assert not rep.detected
    assert rep.phases["pre"] == (1, 121)
    assert rep.phases["during"] == (121, 121)


def test_step_series_onset_near_step():
    values = [10.0] * 100 + [1000.0] * 100
    cfg = TransitionConfig(baseline_window=42, ramp_factor=3.0, sustain=6,
                           decay=0.02)
    rep = detect_transition(series_of(values), cfg)
    assert rep.detected
    assert abs(rep.onset_slice - 101) <= cfg.sustain
    assert rep.end_slice >= rep.onset_slice
    assert oracle_onset(values, cfg) == rep.onset_slice - 1


def test_logistic_ramp_detection_matches_oracle():
    for center in (45, 60, 75):
        s = logistic_series(center)
        rep = detect_transition(s, RAMP_CFG)
        assert rep.detected
        assert oracle_onset(s.values, RAMP_CFG) == rep.onset_slice - 1
        assert rep.onset_slice <= center <= rep.end_slice
        assert rep.end_slice - rep.onset_slice <= 20


def test_scale_invariance_exact():
    s = logistic_series(60)
    scaled = TimeSeries(s.index, s.values * 1000.0, s.label)
    a = detect_transition(s, RAMP_CFG)
    b = detect_transition(scaled, RAMP_CFG)
    assert a.to_dict() == b.to_dict()

    flat = series_of([3.0] * 90)
    flat_scaled = series_of([3000.0] * 90)
    assert detect_transition(flat).to_dict() == detect_transition(flat_scaled).to_dict()


def test_raising_ramp_factor_never_moves_onset_earlier():
    s = logistic_series(55)
    onsets = []
    for r in (2.0, 4.0, 8.0, 12.0):
        cfg = TransitionConfig(baseline_window=30, ramp_factor=r, sustain=6,
                               decay=0.03)
        rep = detect_transition(s, cfg)
        if rep.detected:
            onsets.append(rep.onset_slice)
    assert onsets == sorted(onsets)
    assert len(onsets) >= 3


def test_phases_partition_slice_axis():
    s = logistic_series(60)
    rep = detect_transition(s, RAMP_CFG)
    pre, during, post = (rep.phases[k] for k in ("pre", "during", "post"))
    assert pre[0] == 1
    assert pre[1] == during[0] == rep.onset_slice
    assert during[1] == post[0] == rep.end_slice
    assert post[1] == len(s) + 1
    covered = set()
    for a, b in (pre, during, post):
        block = set(range(a, b))
        assert not block & covered
        covered |= block
    assert covered == set(range(1, len(s) + 1))


def test_series_too_short_rejected():
    with pytest.raises(ValueError, match="too short"):
        detect_transition(series_of([1.0] * 10),
                          TransitionConfig(baseline_window=20, sustain=5))


def test_negative_values_rejected():
    with pytest.raises(ValueError):
        detect_transition(series_of([1.0] * 60 + [-1.0] + [1.0] * 20))


def test_precursor_planted_spike():
    values = np.full(100, 20.0)
    values[29] = 200.0  # slice 30 (1-based)
    spikes = detect_precursors(series_of(values))
    assert spikes == [30]


def test_precursor_monotone_ramp_is_quiet():
    values = np.linspace(10, 500, 100)
    assert detect_precursors(series_of(values)) == []


def test_precursor_three_planted_spikes(rng):
    base = 50 + rng.normal(0, 2.0, 200)
    base = np.clip(base, 40, 60)
    planted = {40: 400.0, 90: 900.0, 150: 300.0}
    for pos, mag in planted.items():
        base[pos] = mag
    cfg = PrecursorConfig(spike_z=6.0, local_window=21)
    spikes = detect_precursors(series_of(base), cfg)
    assert spikes == [41, 91, 151]


def test_precursors_restricted_to_pre_onset():
    values = np.full(100, 10.0)
    values[29] = 120.0
    values[70:] = 1000.0
    cfg = TransitionConfig(baseline_window=20, ramp_factor=5.0, sustain=4,
                           decay=0.02)
    rep = detect_transition(series_of(values), cfg, PrecursorConfig(5.0, 11))
    assert rep.detected
    assert all(s < rep.onset_slice for s in rep.precursor_slices)
    assert 30 in rep.precursor_slices


def test_phase_windows_paper_alignment():
    # 1-based half-open ranges: during = slices 361..390 covers Apr 1 - Apr 6
    t0 = parse_iso_utc("2020-02-01")
    horizon = parse_iso_utc("2020-05-11")
    spec = SliceSpec(TEMPORAL, 4 * 3600, t0, horizon)
    rep = TransitionReport(onset_slice=361, end_slice=391, detected=True,
                           n_slices=600, series_label="contacts")
    windows = phase_windows(rep, spec)
    assert windows["during"] == (parse_iso_utc("2020-04-01"),
                                 parse_iso_utc("2020-04-06"))
    assert windows["pre"] == (t0, parse_iso_utc("2020-04-01"))
    assert windows["post"] == (parse_iso_utc("2020-04-06"), horizon)


def test_phase_windows_empty_during_and_no_transition():
    spec = SliceSpec(TEMPORAL, 100, 0, 10_000)
    rep = TransitionReport(50, 50, True, 100, "contacts")
    w = phase_windows(rep, spec)
    assert w["during"][0] == w["during"][1] == 4900

    none = TransitionReport(101, 101, False, 100, "contacts")
    w = phase_windows(none, spec)
    assert w["pre"] == (0, 10_000)
    assert w["during"] == (10_000, 10_000)


def test_phase_windows_arbitrary_arithmetic():
    spec = SliceSpec(TEMPORAL, 7, 100, 1000)
    rep = TransitionReport(10, 20, True, spec.n_slices, "x")
    w = phase_windows(rep, spec)
    assert w["during"] == (100 + 9 * 7, 100 + 19 * 7)


def test_annd_by_phase_single_phase_graph():
    g = graph_of([("a", "b", 5), ("b", "c", 6), ("a", "c", 7)], 0, 1000)
    spec = SliceSpec(TEMPORAL, 100, 0, 1000)
    rep = TransitionReport(onset_slice=5, end_slice=8, detected=True,
                           n_slices=10, series_label="contacts")
    with pytest.warns(UserWarning):
        curves = annd_by_phase(g, rep, spec)
    assert set(curves) == {"pre"}  # all events land before slice 5


def test_annd_by_phase_matches_manual_filtering(rng):
    events = []
    # three disjoint eras with disjoint vertex sets
    for phase, (lo, hi), offset in (("pre", (0, 300), 0),
                                    ("during", (300, 600), 100),
                                    ("post", (600, 1000), 200)):
        for i in range(40):
            a = f"u{offset + rng.integers(0, 30)}"
            b = f"u{offset + 30 + rng.integers(0, 30)}"
            events.append((a, b, int(rng.integers(lo, hi))))
    g = graph_of(events, 0, 1000)
    spec = SliceSpec(TEMPORAL, 100, 0, 1000)
    rep = TransitionReport(onset_slice=4, end_slice=7, detected=True,
                           n_slices=10, series_label="contacts")
    curves = annd_by_phase(g, rep, spec)
    assert set(curves) == {"pre", "during", "post"}

    bounds = {"pre": (0, 300), "during": (300, 600), "post": (600, 1000)}
    tbl = g.table
    for phase, (lo, hi) in bounds.items():
        mask = (tbl.ts >= lo) & (tbl.ts < hi)
        view = build_view(tbl.src[mask], tbl.dst[mask], tbl.n_users)
        ref = annd_curve(view)
        got = curves[phase]
        assert np.array_equal(got.k, ref.k)
        assert np.allclose(got.mean_knn, ref.mean_knn)
        assert np.array_equal(got.count, ref.count)
