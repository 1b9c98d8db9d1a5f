import io
import math

import numpy as np
import pytest

from embernet.ingest import build_underlying_graph, write_csv
from embernet.metrics import contact_user_series
from embernet.powerlaw import fit_power_law
from embernet.slicing import temporal_slices
from embernet.synth import CommunitySpec, RampConfig, SynthConfig, generate
from embernet.transition import TransitionConfig, detect_transition


def flat_cfg(**kw):
    base = dict(n_users=300, duration=30_000,
                ramp=RampConfig(15_000, 1.0, 1.001, 1000.0),
                pa_strength=0.0, n_events=20_000, seed=1)
    base.update(kw)
    return SynthConfig(**base)


def test_determinism_byte_identical():
    cfg = flat_cfg(pa_strength=2.0, communities=[CommunitySpec(100, 9000),
                                                 CommunitySpec(100, 9000)])
    out = []
    for _ in range(2):
        events, _ = generate(cfg)
        buf = io.StringIO()
        write_csv(events, buf)
        out.append(buf.getvalue())
    assert out[0] == out[1]


def test_seed_changes_stream():
    a, _ = generate(flat_cfg(seed=1))
    b, _ = generate(flat_cfg(seed=2))
    assert not (np.array_equal(a.src, b.src) and np.array_equal(a.ts, b.ts))


def test_ledger_recount_equality():
    cfg = flat_cfg(pa_strength=3.0, n_events=15_000, ledger_window=700)
    events, ledger = generate(cfg)
    n_users = cfg.n_users
    recount = np.bincount(events.src, minlength=n_users) + np.bincount(
        events.dst, minlength=n_users)
    assert np.array_equal(recount, ledger.user_contacts)
    rel = events.ts - cfg.t_start
    windows = np.bincount(rel // 700, minlength=ledger.window_counts.shape[0])
    assert np.array_equal(windows, ledger.window_counts)
    assert ledger.n_events == len(events)


def test_pre_merge_purity():
    cfg = flat_cfg(communities=[CommunitySpec(120, 20_000),
                                CommunitySpec(120, 25_000)],
                   pa_strength=1.0)
    events, ledger = generate(cfg)
    mem = ledger.memberships
    pre = events.ts < 20_000
    assert pre.any() and (~pre).any()
    assert (mem[events.src[pre]] == mem[events.dst[pre]]).all()
    # after the last merge, cross-group contacts between merged blocks exist
    post = events.ts >= 25_000
    merged_pair = (mem[events.src[post]] != mem[events.dst[post]])
    assert merged_pair.any()


def test_merged_pool_excludes_unmerged_community():
    cfg = flat_cfg(n_users=90, communities=[CommunitySpec(30, 5000),
                                            CommunitySpec(30, 5000),
                                            CommunitySpec(30, math.inf)],
                   pa_strength=1.0, n_events=8000)
    events, ledger = generate(cfg)
    mem = ledger.memberships
    cross = mem[events.src] != mem[events.dst]
    # cross-community events only ever involve the two merged blocks
    assert cross.any()
    for side in (events.src[cross], events.dst[cross]):
        assert set(np.unique(mem[side]).tolist()) <= {0, 1}


def test_flat_uniform_config_is_poor_power_law():
    rng = np.random.default_rng(0)
    events, _ = generate(flat_cfg(n_events=30_000))
    g = build_underlying_graph(events, 0, 30_000)
    deg = g.view().contact_deg
    flat_fit = fit_power_law(deg)
    pl_fit = fit_power_law(rng.zipf(2.5, deg.shape[0]))
    assert flat_fit.ks_statistic > pl_fit.ks_statistic
    # binomial-ish degrees: relative spread far below heavy-tail expectations
    assert deg.std() / deg.mean() < 0.5


def test_strong_preferential_attachment_yields_power_law():
    cfg = SynthConfig(n_users=10_000, duration=100_000,
                      ramp=RampConfig(50_000, 1.0, 1.001, 1000.0),
                      pa_strength=6.0, n_events=60_000, seed=9)
    events, _ = generate(cfg)
    g = build_underlying_graph(events, 0, cfg.duration)
    fit = fit_power_law(g.view().contact_deg)
    assert 1.8 <= fit.alpha <= 3.5


def test_ramp_detected_near_planted_center():
    duration = 100_000
    width = 2000.0
    cfg = SynthConfig(n_users=400, duration=duration,
                      ramp=RampConfig(0.6 * duration, 1.0, 80.0, width),
                      pa_strength=1.0, n_events=50_000, seed=4)
    events, ledger = generate(cfg)
    g = build_underlying_graph(events, 0, duration)
    delta = 1000
    contacts, _ = contact_user_series(temporal_slices(g, delta))
    rep = detect_transition(contacts, TransitionConfig(30, 8.0, 6, 0.03))
    assert rep.detected
    center_slice = ledger.transition_time / delta
    width_slices = width / delta
    assert rep.onset_slice <= center_slice + 2 * width_slices
    assert rep.end_slice >= center_slice - 2 * width_slices


def test_infeasible_configs_rejected():
    with pytest.raises(ValueError):
        flat_cfg(n_users=0)
    with pytest.raises(ValueError):
        flat_cfg(n_users=100, communities=[CommunitySpec(80, 100),
                                           CommunitySpec(40, 100)])
    with pytest.raises(ValueError):
        SynthConfig(n_users=2, duration=100,
                    ramp=RampConfig(50, 5.0, 1.0, 10.0))  # floor >= ceiling
    with pytest.raises(ValueError):
        # all singleton communities, no merge at t=0: nobody can interact
        SynthConfig(n_users=2, duration=100,
                    ramp=RampConfig(50, 1.0, 2.0, 10.0),
                    communities=[CommunitySpec(1, 50), CommunitySpec(1, 60)])


def test_singleton_communities_merging_at_zero_are_viable():
    cfg = SynthConfig(n_users=2, duration=1000,
                      ramp=RampConfig(500, 1.0, 2.0, 100.0),
                      communities=[CommunitySpec(1, 0), CommunitySpec(1, 0)],
                      n_events=50, seed=3)
    events, _ = generate(cfg)
    assert len(events) == 50
    assert set(zip(events.src.tolist(), events.dst.tolist())) <= {(0, 1), (1, 0)}


def test_config_round_trip_via_dict():
    cfg = flat_cfg(communities=[CommunitySpec(50, 1000.0), CommunitySpec(60)])
    back = SynthConfig.from_dict(cfg.to_dict())
    assert back == cfg


def test_empty_stream_when_zero_events():
    events, ledger = generate(flat_cfg(n_events=0))
    assert len(events) == 0
    assert ledger.window_counts.sum() == 0
