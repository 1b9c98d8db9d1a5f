"""Cross-lane checks: the numba-compiled kernels must reproduce the
interpreted lane bit for bit, since both execute the same source."""

import numpy as np
import pytest

from embernet import _kernels
from embernet._kernels import get_fast, pure

pytestmark = pytest.mark.skipif(not _kernels.HAVE_NUMBA,
                                reason="numba unavailable")


def test_component_roots_lanes_agree(rng):
    fast = get_fast()
    for _ in range(5):
        n = int(rng.integers(5, 80))
        m = int(rng.integers(0, 150))
        src = rng.integers(0, n, m).astype(np.int64)
        dst = rng.integers(0, n, m).astype(np.int64)
        assert np.array_equal(fast.component_roots(n, src, dst),
                              pure.component_roots(n, src, dst))


def _random_csr(rng, n, m):
    eu = rng.integers(0, n, m).astype(np.int64)
    ev = rng.integers(0, n, m).astype(np.int64)
    keep = eu != ev
    eu, ev = eu[keep], ev[keep]
    key = np.minimum(eu, ev) * n + np.maximum(eu, ev)
    uk = np.unique(key)
    eu = (uk // n).astype(np.int64)
    ev = (uk % n).astype(np.int64)
    w = np.ones(eu.shape[0])
    deg = np.bincount(eu, minlength=n) + np.bincount(ev, minlength=n)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(deg, out=indptr[1:])
    heads = np.concatenate([eu, ev])
    tails = np.concatenate([ev, eu])
    ws = np.concatenate([w, w])
    order = np.argsort(heads, kind="stable")
    return indptr, tails[order], ws[order], eu, ev, w


def test_local_move_lanes_agree(rng):
    fast = get_fast()
    for _ in range(5):
        n = int(rng.integers(6, 60))
        indptr, indices, weights, eu, ev, w = _random_csr(rng, n, 3 * n)
        strength = np.zeros(n)
        np.add.at(strength, eu, w)
        np.add.at(strength, ev, w)
        m2 = strength.sum()
        if m2 == 0:
            continue
        order = rng.permutation(n).astype(np.int64)
        states = []
        for lane in (fast, pure):
            comm = np.arange(n, dtype=np.int64)
            comm_tot = strength.copy()
            comm_count = np.ones(n, dtype=np.int64)
            free = np.zeros(n, dtype=np.int64)
            moves, _ = lane.local_move(indptr, indices, weights, strength,
                                       comm, comm_tot, comm_count, free, 0,
                                       order, 1.0, m2)
            states.append((moves, comm.copy(), comm_tot.copy()))
        assert states[0][0] == states[1][0]
        assert np.array_equal(states[0][1], states[1][1])
        assert np.array_equal(states[0][2], states[1][2])


def test_refine_lanes_agree(rng):
    fast = get_fast()
    for _ in range(5):
        n = int(rng.integers(6, 60))
        indptr, indices, weights, eu, ev, w = _random_csr(rng, n, 3 * n)
        strength = np.zeros(n)
        np.add.at(strength, eu, w)
        np.add.at(strength, ev, w)
        m2 = strength.sum()
        if m2 == 0:
            continue
        macro = rng.integers(0, 3, n).astype(np.int64)
        macro_tot = np.zeros(n)
        np.add.at(macro_tot, macro, strength)
        order = rng.permutation(n).astype(np.int64)
        a = fast.refine(indptr, indices, weights, strength, macro, macro_tot,
                        order, 1.0, m2)
        b = pure.refine(indptr, indices, weights, strength, macro, macro_tot,
                        order, 1.0, m2)
        assert np.array_equal(a, b)


def test_fenwick_against_cumsum_oracle(rng):
    fast = get_fast()
    for lane in (fast, pure):
        m = 37
        fen = np.zeros(m + 1)
        leaves = rng.random(m) + 0.1
        fen[1:m + 1] = leaves
        lane.fen_build(fen, 0, m)
        top = 1 << (m.bit_length() - 1)
        cum = np.cumsum(leaves)
        for target in rng.random(200) * cum[-1]:
            got = lane.fen_descend(fen, 0, m, top, target)
            expect = int(np.searchsorted(cum, target, side="right")) + 1
            assert got == expect
        # point update keeps the tree consistent
        lane.fen_add(fen, 0, m, 5, 2.5)
        leaves[4] += 2.5
        cum = np.cumsum(leaves)
        for target in rng.random(50) * cum[-1]:
            assert lane.fen_descend(fen, 0, m, top, target) == \
                int(np.searchsorted(cum, target, side="right")) + 1


def test_synth_fill_lanes_agree():
    from embernet.synth import CommunitySpec, RampConfig, SynthConfig

    import embernet.synth as synth_mod

    cfg = SynthConfig(n_users=60, duration=5000,
                      ramp=RampConfig(3000, 1.0, 10.0, 500.0),
                      pa_strength=2.0, n_events=4000, seed=13,
                      communities=[CommunitySpec(20, 2500),
                                   CommunitySpec(20, 2500)])
    streams = []
    original = _kernels.active
    for lane in (get_fast(), pure):
        _kernels.active = lane
        try:
            events, ledger = synth_mod.generate(cfg)
        finally:
            _kernels.active = original
        streams.append((events.src.copy(), events.dst.copy(),
                        events.ts.copy(), ledger.user_contacts.copy()))
    for a, b in zip(streams[0], streams[1]):
        assert np.array_equal(a, b)
