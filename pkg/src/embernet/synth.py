"""Deterministic synthetic contact-stream generator with planted structure.

Event times follow an inhomogeneous rate with a logistic ramp (the planted
transition); partners are chosen within planted communities until their merge
time and across the merged pool afterwards, with probability proportional to
``1 + pa_strength * current contact count`` (preferential attachment). The
emitted ledger records exactly what was planted, so analytics modules can be
tested against ground truth.

Byte-identical output per (config, seed): all randomness comes from one
numpy PCG64 stream, consumed in a fixed order.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels
from .ingest import EventTable


@dataclass(frozen=True)
class RampConfig:
    center_time: float
    floor: float
    ceiling: float
    width: float

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("ramp width must be positive")
        if not self.floor < self.ceiling:
            raise ValueError("ramp floor must be below ceiling")
        if self.floor < 0:
            raise ValueError("ramp floor must be non-negative")


@dataclass(frozen=True)
class CommunitySpec:
    size: int
    merge_time: float = math.inf  # never merges by default


@dataclass
class SynthConfig:
    n_users: int
    duration: int  # seconds
    ramp: RampConfig
    pa_strength: float = 0.0
    base_rate: float = 1.0  # multiplies the ramp level (events per second)
    communities: list[CommunitySpec] = field(default_factory=list)
    seed: int = 0
    n_events: int | None = None  # overrides base_rate-derived volume
    t_start: int = 0
    ledger_window: int | None = None

    def __post_init__(self):
        if self.n_users < 2:
            raise ValueError("need at least two users")
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.pa_strength < 0:
            raise ValueError("pa_strength must be >= 0")
        if self.base_rate <= 0 and self.n_events is None:
            raise ValueError("base_rate must be positive")
        sizes = [c.size for c in self.communities]
        if any(s < 1 for s in sizes):
            raise ValueError("community sizes must be >= 1")
        if sum(sizes) > self.n_users:
            raise ValueError("community sizes exceed n_users")
        blocks = self.block_sizes()
        early_pool = sum(self.block_sizes()[c] for c, t in
                         enumerate(self.block_merge_times()) if t <= 0)
        if max(blocks) < 2 and early_pool < 2:
            raise ValueError(
                "no viable partner pool: every community has a single member "
                "and no merge happens at time zero")

    def block_sizes(self) -> list[int]:
        sizes = [c.size for c in self.communities]
        leftover = self.n_users - sum(sizes)
        if not sizes:
            return [self.n_users]
        if leftover > 0:
            sizes.append(leftover)  # implicit background community
        return sizes

    def block_merge_times(self) -> list[float]:
        times = [c.merge_time for c in self.communities]
        if not self.communities:
            return [math.inf]
        if self.n_users - sum(c.size for c in self.communities) > 0:
            times.append(math.inf)
        return times

    def expected_events(self) -> float:
        return self.base_rate * _ramp_integral(self.ramp, float(self.duration))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["communities"] = [
            {"size": c.size,
             "merge_time": (None if math.isinf(c.merge_time) else c.merge_time)}
            for c in self.communities]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        d = dict(d)
        d["ramp"] = RampConfig(**d["ramp"])
        comms = []
        for c in d.get("communities", []):
            mt = c.get("merge_time")
            comms.append(CommunitySpec(int(c["size"]),
                                       math.inf if mt is None else float(mt)))
        d["communities"] = comms
        return cls(**d)


@dataclass
class SynthLedger:
    """Ground truth for the emitted stream; recounting the stream matches it."""

    n_events: int
    window_seconds: int
    window_counts: np.ndarray
    user_contacts: np.ndarray
    memberships: np.ndarray  # community block per user
    transition_time: float  # absolute ramp center
    merge_times: list
    seed: int

    def to_dict(self) -> dict:
        return {
            "n_events": self.n_events,
            "window_seconds": self.window_seconds,
            "window_counts": self.window_counts.tolist(),
            "user_contacts": self.user_contacts.tolist(),
            "memberships": self.memberships.tolist(),
            "transition_time": self.transition_time,
            "merge_times": [None if math.isinf(t) else t for t in self.merge_times],
            "seed": self.seed,
        }

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.log1p(np.exp(-np.abs(x))) + np.maximum(x, 0.0)


def _ramp_integral(ramp: RampConfig, t) -> np.ndarray:
    """Integral of the logistic rate from 0 to t (closed form)."""
    t = np.asarray(t, dtype=np.float64)
    c, w = ramp.center_time, ramp.width
    span = ramp.ceiling - ramp.floor
    return (ramp.floor * t
            + span * w * (_softplus((t - c) / w) - _softplus(-c / w)))


def _invert_ramp_integral(ramp: RampConfig, targets: np.ndarray,
                          duration: float) -> np.ndarray:
    """Vectorized bisection for the inverse cumulative intensity."""
    lo = np.zeros_like(targets)
    hi = np.full_like(targets, duration)
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        below = _ramp_integral(ramp, mid) < targets
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def generate(cfg: SynthConfig) -> tuple[EventTable, SynthLedger]:
    """Generate the event stream and its ground-truth ledger."""
    rng = np.random.default_rng(cfg.seed)

    lam_total = float(cfg.expected_events()) if cfg.n_events is None else None
    n = cfg.n_events if cfg.n_events is not None else int(round(lam_total))

    sizes = np.array(cfg.block_sizes(), dtype=np.int64)
    k = sizes.shape[0]
    merge_times_f = cfg.block_merge_times()
    big = np.iinfo(np.int64).max
    merge_times = np.array(
        [big if math.isinf(t) else int(math.floor(t)) for t in merge_times_f],
        dtype=np.int64)
    comm_off = np.zeros(k + 1, dtype=np.int64)
    np.cumsum(sizes, out=comm_off[1:])

    users = np.array([f"u{i:08d}" for i in range(cfg.n_users)], dtype=object)
    memberships = np.repeat(np.arange(k, dtype=np.int64), sizes)

    window = cfg.ledger_window or max(1, cfg.duration // 100)

    if n == 0:
        table = EventTable.from_arrays(users, np.empty(0, np.int64),
                                       np.empty(0, np.int64),
                                       np.empty(0, np.int64))
        n_windows = math.ceil(cfg.duration / window)
        ledger = SynthLedger(0, window, np.zeros(n_windows, np.int64),
                             np.zeros(cfg.n_users, np.int64), memberships,
                             cfg.t_start + cfg.ramp.center_time,
                             merge_times_f, cfg.seed)
        return table, ledger

    # event times: inverse-transform through the cumulative intensity
    u = np.sort(rng.random(n))
    total = float(_ramp_integral(cfg.ramp, float(cfg.duration)))
    ts_rel = np.floor(_invert_ramp_integral(
        cfg.ramp, u * total, float(cfg.duration))).astype(np.int64)
    ts_rel = np.minimum(ts_rel, cfg.duration)

    # Fenwick forest: one block per community, leaves start at weight 1
    kernels = _kernels.active
    fen = np.zeros(cfg.n_users + k + 1, dtype=np.float64)
    fen_off = np.zeros(k, dtype=np.int64)
    top_bit = np.zeros(k, dtype=np.int64)
    off = 0
    for c in range(k):
        fen_off[c] = off
        m = int(sizes[c])
        fen[off + 1: off + m + 1] = 1.0
        kernels.fen_build(fen, off, m)
        top_bit[c] = 1 << (m.bit_length() - 1)
        off += m + 1
    comm_w = sizes.astype(np.float64)
    counts = np.zeros(cfg.n_users, dtype=np.int64)

    merge_order = np.argsort(merge_times, kind="stable").astype(np.int64)
    w_elig = float(comm_w[sizes >= 2].sum())

    src = np.empty(n, dtype=np.int64)
    dst = np.empty(n, dtype=np.int64)
    fstate = np.array([w_elig, 0.0], dtype=np.float64)
    istate = np.array([0, 0, 0, 0], dtype=np.int64)

    buf = rng.random(int(2.5 * n) + 1024)
    while True:
        done = kernels.synth_fill(src, dst, ts_rel, comm_off, merge_order,
                                  merge_times, fen, fen_off, top_bit, comm_w,
                                  counts, buf, float(cfg.pa_strength),
                                  fstate, istate)
        if done == 1:
            break
        extra = rng.random(max(n, 1 << 16))
        buf = np.concatenate([buf, extra])

    kinds = (np.arange(n, dtype=np.int64) % 3).astype(np.uint8)  # rt/reply/quote
    ts_abs = ts_rel + cfg.t_start
    table = EventTable.from_arrays(users, src, dst, ts_abs, kinds)

    idx = ts_rel // window
    n_windows = max(math.ceil(cfg.duration / window), int(idx.max()) + 1)
    window_counts = np.bincount(idx, minlength=n_windows).astype(np.int64)
    ledger = SynthLedger(n, int(window), window_counts, counts.copy(),
                         memberships, cfg.t_start + cfg.ramp.center_time,
                         merge_times_f, cfg.seed)
    return table, ledger
