"""Phase-transition detection on slice time series.

The onset rule is a ratio-over-baseline test with a sustain requirement: the
trailing ``sustain``-slice mean must exceed ``ramp_factor`` times the median
of the ``baseline_window`` slices preceding that trailing window, for
``sustain`` consecutive slices. The transition ends once the per-slice growth
rate of the trailing mean falls back below ``decay``; post-transition volume
typically stays elevated, so the end is a growth criterion, not a level one.

All comparisons are ratios of medians and means, so detection is invariant
under positive scaling of the series. Precursors are pre-onset spikes that
exceed the local rolling median by ``spike_z`` robust standard deviations
(1.4826 * MAD), merged into runs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .ingest import TemporalGraph
from .metrics import AnndCurve, TimeSeries, annd_curve
from .slicing import SliceSpec, build_view

PHASES = ("pre", "during", "post")


@dataclass(frozen=True)
class TransitionConfig:
    baseline_window: int = 42  # 7 days of 4h slices
    ramp_factor: float = 3.0
    sustain: int = 6  # 1 day of 4h slices
    decay: float = 0.02  # per-slice relative growth considered "flat"

    def __post_init__(self):
        if self.baseline_window < 1 or self.sustain < 1:
            raise ValueError("baseline_window and sustain must be >= 1")
        if self.ramp_factor <= 1.0:
            raise ValueError("ramp_factor must exceed 1")

    def to_dict(self) -> dict:
        return {
            "baseline_window": self.baseline_window,
            "ramp_factor": self.ramp_factor,
            "sustain": self.sustain,
            "decay": self.decay,
        }


@dataclass(frozen=True)
class PrecursorConfig:
    spike_z: float = 4.0
    local_window: int = 21

    def to_dict(self) -> dict:
        return {"spike_z": self.spike_z, "local_window": self.local_window}


@dataclass
class TransitionReport:
    """Detected transition expressed in 1-based slice indices.

    Phase ranges are half-open: pre = [1, onset), during = [onset, end),
    post = [end, L+1). When no transition is detected, onset = end = L+1 and
    the pre phase covers everything.
    """

    onset_slice: int
    end_slice: int
    detected: bool
    n_slices: int
    series_label: str
    precursor_slices: list = field(default_factory=list)
    method: dict = field(default_factory=dict)

    @property
    def phases(self) -> dict[str, tuple[int, int]]:
        return {
            "pre": (1, self.onset_slice),
            "during": (self.onset_slice, self.end_slice),
            "post": (self.end_slice, self.n_slices + 1),
        }

    def to_dict(self) -> dict:
        return {
            "onset_slice": self.onset_slice,
            "end_slice": self.end_slice,
            "detected": self.detected,
            "n_slices": self.n_slices,
            "series": self.series_label,
            "precursor_slices": list(self.precursor_slices),
            "phases": {k: list(v) for k, v in self.phases.items()},
            "method": dict(self.method),
        }


def _trailing_means(values: np.ndarray, w: int) -> np.ndarray:
    """tm[i] = mean(values[i-w+1..i]); positions < w-1 are NaN."""
    out = np.full(values.shape[0], np.nan)
    if values.shape[0] >= w:
        csum = np.concatenate(([0.0], np.cumsum(values)))
        out[w - 1:] = (csum[w:] - csum[:-w]) / w
    return out


def detect_transition(series: TimeSeries, cfg: TransitionConfig | None = None,
                      precursor_cfg: PrecursorConfig | None = None
                      ) -> TransitionReport:
    """Locate the transition window on a non-negative slice series."""
    cfg = cfg or TransitionConfig()
    v = np.asarray(series.values, dtype=np.float64)
    L = v.shape[0]
    if (v < 0).any():
        raise ValueError("series values must be non-negative")
    if L < cfg.baseline_window + cfg.sustain:
        raise ValueError(
            f"series too short: {L} < baseline_window + sustain "
            f"= {cfg.baseline_window + cfg.sustain}")

    ws = cfg.sustain
    tm = _trailing_means(v, ws)

    # condition per position: trailing mean > ramp_factor * baseline median,
    # baseline = up to baseline_window slices right before the trailing window
    cond = np.zeros(L, dtype=bool)
    for i in range(ws, L):  # need at least one baseline sample
        b_hi = i - ws + 1  # exclusive
        b_lo = max(0, b_hi - cfg.baseline_window)
        baseline = np.median(v[b_lo:b_hi])
        cond[i] = tm[i] > cfg.ramp_factor * baseline

    onset_pos = -1
    run = 0
    for i in range(L):
        run = run + 1 if cond[i] else 0
        if run == ws:
            onset_pos = i - ws + 1
            break

    method = {"rule": "ratio_over_baseline", **cfg.to_dict()}
    if precursor_cfg is None:
        precursor_cfg = PrecursorConfig()
    spikes = detect_precursors(series, precursor_cfg)

    if onset_pos < 0:
        report = TransitionReport(L + 1, L + 1, False, L, series.label,
                                  method=method)
        report.precursor_slices = [s for s in spikes]
        report.method["precursors"] = precursor_cfg.to_dict()
        return report

    # end: first position after onset where the trailing-mean growth rate
    # returns below the decay threshold (after having been above it)
    end_pos = L - 1
    seen_growth = False
    for j in range(onset_pos + 1, L):
        prev = tm[j - 1]
        cur = tm[j]
        if not np.isfinite(prev) or not np.isfinite(cur):
            continue
        if prev == 0.0:
            growth = np.inf if cur > 0 else 0.0
        else:
            growth = cur / prev - 1.0
        if growth >= cfg.decay:
            seen_growth = True
        elif seen_growth:
            end_pos = j
            break

    onset_slice = int(series.index[onset_pos])
    end_slice = int(series.index[end_pos])
    report = TransitionReport(onset_slice, end_slice, True, L, series.label,
                              method=method)
    report.precursor_slices = [s for s in spikes if s < onset_slice]
    report.method["precursors"] = precursor_cfg.to_dict()
    return report


@dataclass
class PrecursorRun:
    start_slice: int
    end_slice: int
    peak_slice: int
    peak_value: float
    peak_z: float


def precursor_runs(series: TimeSeries, cfg: PrecursorConfig | None = None
                   ) -> list[PrecursorRun]:
    """Spike runs over the whole series (caller restricts to pre-onset).

    A slice spikes when its value exceeds the median of the centered
    ``local_window`` around it by ``spike_z`` robust standard deviations.
    With zero local MAD, any strict excess over the median counts.
    """
    cfg = cfg or PrecursorConfig()
    v = np.asarray(series.values, dtype=np.float64)
    L = v.shape[0]
    if L < cfg.local_window:
        raise ValueError(f"series shorter than local_window={cfg.local_window}")
    half = cfg.local_window // 2
    is_spike = np.zeros(L, dtype=bool)
    zscores = np.zeros(L)
    for i in range(L):
        lo = max(0, i - half)
        hi = min(L, i + half + 1)
        window = v[lo:hi]
        med = np.median(window)
        mad = np.median(np.abs(window - med))
        if mad > 0:
            z = (v[i] - med) / (1.4826 * mad)
        else:
            z = np.inf if v[i] > med else 0.0
        zscores[i] = z
        is_spike[i] = z > cfg.spike_z
    runs: list[PrecursorRun] = []
    i = 0
    while i < L:
        if not is_spike[i]:
            i += 1
            continue
        j = i
        while j + 1 < L and is_spike[j + 1]:
            j += 1
        peak = i + int(np.argmax(v[i:j + 1]))
        runs.append(PrecursorRun(int(series.index[i]), int(series.index[j]),
                                 int(series.index[peak]), float(v[peak]),
                                 float(zscores[peak])))
        i = j + 1
    return runs


def detect_precursors(series: TimeSeries, cfg: PrecursorConfig | None = None
                      ) -> list[int]:
    """Peak slice index of each spike run; empty when the series is smooth."""
    return [r.peak_slice for r in precursor_runs(series, cfg)]


def phase_windows(report: TransitionReport, spec: SliceSpec
                  ) -> dict[str, tuple[int, int]]:
    """Convert phase slice ranges to absolute time windows.

    Half-open slice range [a, b) maps to [t0 + (a-1) * delta_t,
    t0 + (b-1) * delta_t), clipped to the spec window.
    """
    out = {}
    for name, (a, b) in report.phases.items():
        t_lo = spec.t0 + (a - 1) * spec.delta_t
        t_hi = spec.t0 + (b - 1) * spec.delta_t
        t_lo = min(max(t_lo, spec.t0), spec.horizon)
        t_hi = min(max(t_hi, spec.t0), spec.horizon)
        out[name] = (t_lo, t_hi)
    return out


def annd_by_phase(g: TemporalGraph, report: TransitionReport, spec: SliceSpec
                  ) -> dict[str, AnndCurve]:
    """One static simple graph per phase window, each reduced to its ANND curve.

    Phases without events (or without edges) are omitted with a warning. The
    final phase is closed at the horizon, matching the final slice.
    """
    windows = phase_windows(report, spec)
    ts = g.table.ts
    out: dict[str, AnndCurve] = {}
    for name in PHASES:
        t_lo, t_hi = windows[name]
        lo = int(np.searchsorted(ts, t_lo, side="left"))
        if t_hi >= spec.horizon:
            hi = g.n_events
        else:
            hi = int(np.searchsorted(ts, t_hi, side="left"))
        if hi <= lo:
            warnings.warn(f"phase {name!r} contains no events; omitted")
            continue
        view = build_view(g.table.src[lo:hi], g.table.dst[lo:hi], g.table.n_users)
        if view.n_simple_edges == 0:
            warnings.warn(f"phase {name!r} has no edges; omitted")
            continue
        out[name] = annd_curve(view)
    return out
