"""Temporal and accumulative slicing of the underlying graph.

A slice is a static snapshot of the interaction network for one window.
Windows are half-open ``[t_start, t_end)``; an event exactly at a boundary
belongs to the next slice. The single exception is the final boundary: an
event at exactly the horizon is kept in the last slice so that the union of
slices always reproduces the full event list.

Slices are cheap range views over the time-sorted event arrays of the parent
graph. ``iter_views`` materializes per-slice static graph views; for
accumulative mode it exploits the nesting of slices (each view's edge set is
a prefix of the final one) so the whole sequence costs one pass over the
events instead of one pass per slice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .ingest import EventTable, TemporalGraph

TEMPORAL = "temporal"
ACCUMULATIVE = "accumulative"


@dataclass(frozen=True)
class SliceSpec:
    mode: str
    delta_t: int
    t0: int
    horizon: int

    def __post_init__(self):
        if self.mode not in (TEMPORAL, ACCUMULATIVE):
            raise ValueError(f"unknown slice mode: {self.mode!r}")
        if self.delta_t <= 0:
            raise ValueError("delta_t must be positive")
        if self.horizon <= self.t0:
            raise ValueError("horizon must exceed t0")

    @property
    def n_slices(self) -> int:
        return math.ceil((self.horizon - self.t0) / self.delta_t)

    def interval(self, index: int) -> tuple[int, int]:
        """Time window of 1-based slice ``index`` (end clipped to horizon)."""
        if not 1 <= index <= self.n_slices:
            raise IndexError(f"slice index {index} out of range 1..{self.n_slices}")
        start = self.t0 + (index - 1) * self.delta_t
        return start, min(self.t0 + index * self.delta_t, self.horizon)


@dataclass(frozen=True)
class GraphView:
    """Static view of one slice (or any event subset) of the graph.

    ``active`` lists vocabulary indices with at least one incident event,
    sorted ascending. Edge endpoints ``edge_u``/``edge_v`` are *compact*
    indices into ``active`` with ``edge_u < edge_v``; ``edge_mult`` counts the
    contacts collapsed into each simple edge. ``contact_deg`` counts incident
    events per active vertex (multigraph degree); ``simple_deg`` counts
    distinct neighbors.
    """

    n_users: int
    n_events: int
    active: np.ndarray
    contact_deg: np.ndarray
    edge_u: np.ndarray
    edge_v: np.ndarray
    edge_mult: np.ndarray
    simple_deg: np.ndarray

    @property
    def n_active(self) -> int:
        return self.active.shape[0]

    @property
    def n_simple_edges(self) -> int:
        return self.edge_u.shape[0]

    def compact_of(self, vocab_idx: np.ndarray) -> np.ndarray:
        return np.searchsorted(self.active, vocab_idx)

    @classmethod
    def from_edges(cls, n_users: int, src, dst) -> "GraphView":
        """Build directly from endpoint arrays (one entry per contact)."""
        return build_view(np.asarray(src, dtype=np.int64),
                          np.asarray(dst, dtype=np.int64), n_users)


def build_view(src: np.ndarray, dst: np.ndarray, n_users: int) -> GraphView:
    deg = np.bincount(src, minlength=n_users) + np.bincount(dst, minlength=n_users)
    active = np.flatnonzero(deg).astype(np.int64)
    n_active = active.shape[0]
    contact_deg = deg[active]
    if n_active == 0:
        empty = np.empty(0, dtype=np.int64)
        return GraphView(n_users, 0, active, contact_deg, empty, empty, empty, empty)
    compact = np.zeros(n_users, dtype=np.int64)
    compact[active] = np.arange(n_active, dtype=np.int64)
    a = compact[src]
    b = compact[dst]
    key = np.minimum(a, b) * n_active + np.maximum(a, b)
    ukey, mult = np.unique(key, return_counts=True)
    edge_u = (ukey // n_active).astype(np.int64)
    edge_v = (ukey % n_active).astype(np.int64)
    simple_deg = (np.bincount(edge_u, minlength=n_active)
                  + np.bincount(edge_v, minlength=n_active)).astype(np.int64)
    return GraphView(n_users, src.shape[0], active, contact_deg.astype(np.int64),
                     edge_u, edge_v, mult.astype(np.int64), simple_deg)


@dataclass(frozen=True)
class Slice:
    """One snapshot window; events are a range view into the parent graph."""

    spec: SliceSpec
    index: int  # 1-based
    t_start: int
    t_end: int
    partial: bool
    _graph: TemporalGraph = field(repr=False)
    _lo: int = field(repr=False)
    _hi: int = field(repr=False)

    @property
    def n_events(self) -> int:
        return self._hi - self._lo

    @property
    def events(self) -> EventTable:
        return self._graph.table[self._lo:self._hi]

    def view(self) -> GraphView:
        t = self._graph.table
        return build_view(t.src[self._lo:self._hi], t.dst[self._lo:self._hi],
                          t.n_users)


def slice_view(s: Slice) -> GraphView:
    """Static per-slice graph view (simple edges, degrees, active vertices)."""
    return s.view()


def _boundaries(g: TemporalGraph, spec: SliceSpec) -> np.ndarray:
    """Event-array offsets of each slice boundary; the final slice is closed."""
    L = spec.n_slices
    bounds = spec.t0 + spec.delta_t * np.arange(1, L + 1, dtype=np.int64)
    offsets = np.searchsorted(g.table.ts, bounds, side="left")
    offsets[-1] = g.n_events  # horizon is inclusive for the last slice
    return offsets


def _make_slices(g: TemporalGraph, spec: SliceSpec) -> list[Slice]:
    offsets = _boundaries(g, spec)
    out = []
    lo = 0
    for i in range(1, spec.n_slices + 1):
        start, end = spec.interval(i)
        partial = (end - start) < spec.delta_t
        hi = int(offsets[i - 1])
        if spec.mode == TEMPORAL:
            out.append(Slice(spec, i, start, end, partial, g, lo, hi))
            lo = hi
        else:
            out.append(Slice(spec, i, start, end, partial, g, 0, hi))
    return out


def temporal_slices(g: TemporalGraph, delta_t: int) -> list[Slice]:
    """Disjoint windows of width delta_t partitioning the event list."""
    spec = SliceSpec(TEMPORAL, int(delta_t), g.t0, g.horizon)
    return _make_slices(g, spec)


def accumulative_slices(g: TemporalGraph, delta_t: int) -> list[Slice]:
    """Nested windows [t0, t0 + i*delta_t); the final slice is the full graph."""
    spec = SliceSpec(ACCUMULATIVE, int(delta_t), g.t0, g.horizon)
    return _make_slices(g, spec)


def slices_for(g: TemporalGraph, spec: SliceSpec) -> list[Slice]:
    if spec.t0 != g.t0 or spec.horizon != g.horizon:
        raise ValueError("slice spec window does not match the graph window")
    return _make_slices(g, spec)


# ---------------------------------------------------------------------------
# sequence-level view construction
# ---------------------------------------------------------------------------


def iter_views(slices: Sequence[Slice]) -> Iterator[GraphView]:
    """Yield GraphViews for a slice sequence from one spec.

    Temporal slices are built independently. Accumulative slices share one
    incremental pass: unique edges and vertex activations are ordered by first
    occurrence once, and each slice's edge set is a prefix of that order.
    """
    if not slices:
        return
    spec = slices[0].spec
    if spec.mode == TEMPORAL:
        for s in slices:
            yield s.view()
        return

    g = slices[0]._graph
    t = g.table
    n_users = t.n_users
    n = len(t)
    src, dst = t.src, t.dst

    # first activation position per vertex
    first_pos = np.full(n_users, n, dtype=np.int64)
    pos = np.arange(n, dtype=np.int64)
    np.minimum.at(first_pos, src, pos)
    np.minimum.at(first_pos, dst, pos)
    act_order = np.argsort(first_pos, kind="stable")
    act_order = act_order[first_pos[act_order] < n]
    act_pos_sorted = first_pos[act_order]

    # first occurrence position per undirected pair
    key = (np.minimum(src, dst) * n_users + np.maximum(src, dst))
    uk, inv = np.unique(key, return_inverse=True)
    pair_first = np.full(uk.shape[0], n, dtype=np.int64)
    np.minimum.at(pair_first, inv, pos)
    edge_order = np.argsort(pair_first, kind="stable")
    edge_pos_sorted = pair_first[edge_order]
    eu_all = (uk[edge_order] // n_users).astype(np.int64)
    ev_all = (uk[edge_order] % n_users).astype(np.int64)
    # contact multiplicity per unique pair, cumulative in time
    # (recomputed per slice below via bincount over the event prefix)

    running_deg = np.zeros(n_users, dtype=np.int64)
    lo = 0
    for s in slices:
        hi = s._hi
        if hi > lo:
            running_deg += np.bincount(src[lo:hi], minlength=n_users)
            running_deg += np.bincount(dst[lo:hi], minlength=n_users)
        lo = hi
        n_act = int(np.searchsorted(act_pos_sorted, hi, side="left"))
        n_edge = int(np.searchsorted(edge_pos_sorted, hi, side="left"))
        active = np.sort(act_order[:n_act])
        compact = np.zeros(n_users, dtype=np.int64)
        compact[active] = np.arange(n_act, dtype=np.int64)
        # compaction is monotone over the sorted active set, so u < v is kept
        eu = compact[eu_all[:n_edge]]
        ev = compact[ev_all[:n_edge]]
        mult = np.bincount(inv[:hi], minlength=uk.shape[0])[edge_order[:n_edge]]
        simple_deg = (np.bincount(eu, minlength=n_act)
                      + np.bincount(ev, minlength=n_act)).astype(np.int64)
        yield GraphView(n_users, hi, active, running_deg[active].copy(),
                        eu, ev, mult.astype(np.int64), simple_deg)


def slice_summaries(slices: Sequence[Slice]) -> Iterator[dict]:
    """Rows for the per-slice summary export."""
    for s, view in zip(slices, iter_views(slices)):
        yield {
            "index": s.index,
            "t_start": s.t_start,
            "t_end": s.t_end,
            "n_events": s.n_events if s.spec.mode == TEMPORAL else view.n_events,
            "n_active_vertices": view.n_active,
            "n_simple_edges": view.n_simple_edges,
        }
