"""Structural observables: degrees, activity series, ANND, top-user shares.

All functions are pure functions of immutable slice views and may be applied
to distinct slices concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .slicing import GraphView, Slice, SliceSpec, iter_views

CONTACTS = "contacts"
UNIQUE_NEIGHBORS = "unique_neighbors"


@dataclass
class TimeSeries:
    index: np.ndarray  # slice indices, strictly increasing
    values: np.ndarray
    label: str = ""
    spec: SliceSpec | None = None

    def __post_init__(self):
        self.index = np.asarray(self.index, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.index.shape != self.values.shape:
            raise ValueError("index and values must have equal length")
        if self.index.size > 1 and not (np.diff(self.index) > 0).all():
            raise ValueError("slice indices must be strictly increasing")

    def __len__(self) -> int:
        return self.index.shape[0]


@dataclass
class AnndCurve:
    """Mean nearest-neighbor degree per degree class of a simple graph."""

    k: np.ndarray
    mean_knn: np.ndarray
    count: np.ndarray

    def __len__(self) -> int:
        return self.k.shape[0]


def _as_view(obj) -> GraphView:
    if isinstance(obj, GraphView):
        return obj
    if isinstance(obj, Slice):
        return obj.view()
    raise TypeError(f"expected Slice or GraphView, got {type(obj).__name__}")


def degree_centrality(slice_or_view, vertex, mode: str = CONTACTS,
                      users: np.ndarray | None = None) -> int:
    """Degree of one vertex in a slice; 0 for vertices inactive in the slice.

    ``vertex`` may be a vocabulary index or, when ``users`` is given (or the
    argument is a Slice), the original user id.
    """
    view = _as_view(slice_or_view)
    if users is None and isinstance(slice_or_view, Slice):
        users = slice_or_view._graph.users
    if isinstance(vertex, str):
        if users is None:
            raise ValueError("user-id lookup requires the vocabulary")
        hits = np.flatnonzero(users == vertex)
        if hits.size == 0:
            return 0
        vertex = int(hits[0])
    pos = np.searchsorted(view.active, vertex)
    if pos >= view.n_active or view.active[pos] != vertex:
        return 0
    if mode == CONTACTS:
        return int(view.contact_deg[pos])
    if mode == UNIQUE_NEIGHBORS:
        return int(view.simple_deg[pos])
    raise ValueError(f"unknown degree mode: {mode!r}")


def contact_user_series(slices: Sequence[Slice]) -> tuple[TimeSeries, TimeSeries]:
    """Per-slice contact counts and active-user counts."""
    if not slices:
        empty = np.empty(0, dtype=np.int64)
        return (TimeSeries(empty, empty, "contacts"),
                TimeSeries(empty, empty, "users"))
    spec = slices[0].spec
    idx = np.array([s.index for s in slices], dtype=np.int64)
    contacts = np.empty(len(slices), dtype=np.float64)
    users = np.empty(len(slices), dtype=np.float64)
    for i, view in enumerate(iter_views(list(slices))):
        contacts[i] = view.n_events
        users[i] = view.n_active
    return (TimeSeries(idx, contacts, "contacts", spec),
            TimeSeries(idx, users, "users", spec))


def annd_points(view: GraphView) -> tuple[np.ndarray, np.ndarray]:
    """Per-node (degree, mean neighbor degree) over the simple graph."""
    deg = view.simple_deg
    nbr_sum = np.zeros(view.n_active, dtype=np.float64)
    np.add.at(nbr_sum, view.edge_u, deg[view.edge_v])
    np.add.at(nbr_sum, view.edge_v, deg[view.edge_u])
    mask = deg > 0
    return deg[mask], nbr_sum[mask] / deg[mask]


def annd_curve(slice_or_view) -> AnndCurve:
    """Average nearest-neighbor degree aggregated per degree class.

    Each degree-k class averages, over its nodes, the mean degree of the
    node's neighbors. Isolated vertices are excluded by construction.
    """
    view = _as_view(slice_or_view)
    if view.n_simple_edges == 0:
        raise ValueError("no degree classes: graph has no edges")
    k_node, knn_node = annd_points(view)
    kmax = int(k_node.max())
    sums = np.bincount(k_node, weights=knn_node, minlength=kmax + 1)
    counts = np.bincount(k_node, minlength=kmax + 1)
    ks = np.flatnonzero(counts).astype(np.int64)
    return AnndCurve(ks, sums[ks] / counts[ks], counts[ks].astype(np.int64))


def top_active_fraction(slice_or_view, percents: Sequence[float],
                        users: np.ndarray | None = None) -> dict[float, float]:
    """Share of contacts attributable to the most active users.

    For each fraction p, ranks active vertices by contact degree (ties broken
    by user id) and returns the top-ceil(p * n_active) vertices' summed
    contact degrees over ``2 * n_events``.
    """
    view = _as_view(slice_or_view)
    if users is None and isinstance(slice_or_view, Slice):
        users = slice_or_view._graph.users
    if view.n_events == 0:
        raise ValueError("no contacts in slice")
    for p in percents:
        if not 0.0 < p <= 1.0:
            raise ValueError(f"fraction out of (0, 1]: {p}")
    deg = view.contact_deg
    if users is not None:
        tie = np.argsort(users[view.active], kind="stable")
        order = tie[np.argsort(-deg[tie], kind="stable")]
    else:
        order = np.argsort(-deg, kind="stable")
    ranked = deg[order]
    csum = np.cumsum(ranked)
    total = 2.0 * view.n_events
    out = {}
    for p in percents:
        k = max(1, math.ceil(p * view.n_active - 1e-9))
        k = min(k, view.n_active)
        out[p] = float(csum[k - 1] / total)
    return out


def degree_distribution(slice_or_view, mode: str = CONTACTS) -> dict[int, int]:
    """Exact histogram degree -> count over active vertices."""
    view = _as_view(slice_or_view)
    if view.n_active == 0:
        raise ValueError("empty graph")
    if mode == CONTACTS:
        deg = view.contact_deg
    elif mode == UNIQUE_NEIGHBORS:
        deg = view.simple_deg
    else:
        raise ValueError(f"unknown degree mode: {mode!r}")
    values, counts = np.unique(deg, return_counts=True)
    return {int(v): int(c) for v, c in zip(values, counts)}


def log_binned_histogram(hist: dict[int, int], bins_per_decade: int = 10
                         ) -> list[tuple[float, float, float]]:
    """Logarithmically binned density view of an integer histogram.

    Returns (bin_lo, bin_hi, mean count per integer value) rows; meant for
    plotting heavy-tailed distributions, not for analysis.
    """
    if not hist:
        return []
    degrees = np.array(sorted(hist), dtype=np.float64)
    counts = np.array([hist[int(d)] for d in degrees], dtype=np.float64)
    lo, hi = degrees[0], degrees[-1]
    n_bins = max(1, int(np.ceil(np.log10(hi / lo) * bins_per_decade))) if hi > lo else 1
    edges = np.logspace(np.log10(lo), np.log10(hi), n_bins + 1)
    edges[-1] = hi + 1
    rows = []
    for b in range(n_bins):
        in_bin = (degrees >= edges[b]) & (degrees < edges[b + 1])
        if not in_bin.any():
            continue
        width = np.floor(edges[b + 1]) - np.ceil(edges[b]) + 1
        rows.append((float(edges[b]), float(edges[b + 1]),
                     float(counts[in_bin].sum() / max(width, 1.0))))
    return rows
