"""Community detection and cluster observables.

Per-slice partitions come from a Leiden-style optimizer (local moving with a
processing queue, refinement restricted to macro communities, graph
aggregation) over the slice's simple undirected graph. The objective is
modularity or CPM with a resolution parameter. Runs are deterministic given
(graph, resolution, seed, objective): all randomness is the seeded node
permutations handed to the kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .metrics import TimeSeries
from .slicing import ACCUMULATIVE, GraphView, Slice, SliceSpec

MODULARITY = "modularity"
CPM = "cpm"


@dataclass
class CommunityPartition:
    """Node-to-community assignment for one slice.

    ``membership`` maps compact node positions (rows of ``active``) to
    community ids 0..K-1, labeled in order of decreasing size (ties by
    smallest member). ``sizes`` is sorted descending.
    """

    slice_index: int
    active: np.ndarray
    membership: np.ndarray
    sizes: np.ndarray
    quality: float
    resolution: float
    seed: int
    objective: str
    degenerate: bool = False
    quality_trace: list = field(default_factory=list)
    users: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_communities(self) -> int:
        return self.sizes.shape[0]

    @property
    def n_active(self) -> int:
        return self.active.shape[0]

    def members(self, community_id: int) -> np.ndarray:
        """Vocabulary indices of one community's members."""
        return self.active[self.membership == community_id]

    @property
    def assignment(self) -> dict:
        """vertex -> community id map (user ids when the vocabulary is known)."""
        keys = (self.users[self.active] if self.users is not None
                else self.active)
        return {k: int(c) for k, c in zip(keys.tolist(), self.membership.tolist())}


def _csr_from_edges(n: int, eu, ev, w):
    """Symmetric CSR over compact nodes from undirected unique edges."""
    deg = np.bincount(eu, minlength=n) + np.bincount(ev, minlength=n)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(deg, out=indptr[1:])
    heads = np.concatenate([eu, ev])
    tails = np.concatenate([ev, eu])
    ws = np.concatenate([w, w]).astype(np.float64)
    order = np.argsort(heads, kind="stable")
    return indptr, tails[order], ws[order]


def _quality(membership, eu, ev, w, node_size, resolution, objective) -> float:
    """Objective value of a flat partition over the original simple graph."""
    intra = membership[eu] == membership[ev]
    n_comm = int(membership.max()) + 1 if membership.size else 0
    w_in = np.bincount(membership[eu[intra]], weights=w[intra], minlength=n_comm)
    if objective == CPM:
        s = np.bincount(membership, weights=node_size.astype(np.float64),
                        minlength=n_comm)
        return float((w_in - resolution * s * (s - 1) / 2.0).sum())
    deg = np.zeros(membership.shape[0], dtype=np.float64)
    np.add.at(deg, eu, w)
    np.add.at(deg, ev, w)
    m2 = deg.sum()
    if m2 == 0:
        return 0.0
    tot = np.bincount(membership, weights=deg, minlength=n_comm)
    return float((2.0 * w_in / m2 - resolution * (tot / m2) ** 2).sum())


def _split_disconnected(membership, eu, ev, kernels) -> np.ndarray:
    """Split any community that is not internally connected.

    Splitting a disconnected community along its components never decreases
    modularity or CPM, so this is a safe enforcement of the connectivity
    contract.
    """
    n = membership.shape[0]
    intra = membership[eu] == membership[ev]
    roots = kernels.component_roots(n, eu[intra], ev[intra])
    key = membership * np.int64(n) + roots
    _, new = np.unique(key, return_inverse=True)
    return new.astype(np.int64)


def _canonical_labels(membership: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Relabel communities by decreasing size, ties by smallest member."""
    n_comm = int(membership.max()) + 1 if membership.size else 0
    sizes = np.bincount(membership, minlength=n_comm)
    first = np.full(n_comm, membership.shape[0], dtype=np.int64)
    np.minimum.at(first, membership, np.arange(membership.shape[0], dtype=np.int64))
    order = np.lexsort((first, -sizes))
    relabel = np.empty(n_comm, dtype=np.int64)
    relabel[order] = np.arange(n_comm, dtype=np.int64)
    return relabel[membership], sizes[order]


def leiden_partition(slice_or_view, resolution: float = 1.0, seed: int = 42,
                     objective: str = MODULARITY, weighted: bool = False,
                     slice_index: int = 0, users: np.ndarray | None = None,
                     max_levels: int = 32) -> CommunityPartition:
    """Detect communities on a slice's simple graph.

    ``weighted=True`` uses contact multiplicities as edge weights; the default
    treats contacts between a pair as one unweighted edge. An edgeless input
    yields the degenerate all-singletons partition, flagged.
    """
    if objective not in (MODULARITY, CPM):
        raise ValueError(f"unknown objective: {objective!r}")
    view = slice_or_view if isinstance(slice_or_view, GraphView) else slice_or_view.view()
    if users is None and isinstance(slice_or_view, Slice):
        users = slice_or_view._graph.users
    if slice_index == 0 and isinstance(slice_or_view, Slice):
        slice_index = slice_or_view.index

    n = view.n_active
    eu0 = view.edge_u
    ev0 = view.edge_v
    w0 = (view.edge_mult.astype(np.float64) if weighted
          else np.ones(view.n_simple_edges, dtype=np.float64))
    node_size0 = np.ones(n, dtype=np.int64)

    if view.n_simple_edges == 0:
        sizes = np.ones(n, dtype=np.int64)
        return CommunityPartition(slice_index, view.active,
                                  np.arange(n, dtype=np.int64), sizes,
                                  0.0, resolution, seed, objective,
                                  degenerate=True, users=users)

    kernels = _kernels.active
    rng = np.random.default_rng(np.random.SeedSequence([seed, slice_index]))

    # level state
    eu, ev, w = eu0, ev0, w0
    self_w = np.zeros(n, dtype=np.float64)
    node_size = node_size0.astype(np.float64)
    n_level = n
    flat = np.arange(n, dtype=np.int64)  # original node -> current supernode
    init_comm = np.arange(n_level, dtype=np.int64)

    quality_trace: list[float] = []
    final_membership = None

    for _level in range(max_levels):
        indptr, indices, weights = _csr_from_edges(n_level, eu, ev, w)
        strength = np.zeros(n_level, dtype=np.float64)
        np.add.at(strength, eu, w)
        np.add.at(strength, ev, w)
        strength += 2.0 * self_w
        m2 = strength.sum()

        if MODULARITY == objective:
            node_w = strength
            norm = m2 if m2 > 0 else 1.0
        else:
            node_w = node_size
            norm = 1.0

        comm = init_comm.copy()
        n_comm_ids = n_level
        comm_tot = np.zeros(n_comm_ids, dtype=np.float64)
        np.add.at(comm_tot, comm, node_w)
        comm_count = np.bincount(comm, minlength=n_comm_ids).astype(np.int64)
        free_mask = comm_count == 0
        free_ids = np.flatnonzero(free_mask).astype(np.int64)
        free_buf = np.empty(n_level, dtype=np.int64)
        free_buf[:free_ids.shape[0]] = free_ids
        order = rng.permutation(n_level).astype(np.int64)

        moves, _ = kernels.local_move(indptr, indices, weights, node_w, comm,
                                      comm_tot, comm_count, free_buf,
                                      free_ids.shape[0], order,
                                      float(resolution), float(norm))

        membership = comm[flat]
        _, membership = np.unique(membership, return_inverse=True)
        membership = membership.astype(np.int64)
        quality_trace.append(_quality(membership, eu0, ev0, w0, node_size0,
                                      resolution, objective))
        final_membership = membership

        uniq_comms = np.unique(comm)
        if moves == 0 or uniq_comms.shape[0] == n_level:
            break

        # refinement within macro communities, then aggregation
        macro_tot = np.zeros(n_level, dtype=np.float64)
        np.add.at(macro_tot, comm, node_w)
        r_order = rng.permutation(n_level).astype(np.int64)
        refined = kernels.refine(indptr, indices, weights, node_w, comm,
                                 macro_tot, r_order, float(resolution),
                                 float(norm))
        r_ids, r_labels = np.unique(refined, return_inverse=True)
        n_new = r_ids.shape[0]
        if n_new == n_level:
            break

        intra = r_labels[eu] == r_labels[ev]
        new_self = np.bincount(r_labels[eu[intra]], weights=w[intra],
                               minlength=n_new)
        new_self += np.bincount(r_labels, weights=self_w, minlength=n_new)
        cu = r_labels[eu[~intra]]
        cv = r_labels[ev[~intra]]
        cw = w[~intra]
        a = np.minimum(cu, cv)
        b = np.maximum(cu, cv)
        key = a * np.int64(n_new) + b
        ukey, inv = np.unique(key, return_inverse=True)
        w_new = np.bincount(inv, weights=cw)
        eu = (ukey // n_new).astype(np.int64)
        ev = (ukey % n_new).astype(np.int64)
        w = w_new
        self_w = new_self
        node_size = np.bincount(r_labels, weights=node_size, minlength=n_new)
        # supernode's macro community (any member works: refined <= macro),
        # compacted, seeds the next level
        rep = np.empty(n_new, dtype=np.int64)
        rep[r_labels] = np.arange(n_level, dtype=np.int64)
        _, init_comm = np.unique(comm[rep], return_inverse=True)
        init_comm = init_comm.astype(np.int64)
        flat = r_labels[flat]
        n_level = n_new

    membership = _split_disconnected(final_membership, eu0, ev0, kernels)
    membership, sizes = _canonical_labels(membership)
    q = _quality(membership, eu0, ev0, w0, node_size0, resolution, objective)
    quality_trace.append(q)
    return CommunityPartition(slice_index, view.active, membership, sizes,
                              q, resolution, seed, objective,
                              quality_trace=quality_trace, users=users)


def connected_components(slice_or_view) -> np.ndarray:
    """Connected-component sizes of the simple graph, largest first."""
    view = slice_or_view if isinstance(slice_or_view, GraphView) else slice_or_view.view()
    if view.n_active == 0:
        return np.empty(0, dtype=np.int64)
    roots = _kernels.active.component_roots(view.n_active, view.edge_u, view.edge_v)
    _, counts = np.unique(roots, return_counts=True)
    return np.sort(counts)[::-1].astype(np.int64)


def component_labels(slice_or_view) -> np.ndarray:
    view = slice_or_view if isinstance(slice_or_view, GraphView) else slice_or_view.view()
    if view.n_active == 0:
        return np.empty(0, dtype=np.int64)
    roots = _kernels.active.component_roots(view.n_active, view.edge_u, view.edge_v)
    _, labels = np.unique(roots, return_inverse=True)
    return labels.astype(np.int64)


def cluster_size_distribution(partitions: Iterable[CommunityPartition]
                              ) -> dict[int, float]:
    """Histogram of community sizes averaged over slices."""
    parts = list(partitions)
    if not parts:
        raise ValueError("no partitions given")
    acc: dict[int, int] = {}
    for p in parts:
        for s in p.sizes.tolist():
            acc[s] = acc.get(s, 0) + 1
    return {s: c / len(parts) for s, c in sorted(acc.items())}


def largest_cluster_series(partitions: Sequence[CommunityPartition]) -> TimeSeries:
    """Relative size of the largest community per slice."""
    idx = np.array([p.slice_index for p in partitions], dtype=np.int64)
    vals = np.array([(p.sizes[0] / p.n_active) if p.n_active else 0.0
                     for p in partitions], dtype=np.float64)
    return TimeSeries(idx, vals, "largest_cluster_rel_size")


def top_decile_cluster_fraction(partitions: Sequence[CommunityPartition],
                                mode: str = "count") -> TimeSeries:
    """Fraction of users inside the top 10% of clusters per slice.

    ``mode="count"`` takes the ceil(K/10) largest of K clusters (default);
    ``mode="size_percentile"`` instead takes clusters at or above the 90th
    size percentile.
    """
    vals = np.zeros(len(partitions), dtype=np.float64)
    for i, p in enumerate(partitions):
        if p.n_communities == 0 or p.n_active == 0:
            continue
        if mode == "count":
            k = math.ceil(0.1 * p.n_communities - 1e-9)
            k = min(max(k, 1), p.n_communities)
            vals[i] = p.sizes[:k].sum() / p.n_active
        elif mode == "size_percentile":
            cut = np.quantile(p.sizes, 0.9, method="higher")
            vals[i] = p.sizes[p.sizes >= cut].sum() / p.n_active
        else:
            raise ValueError(f"unknown top-decile mode: {mode!r}")
    idx = np.array([p.slice_index for p in partitions], dtype=np.int64)
    return TimeSeries(idx, vals, f"top_decile_fraction_{mode}")


@dataclass
class ClusterTrackRecord:
    slice_index: int
    community_id: int
    jaccard_prev: float
    changed: bool


def track_largest_cluster(partitions: Sequence[CommunityPartition],
                          spec: SliceSpec) -> list[ClusterTrackRecord]:
    """Membership overlap of consecutive largest communities.

    Requires accumulative slices: temporal slices drop inactive vertices, so
    cluster identity cannot be followed across them.
    """
    if spec.mode != ACCUMULATIVE:
        raise ValueError(
            "cluster tracking needs accumulative slices; temporal slices drop "
            "inactive vertices so communities cannot be matched across slices")
    out: list[ClusterTrackRecord] = []
    prev: np.ndarray | None = None
    for p in partitions:
        if p.n_communities == 0:
            out.append(ClusterTrackRecord(p.slice_index, -1, 0.0, False))
            prev = None
            continue
        members = p.members(0)  # canonical label 0 = largest
        if prev is None:
            jac = 1.0
        else:
            inter = np.intersect1d(prev, members, assume_unique=True).shape[0]
            union = prev.shape[0] + members.shape[0] - inter
            jac = inter / union if union else 1.0
        out.append(ClusterTrackRecord(p.slice_index, 0, float(jac), jac < 0.5))
        prev = members
    return out


def partition_slices(slices: Sequence[Slice], resolution: float = 1.0,
                     seed: int = 42, objective: str = MODULARITY,
                     weighted: bool = False, threads: int = 1
                     ) -> list[CommunityPartition]:
    """Partition every slice; deterministic regardless of thread count.

    Per-slice seeds derive from (seed, slice index). Views for accumulative
    sequences are materialized incrementally, so workers are fed with a
    bounded number of in-flight views to cap memory.
    """
    from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait

    from .slicing import iter_views

    slices = list(slices)
    if not slices:
        return []
    users = slices[0]._graph.users
    results: list[CommunityPartition | None] = [None] * len(slices)

    def work(item):
        i, s, view = item
        return i, leiden_partition(view, resolution=resolution, seed=seed,
                                   objective=objective, weighted=weighted,
                                   slice_index=s.index, users=users)

    items = ((i, s, v) for i, (s, v) in enumerate(zip(slices, iter_views(slices))))
    if threads <= 1:
        for item in items:
            i, part = work(item)
            results[i] = part
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            pending = set()
            for item in items:
                while len(pending) >= 2 * threads:
                    done, pending = wait(pending, return_when=FIRST_COMPLETED)
                    for f in done:
                        i, part = f.result()
                        results[i] = part
                pending.add(pool.submit(work, item))
            for f in pending:
                i, part = f.result()
                results[i] = part
    return results  # type: ignore[return-value]
