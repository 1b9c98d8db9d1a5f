"""Hot loops shared by the compiled and interpreted kernel lanes.

Every function here is written in the numba-compilable subset of Python/numpy:
arrays in, arrays out, no Python objects. The dispatch package loads this file
twice — once as-is (interpreted lane) and once wrapped in ``numba.njit``
(compiled lane) — so both lanes execute the exact same statements and produce
bit-identical results.

No function here draws random numbers. Callers pass pre-generated permutations
and uniform buffers, which keeps the two lanes and any threading layout
deterministic.
"""

import numpy as np


# ---------------------------------------------------------------------------
# connected components (union-find, path halving + union by size)
# ---------------------------------------------------------------------------

def uf_root(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


def component_roots(n, src, dst):
    """Root label per node for the undirected graph given as edge endpoints."""
    parent = np.arange(n, dtype=np.int64)
    size = np.ones(n, dtype=np.int64)
    for e in range(src.shape[0]):
        ra = uf_root(parent, src[e])
        rb = uf_root(parent, dst[e])
        if ra != rb:
            if size[ra] < size[rb]:
                ra, rb = rb, ra
            parent[rb] = ra
            size[ra] += size[rb]
    out = np.empty(n, dtype=np.int64)
    for v in range(n):
        out[v] = uf_root(parent, v)
    return out


# ---------------------------------------------------------------------------
# Leiden phases on CSR graphs
#
# Both quality objectives reduce to the same move score:
#   score(v -> c) = k_{v,c} - resolution * node_w
#                   [v] * comm_tot[c without v] / norm
# modularity: node_w = strength, comm_tot = community strength, norm = 2m
# CPM:        node_w = node size, comm_tot = community size,     norm = 1
# Self-loop weight of v contributes identically to every candidate community
# and is therefore omitted; CSR arrays carry off-diagonal edges only.
# ---------------------------------------------------------------------------

def local_move(indptr, indices, weights, node_w, comm, comm_tot, comm_count,
               free_ids, n_free, order, resolution, norm):
    """Queue-based local moving. Mutates comm/comm_tot/comm_count in place.

    Returns the number of moves performed. ``free_ids[:n_free]`` holds
    community ids currently unused (candidates for moves to a new community).
    """
    n = comm.shape[0]
    w_to = np.zeros(n, dtype=np.float64)
    touched = np.empty(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    in_q = np.zeros(n, dtype=np.uint8)

    head = 0
    tail = 0
    for i in range(n):
        v = order[i]
        queue[tail] = v
        tail = (tail + 1) % n
        in_q[v] = 1
    pending = n

    moves = 0
    processed = 0
    budget = 64 * n + 1024  # safety cap; convergence normally happens well below
    while pending > 0 and processed < budget:
        v = queue[head]
        head = (head + 1) % n
        pending -= 1
        in_q[v] = 0
        processed += 1

        cv = comm[v]
        nt = 0
        for ei in range(indptr[v], indptr[v + 1]):
            cu = comm[indices[ei]]
            if w_to[cu] == 0.0:
                touched[nt] = cu
                nt += 1
            w_to[cu] += weights[ei]

        wv = node_w[v]
        best_c = cv
        best_score = w_to[cv] - resolution * wv * (comm_tot[cv] - wv) / norm
        for ti in range(nt):
            c = touched[ti]
            if c == cv:
                continue
            s = w_to[c] - resolution * wv * comm_tot[c] / norm
            if s > best_score:
                best_score = s
                best_c = c
        # moving to a fresh empty community scores exactly 0
        if best_score < 0.0 and comm_count[cv] > 1 and n_free > 0:
            best_score = 0.0
            best_c = free_ids[n_free - 1]

        if best_c != cv:
            comm_tot[cv] -= wv
            comm_count[cv] -= 1
            if comm_count[cv] == 0:
                free_ids[n_free] = cv
                n_free += 1
            if n_free > 0 and best_c == free_ids[n_free - 1]:
                n_free -= 1
            comm_tot[best_c] += wv
            comm_count[best_c] += 1
            comm[v] = best_c
            moves += 1
            for ei in range(indptr[v], indptr[v + 1]):
                u = indices[ei]
                if comm[u] != best_c and in_q[u] == 0:
                    queue[tail] = u
                    tail = (tail + 1) % n
                    in_q[u] = 1
                    pending += 1

        for ti in range(nt):
            w_to[touched[ti]] = 0.0
    return moves, n_free


def refine(indptr, indices, weights, node_w, macro, macro_tot, order,
           resolution, norm):
    """Refinement phase: merge singletons inside their macro community.

    Starts from a singleton partition and greedily merges each still-singleton
    node into the best positively-scoring refined community it has an edge to,
    restricted to its macro community. Merging only along edges keeps every
    refined community internally connected.
    """
    n = macro.shape[0]
    refined = np.arange(n, dtype=np.int64)
    rtot = node_w.copy()
    rcount = np.ones(n, dtype=np.int64)
    w_to = np.zeros(n, dtype=np.float64)
    touched = np.empty(n, dtype=np.int64)

    for i in range(n):
        v = order[i]
        if rcount[refined[v]] > 1:
            continue
        mv = macro[v]
        wv = node_w[v]
        k_macro = 0.0
        nt = 0
        for ei in range(indptr[v], indptr[v + 1]):
            u = indices[ei]
            if macro[u] != mv:
                continue
            k_macro += weights[ei]
            ru = refined[u]
            if w_to[ru] == 0.0:
                touched[nt] = ru
                nt += 1
            w_to[ru] += weights[ei]

        # node must be well connected within its macro community
        if k_macro >= resolution * wv * (macro_tot[mv] - wv) / norm:
            best_c = refined[v]
            best_score = 0.0
            for ti in range(nt):
                c = touched[ti]
                if c == refined[v]:
                    continue
                s = w_to[c] - resolution * wv * rtot[c] / norm
                if s > best_score:
                    best_score = s
                    best_c = c
            if best_c != refined[v]:
                rtot[refined[v]] -= wv
                rcount[refined[v]] -= 1
                rtot[best_c] += wv
                rcount[best_c] += 1
                refined[v] = best_c

        for ti in range(nt):
            w_to[touched[ti]] = 0.0
    return refined


# ---------------------------------------------------------------------------
# Fenwick trees packed per block, used by the synthetic generator
# ---------------------------------------------------------------------------

def fen_build(fen, off, m):
    """Initialize a 1-indexed Fenwick block whose leaves are already stored."""
    for i in range(1, m + 1):
        j = i + (i & (-i))
        if j <= m:
            fen[off + j] += fen[off + i]


def fen_add(fen, off, m, i, delta):
    while i <= m:
        fen[off + i] += delta
        i += i & (-i)


def fen_descend(fen, off, m, top_bit, target):
    """Smallest 1-based index whose prefix sum exceeds ``target``."""
    pos = 0
    bit = top_bit
    rem = target
    while bit > 0:
        nxt = pos + bit
        if nxt <= m and fen[off + nxt] <= rem:
            rem -= fen[off + nxt]
            pos = nxt
        bit >>= 1
    if pos >= m:
        pos = m - 1
    return pos + 1


# ---------------------------------------------------------------------------
# synthetic contact generator core
# ---------------------------------------------------------------------------

def synth_fill(src, dst, ts, comm_off, merge_order, merge_times, fen, fen_off,
               top_bit, comm_w, counts, uniforms, pa, fstate, istate):
    """Fill src/dst with preferential-attachment contacts.

    Users of community c occupy index block [comm_off[c], comm_off[c+1]).
    Weight of a user is 1 + pa * contact_count, kept in a per-community
    Fenwick tree. Communities merge into one shared pool at their merge time;
    partners are drawn from the actor's pool only.

    fstate = [W_elig, mpool_W]; istate = [rng_pos, merges_done, mpool_n, event_idx].
    Returns 1 when all events are generated, 0 when the uniform buffer ran out
    (caller extends the buffer and re-invokes; all state lives in the arrays).
    """
    n_events = src.shape[0]
    k = comm_off.shape[0] - 1
    n_uni = uniforms.shape[0]

    w_elig = fstate[0]
    mpool_w = fstate[1]
    pos = istate[0]
    merged_done = istate[1]
    mpool_n = istate[2]
    e = istate[3]

    merged = np.zeros(k, dtype=np.uint8)
    for i in range(merged_done):
        merged[merge_order[i]] = 1

    while e < n_events:
        t = ts[e]
        # apply merges that have come due
        while merged_done < k and merge_times[merge_order[merged_done]] <= t:
            c = merge_order[merged_done]
            merged[c] = 1
            mpool_n += comm_off[c + 1] - comm_off[c]
            mpool_w += comm_w[c]
            merged_done += 1
            # eligibility can change for every merged community: recompute
            w_elig = 0.0
            for ci in range(k):
                nc = comm_off[ci + 1] - comm_off[ci]
                if merged[ci] == 1:
                    if mpool_n >= 2:
                        w_elig += comm_w[ci]
                elif nc >= 2:
                    w_elig += comm_w[ci]

        if pos >= n_uni:
            fstate[0] = w_elig
            fstate[1] = mpool_w
            istate[0] = pos
            istate[1] = merged_done
            istate[2] = mpool_n
            istate[3] = e
            return 0

        # --- source: pick an eligible community, then a member ---
        r = uniforms[pos] * w_elig
        pos += 1
        cs = -1
        acc = 0.0
        for ci in range(k):
            nc = comm_off[ci + 1] - comm_off[ci]
            if merged[ci] == 1:
                if mpool_n < 2:
                    continue
            elif nc < 2:
                continue
            acc += comm_w[ci]
            if r < acc:
                cs = ci
                break
        if cs < 0:  # float edge: fall back to last eligible
            for ci in range(k - 1, -1, -1):
                nc = comm_off[ci + 1] - comm_off[ci]
                if merged[ci] == 1:
                    if mpool_n >= 2:
                        cs = ci
                        break
                elif nc >= 2:
                    cs = ci
                    break
        m_cs = comm_off[cs + 1] - comm_off[cs]
        local = r - (acc - comm_w[cs])
        if local < 0.0:
            local = 0.0
        s_user = comm_off[cs] + fen_descend(fen, fen_off[cs], m_cs,
                                            top_bit[cs], local) - 1

        # --- target: same pool as the source, must differ ---
        t_user = -1
        while t_user < 0:
            if pos >= n_uni:
                fstate[0] = w_elig
                fstate[1] = mpool_w
                istate[0] = pos
                istate[1] = merged_done
                istate[2] = mpool_n
                istate[3] = e
                return 0
            if merged[cs] == 1:
                r2 = uniforms[pos] * mpool_w
                pos += 1
                ct = -1
                acc2 = 0.0
                for ci in range(k):
                    if merged[ci] == 0:
                        continue
                    acc2 += comm_w[ci]
                    if r2 < acc2:
                        ct = ci
                        break
                if ct < 0:
                    for ci in range(k - 1, -1, -1):
                        if merged[ci] == 1:
                            ct = ci
                            break
                local2 = r2 - (acc2 - comm_w[ct])
                if local2 < 0.0:
                    local2 = 0.0
            else:
                ct = cs
                local2 = uniforms[pos] * comm_w[ct]
                pos += 1
            m_ct = comm_off[ct + 1] - comm_off[ct]
            cand = comm_off[ct] + fen_descend(fen, fen_off[ct], m_ct,
                                              top_bit[ct], local2) - 1
            if cand != s_user:
                t_user = cand

        src[e] = s_user
        dst[e] = t_user
        counts[s_user] += 1
        counts[t_user] += 1
        if pa > 0.0:
            fen_add(fen, fen_off[cs], m_cs, s_user - comm_off[cs] + 1, pa)
            fen_add(fen, fen_off[ct], comm_off[ct + 1] - comm_off[ct],
                    t_user - comm_off[ct] + 1, pa)
            for j in range(2):
                cc = cs if j == 0 else ct
                comm_w[cc] += pa
                if merged[cc] == 1:
                    mpool_w += pa
                    if mpool_n >= 2:
                        w_elig += pa
                elif comm_off[cc + 1] - comm_off[cc] >= 2:
                    w_elig += pa
        e += 1

    fstate[0] = w_elig
    fstate[1] = mpool_w
    istate[0] = pos
    istate[1] = merged_done
    istate[2] = mpool_n
    istate[3] = e
    return 1
