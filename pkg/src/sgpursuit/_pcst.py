"""Goemans-Williamson growth for the prize-collecting Steiner tree problem.

Unrooted variant: moats grow around every cluster that still has unpaid
prize; an edge joins two clusters once the moats covering it add up to its
cost; growth stops when at most one cluster is active.  Each tree of the
resulting forest is strongly pruned to its best net-value subtree and the best
tree overall is returned.

Event bookkeeping
-----------------
Every edge is split into two *parts*, one per endpoint.  A part either sits in
the global event heap with an absolute firing time, or, when its cluster is
inactive, in that cluster's *frozen* list, meaning "fire as soon as the
cluster grows again".  For each live edge the invariant

    growth left before part u fires + growth left before part v fires
        <= remaining slack of the edge

holds, so some part always fires no later than the edge becomes tight.  A
firing part re-evaluates the edge against its true slack.  Node loads are kept
as ``offset[v] + growth(cluster(v))``; merges rebase the smaller member list,
and frozen lists are concatenated in O(1).  Small helpers are written out
inline: numba call overhead on array arguments dominated the runtime.
"""

from __future__ import annotations

import heapq

import numpy as np
from numba import njit

_EDGE = 0
_DEACTIVATE = 1


@njit(cache=True)
def _gw_forest(n, eu, ev, costs, prizes):
    m = eu.shape[0]
    cl = np.arange(n)
    off = np.zeros(n)
    active = prizes > 0.0
    t_base = np.zeros(n)
    g_base = np.zeros(n)
    p_base = prizes.copy()
    mhead = np.arange(n)
    mtail = np.arange(n)
    mnext = np.full(n, -1)
    msize = np.ones(n, dtype=np.int64)
    fhead = np.full(n, -1)
    ftail = np.full(n, -1)
    fnext = np.full(2 * m, -1)
    infrozen = np.zeros(2 * m, dtype=np.bool_)
    version = np.zeros(n, dtype=np.int64)
    stamp = np.zeros(2 * m, dtype=np.int64)
    forest = np.empty(max(n - 1, 1), dtype=np.int64)
    n_forest = 0
    n_active = 0
    for v in range(n):
        if active[v]:
            n_active += 1

    heap = [(0.0, 0, 0, 0)]
    heap.pop()

    # pending edge evaluations: processed through an explicit queue so that
    # merging can be written inline
    for v in range(n):
        if active[v]:
            heapq.heappush(heap, (p_base[v], _DEACTIVATE, v, version[v]))

    for e in range(m):
        u = eu[e]
        w = ev[e]
        if active[u] or active[w]:
            heapq.heappush(heap, (0.0, _EDGE, 2 * e, stamp[2 * e]))
        else:
            if not infrozen[2 * e]:
                infrozen[2 * e] = True
                fnext[2 * e] = -1
                if fhead[u] < 0:
                    fhead[u] = 2 * e
                else:
                    fnext[ftail[u]] = 2 * e
                ftail[u] = 2 * e
            if not infrozen[2 * e + 1]:
                infrozen[2 * e + 1] = True
                fnext[2 * e + 1] = -1
                if fhead[w] < 0:
                    fhead[w] = 2 * e + 1
                else:
                    fnext[ftail[w]] = 2 * e + 1
                ftail[w] = 2 * e + 1

    while n_active > 1 and len(heap) > 0:
        t, kind, ident, st = heapq.heappop(heap)
        if kind == _DEACTIVATE:
            c = ident
            if st != version[c] or not active[c]:
                continue
            if active[c]:
                g_base[c] += t - t_base[c]
                p_base[c] -= t - t_base[c]
            t_base[c] = t
            active[c] = False
            p_base[c] = 0.0
            version[c] += 1
            n_active -= 1
            continue
        part = ident
        if st != stamp[part]:
            continue
        e = part >> 1
        u = eu[e]
        w = ev[e]
        a = cl[u]
        b = cl[w]
        stamp[2 * e] += 1
        stamp[2 * e + 1] += 1
        if a == b:
            continue
        ga = g_base[a] + (t - t_base[a] if active[a] else 0.0)
        gb = g_base[b] + (t - t_base[b] if active[b] else 0.0)
        rem = costs[e] - (off[u] + ga) - (off[w] + gb)
        if rem > 1e-12 * costs[e]:
            if active[a] and active[b]:
                heapq.heappush(heap, (t + 0.5 * rem, _EDGE, 2 * e, stamp[2 * e]))
                heapq.heappush(heap, (t + 0.5 * rem, _EDGE, 2 * e + 1, stamp[2 * e + 1]))
            elif active[a]:
                heapq.heappush(heap, (t + rem, _EDGE, 2 * e, stamp[2 * e]))
                if not infrozen[2 * e + 1]:
                    infrozen[2 * e + 1] = True
                    fnext[2 * e + 1] = -1
                    if fhead[b] < 0:
                        fhead[b] = 2 * e + 1
                    else:
                        fnext[ftail[b]] = 2 * e + 1
                    ftail[b] = 2 * e + 1
            elif active[b]:
                if not infrozen[2 * e]:
                    infrozen[2 * e] = True
                    fnext[2 * e] = -1
                    if fhead[a] < 0:
                        fhead[a] = 2 * e
                    else:
                        fnext[ftail[a]] = 2 * e
                    ftail[a] = 2 * e
                heapq.heappush(heap, (t + rem, _EDGE, 2 * e + 1, stamp[2 * e + 1]))
            else:
                if not infrozen[2 * e]:
                    infrozen[2 * e] = True
                    fnext[2 * e] = -1
                    if fhead[a] < 0:
                        fhead[a] = 2 * e
                    else:
                        fnext[ftail[a]] = 2 * e
                    ftail[a] = 2 * e
                if not infrozen[2 * e + 1]:
                    infrozen[2 * e + 1] = True
                    fnext[2 * e + 1] = -1
                    if fhead[b] < 0:
                        fhead[b] = 2 * e + 1
                    else:
                        fnext[ftail[b]] = 2 * e + 1
                    ftail[b] = 2 * e + 1
            continue

        # the edge is tight: merge clusters a and b
        forest[n_forest] = e
        n_forest += 1
        if active[a]:
            g_base[a] += t - t_base[a]
            p_base[a] -= t - t_base[a]
        t_base[a] = t
        if active[b]:
            g_base[b] += t - t_base[b]
            p_base[b] -= t - t_base[b]
        t_base[b] = t
        was_active = int(active[a]) + int(active[b])
        # parts waiting on a reactivated cluster fire now
        for c in (a, b):
            if not active[c]:
                q = fhead[c]
                while q >= 0:
                    nxt = fnext[q]
                    infrozen[q] = False
                    stamp[q] += 1
                    heapq.heappush(heap, (t, _EDGE, q, stamp[q]))
                    q = nxt
                fhead[c] = -1
                ftail[c] = -1
        if msize[a] < msize[b]:
            a, b = b, a
        shift = g_base[b] - g_base[a]
        q = mhead[b]
        while q >= 0:
            off[q] += shift
            cl[q] = a
            q = mnext[q]
        mnext[mtail[a]] = mhead[b]
        mtail[a] = mtail[b]
        msize[a] += msize[b]
        if fhead[b] >= 0:
            if fhead[a] < 0:
                fhead[a] = fhead[b]
            else:
                fnext[ftail[a]] = fhead[b]
            ftail[a] = ftail[b]
        fhead[b] = -1
        ftail[b] = -1
        p_base[a] = p_base[a] + p_base[b]
        active[a] = True
        active[b] = False
        version[a] += 1
        version[b] += 1
        n_active += 1 - was_active
        heapq.heappush(heap, (t + p_base[a], _DEACTIVATE, a, version[a]))
    return forest[:n_forest]


@njit(cache=True)
def _best_pruned_tree(n, eu, ev, costs, prizes, forest):
    # forest adjacency in CSR form
    deg = np.zeros(n + 1, dtype=np.int64)
    for e in forest:
        deg[eu[e] + 1] += 1
        deg[ev[e] + 1] += 1
    indptr = np.cumsum(deg)
    nbr = np.empty(2 * forest.shape[0], dtype=np.int64)
    eid = np.empty(2 * forest.shape[0], dtype=np.int64)
    fill = indptr[:-1].copy()
    for e in forest:
        u = eu[e]
        w = ev[e]
        nbr[fill[u]] = w
        eid[fill[u]] = e
        fill[u] += 1
        nbr[fill[w]] = u
        eid[fill[w]] = e
        fill[w] += 1

    seen = np.zeros(n, dtype=np.bool_)
    parent = np.full(n, -1, dtype=np.int64)
    pedge = np.full(n, -1, dtype=np.int64)
    down = np.zeros(n)
    full = np.zeros(n)
    order = np.empty(n, dtype=np.int64)

    best_val = -1.0
    best_node = -1
    for root in range(n):
        if seen[root] or prizes[root] <= 0.0 and indptr[root + 1] == indptr[root]:
            continue
        # BFS order of this tree
        head = 0
        tail = 1
        order[0] = root
        seen[root] = True
        parent[root] = -1
        while head < tail:
            u = order[head]
            head += 1
            for k in range(indptr[u], indptr[u + 1]):
                w = nbr[k]
                if not seen[w]:
                    seen[w] = True
                    parent[w] = u
                    pedge[w] = eid[k]
                    order[tail] = w
                    tail += 1
        for i in range(tail - 1, -1, -1):
            v = order[i]
            val = prizes[v]
            for k in range(indptr[v], indptr[v + 1]):
                w = nbr[k]
                if parent[w] == v and w != root:
                    gain = down[w] - costs[eid[k]]
                    if gain > 0.0:
                        val += gain
            down[v] = val
        full[root] = down[root]
        for i in range(1, tail):
            v = order[i]
            u = parent[v]
            c = costs[pedge[v]]
            up = full[u] - max(0.0, down[v] - c)
            full[v] = down[v] + max(0.0, up - c)
        for i in range(tail):
            v = order[i]
            if full[v] > best_val or (full[v] == best_val and v < best_node):
                best_val = full[v]
                best_node = v

    # re-root at the best node's tree and collect the kept subtree
    # (parent/down/full from the component pass stay valid for that tree)
    keep = np.zeros(n, dtype=np.bool_)
    keep[best_node] = True
    stack = np.empty(n, dtype=np.int64)
    stack[0] = best_node
    top = 1
    while top > 0:
        top -= 1
        u = stack[top]
        for k in range(indptr[u], indptr[u + 1]):
            w = nbr[k]
            if keep[w]:
                continue
            c = costs[eid[k]]
            if parent[w] == u:
                side = down[w]
            else:
                side = full[w] - max(0.0, down[u] - c)
            if side - c > 0.0:
                keep[w] = True
                stack[top] = w
                top += 1
    return np.nonzero(keep)[0]


def pcst(n, eu, ev, costs, prizes):
    """Approximate unrooted prize-collecting Steiner tree.

    Returns the sorted node ids of the chosen tree; an all-zero prize vector
    yields an empty array.  The tree's edges are implied by the induced
    subgraph (callers only use node sets).
    """
    prizes = np.ascontiguousarray(prizes, dtype=float)
    if not np.any(prizes > 0):
        return np.empty(0, dtype=np.int64)
    eu = np.ascontiguousarray(eu, dtype=np.int64)
    ev = np.ascontiguousarray(ev, dtype=np.int64)
    costs = np.ascontiguousarray(costs, dtype=float)
    forest = _gw_forest(n, eu, ev, costs, prizes)
    return _best_pruned_tree(n, eu, ev, costs, prizes, forest).astype(np.int64)


@njit(cache=True)
def path_region(n, indptr, indices, sources, limit):
    """Sources plus nodes on a path of <= ``limit`` edges between two of them.

    A multi-source BFS keeps the two nearest distinct sources of every node;
    a node qualifies when those two distances sum to at most ``limit``.
    Returns the sorted nodes and their hop distance to the nearest source.
    """
    d1 = np.full(n, -1, dtype=np.int64)
    s1 = np.full(n, -1, dtype=np.int64)
    d2 = np.full(n, -1, dtype=np.int64)
    s2 = np.full(n, -1, dtype=np.int64)
    qn = np.empty(2 * n, dtype=np.int64)
    qs = np.empty(2 * n, dtype=np.int64)
    qd = np.empty(2 * n, dtype=np.int64)
    tail = 0
    for s in sources:
        if s1[s] < 0:
            s1[s] = s
            d1[s] = 0
            qn[tail] = s
            qs[tail] = s
            qd[tail] = 0
            tail += 1
    head = 0
    while head < tail:
        u, src, d = qn[head], qs[head], qd[head] + 1
        head += 1
        if d >= limit:
            continue
        for j in range(indptr[u], indptr[u + 1]):
            w = indices[j]
            if s1[w] < 0:
                s1[w] = src
                d1[w] = d
            elif s1[w] != src and s2[w] < 0:
                s2[w] = src
                d2[w] = d
            else:
                continue
            qn[tail] = w
            qs[tail] = src
            qd[tail] = d
            tail += 1
    out = np.empty(n, dtype=np.int64)
    m = 0
    for v in range(n):
        if d1[v] == 0 or (s2[v] >= 0 and d1[v] + d2[v] <= limit):
            out[m] = v
            m += 1
    return out[:m], d1[out[:m]]
