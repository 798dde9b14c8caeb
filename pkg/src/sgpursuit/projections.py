"""Head and tail projections onto connected node supports of bounded size.

Two backends are available:

``exact``
    Enumerates every connected node subset of size <= k.  Exponential, so it
    refuses graphs above a node cap (15 by default).  Head and tail
    approximation factors are both 1.
``pcst``
    Prize-collecting Steiner tree with node prizes ``x_i**2`` and uniform edge
    cost ``lam``.  ``lam`` starts at the k-th largest prize (the largest when
    at most k are positive) and moves by
    factors of 8 until the tree size is bracketed, then is bisected on a log
    scale.  The search stops once a tree has between ``k`` and
    ``relaxation * k`` nodes, holds every node of positive prize, the bracket
    is narrower than ``bisect_tol``, or two bisection steps in a row only
    reproduce the bracketing tree sizes.  If no tree fell in the window, the
    smallest oversized tree is pruned leaf by leaf to the budget.  Every tree
    seen within the relaxed budget is a candidate and the best one for the
    requested objective is returned.  Only positive-prize nodes and nodes on
    a path of fewer than ``relaxation * k`` nodes between two of them are
    searched: pruned trees within the budget use no other node.  Reported factors:
    ``c_T = sqrt(7)``, ``c_H = sqrt(1/14)``.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from ._pcst import path_region, pcst
from .graph import AttributedNetwork

BACKENDS = ("exact", "pcst")
MODES = ("head", "tail")
PCST_FACTORS = (math.sqrt(7.0), math.sqrt(1.0 / 14.0))


class ProjectionSizeError(ValueError):
    """The exact backend was asked to enumerate a graph above its node cap."""


@dataclass(frozen=True)
class TopologyConstraint:
    """Connected-subgraph model with at most ``k`` nodes and a projection backend."""

    k: int
    backend: str = "pcst"
    kind: str = "connected"
    relaxation: float = 2.0
    exact_cap: int = 15
    max_bisections: int = 32

    def __post_init__(self):
        if self.kind != "connected":
            raise ValueError(f"unsupported constraint kind {self.kind!r}; only 'connected' is implemented")
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k!r}")
        if self.relaxation < 1.0:
            raise ValueError("relaxation must be >= 1")

    @property
    def approx_factors(self) -> tuple[float, float]:
        """``(c_T, c_H)`` of the active backend."""
        return (1.0, 1.0) if self.backend == "exact" else PCST_FACTORS

    def relaxed_budget(self, n: int) -> int:
        if self.backend == "exact":
            return min(self.k, n)
        return min(n, int(math.ceil(self.relaxation * self.k)))

    def check(self, net: AttributedNetwork) -> None:
        if self.k > net.n:
            raise ValueError(f"k={self.k} exceeds the number of nodes n={net.n}")
        if self.backend == "exact" and net.n > self.exact_cap:
            raise ProjectionSizeError(
                f"exact projection enumerates connected subsets and is capped at n <= {self.exact_cap}; "
                f"this network has n={net.n} (use the pcst backend)"
            )


@dataclass(frozen=True)
class ProjectionResult:
    support: np.ndarray
    captured_mass: float
    residual: float
    backend_used: str
    relaxed_budget: int
    degenerate: bool = False

    def __len__(self):
        return self.support.size


def _result(x, support, backend, budget, degenerate=False) -> ProjectionResult:
    support = np.sort(np.asarray(support, dtype=np.int64))
    captured = float(np.sum(x[support] ** 2))
    total = float(np.sum(x**2))
    return ProjectionResult(
        support=support,
        captured_mass=math.sqrt(captured),
        residual=math.sqrt(max(total - captured, 0.0)),
        backend_used=backend,
        relaxed_budget=budget,
        degenerate=degenerate,
    )


def _check_vector(x, n) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"expected a vector of length {n}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("projection input contains non-finite values")
    return x


def _choose(cands, mode, tol):
    """Pick the best ``(mass_sq, nodes_tuple)`` under the mode's tie-break rule."""
    best_mass = max(c[0] for c in cands)
    tied = [c[1] for c in cands if c[0] >= best_mass - tol]
    if mode == "head":
        return min(tied, key=lambda s: (-len(s), s))
    return min(tied, key=lambda s: (len(s), s))


# ---------------------------------------------------------------------------
# exact enumeration


def connected_subsets(net: AttributedNetwork, k: int):
    """Yield every connected node subset of size <= k exactly once (sorted tuples).

    Extension-set enumeration: a subset is grown only by neighbours whose id
    exceeds the subset's smallest node and that are not adjacent to nodes
    already placed before them.
    """
    nbrs = net.neighbor_sets
    for v in range(net.n):
        yield from _extend([v], {u for u in nbrs[v] if u > v}, set(nbrs[v]) | {v}, v, k, nbrs)


def _extend(sub, ext, closed, root, k, nbrs):
    yield tuple(sorted(sub))
    if len(sub) == k:
        return
    ext = set(ext)
    while ext:
        w = ext.pop()
        new_ext = ext | {u for u in nbrs[w] if u > root and u not in closed}
        yield from _extend(sub + [w], new_ext, closed | nbrs[w], root, k, nbrs)


def exact_project_oracle(x, k: int, net: AttributedNetwork, mode: str = "head", cap: int = 15) -> ProjectionResult:
    """True optimum of the head (max ``||x_S||``) or tail (min ``||x - x_S||``) problem."""
    if mode not in MODES:
        raise ValueError(f"mode must be 'head' or 'tail', got {mode!r}")
    if net.n > cap:
        raise ProjectionSizeError(f"exact projection is capped at n <= {cap}; got n={net.n}")
    x = _check_vector(x, net.n)
    budget = min(k, net.n)
    if not np.any(x):
        return _result(x, [], "exact", budget, degenerate=True)
    sq = x**2
    cands = [(float(np.sum(sq[list(s)])), s) for s in connected_subsets(net, budget)]
    chosen = _choose(cands, mode, tol=1e-12 * float(sq.sum()))
    return _result(x, chosen, "exact", budget)


# ---------------------------------------------------------------------------
# PCST backend


def _prune_to_budget(net, nodes, prizes, budget):
    """Shrink a connected node set to ``budget`` nodes by repeatedly dropping the
    cheapest leaf of a BFS spanning tree rooted at its largest prize."""
    inside = set(nodes.tolist())
    root = int(nodes[np.argmax(prizes[nodes])])
    parent = {root: -1}
    children = {root: 0}
    queue = [root]
    for u in queue:
        for w in net.neighbors[u].tolist():
            if w in inside and w not in parent:
                parent[w] = u
                children[w] = 0
                children[u] += 1
                queue.append(w)
    heap = [(prizes[v], v) for v in parent if children[v] == 0 and v != root]
    heapq.heapify(heap)
    alive = len(parent)
    removed = set()
    while alive > budget and heap:
        _, v = heapq.heappop(heap)
        removed.add(v)
        alive -= 1
        u = parent[v]
        children[u] -= 1
        if children[u] == 0 and u != root:
            heapq.heappush(heap, (prizes[u], u))
    return np.array(sorted(set(parent) - removed), dtype=np.int64)


def pcst_project(
    x,
    k: int,
    net: AttributedNetwork,
    mode: str = "head",
    relaxation: float = 2.0,
    max_bisections: int = 32,
    bisect_tol: float = 1e-2,
    descent: float = math.log(8.0),
) -> ProjectionResult:
    if mode not in MODES:
        raise ValueError(f"mode must be 'head' or 'tail', got {mode!r}")
    x = _check_vector(x, net.n)
    n = net.n
    budget = min(n, int(math.ceil(relaxation * k)))
    prizes = x**2
    total = float(prizes.sum())
    if total == 0.0:
        return _result(x, [], "pcst", budget, degenerate=True)

    # in a pruned tree of <= budget nodes every zero-prize node lies on a path
    # of < budget nodes between two positive-prize leaves; search only those
    pos = np.flatnonzero(prizes)
    adj = net.adjacency
    ball, hops = path_region(n, adj.indptr.astype(np.int64), adj.indices.astype(np.int64), pos, budget - 1)
    inside = np.zeros(n, dtype=bool)
    inside[ball] = True
    e = net.edges[inside[net.edges[:, 0]] & inside[net.edges[:, 1]]]
    local = np.full(n, -1, dtype=np.int64)
    local[ball] = np.arange(ball.size)
    eu, ev = local[e[:, 0]], local[e[:, 1]]
    # edges sorted by the larger hop distance of their endpoints
    reach_e = np.maximum(hops[eu], hops[ev])
    order = np.argsort(reach_e, kind="stable")
    eu, ev, reach_e = eu[order], ev[order], reach_e[order]
    by_hops = np.argsort(hops, kind="stable")
    sorted_hops = hops[by_hops]
    sub_prizes = prizes[ball]
    cands = {}

    def add(nodes):
        key = tuple(int(v) for v in nodes)
        cands[key] = float(prizes[list(key)].sum())

    def run(lam):
        # no moat outgrows the prize it holds, so a node farther than
        # total / lam hops from every positive prize is never reached
        reach = total / lam * (1.0 + 1e-9)
        nv = int(np.searchsorted(sorted_hops, reach, side="right"))
        ne = int(np.searchsorted(reach_e, reach, side="right"))
        if nv == ball.size:
            nodes = pcst(ball.size, eu, ev, np.full(eu.size, lam), sub_prizes)
            return ball[nodes]
        keep = np.sort(by_hops[:nv])
        relabel = np.full(ball.size, -1, dtype=np.int64)
        relabel[keep] = np.arange(nv)
        nodes = pcst(nv, relabel[eu[:ne]], relabel[ev[:ne]], np.full(ne, lam), sub_prizes[keep])
        return ball[keep[nodes]]

    add([int(np.argmax(prizes))])
    n_pos = pos.size
    floor = math.log(prizes[pos].min() * 1e-3)
    ceil = math.log(total)
    # start near the k-th largest prize, a cost at which trees of about k
    # nodes form whatever n is (the largest prize when fewer are positive:
    # runs at low cost explore far and are expensive); widen by ``descent``
    # until the tree size is bracketed, then bisect
    if n_pos > k:
        lam_log = math.log(np.partition(prizes[pos], n_pos - k)[n_pos - k])
    else:
        lam_log = math.log(prizes[pos].max())
    lo = hi = None
    lo_size = hi_size = -1
    stale = 0
    smallest_over = None
    hit = False
    for _ in range(max_bisections):
        nodes = run(math.exp(lam_log))
        bracketed = lo is not None and hi is not None
        if nodes.size > budget:
            stale = stale + 1 if bracketed and nodes.size == lo_size else 0
            lo, lo_size = lam_log, nodes.size
            if smallest_over is None or nodes.size < smallest_over.size:
                smallest_over = nodes
        else:
            add(nodes)
            # within the window, or already holding every node with positive prize
            if nodes.size >= k or np.count_nonzero(prizes[nodes]) == n_pos:
                hit = True
                break
            stale = stale + 1 if bracketed and nodes.size == hi_size else 0
            hi, hi_size = lam_log, nodes.size
        if lo is not None and hi is not None:
            # the tree size jumps across the window: more bisection only
            # reproduces the two bracketing trees
            if hi - lo < bisect_tol or stale >= 2:
                break
            lam_log = 0.5 * (lo + hi)
        elif lo is not None:
            if lo >= ceil:
                break
            lam_log = min(lo + descent, ceil)
        else:
            if hi <= floor:
                break
            lam_log = hi - descent
    if not hit and smallest_over is not None:
        add(_prune_to_budget(net, smallest_over, prizes, budget))

    chosen = _choose([(m, s) for s, m in cands.items()], mode, tol=1e-12 * total)
    return _result(x, chosen, "pcst", budget)


def head_project(x, c: TopologyConstraint, net: AttributedNetwork) -> ProjectionResult:
    """Connected support capturing (approximately) the most l2 mass of ``x``."""
    c.check(net)
    if c.backend == "exact":
        return exact_project_oracle(x, c.k, net, "head", cap=c.exact_cap)
    return pcst_project(x, c.k, net, "head", c.relaxation, c.max_bisections)


def tail_project(x, c: TopologyConstraint, net: AttributedNetwork) -> ProjectionResult:
    """Connected support leaving (approximately) the least l2 residual of ``x``."""
    c.check(net)
    if c.backend == "exact":
        return exact_project_oracle(x, c.k, net, "tail", cap=c.exact_cap)
    return pcst_project(x, c.k, net, "tail", c.relaxation, c.max_bisections)


def top_s_select(v, s: int, with_flag: bool = False, tiebreak=None):
    """Indices of the ``s`` largest-magnitude entries of ``v`` (sorted).

    Ties go to the larger ``tiebreak`` value when one is given, then to the
    lower index.  With ``with_flag=True`` also returns whether the selection
    was degenerate (all entries zero).
    """
    v = np.asarray(v, dtype=float).ravel()
    if int(s) != s or s < 1 or s > v.size:
        raise ValueError(f"s must be an integer in [1, {v.size}], got {s!r}")
    if tiebreak is None:
        order = np.argsort(-np.abs(v), kind="stable")
    else:
        tb = np.asarray(tiebreak, dtype=float).ravel()
        order = np.lexsort((np.arange(v.size), -tb, -np.abs(v)))
    idx = np.sort(order[: int(s)]).astype(np.int64)
    if with_flag:
        return idx, bool(not np.any(v))
    return idx
