"""Graph-structured matching pursuit for subspace cluster detection.

Each iteration identifies promising nodes by a head projection of the node
gradient and promising attributes by the largest attribute-gradient entries,
maximises the score on the merged supports, and prunes the result back to a
connected node set (tail projection) and ``s`` attributes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from .graph import AttributedNetwork, as_index_set
from .projections import TopologyConstraint, head_project, tail_project, top_s_select
from .scores import NonFiniteScoreError, ScoreFunction

log = logging.getLogger(__name__)

INIT_MODES = ("local_seeds", "top_norm", "zeros", "random")
GRADIENT_MODES = ("feasible", "raw")
DEFLATIONS = ("column_mean", "remove_nodes")


class SubproblemError(RuntimeError):
    def __init__(self, msg, state=None):
        super().__init__(msg)
        self.state = state


@dataclass(frozen=True)
class PursuitConfig:
    """Budgets and numerical settings of the pursuit loop.

    Parameters
    ----------
    k, s : int
        Node and attribute budgets.
    epsilon : float
        Stop once both coefficient updates have Euclidean norm <= epsilon.
    max_iters : int
        Iteration cap; a run that hits it is reported as not converged.
    pgd_step_init, pgd_backtrack, pgd_tol, pgd_max_iters
        Projected gradient ascent settings of the restricted maximisation.
    init_mode : {"local_seeds", "top_norm", "zeros", "random"}
        Starting point. ``local_seeds`` runs the loop from the ``n_starts``
        best-scoring triangles (edges on triangle-free graphs) and keeps the
        best result, falling back to ``top_norm`` when the score has no
        closed-form seed values; ``top_norm`` puts
        ``1/k`` on the k rows of largest norm and ``1/s`` on the s most
        variable columns.
    n_starts : int
        Number of seeded runs.
    seed_size : int
        Nodes per grown seed (capped at k).
    gradient_mode : {"feasible", "raw"}
        ``feasible`` zeroes gradient entries that point out of the box at
        coordinates sitting on a bound before the support-selection steps;
        ``raw`` uses the gradient as is.
    rng_seed : int
        Only used by ``init_mode="random"``.
    """

    k: int
    s: int
    epsilon: float = 1e-4
    max_iters: int = 50
    pgd_step_init: float = 1.0
    pgd_backtrack: float = 0.5
    pgd_tol: float = 1e-6
    pgd_max_iters: int = 1000
    init_mode: str = "local_seeds"
    n_starts: int = 5
    seed_size: int = 6
    gradient_mode: str = "feasible"
    rng_seed: int = 0

    def __post_init__(self):
        if self.k < 1 or self.s < 1:
            raise ValueError("k and s must be positive")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if not 0 < self.pgd_backtrack < 1:
            raise ValueError("pgd_backtrack must lie in (0, 1)")
        if self.init_mode not in INIT_MODES:
            raise ValueError(f"init_mode must be one of {INIT_MODES}")
        if self.n_starts < 1 or self.seed_size < 1:
            raise ValueError("n_starts and seed_size must be >= 1")
        if self.gradient_mode not in GRADIENT_MODES:
            raise ValueError(f"gradient_mode must be one of {GRADIENT_MODES}")

    def check(self, net: AttributedNetwork):
        if self.k > net.n:
            raise ValueError(f"k={self.k} exceeds n={net.n}")
        if self.s > net.p:
            raise ValueError(f"s={self.s} exceeds p={net.p}")


@dataclass
class PursuitState:
    """Everything one iteration computed, kept for diagnostics."""

    iter_index: int
    x: np.ndarray
    y: np.ndarray
    gamma_x: np.ndarray
    gamma_y: np.ndarray
    omega_x: np.ndarray
    omega_y: np.ndarray
    b_x: np.ndarray
    b_y: np.ndarray
    psi_x: np.ndarray
    psi_y: np.ndarray
    objective: float
    step_x: float
    step_y: float
    fallback: bool = False


@dataclass
class SubspaceCluster:
    nodes: np.ndarray
    attributes: np.ndarray
    score: float
    iterations_used: int
    converged: bool
    x: np.ndarray
    y: np.ndarray
    diagnostics: dict = field(default_factory=dict)
    history: list = field(default_factory=list, repr=False)

    @property
    def empty(self) -> bool:
        return self.nodes.size == 0


def support(v) -> np.ndarray:
    return np.flatnonzero(v).astype(np.int64)


# ---------------------------------------------------------------------------
# restricted maximisation


def _restricted_view(net, score, omega_x, omega_y):
    """Smaller network carrying only the rows (and, when possible, columns) that
    can influence the score while x and y vanish off the given supports."""
    cols = np.arange(net.p) if score.couples_all_attributes else omega_y
    sub = net.subnetwork(omega_x)
    if cols.size != net.p:
        sub = sub.with_attributes(sub.W[:, cols])
    mask_y = np.isin(cols, omega_y)
    return sub, cols, mask_y


def solve_restricted_subproblem(
    net: AttributedNetwork,
    score: ScoreFunction,
    omega_x,
    omega_y,
    warm: tuple[np.ndarray, np.ndarray],
    cfg: PursuitConfig,
) -> tuple[np.ndarray, np.ndarray, dict]:
    """Maximise the score over ``supp(x) in omega_x``, ``supp(y) in omega_y``.

    Projected gradient ascent with backtracking: off-support coordinates stay
    at zero and on-support coordinates are clipped to the score's box after
    every step.

    Returns
    -------
    x, y : ndarray
        Full-length maximiser; its objective is never below the warm start's.
    info : dict
        ``iterations``, ``objective``, ``grad_map_norm``.
    """
    omega_x = as_index_set(omega_x, net.n, "omega_x")
    omega_y = as_index_set(omega_y, net.p, "omega_y")
    if omega_x.size == 0 or omega_y.size == 0:
        raise ValueError("restricted supports must be nonempty")
    sub, cols, mask_y = _restricted_view(net, score, omega_x, omega_y)
    nx = omega_x.size

    def pack(x, y):
        return np.concatenate([x, y[mask_y]])

    def unpack(v):
        yy = np.zeros(cols.size)
        yy[mask_y] = v[nx:]
        return v[:nx], yy

    lo = np.concatenate([np.full(nx, score.box_x[0]), np.full(int(mask_y.sum()), score.box_y[0])])
    hi = np.concatenate([np.full(nx, score.box_x[1]), np.full(int(mask_y.sum()), score.box_y[1])])

    def evaluate(v):
        xx, yy = unpack(v)
        try:
            ev = score.evaluate(xx, yy, sub)
        except NonFiniteScoreError as exc:
            raise SubproblemError(f"{score.name}: {exc}") from exc
        return ev.value, pack(ev.grad_x, ev.grad_y)

    x0, y0 = np.asarray(warm[0], dtype=float), np.asarray(warm[1], dtype=float)
    v = np.clip(pack(x0[omega_x], y0[cols]), lo, hi)
    fv, g = evaluate(v)
    step = cfg.pgd_step_init
    gmap = np.inf
    it = 0
    for it in range(1, cfg.pgd_max_iters + 1):
        while True:
            cand = np.clip(v + step * g, lo, hi)
            d = cand - v
            fc, gc = evaluate(cand)
            # sufficient ascent against the quadratic model of the step
            if fc >= fv + g @ d - (d @ d) / (2.0 * step) or step < 1e-14:
                break
            step *= cfg.pgd_backtrack
        gmap = float(np.linalg.norm(d)) / step
        if fc >= fv:
            v, fv, g = cand, fc, gc
        if gmap <= cfg.pgd_tol:
            break
        step = min(cfg.pgd_step_init, step * 2.0)

    xs, ys = unpack(v)
    x = np.zeros(net.n)
    y = np.zeros(net.p)
    x[omega_x] = xs
    y[cols] = ys
    return x, y, {"iterations": it, "objective": fv, "grad_map_norm": gmap}


# ---------------------------------------------------------------------------
# main loop


def initial_point(net: AttributedNetwork, cfg: PursuitConfig):
    """Starting point for the ``top_norm``, ``zeros`` and ``random`` modes."""
    n, p = net.n, net.p
    x = np.zeros(n)
    y = np.zeros(p)
    if cfg.init_mode == "zeros":
        return x, y
    if cfg.init_mode == "random":
        rng = np.random.default_rng(cfg.rng_seed)
        x[rng.choice(n, cfg.k, replace=False)] = 1.0 / cfg.k
        y[rng.choice(p, cfg.s, replace=False)] = 1.0 / cfg.s
        return x, y
    rows = np.argsort(-np.linalg.norm(net.W, axis=1), kind="stable")[: cfg.k]
    cols = np.argsort(-net.W.var(axis=0), kind="stable")[: cfg.s]
    x[rows] = 1.0 / cfg.k
    y[cols] = 1.0 / cfg.s
    return x, y


@njit(cache=True)
def _triangle_kernel(n, indptr, indices):
    # upper neighbour lists are sorted, so triangles come out in (u, v, w) order
    mark = np.zeros(n, dtype=np.bool_)
    out = []
    for u in range(n):
        for j in range(indptr[u], indptr[u + 1]):
            if indices[j] > u:
                mark[indices[j]] = True
        for j in range(indptr[u], indptr[u + 1]):
            v = indices[j]
            if v <= u:
                continue
            for q in range(indptr[v], indptr[v + 1]):
                w = indices[q]
                if w > v and mark[w]:
                    out.append((u, v, w))
        for j in range(indptr[u], indptr[u + 1]):
            mark[indices[j]] = False
    res = np.empty((len(out), 3), dtype=np.int64)
    for i in range(len(out)):
        res[i, 0], res[i, 1], res[i, 2] = out[i]
    return res


def triangles(net: AttributedNetwork) -> np.ndarray:
    """All triangles ``(u, v, w)`` with ``u < v < w`` in lexicographic order, shape (t, 3)."""
    if net.n_edges == 0:
        return np.empty((0, 3), dtype=np.int64)
    adj = net.adjacency
    return _triangle_kernel(net.n, adj.indptr.astype(np.int64), adj.indices.astype(np.int64))


def seed_sets(net: AttributedNetwork) -> np.ndarray:
    """Triangles when the graph has any, otherwise edges."""
    tri = triangles(net)
    return tri if tri.size else net.edges


def grow_seed(net: AttributedNetwork, score: ScoreFunction, seed, size: int, s: int):
    """Greedily add the neighbour that maximises the seed score until ``size`` nodes.

    Returns the grown node array and its seed score.
    """
    S = [int(v) for v in seed]
    nbrs = net.neighbor_sets
    edges_in = sum(1 for i, u in enumerate(S) for v in S[i + 1 :] if v in nbrs[u])
    best = float(score.seed_values(net, np.array([S]), s, [edges_in])[0])
    while len(S) < size:
        inside = set(S)
        cand = sorted(set().union(*(nbrs[v] for v in S)) - inside)
        if not cand:
            break
        gains = np.array([len(nbrs[c] & inside) for c in cand])
        sets = np.array([S + [c] for c in cand], dtype=np.int64)
        vals = score.seed_values(net, sets, s, edges_in + gains)
        j = int(np.argmax(vals))
        S.append(cand[j])
        edges_in += int(gains[j])
        best = float(vals[j])
    return np.array(sorted(S), dtype=np.int64), best


def local_seeds(net: AttributedNetwork, score: ScoreFunction, cfg: PursuitConfig):
    """Starting points grown from the best-scoring small cliques.

    Every triangle (or edge, on triangle-free graphs) ``S`` is scored by
    ``f(1_S, y)`` with the best ``y`` on ``s`` attributes.  The
    ``4 * n_starts`` best sets are grown greedily to ``seed_size`` nodes,
    re-ranked, and the ``n_starts`` best distinct grown sets become starts
    with ``x = 1_S`` clipped to the box and ``y`` from the clipped attribute
    gradient.  Returns an empty list when the score has no closed-form seed
    values or the graph has no edges.
    """
    if net.n_edges == 0:
        return []
    seeds = seed_sets(net)
    vals = score.seed_values(net, seeds, cfg.s)
    if vals is None:
        return []
    size = min(cfg.seed_size, cfg.k)
    grown = {}
    for i in np.argsort(-vals, kind="stable")[: 4 * cfg.n_starts].tolist():
        S, v = grow_seed(net, score, seeds[i], size, cfg.s)
        grown.setdefault(tuple(S.tolist()), v)
    ranked = sorted(grown.items(), key=lambda kv: (-kv[1], kv[0]))[: cfg.n_starts]
    starts = []
    for S, _ in ranked:
        x = np.zeros(net.n)
        x[list(S)] = 1.0
        x = np.clip(x, *score.box_x)
        g = score.evaluate(x, np.zeros(net.p), net).grad_y
        y = np.zeros(net.p)
        top = top_s_select(np.maximum(g, 0.0), cfg.s)
        y[top] = np.clip(g[top], *score.box_y)
        starts.append((x, y, np.array(S)))
    return starts


def _fallback_support(net, g, k):
    """Greedy connected set of up to k nodes grown from the largest ``|g|``."""
    a = np.abs(g)
    start = int(np.argmax(a))
    chosen = {start}
    frontier = set(net.neighbors[start].tolist())
    while len(chosen) < k and frontier:
        v = max(frontier, key=lambda u: (a[u], -u))
        chosen.add(v)
        frontier |= set(net.neighbors[v].tolist())
        frontier -= chosen
    return np.array(sorted(chosen), dtype=np.int64)


def feasible_gradient(g, v, box):
    """Gradient with entries pointing out of ``box`` at active bounds set to zero."""
    lo, hi = box
    out = g.copy()
    out[(v <= lo) & (g < 0)] = 0.0
    out[(v >= hi) & (g > 0)] = 0.0
    return out


def _restrict(v, idx):
    out = np.zeros_like(v)
    out[idx] = v[idx]
    return out


def pursue_from(
    net: AttributedNetwork,
    score: ScoreFunction,
    constraint: TopologyConstraint,
    cfg: PursuitConfig,
    x0: np.ndarray,
    y0: np.ndarray,
) -> SubspaceCluster:
    """The pursuit loop from a given starting point."""
    x, y = score.clip(np.asarray(x0, dtype=float), np.asarray(y0, dtype=float))
    history: list[PursuitState] = []
    psi_x, psi_y = support(x), support(y)
    converged = False
    reason = "max_iters"
    n_fallback = 0
    s2 = min(2 * cfg.s, net.p)

    for i in range(cfg.max_iters):
        ev = score.evaluate(x, y, net)
        gx, gy = ev.grad_x, ev.grad_y
        if cfg.gradient_mode == "feasible":
            gx = feasible_gradient(gx, x, score.box_x)
            gy = feasible_gradient(gy, y, score.box_y)
        if not np.any(ev.grad_x):
            reason = "zero node gradient"
            log.warning("iteration %d: node gradient vanished; stopping", i)
            break
        # a vanishing feasible gradient means no node can enter: keep the support
        head = head_project(gx, constraint, net)
        gamma_x = head.support
        gamma_y = top_s_select(gy, s2)
        omega_x = np.union1d(gamma_x, support(x))
        omega_y = np.union1d(gamma_y, support(y))
        try:
            b_x, b_y, info = solve_restricted_subproblem(net, score, omega_x, omega_y, (x, y), cfg)
        except SubproblemError as exc:
            exc.state = history[-1] if history else None
            raise

        tail = tail_project(b_x, constraint, net)
        fell_back = tail.degenerate
        if fell_back:
            n_fallback += 1
            psi_x = _fallback_support(net, gx, constraint.k)
        else:
            psi_x = tail.support
        # coordinates pinned at the same bound tie on value; prefer the one
        # whose gradient still pushes hardest
        gb_y = score.evaluate(b_x, b_y, net).grad_y
        psi_y = top_s_select(b_y, cfg.s, tiebreak=gb_y)
        x_new, y_new = _restrict(b_x, psi_x), _restrict(b_y, psi_y)
        dx = float(np.linalg.norm(x_new - x))
        dy = float(np.linalg.norm(y_new - y))
        x, y = x_new, y_new
        history.append(
            PursuitState(
                iter_index=i,
                x=x,
                y=y,
                gamma_x=gamma_x,
                gamma_y=gamma_y,
                omega_x=omega_x,
                omega_y=omega_y,
                b_x=b_x,
                b_y=b_y,
                psi_x=psi_x,
                psi_y=psi_y,
                objective=info["objective"],
                step_x=dx,
                step_y=dy,
                fallback=fell_back,
            )
        )
        log.debug("iteration %d: objective %.6g, |dx| %.3g, |dy| %.3g", i, info["objective"], dx, dy)
        if dx <= cfg.epsilon and dy <= cfg.epsilon:
            converged = True
            reason = "epsilon"
            break
        # approximate projections can make the loop alternate between two
        # iterates; such a run never meets the epsilon rule, so stop at the
        # better of the two
        if len(history) >= 3:
            back = history[-3]
            if (
                np.linalg.norm(x - back.x) <= cfg.epsilon
                and np.linalg.norm(y - back.y) <= cfg.epsilon
            ):
                prev = history[-2]
                if score.evaluate(prev.x, prev.y, net).value > score.evaluate(x, y, net).value:
                    x, y, psi_x, psi_y = prev.x, prev.y, prev.psi_x, prev.psi_y
                reason = "cycle"
                log.info("iteration %d: two-step cycle detected; stopping", i)
                break

    final = score.evaluate(x, y, net).value
    c_T, c_H = constraint.approx_factors
    return SubspaceCluster(
        nodes=np.asarray(psi_x, dtype=np.int64),
        attributes=np.asarray(psi_y, dtype=np.int64),
        score=float(final),
        iterations_used=len(history),
        converged=converged,
        x=x,
        y=y,
        diagnostics={
            "stop_reason": reason,
            "objective_trace": np.array([h.objective for h in history]),
            "step_x_trace": np.array([h.step_x for h in history]),
            "step_y_trace": np.array([h.step_y for h in history]),
            "fallback_iterations": n_fallback,
            "backend": constraint.backend,
            "c_T": c_T,
            "c_H": c_H,
        },
        history=history,
    )


def sg_pursuit(
    net: AttributedNetwork,
    score: ScoreFunction,
    constraint: TopologyConstraint,
    cfg: PursuitConfig,
) -> SubspaceCluster:
    """Detect one subspace cluster.

    Parameters
    ----------
    net : AttributedNetwork
    score : ScoreFunction
    constraint : TopologyConstraint
        Connectivity model and projection backend; ``constraint.k`` should
        match ``cfg.k``.
    cfg : PursuitConfig

    Returns
    -------
    SubspaceCluster
        Connected node set, attribute set, final score and per-iteration
        history. ``converged`` is True only for an epsilon exit; a run that
        alternates between two iterates stops early with
        ``diagnostics["stop_reason"] == "cycle"`` and keeps the better one.  With
        ``init_mode="local_seeds"`` the best-scoring of the runs is returned
        and ``diagnostics["start_scores"]`` lists every run's final score.
    """
    cfg.check(net)
    constraint.check(net)
    starts = local_seeds(net, score, cfg) if cfg.init_mode == "local_seeds" else []
    if not starts:
        x0, y0 = initial_point(net, replace(cfg, init_mode="top_norm") if cfg.init_mode == "local_seeds" else cfg)
        starts = [(x0, y0, None)]
    best = None
    scores = []
    for j, (x0, y0, seed) in enumerate(starts):
        c = pursue_from(net, score, constraint, cfg, x0, y0)
        c.diagnostics["start"] = j
        if seed is not None:
            c.diagnostics["seed_nodes"] = np.asarray(seed)
        scores.append(c.score)
        if best is None or c.score > best.score:
            best = c
    best.diagnostics["start_scores"] = np.array(scores)
    return best


# ---------------------------------------------------------------------------
# several clusters


def deflate(W: np.ndarray, nodes, attributes, col_means: np.ndarray) -> np.ndarray:
    """Overwrite ``W[nodes, attributes]`` with the per-column means."""
    W = W.copy()
    W[np.ix_(nodes, attributes)] = col_means[attributes]
    return W


def extract_top_k_clusters(
    net: AttributedNetwork,
    score: ScoreFunction,
    constraint: TopologyConstraint,
    cfg: PursuitConfig,
    K: int,
    deflation: str = "column_mean",
) -> list[SubspaceCluster]:
    """Run the pursuit ``K`` times, deflating the data after each cluster.

    ``deflation="column_mean"`` replaces the cluster's block of ``W`` by the
    global column means of the original matrix; ``"remove_nodes"`` deletes the
    cluster's nodes before the next run.  Node ids in the returned clusters
    always refer to ``net``.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if deflation not in DEFLATIONS:
        raise ValueError(f"deflation must be one of {DEFLATIONS}")
    col_means = net.W.mean(axis=0)
    work = net
    ids = np.arange(net.n)
    found = []
    for r in range(K):
        if work.n < cfg.k:
            break
        c = sg_pursuit(work, score, replace(constraint) if constraint.k <= work.n else constraint, cfg)
        if c.empty:
            break
        local = c.nodes
        c.nodes = ids[local]
        x = np.zeros(net.n)
        x[ids] = c.x
        c.x = x
        c.diagnostics["round"] = r
        found.append(c)
        if r == K - 1:
            break
        if deflation == "column_mean":
            work = work.with_attributes(deflate(work.W, local, c.attributes, col_means))
        else:
            keep = np.setdiff1d(np.arange(work.n), local)
            work = work.subnetwork(keep)
            ids = ids[keep]
    return found


# ---------------------------------------------------------------------------
# diagnostics


def shrinkage_ratios(steps) -> np.ndarray:
    steps = np.asarray(steps, dtype=float)
    if steps.size < 2:
        return np.empty(0)
    prev, nxt = steps[:-1], steps[1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(prev > 0, nxt / np.where(prev > 0, prev, 1.0), np.nan)
    return r


def convergence_diagnostics(trace, rsc=None) -> dict:
    """Step norms, empirical shrinkage ratios and (optionally) contraction constants.

    Parameters
    ----------
    trace : SubspaceCluster, list of PursuitState, or array of step norms
    rsc : RscConstants, optional
        Adds the theoretical contraction factor and the projection-factor
        condition under both conventions for rho.
    """
    if isinstance(trace, SubspaceCluster):
        trace = trace.history
    if len(trace) and isinstance(trace[0], PursuitState):
        steps = np.array([np.hypot(h.step_x, h.step_y) for h in trace])
    else:
        steps = np.asarray(trace, dtype=float)
    out = {"step_norms": steps, "shrinkage_ratios": shrinkage_ratios(steps)}
    if rsc is not None:
        out.update(rsc.theory_summary())
    return out
