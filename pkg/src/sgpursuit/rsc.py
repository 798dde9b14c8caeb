"""Restricted strong concavity / smoothness: closed-form constants and sampling checks.

For a score ``f`` the quantity of interest is the normalised Bregman remainder

    ratio = [f(x, y) - f(x', y') - grad_x f(x, y)^T (x - x') - grad_y f(x, y)^T (y - y')]
            / (0.5 * (||x - x'||^2 + ||y - y'||^2))

over pairs whose node supports are connected sets of at most ``2k`` nodes
and whose attribute supports hold at most ``2s`` entries.  Its infimum and
supremum are the curvature constants ``gamma_minus`` and ``gamma_plus``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import docfmt
from .graph import AttributedNetwork
from .projections import PCST_FACTORS, TopologyConstraint, head_project
from .scores import ScoreConfig, ScoreFunction

LEMMA_SCORES = ("fisher", "elevated_mean", "logistic", "neg_squared_error")


class PowerIterationError(RuntimeError):
    pass


def top_eigenvalue(M: np.ndarray, tol: float = 1e-8, max_iter: int = 10_000, seed: int = 0) -> float:
    """Largest eigenvalue of a symmetric positive semidefinite matrix by power iteration."""
    if not np.any(M):
        return 0.0
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(M.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = M @ v
        new = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        if abs(new - lam) <= tol * abs(new):
            return new
        lam = new
    raise PowerIterationError(f"power iteration did not converge in {max_iter} steps")


def spectral_bounds(W) -> tuple[float, float]:
    """``(b0, b1)``: largest eigenvalues of ``W W^T`` and ``W^T W``.

    Both equal ``||W||_2^2``; they are estimated separately because the
    curvature bounds are stated in terms of each.
    """
    W = np.asarray(W.W if isinstance(W, AttributedNetwork) else W, dtype=float)
    return top_eigenvalue(W @ W.T), top_eigenvalue(W.T @ W)


def normalize_attributes(W, target: float = 0.9) -> np.ndarray:
    """Rescale ``W`` so that ``||W||_2^2 == target``."""
    W = np.asarray(W, dtype=float)
    b = np.linalg.norm(W, 2) ** 2
    return W if b == 0 else W * math.sqrt(target / b)


# ---------------------------------------------------------------------------
# closed-form constants


def _contraction(gm, gp, c_T, c_H, squared: bool):
    if gp <= 0 or gm <= 0 or gm > gp:
        nan = float("nan")
        return {"rho": nan, "alpha0": nan, "beta0": nan, "alpha": nan, "beta": nan}
    q = gm / gp
    rho = math.sqrt(max(0.0, 1.0 - (q * q if squared else q)))
    a0 = c_H * (1.0 - rho) - rho
    b0 = (c_H + 1.0) * gm / gp**2
    denom = 1.0 - math.sqrt(2.0) * rho
    if denom <= 0:
        alpha = beta = float("inf")
    else:
        alpha = (c_T + 1.0) * math.sqrt(max(0.0, 2.0 - 2.0 * a0 * a0)) / denom
        if a0 == 0 or abs(a0) == 1:
            beta = float("inf")
        else:
            inner = gm / gp**2 + (math.sqrt(2.0) * a0 * b0 / (1.0 - a0 * a0) + math.sqrt(2.0) * b0 / a0)
            beta = (c_T + 1.0) / denom * inner
    return {"rho": rho, "alpha0": a0, "beta0": b0, "alpha": alpha, "beta": beta}


@dataclass
class RscConstants:
    """Curvature constants of a score and the contraction factors they imply.

    ``rho`` and friends use ``rho = sqrt(1 - (g-/g+)^2)``; the ``*_linear``
    fields use ``rho = sqrt(1 - g-/g+)``.  Both conventions occur in the
    convergence analysis and neither is silently preferred.
    """

    score: str
    gamma_minus: float
    gamma_plus: float
    b0: float
    b1: float
    c_T: float
    c_H: float
    source: str = "lemma-formula"
    applicable: bool = True
    note: str = ""
    delta: float | None = None
    rho: float = float("nan")
    alpha0: float = float("nan")
    beta0: float = float("nan")
    alpha: float = float("nan")
    beta: float = float("nan")
    rho_linear: float = float("nan")
    alpha0_linear: float = float("nan")
    beta0_linear: float = float("nan")
    alpha_linear: float = float("nan")
    beta_linear: float = float("nan")

    def __post_init__(self):
        if not (math.isfinite(self.gamma_minus) and math.isfinite(self.gamma_plus)):
            return
        for squared, suffix in ((True, ""), (False, "_linear")):
            for key, val in _contraction(self.gamma_minus, self.gamma_plus, self.c_T, self.c_H, squared).items():
                setattr(self, key + suffix, val)

    def projection_condition(self) -> bool:
        """Whether ``c_H^2 > 1 - 1 / (2 (1 + c_T)^2)`` (needed for contraction as g+/g- -> 1)."""
        return projection_condition(self.c_T, self.c_H)

    def theory_summary(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "alpha_below_one": bool(0 < self.alpha < 1),
            "alpha_linear": self.alpha_linear,
            "beta_linear": self.beta_linear,
            "alpha_linear_below_one": bool(0 < self.alpha_linear < 1),
            "projection_condition": self.projection_condition(),
        }

    def as_block(self) -> dict:
        d = asdict(self)
        return {k: ("none" if v is None else v) for k, v in d.items()}


def projection_condition(c_T: float, c_H: float) -> bool:
    return c_H * c_H > 1.0 - 1.0 / (2.0 * (1.0 + c_T) ** 2)


def lemma_constants(
    score_kind: str,
    net: AttributedNetwork,
    cfg: ScoreConfig | None = None,
    factors: tuple[float, float] = PCST_FACTORS,
) -> RscConstants:
    """Curvature constants from the closed-form bounds for ``score_kind``.

    Parameters
    ----------
    score_kind : str
        One of ``fisher``, ``elevated_mean``, ``logistic``,
        ``neg_squared_error``; anything else yields an empirical-only record.
    net : AttributedNetwork
    cfg : ScoreConfig, optional
        ``r_sparsity`` scales ``W`` for the elevated-mean bound (default: 1).
    factors : (c_T, c_H)
        Projection quality factors entering the contraction constants.
    """
    cfg = cfg or ScoreConfig()
    c_T, c_H = factors
    kind = score_kind.replace("-", "_").lower()
    W = net.W
    if kind == "elevated_mean":
        W = W / math.sqrt(cfg.r_sparsity or 1)
    b0, b1 = spectral_bounds(W)
    nan = float("nan")
    if kind not in LEMMA_SCORES:
        return RscConstants(
            kind, nan, nan, b0, b1, c_T, c_H, source="empirical-sample", applicable=False,
            note="no lemma constants; empirical only",
        )
    applicable = b0 < 1 and b1 < 1
    note = "" if applicable else f"lemma inapplicable: b0={b0:.6g}, b1={b1:.6g} (need both < 1)"
    delta = None
    if kind == "neg_squared_error":
        b = max(b0, b1)
        gm, gp = 1.0, max(2 * b + 2 * math.sqrt(b) + 1, 3 + 2 * math.sqrt(b))
        delta = gp / 2.0 - 1.0
    elif kind == "logistic":
        gm, gp = min(1 - b0, 1 - b1), max(2 * b0 + 1, 2.0)
    else:
        gm, gp = min(1 - b0, 1 - b1), 2.0
    return RscConstants(kind, gm, gp, b0, b1, c_T, c_H, applicable=applicable, note=note, delta=delta)


# ---------------------------------------------------------------------------
# sampling


def random_connected_support(rng, net: AttributedNetwork, size: int) -> np.ndarray:
    """Connected node set of up to ``size`` nodes collected by a random walk."""
    v = int(rng.integers(net.n))
    seen = {v}
    for _ in range(100 * max(size, 1)):
        if len(seen) >= size:
            break
        nb = net.neighbors[v]
        if nb.size == 0:
            break
        v = int(nb[rng.integers(nb.size)])
        seen.add(v)
    return np.array(sorted(seen), dtype=np.int64)


def project_capped_simplex(v: np.ndarray, total: float, lo=0.0, hi=1.0) -> np.ndarray:
    """Euclidean projection onto ``{z : lo <= z <= hi, sum(z) = total}`` by bisection on the shift."""
    if not lo * v.size <= total <= hi * v.size:
        raise ValueError("infeasible capped-simplex target")
    a, b = float(v.min()) - hi, float(v.max()) - lo
    for _ in range(200):
        t = 0.5 * (a + b)
        if np.clip(v - t, lo, hi).sum() > total:
            a = t
        else:
            b = t
    return np.clip(v - 0.5 * (a + b), lo, hi)


def _sample_point(rng, net, score, k, s, total=None):
    lo_size = 1 if total is None else int(math.ceil(total))
    for _ in range(100):
        S = random_connected_support(rng, net, int(rng.integers(lo_size, 2 * k + 1)))
        if S.size >= lo_size:
            break
    else:
        raise ValueError("could not draw a connected support large enough for the sum constraint")
    lo_x = score.box_x[0] if np.isfinite(score.box_x[0]) else 0.0
    hi_x = score.box_x[1] if np.isfinite(score.box_x[1]) else 1.0
    x = np.zeros(net.n)
    vals = rng.uniform(lo_x, hi_x, S.size)
    if total is not None:
        vals = project_capped_simplex(vals, total, lo_x, hi_x)
    x[S] = vals
    R = rng.choice(net.p, int(rng.integers(1, min(2 * s, net.p) + 1)), replace=False)
    lo_y = score.box_y[0] if np.isfinite(score.box_y[0]) else 0.0
    hi_y = score.box_y[1] if np.isfinite(score.box_y[1]) else 1.0
    y = np.zeros(net.p)
    y[R] = rng.uniform(lo_y, hi_y, R.size)
    return x, y


def bregman_ratio(score: ScoreFunction, net: AttributedNetwork, x, y, x2, y2) -> float:
    """Normalised remainder of the first-order expansion of ``f`` at ``(x, y)``."""
    e = score.evaluate(x, y, net)
    f2 = score.value(x2, y2, net)
    dx, dy = x - x2, y - y2
    num = e.value - f2 - e.grad_x @ dx - e.grad_y @ dy
    return float(num / (0.5 * (dx @ dx + dy @ dy)))


@dataclass
class RscSample:
    ratios: np.ndarray
    gamma_minus: float
    gamma_plus: float
    violations: list = field(default_factory=list)

    @property
    def n_violations(self) -> int:
        return len(self.violations)


def sample_rsc_rss(
    score: ScoreFunction,
    net: AttributedNetwork,
    k: int,
    s: int,
    trials: int = 1000,
    rng_seed: int = 0,
    bounds: RscConstants | None = None,
    slack: float = 1e-9,
    sum_constraint: float | None = None,
) -> RscSample:
    """Empirical curvature constants from random restricted pairs.

    Parameters
    ----------
    score, net
    k, s : int
        Node supports are connected sets of at most ``2k`` nodes; attribute
        supports hold at most ``2s`` entries.
    trials : int
    rng_seed : int
    bounds : RscConstants, optional
        Ratios outside ``[gamma_minus - slack, gamma_plus + slack]`` are
        listed as violations ``(trial, ratio, "lower" | "upper")``.
    sum_constraint : float, optional
        Force ``1^T x = 1^T x' = sum_constraint`` (used for the elevated-mean
        score, whose bound assumes a known cluster size).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(rng_seed)
    ratios = np.empty(trials)
    violations = []
    for t in range(trials):
        while True:
            x, y = _sample_point(rng, net, score, k, s, sum_constraint)
            x2, y2 = _sample_point(rng, net, score, k, s, sum_constraint)
            if np.any(x != x2) or np.any(y != y2):
                break
        r = bregman_ratio(score, net, x, y, x2, y2)
        ratios[t] = r
        if bounds is not None and bounds.applicable:
            if r < bounds.gamma_minus - slack:
                violations.append((t, r, "lower"))
            elif r > bounds.gamma_plus + slack:
                violations.append((t, r, "upper"))
    return RscSample(ratios, float(ratios.min()), float(ratios.max()), violations)


def epsilon_terms(score: ScoreFunction, net: AttributedNetwork, x_star, y_star, k: int, s: int, backend="pcst") -> dict:
    """Gradient-size terms at a reference point.

    ``eps_x`` is the largest squared gradient mass on a connected support of
    ``2k`` nodes (``eps_x_8k``: ``8k`` nodes, capped at n) found by the head
    projection; ``eps_y`` is the squared mass of the ``3s`` largest attribute
    gradient entries (``eps_y_2s``: ``2s`` entries).
    """
    e = score.evaluate(x_star, y_star, net)
    out = {}
    for key, kk in (("eps_x", 2 * k), ("eps_x_8k", 8 * k)):
        kk = min(kk, net.n)
        be = backend if backend == "pcst" or net.n <= 15 else "pcst"
        h = head_project(e.grad_x, TopologyConstraint(kk, backend=be), net)
        out[key] = h.captured_mass**2
    g2 = np.sort(e.grad_y**2)[::-1]
    out["eps_y"] = float(g2[: min(3 * s, net.p)].sum())
    out["eps_y_2s"] = float(g2[: min(2 * s, net.p)].sum())
    return out


def write_report(path, constants: RscConstants, sample: RscSample | None = None, meta: dict | None = None) -> None:
    blocks = [("lemma", constants.as_block())]
    if sample is not None:
        blocks.append(
            (
                "empirical",
                {
                    "trials": sample.ratios.size,
                    "gamma_minus": sample.gamma_minus,
                    "gamma_plus": sample.gamma_plus,
                    "violations": sample.n_violations,
                },
            )
        )
        for t, r, side in sample.violations:
            blocks.append(("violation", {"trial": t, "ratio": r, "side": side}))
    blocks.append(("theory", constants.theory_summary()))
    if meta:
        blocks.append(("metadata", meta))
    docfmt.dump(path, blocks)
