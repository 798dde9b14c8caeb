"""Score functions f(x, y) over node coefficients x and attribute coefficients y.

Every score carries the stabilising ``-0.5*||x||^2 - 0.5*||y||^2`` term and
returns its value together with both partial gradients in one pass.  Scores
that divide by ``1^T x`` guard the denominator with ``denom_guard`` and flag
the evaluation as degenerate when the guard is active.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graph import AttributedNetwork

LOG_FLOOR = math.log(1e-12)
LOG_CEIL = math.log1p(-1e-12)


class ScoreConfigError(ValueError):
    pass


class NonFiniteScoreError(FloatingPointError):
    pass


@dataclass(frozen=True)
class ScoreConfig:
    """Parameters shared by the score functions.

    Parameters
    ----------
    sigma : float
        Within-cluster variance scale of the coherence penalty.
    lam : float
        Weight of the density term ``x^T A x / 1^T x``.
    response_c : array of shape (p,), optional
        Target vector of the negative squared error score.
    r_sparsity : int, optional
        Assumed node sparsity used to rescale ``W`` when checking the
        elevated-mean curvature bounds.
    denom_guard : float
        Lower bound applied to ``1^T x`` denominators.
    """

    sigma: float = 0.01
    lam: float = 5.0
    response_c: np.ndarray | None = None
    r_sparsity: int | None = None
    denom_guard: float = 1e-8

    def __post_init__(self):
        if not self.sigma > 0:
            raise ScoreConfigError(f"sigma must be positive, got {self.sigma}")
        if not self.lam >= 0:
            raise ScoreConfigError(f"lambda must be non-negative, got {self.lam}")
        if not self.denom_guard > 0:
            raise ScoreConfigError("denom_guard must be positive")
        if self.r_sparsity is not None and self.r_sparsity < 1:
            raise ScoreConfigError("r_sparsity must be >= 1")
        if self.response_c is not None:
            c = np.array(self.response_c, dtype=float).ravel()
            c.setflags(write=False)
            object.__setattr__(self, "response_c", c)


@dataclass
class ScoreEval:
    value: float
    grad_x: np.ndarray
    grad_y: np.ndarray
    degenerate: bool = False


@dataclass
class ScoreFunction:
    """Base class; subclasses implement :meth:`_evaluate` and set the box domains."""

    cfg: ScoreConfig = field(default_factory=ScoreConfig)

    name = "abstract"
    # (lower, upper) bounds applied coordinate-wise
    box_x = (0.0, 1.0)
    box_y = (0.0, 1.0)

    def evaluate(self, x, y, net: AttributedNetwork) -> ScoreEval:
        x, y = self._check(x, y, net)
        out = self._evaluate(x, y, net)
        if not math.isfinite(out.value):
            raise NonFiniteScoreError(f"{self.name} score is not finite at the supplied point")
        return out

    def value(self, x, y, net) -> float:
        return self.evaluate(x, y, net).value

    def grad_x(self, x, y, net) -> np.ndarray:
        return self.evaluate(x, y, net).grad_x

    def grad_y(self, x, y, net) -> np.ndarray:
        return self.evaluate(x, y, net).grad_y

    def domain_x(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        return np.full(n, self.box_x[0]), np.full(n, self.box_x[1])

    def domain_y(self, p: int) -> tuple[np.ndarray, np.ndarray]:
        return np.full(p, self.box_y[0]), np.full(p, self.box_y[1])

    def clip(self, x, y):
        return np.clip(x, *self.box_x), np.clip(y, *self.box_y)

    # y coordinates outside the active attribute set still enter these scores
    couples_all_attributes = False

    def _check(self, x, y, net):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.shape != (net.n,) or y.shape != (net.p,):
            raise ValueError(f"expected x of shape ({net.n},) and y of shape ({net.p},), got {x.shape} and {y.shape}")
        return x, y

    def _evaluate(self, x, y, net) -> ScoreEval:
        raise NotImplementedError

    def seed_coefficients(self, R: np.ndarray):
        """Linear coefficients ``c`` with ``f(1_S, y) = const + c^T y - 0.5 y^T y``.

        ``R`` stacks the attribute rows of many small node sets ``S``, shape
        (m, r, p); returns shape (m, p).  Scores that are not separable in
        ``y`` at an indicator ``x`` return None.
        """
        return None

    def seed_constant(self, r: int, internal_edges: int) -> float:
        """Part of ``f(1_S, y)`` that depends on neither ``y`` nor the attributes."""
        return -0.5 * r

    def seed_values(self, net: AttributedNetwork, seeds: np.ndarray, s: int, internal_edges=None, chunk: int = 4096):
        """Score of each node set with ``x = 1_S`` and its best ``y`` on ``s`` attributes.

        ``seeds`` has shape (m, r).  ``internal_edges`` gives the number of
        edges inside each set (default: every set is a clique).  Returns None
        if the score has no closed-form seed coefficients.
        """
        seeds = np.asarray(seeds, dtype=np.int64)
        m, r = seeds.shape
        if self.seed_coefficients(net.W[seeds[:1]]) is None:
            return None
        if internal_edges is None:
            internal_edges = np.full(m, r * (r - 1) // 2)
        internal_edges = np.broadcast_to(np.asarray(internal_edges), (m,))
        out = np.empty(m)
        for lo in range(0, m, chunk):
            C = self.seed_coefficients(net.W[seeds[lo : lo + chunk]])
            Y = np.clip(C, *self.box_y)
            gain = C * Y - 0.5 * Y * Y
            if s < net.p:
                gain = -np.partition(-gain, s - 1, axis=1)[:, :s]
            const = np.array([self.seed_constant(r, int(e)) for e in internal_edges[lo : lo + chunk]])
            out[lo : lo + chunk] = gain.sum(axis=1) + const
        return out

    def _guarded_sum(self, x):
        s = float(x.sum())
        g = self.cfg.denom_guard
        return (s, False) if s > g else (g, True)


def _reg(x, y):
    return -0.5 * float(x @ x) - 0.5 * float(y @ y)


class FisherScore(ScoreFunction):
    """Fisher test statistic ``x^T W y``."""

    name = "fisher"

    def _evaluate(self, x, y, net):
        W = net.W
        Wy = W @ y
        return ScoreEval(float(x @ Wy) + _reg(x, y), Wy - x, W.T @ x - y)

    def seed_coefficients(self, R):
        return R.sum(axis=1)


class ElevatedMeanScore(ScoreFunction):
    """Elevated-mean scan statistic ``x^T W y / sqrt(1^T x)``."""

    name = "elevated_mean"

    def _evaluate(self, x, y, net):
        W = net.W
        s, degenerate = self._guarded_sum(x)
        rs = math.sqrt(s)
        Wy = W @ y
        t = float(x @ Wy)
        gx = Wy / rs - 0.5 * t / (s * rs) - x
        gy = (W.T @ x) / rs - y
        return ScoreEval(t / rs + _reg(x, y), gx, gy, degenerate)

    def seed_coefficients(self, R):
        return R.sum(axis=1) / math.sqrt(R.shape[1])


class CoherenceScore(ScoreFunction):
    """Coherence score ``x^T (W*W) y - (1/sigma) * P(x, y)``.

    ``P`` is the ``y``-weighted within-cluster sum of squared deviations from
    the ``x``-weighted column means ``m = W^T x / 1^T x``.
    """

    name = "coherence"

    def _evaluate(self, x, y, net):
        W = net.W
        W2 = W * W
        s, degenerate = self._guarded_sum(x)
        u = W.T @ x
        q = W2.T @ x
        inv = 1.0 / self.cfg.sigma
        pen_cols = q - u * u / s
        val = float(q @ y) - inv * float(pen_cols @ y) + _reg(x, y)
        W2y = W2 @ y
        yu = y * u
        grad_pen = W2y - (2.0 / s) * (W @ yu) + float(yu @ u) / (s * s)
        gx = W2y - inv * grad_pen - x
        gy = q - inv * pen_cols - y
        return ScoreEval(val, gx, gy, degenerate)

    def seed_coefficients(self, R):
        D = R - R.mean(axis=1, keepdims=True)
        return (R * R).sum(axis=1) - (D * D).sum(axis=1) / self.cfg.sigma


class CoherenceDensityScore(CoherenceScore):
    """Coherence score plus ``lam * x^T A x / 1^T x`` rewarding dense clusters."""

    name = "coherence_density"

    def _evaluate(self, x, y, net):
        out = super()._evaluate(x, y, net)
        lam = self.cfg.lam
        if lam == 0.0:
            return out
        s, _ = self._guarded_sum(x)
        Ax = net.adjacency @ x
        d = float(x @ Ax)
        out.value += lam * d / s
        out.grad_x = out.grad_x + lam * (2.0 * Ax / s - d / (s * s))
        return out

    def seed_constant(self, r, internal_edges):
        return -0.5 * r + self.cfg.lam * 2.0 * internal_edges / r


class NegSquaredErrorScore(ScoreFunction):
    """Negative squared error ``-||c - W^T x - y||^2`` of a robust regression fit."""

    name = "neg_squared_error"
    box_x = (-np.inf, np.inf)
    box_y = (-np.inf, np.inf)
    couples_all_attributes = True

    def _evaluate(self, x, y, net):
        c = self.cfg.response_c
        if c is None or c.shape != (net.p,):
            got = None if c is None else c.shape[0]
            raise ScoreConfigError(f"response_c must have length p={net.p}, got {got}")
        W = net.W
        r = c - W.T @ x - y
        return ScoreEval(-float(r @ r) + _reg(x, y), 2.0 * (W @ r) - x, 2.0 * r - y)


class LogisticScore(ScoreFunction):
    """Logistic log-likelihood of labels ``y`` given margins ``z = W^T x``.

    Log-probabilities are clamped to ``[log 1e-12, log(1 - 1e-12)]``; clamped
    entries contribute no gradient.
    """

    name = "logistic"
    box_x = (-np.inf, np.inf)
    box_y = (0.0, 1.0)
    couples_all_attributes = True

    def _evaluate(self, x, y, net):
        W = net.W
        z = W.T @ x
        log_g = -np.logaddexp(0.0, -z)
        log_h = -np.logaddexp(0.0, z)
        live_g = (log_g > LOG_FLOOR) & (log_g < LOG_CEIL)
        live_h = (log_h > LOG_FLOOR) & (log_h < LOG_CEIL)
        lg = np.clip(log_g, LOG_FLOOR, LOG_CEIL)
        lh = np.clip(log_h, LOG_FLOOR, LOG_CEIL)
        g = np.exp(log_g)
        h = np.exp(log_h)
        val = float(y @ lg + (1.0 - y) @ lh) + _reg(x, y)
        dz = y * h * live_g - (1.0 - y) * g * live_h
        return ScoreEval(val, W @ dz - x, lg - lh - y)


SCORES = {
    cls.name: cls
    for cls in (FisherScore, ElevatedMeanScore, CoherenceScore, CoherenceDensityScore, NegSquaredErrorScore, LogisticScore)
}


def make_score(name: str, cfg: ScoreConfig | None = None) -> ScoreFunction:
    key = name.replace("-", "_").lower()
    if key not in SCORES:
        raise ScoreConfigError(f"unknown score {name!r}; choose from {sorted(SCORES)}")
    return SCORES[key](cfg or ScoreConfig())
