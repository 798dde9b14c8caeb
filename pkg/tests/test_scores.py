import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import gradient_rel_error, interior_point, path_net, random_net, score_for
from sgpursuit.graph import AttributedNetwork
from sgpursuit.scores import SCORES, ScoreConfig, ScoreConfigError, make_score


def test_fisher_direct_substitution():
    net = path_net(2, W=[[2.0], [3.0]])
    assert make_score("fisher").value([1.0, 0.0], [1.0], net) == pytest.approx(1.0)


def test_fisher_zero_point():
    net = path_net(2, W=[[2.0], [3.0]])
    ev = make_score("fisher").evaluate(np.zeros(2), np.zeros(1), net)
    assert ev.value == 0.0
    assert not ev.grad_x.any() and not ev.grad_y.any()


def test_elevated_mean_direct_substitution():
    net = path_net(1, W=[[1.0]])
    assert make_score("elevated_mean").value([1.0], [1.0], net) == pytest.approx(0.0)


def test_elevated_mean_flags_zero_x():
    net = path_net(3, p=2, W=np.ones((3, 2)))
    ev = make_score("elevated_mean").evaluate(np.zeros(3), np.full(2, 0.5), net)
    assert ev.degenerate
    assert math.isfinite(ev.value)


def test_coherence_constant_column_has_no_penalty():
    W = np.array([[1.0, 0.0], [1.0, 2.0], [5.0, 5.0]])
    net = path_net(3, W=W)
    sc = make_score("coherence", ScoreConfig(sigma=0.01))
    x = np.array([1.0, 1.0, 0.0])
    y = np.array([1.0, 0.0])
    # column 0 is constant on the support, so only the quadratic terms remain
    expected = x @ (W * W) @ y - 0.5 * x @ x - 0.5 * y @ y
    assert sc.value(x, y, net) == pytest.approx(expected)


def test_coherence_penalty_hand_value():
    net = path_net(2, W=[[0.0], [2.0]])
    sc = make_score("coherence", ScoreConfig(sigma=0.01))
    x, y = np.ones(2), np.ones(1)
    # q^T y = 4, penalty 200, regularizer -1.5
    assert sc.value(x, y, net) == pytest.approx(4.0 - 200.0 - 1.5)


def test_density_term_on_triangle():
    net = AttributedNetwork(np.zeros((3, 1)), [[0, 1], [1, 2], [0, 2]])
    x, y = np.ones(3), np.zeros(1)
    dense = make_score("coherence_density", ScoreConfig(lam=5.0)).value(x, y, net)
    plain = make_score("coherence").value(x, y, net)
    assert dense - plain == pytest.approx(10.0)


def test_density_lambda_zero_matches_coherence(rng):
    net = random_net(rng, 8, 3)
    x, y = rng.uniform(0.1, 1, 8), rng.uniform(0, 1, 3)
    a = make_score("coherence_density", ScoreConfig(lam=0.0)).evaluate(x, y, net)
    b = make_score("coherence").evaluate(x, y, net)
    assert a.value == b.value
    np.testing.assert_array_equal(a.grad_x, b.grad_x)


def test_neg_squared_error_values():
    net = path_net(1, W=[[0.0]])
    sc = make_score("neg_squared_error", ScoreConfig(response_c=[1.0]))
    assert sc.value([0.0], [0.0], net) == pytest.approx(-1.0)


def test_neg_squared_error_zero_residual(rng):
    net = random_net(rng, 6, 3)
    x, y = rng.standard_normal(6), rng.standard_normal(3)
    c = net.W.T @ x + y
    sc = make_score("neg_squared_error", ScoreConfig(response_c=c))
    assert sc.value(x, y, net) == pytest.approx(-0.5 * x @ x - 0.5 * y @ y)


def test_neg_squared_error_needs_response():
    net = path_net(2, p=2)
    with pytest.raises(ScoreConfigError):
        make_score("neg_squared_error").value(np.zeros(2), np.zeros(2), net)


def test_logistic_at_zero(rng):
    net = random_net(rng, 5, 4)
    y = rng.uniform(0, 1, 4)
    v = make_score("logistic").value(np.zeros(5), y, net)
    assert v == pytest.approx(4 * math.log(0.5) - 0.5 * y @ y)


def test_logistic_clamp_is_finite():
    net = path_net(1, W=[[50.0]])
    sc = make_score("logistic")
    for x in (1.0, -1.0):
        ev = sc.evaluate([x], [0.5], net)
        assert np.isfinite(ev.value) and np.all(np.isfinite(ev.grad_x)) and np.all(np.isfinite(ev.grad_y))


@pytest.mark.parametrize("name", sorted(SCORES))
def test_gradients_match_finite_differences(name, rng):
    net = random_net(rng, 7, 4)
    sc = score_for(name, net)
    for _ in range(10):
        x, y = interior_point(rng, sc, net)
        assert gradient_rel_error(sc, net, x, y) <= 1e-5


def test_unknown_score():
    with pytest.raises(ScoreConfigError):
        make_score("modularity")


def test_shape_mismatch():
    with pytest.raises(ValueError):
        make_score("fisher").value(np.zeros(2), np.zeros(1), path_net(3))


@pytest.mark.parametrize("name", ["fisher", "elevated_mean", "coherence", "coherence_density"])
def test_seed_values_match_indicator_evaluation(name, rng):
    # closed-form seed scores equal the best score over y at an indicator x
    net = random_net(rng, 9, 5, density=0.5)
    sc = score_for(name, net)
    seeds = np.array([[0, 1, 2], [3, 4, 5], [2, 6, 8]])
    inside = [np.isin(net.edges, S).all(axis=1).sum() for S in seeds]
    vals = sc.seed_values(net, seeds, 2, internal_edges=inside)
    for S, v in zip(seeds, vals):
        x = np.zeros(net.n)
        x[S] = 1.0
        c = sc.seed_coefficients(net.W[S][None])[0]
        best = -np.inf
        for a in range(net.p):
            for b in range(a + 1, net.p):
                y = np.zeros(net.p)
                y[[a, b]] = np.clip(c[[a, b]], 0, 1)
                best = max(best, sc.value(x, y, net))
        assert v == pytest.approx(best, rel=1e-10, abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(sorted(SCORES)))
def test_permutation_equivariance(seed, name):
    rng = np.random.default_rng(seed)
    net = random_net(rng, 6, 3)
    sc = score_for(name, net)
    x, y = interior_point(rng, sc, net)
    perm = rng.permutation(6)
    inv = np.argsort(perm)
    pnet = AttributedNetwork(net.W[perm], inv[net.edges])
    a = sc.evaluate(x, y, net)
    b = sc.evaluate(x[perm], y, pnet)
    assert b.value == pytest.approx(a.value, rel=1e-10, abs=1e-10)
    np.testing.assert_allclose(b.grad_x, a.grad_x[perm], rtol=1e-9, atol=1e-9)
