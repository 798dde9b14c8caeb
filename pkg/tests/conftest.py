import numpy as np
import pytest

from sgpursuit.graph import AttributedNetwork


def path_net(n=3, p=1, W=None):
    W = np.zeros((n, p)) if W is None else np.asarray(W, dtype=float)
    return AttributedNetwork(W, np.array([[i, i + 1] for i in range(n - 1)]).reshape(-1, 2))


def random_net(rng, n, p=3, density=None):
    """Connected random graph: random spanning tree plus extra edges."""
    edges = [(int(rng.integers(0, v)), v) for v in range(1, n)]
    q = rng.uniform(0.05, 0.4) if density is None else density
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < q:
                edges.append((u, v))
    return AttributedNetwork(rng.standard_normal((n, p)), np.array(edges, dtype=np.int64).reshape(-1, 2))


def central_difference(f, z, h=1e-5):
    g = np.empty_like(z)
    for i in range(z.size):
        e = np.zeros_like(z)
        e[i] = h
        g[i] = (f(z + e) - f(z - e)) / (2 * h)
    return g


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def interior_point(rng, score, net):
    """Random point strictly inside the score's box."""

    def draw(box, size):
        lo = box[0] if np.isfinite(box[0]) else -1.0
        hi = box[1] if np.isfinite(box[1]) else 1.0
        return rng.uniform(lo + 0.05 * (hi - lo), hi - 0.05 * (hi - lo), size)

    return draw(score.box_x, net.n), draw(score.box_y, net.p)


def gradient_rel_error(score, net, x, y, h=1e-5):
    """Relative l2 error between the analytic gradient and central differences."""
    ev = score.evaluate(x, y, net)
    n = net.n
    z = np.concatenate([x, y])
    fd = central_difference(lambda v: score.value(v[:n], v[n:], net), z, h)
    g = np.concatenate([ev.grad_x, ev.grad_y])
    return float(np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-8))


def score_for(name, net):
    from sgpursuit.scores import ScoreConfig, make_score

    cfg = ScoreConfig(sigma=0.5, response_c=np.linspace(-1, 1, net.p)) if name == "neg_squared_error" else ScoreConfig(sigma=0.5)
    return make_score(name, cfg)


def projection_trial(rng):
    """One random instance of the projection contract check against brute force.

    Returns ``(head_ok, tail_ok, shape_ok)``: the two approximation factors and
    connectivity plus relaxed size of both pcst supports.
    """
    import math

    from sgpursuit.graph import induced_subgraph_connected
    from sgpursuit.projections import exact_project_oracle, pcst_project

    n = int(rng.integers(2, 16))
    pe = rng.uniform(0.1, 0.6)
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < pe]
    net = AttributedNetwork(np.zeros((n, 1)), np.array(edges, dtype=np.int64).reshape(-1, 2))
    x = rng.standard_normal(n) * (rng.random(n) < 0.6)
    k = int(rng.integers(1, n + 1))
    eh = exact_project_oracle(x, k, net, "head")
    et = exact_project_oracle(x, k, net, "tail")
    ph = pcst_project(x, k, net, "head")
    pt = pcst_project(x, k, net, "tail")
    head_ok = ph.captured_mass >= math.sqrt(1 / 14) * eh.captured_mass - 1e-12
    tail_ok = pt.residual <= math.sqrt(7) * et.residual + 1e-12
    shape_ok = all(
        r.support.size == 0 or (r.support.size <= min(n, 2 * k) and induced_subgraph_connected(net, r.support))
        for r in (ph, pt)
    )
    return head_ok, tail_ok, shape_ok


# one line per acceptance criterion, printed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
