"""Release acceptance suite: one test per criterion, each printing a pass/fail line."""

import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE, gradient_rel_error, interior_point, projection_trial, random_net, score_for
from sgpursuit import docfmt
from sgpursuit.cli import main, read_result
from sgpursuit.graph import load_network, save_network
from sgpursuit.projections import TopologyConstraint
from sgpursuit.pursuit import PursuitConfig, shrinkage_ratios, sg_pursuit
from sgpursuit.rsc import lemma_constants, normalize_attributes, sample_rsc_rss
from sgpursuit.scores import SCORES, ScoreConfig, make_score
from sgpursuit.synth import (
    AnomalySynthConfig,
    CoherentSynthConfig,
    GroundTruth,
    f_measure,
    generate_anomalous,
    generate_coherent,
    read_truth,
    write_truth,
)

pytestmark = pytest.mark.acceptance


def report(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[n] = line
    print(line)
    return ok


def test_criterion_1_gradients():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst = {}
    for name in sorted(SCORES):
        net = random_net(rng, 10, 5)
        sc = score_for(name, net)
        errs = [gradient_rel_error(sc, net, *interior_point(rng, sc, net)) for _ in range(100)]
        worst[name] = max(errs)
    elapsed = time.perf_counter() - t0
    ok = max(worst.values()) <= 1e-5 and elapsed < 10
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    assert report(1, ok, f"max rel err {detail}; {elapsed:.1f} s (< 10 s)")


def test_criterion_2_projection_contracts():
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    trials = [projection_trial(rng) for _ in range(200)]
    elapsed = time.perf_counter() - t0
    head = sum(not t[0] for t in trials)
    tail = sum(not t[1] for t in trials)
    shape = sum(not t[2] for t in trials)
    ok = head == tail == shape == 0 and elapsed < 60
    assert report(2, ok, f"violations head {head}, tail {tail}, shape {shape} over 200 graphs; {elapsed:.1f} s (< 60 s)")


def test_criterion_3_rsc_conformance():
    net, _ = generate_anomalous(AnomalySynthConfig(rng_seed=3))
    k, s, r = 10, 5, 5
    t0 = time.perf_counter()
    counts = {}
    for name in ("fisher", "logistic", "elevated_mean", "neg_squared_error"):
        if name == "elevated_mean":
            W = normalize_attributes(net.W, 0.9 * r)
            cfg = ScoreConfig(r_sparsity=r)
        else:
            W = normalize_attributes(net.W, 0.9)
            cfg = ScoreConfig(response_c=np.zeros(net.p)) if name == "neg_squared_error" else ScoreConfig()
        inst = net.with_attributes(W)
        consts = lemma_constants(name, inst, cfg)
        assert consts.applicable
        sample = sample_rsc_rss(
            make_score(name, cfg), inst, k, s, 1000, rng_seed=3, bounds=consts,
            sum_constraint=r if name == "elevated_mean" else None,
        )
        counts[name] = sample.n_violations
    elapsed = time.perf_counter() - t0
    ok = sum(counts.values()) == 0 and elapsed < 30
    detail = ", ".join(f"{k} {v}" for k, v in counts.items())
    assert report(3, ok, f"violations {detail} (1000 samples each); {elapsed:.1f} s (< 30 s)")


def _coherent_runs():
    runs = []
    for seed in range(20):
        net, truth, _ = generate_coherent(CoherentSynthConfig(rng_seed=seed))
        c = sg_pursuit(net, make_score("coherence_density"), TopologyConstraint(30), PursuitConfig(30, 10))
        runs.append((truth, c))
    return runs


@pytest.fixture(scope="module")
def coherent_runs():
    t0 = time.perf_counter()
    runs = _coherent_runs()
    return runs, time.perf_counter() - t0


def test_criterion_4_coherent_recovery(coherent_runs):
    runs, elapsed = coherent_runs
    fn = np.mean([f_measure(t.nodes, c.nodes)[2] for t, c in runs])
    fa = np.mean([f_measure(t.attributes, c.attributes)[2] for t, c in runs])
    ok = fn >= 0.70 and fa >= 0.70 and elapsed < 300
    assert report(4, ok, f"mean node F {fn:.3f}, attribute F {fa:.3f} over 20 seeds (>= 0.70); {elapsed:.1f} s (< 300 s)")


def test_criterion_5_anomalous_recovery():
    t0 = time.perf_counter()
    sc, con, cfg = make_score("elevated_mean"), TopologyConstraint(30), PursuitConfig(30, 5)
    parts = []
    ok = True
    for graph in ("grid", "knn"):
        fn, fa = [], []
        for seed in range(20):
            net, truth = generate_anomalous(AnomalySynthConfig(base_graph=graph, rng_seed=seed))
            c = sg_pursuit(net, sc, con, cfg)
            fn.append(f_measure(truth.nodes, c.nodes)[2])
            fa.append(f_measure(truth.attributes, c.attributes)[2])
        ok &= np.mean(fn) >= 0.8 and np.mean(fa) >= 0.8
        parts.append(f"{graph} node F {np.mean(fn):.3f} attr F {np.mean(fa):.3f}")
    # null guard: with no signal the detected set overlaps the planted one
    # about as much as a random set of the same size would
    fn, chance, fa, chance_a = [], [], [], []
    for seed in range(50):
        net, truth = generate_anomalous(AnomalySynthConfig(signal_mu=0.0, rng_seed=1000 + seed))
        c = sg_pursuit(net, sc, con, cfg)
        d, t = c.nodes.size, truth.nodes.size
        fn.append(f_measure(truth.nodes, c.nodes)[2])
        chance.append(2 * d * t / (net.n * (d + t)))
        da, ta = c.attributes.size, truth.attributes.size
        fa.append(f_measure(truth.attributes, c.attributes)[2])
        chance_a.append(2 * da * ta / (net.p * (da + ta)))
    margin = 3 * np.std(fn) / math.sqrt(50)
    margin_a = 3 * np.std(fa) / math.sqrt(50)
    null_ok = np.mean(fn) <= np.mean(chance) + margin and np.mean(fa) <= np.mean(chance_a) + margin_a
    elapsed = time.perf_counter() - t0
    ok = ok and null_ok and elapsed < 300
    parts.append(
        f"null node F {np.mean(fn):.3f} vs chance {np.mean(chance):.3f}+{margin:.3f}, "
        f"attr F {np.mean(fa):.3f} vs {np.mean(chance_a):.3f}+{margin_a:.3f}"
    )
    assert report(5, ok, "; ".join(parts) + f"; {elapsed:.1f} s (< 300 s)")


def test_criterion_6_convergence(coherent_runs):
    runs, _ = coherent_runs
    eps_exit = [c.converged and c.diagnostics["stop_reason"] == "epsilon" and c.iterations_used <= 50 for _, c in runs]
    contracting = []
    for _, c in runs:
        steps = np.hypot(c.diagnostics["step_x_trace"], c.diagnostics["step_y_trace"])
        r = shrinkage_ratios(steps)
        # a run that stops on its first step has nothing left to contract
        contracting.append(r.size == 0 or r[-1] < 1)
    frac = float(np.mean(contracting))
    ok = all(eps_exit) and frac >= 0.9
    iters = [c.iterations_used for _, c in runs]
    assert report(
        6, ok,
        f"epsilon exits {sum(eps_exit)}/20 (max {max(iters)} iterations); final step ratio < 1 on {frac:.0%} (>= 90%)",
    )


def _median_time(n, p, trials=5):
    sc, con, cfg = make_score("elevated_mean"), TopologyConstraint(30), PursuitConfig(30, 5)
    times = []
    for seed in range(trials):
        net, _ = generate_anomalous(AnomalySynthConfig(n=n, p=p, base_graph="knn", rng_seed=seed))
        t0 = time.perf_counter()
        sg_pursuit(net, sc, con, cfg)
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def test_criterion_7_scaling():
    _median_time(500, 20, trials=1)  # compile and warm caches
    tn = [_median_time(n, 50) for n in (2000, 4000, 8000)]
    tp = [_median_time(2000, p) for p in (50, 100, 200)]
    rn = [tn[i + 1] / tn[i] for i in range(2)]
    rp = [tp[i + 1] / tp[i] for i in range(2)]
    ok = max(rn + rp) <= 2.6
    assert report(
        7, ok,
        "median s n=2000/4000/8000: " + "/".join(f"{t:.3f}" for t in tn)
        + " (ratios " + ", ".join(f"{r:.2f}" for r in rn) + "); p=50/100/200 at n=2000: "
        + "/".join(f"{t:.3f}" for t in tp) + " (ratios " + ", ".join(f"{r:.2f}" for r in rp) + "); bound 2.6",
    )


def _strip(path):
    return [l for l in path.read_text().splitlines() if not l.startswith(("timestamp", "wall_time"))]


def test_criterion_8_determinism_and_round_trips(tmp_path):
    problems = []
    files = ("network.edges", "network.attrs", "truth.txt", "metadata.txt", "result.txt", "metrics.txt")
    for task in ("coherent", "anomalous"):
        # both replicas write to the same paths so recorded paths agree too
        d = tmp_path / task
        runs = []
        for _ in range(2):
            assert main(["generate", "--task", task, "--seed", "11", "--out", str(d)]) == 0
            score = "coherence-density" if task == "coherent" else "elevated-mean"
            s = "10" if task == "coherent" else "5"
            code = main(["detect", "--net", str(d / "network.edges"), "--attrs", str(d / "network.attrs"),
                         "--score", score, "--k", "30", "--s", s, "--seed", "11", "--out", str(d / "result.txt")])
            assert code in (0, 2)
            assert main(["evaluate", "--net", str(d / "network.edges"), "--attrs", str(d / "network.attrs"),
                         "--result", str(d / "result.txt"), "--truth", str(d / "truth.txt"),
                         "--out", str(d / "metrics.txt")]) == 0
            runs.append({f: _strip(d / f) for f in files})
        for f in files:
            if runs[0][f] != runs[1][f]:
                problems.append(f"{task}/{f} differs")

        # network, truth and result files reproduce their contents exactly
        net = load_network(d / "network.edges", d / "network.attrs")
        save_network(net, tmp_path / "re.edges", tmp_path / "re.attrs")
        back = load_network(tmp_path / "re.edges", tmp_path / "re.attrs")
        if not (back.same_as(net) and np.array_equal(back.W, net.W)):
            problems.append(f"{task} network round trip")
        truth = read_truth(d / "truth.txt")
        write_truth(tmp_path / "re_truth.txt", truth)
        t2 = read_truth(tmp_path / "re_truth.txt")
        if not (np.array_equal(t2.nodes, truth.nodes) and np.array_equal(t2.attributes, truth.attributes)):
            problems.append(f"{task} truth round trip")
        blocks = docfmt.load(d / "result.txt")
        docfmt.dump(tmp_path / "re_result.txt", blocks)
        if docfmt.load(tmp_path / "re_result.txt") != blocks or read_result(tmp_path / "re_result.txt") is None:
            problems.append(f"{task} result round trip")
    rng = np.random.default_rng(8)
    vals = rng.standard_normal(1000) * 10.0 ** rng.integers(-300, 300, 1000)
    text = docfmt.dumps([("x", {"v": vals})])
    if not np.array_equal(docfmt.as_floats(docfmt.loads(text)[0][1]["v"]), vals):
        problems.append("float arrays are not bit-exact")
    ok = not problems
    assert report(8, ok, "identical outputs for identical seeds; network, truth, result and document round trips exact"
                  if ok else "; ".join(problems))
