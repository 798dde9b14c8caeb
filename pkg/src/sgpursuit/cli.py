"""Command-line entry point: generate, detect, evaluate, verify-rsc, bench.

Every output is a key-value block document (see :mod:`sgpursuit.docfmt`) with
a ``[metadata]`` block echoing the effective configuration.  Settings resolve
as command-line flag, then ``--config`` document (``[config]`` block), then
built-in default.  The ``timestamp`` and ``wall_time`` fields are the only
parts of an output that change between identical runs.

Exit codes: 0 success, 1 usage/config/IO error, 2 detection stopped without
meeting the epsilon rule (iteration cap or a two-step cycle).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, docfmt
from .graph import AttributedNetwork, as_index_set, load_network, save_network
from .projections import TopologyConstraint
from .pursuit import PursuitConfig, extract_top_k_clusters, sg_pursuit
from .rsc import lemma_constants, normalize_attributes, sample_rsc_rss, write_report
from .scores import ScoreConfig, make_score
from .synth import (
    AnomalySynthConfig,
    CoherentSynthConfig,
    cluster_metrics,
    config_fields,
    f_measure,
    generate_anomalous,
    generate_coherent,
    read_truth,
    write_truth,
)

log = logging.getLogger("sgpursuit")

EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED = 0, 1, 2
SCORE_CHOICES = ("fisher", "elevated-mean", "coherence", "coherence-density", "nsq-error", "logistic")
SCORE_ALIASES = {"nsq-error": "neg_squared_error"}
LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}

NET_FILE, ATTR_FILE, TRUTH_FILE, META_FILE = "network.edges", "network.attrs", "truth.txt", "metadata.txt"
RESULT_FILE, METRICS_FILE = "result.txt", "metrics.txt"

DEFAULTS = {
    "task": "coherent",
    "seed": 0,
    "score": None,
    "k": None,
    "s": None,
    "top_k": 1,
    "backend": "pcst",
    "epsilon": 1e-4,
    "max_iters": 50,
    "lam": 5.0,
    "sigma": 0.01,
    "mu": 3.0,
    "r": None,
    "init": "local_seeds",
    "n_starts": 5,
    "deflation": "column_mean",
    "trials": 1000,
    "normalize": None,
    "graph": "grid",
    "n": 400,
    "p": None,
    "cluster_size": 30,
    "n_attrs": None,
    "n_clusters": 9,
    "p_in": 0.35,
    "p_out": 0.1,
    "jobs": 1,
}


class CliError(Exception):
    pass


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def resolve(args: argparse.Namespace, keys) -> dict:
    """Merge flags over the ``[config]`` block of ``--config`` over defaults."""
    conf = {}
    if getattr(args, "config", None):
        try:
            blocks = docfmt.load(args.config)
        except (OSError, docfmt.DocumentError) as e:
            raise CliError(f"cannot read config document: {e}") from None
        found = docfmt.find_blocks(blocks, "config")
        if found:
            conf = {k.replace("-", "_"): docfmt.parse_scalar(v) for k, v in found[0].items()}
    out = {}
    for key in keys:
        val = getattr(args, key, None)
        if val is None:
            val = conf.get(key, DEFAULTS.get(key))
        out[key] = val
    return out


def _meta(command: str, eff: dict) -> dict:
    meta = {"command": command, "version": __version__}
    meta.update({k: ("none" if v is None else v) for k, v in eff.items()})
    meta["timestamp"] = _timestamp()
    return meta


def _require(args, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n, None) is None]
    if missing:
        raise CliError(f"missing required option(s): {' '.join(missing)}")


def _load(args) -> AttributedNetwork:
    _require(args, "net", "attrs")
    return load_network(args.net, args.attrs)


def _score_key(name: str) -> str:
    return SCORE_ALIASES.get(name, name).replace("-", "_")


# ---------------------------------------------------------------------------
# generate


def generate(eff: dict, out: Path) -> dict:
    """Write network, attributes, truth and metadata for one synthetic instance."""
    out.mkdir(parents=True, exist_ok=True)
    if eff["task"] == "coherent":
        cfg = CoherentSynthConfig(
            n_clusters_incoherent=int(eff["n_clusters"]),
            n_attrs_total=int(eff["p"] or 100),
            n_attrs_coherent=int(eff["n_attrs"] or 10),
            cluster_size=int(eff["cluster_size"]),
            p_in=float(eff["p_in"]),
            p_out=float(eff["p_out"]),
            rng_seed=int(eff["seed"]),
        )
        net, truth, means = generate_coherent(cfg)
        extra = {"coherent_means": means}
    else:
        cfg = AnomalySynthConfig(
            n=int(eff["n"]),
            p=int(eff["p"] or 50),
            cluster_size=int(eff["cluster_size"]),
            n_attrs_anomalous=int(eff["n_attrs"] or 5),
            signal_mu=float(eff["mu"]),
            base_graph=eff["graph"],
            rng_seed=int(eff["seed"]),
        )
        net, truth = generate_anomalous(cfg)
        extra = {}
    save_network(net, out / NET_FILE, out / ATTR_FILE)
    fields = {"task": eff["task"], **config_fields(cfg), **extra}
    write_truth(out / TRUTH_FILE, truth, fields)
    meta = _meta("generate", eff)
    meta.update(fields)
    docfmt.dump(out / META_FILE, [("metadata", meta)])
    return {"net": net, "truth": truth}


def cmd_generate(args) -> int:
    _require(args, "out")
    eff = resolve(args, ["task", "seed", "mu", "graph", "n", "p", "cluster_size", "n_attrs", "n_clusters", "p_in", "p_out"])
    try:
        generate(eff, Path(args.out))
    except OSError as e:
        raise CliError(f"cannot write to {args.out}: {e}") from None
    log.info("wrote %s instance to %s", eff["task"], args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# detect

DETECT_KEYS = [
    "score", "k", "s", "top_k", "backend", "seed", "epsilon", "max_iters", "lam", "sigma", "r",
    "init", "n_starts", "deflation",
]


def _read_response(path, p):
    if path is None:
        return None
    c = np.loadtxt(path, dtype=float, ndmin=1).ravel()
    if c.size != p:
        raise CliError(f"response vector has {c.size} entries but the network has p={p} attributes")
    return c


def detect(net: AttributedNetwork, eff: dict, response=None):
    # record the resolved values so the metadata echoes what actually ran
    eff["score"] = score_name = eff["score"] or "elevated-mean"
    eff["k"] = k = int(eff["k"] or min(10, net.n))
    eff["s"] = s = int(eff["s"] or min(5, net.p))
    score_cfg = ScoreConfig(
        sigma=float(eff["sigma"]), lam=float(eff["lam"]), response_c=response,
        r_sparsity=None if eff["r"] is None else int(eff["r"]),
    )
    score = make_score(_score_key(score_name), score_cfg)
    cfg = PursuitConfig(
        k=k, s=s, epsilon=float(eff["epsilon"]), max_iters=int(eff["max_iters"]),
        init_mode=eff["init"], n_starts=int(eff["n_starts"]), rng_seed=int(eff["seed"]),
    )
    constraint = TopologyConstraint(k, backend=eff["backend"])
    if int(eff["top_k"]) > 1:
        return extract_top_k_clusters(net, score, constraint, cfg, int(eff["top_k"]), eff["deflation"])
    return [sg_pursuit(net, score, constraint, cfg)]


def cluster_block(c) -> dict:
    d = c.diagnostics
    return {
        "nodes": c.nodes,
        "attributes": c.attributes,
        "score": c.score,
        "converged": c.converged,
        "iterations": c.iterations_used,
        "stop_reason": d.get("stop_reason", ""),
        "objective_trace": d.get("objective_trace", np.empty(0)),
        "step_x_trace": d.get("step_x_trace", np.empty(0)),
        "step_y_trace": d.get("step_y_trace", np.empty(0)),
    }


def write_result(path, clusters, meta) -> None:
    blocks = [(f"cluster {j}", cluster_block(c)) for j, c in enumerate(clusters)]
    blocks.append(("metadata", meta))
    docfmt.dump(path, blocks)


def read_result(path) -> list[dict]:
    out = []
    for b in docfmt.find_blocks(docfmt.load(path), "cluster"):
        out.append(
            {
                "nodes": docfmt.as_ints(b.get("nodes", "")),
                "attributes": docfmt.as_ints(b.get("attributes", "")),
                "score": docfmt.as_float(b["score"]),
                "converged": docfmt.as_bool(b["converged"]),
                "iterations": docfmt.as_int(b["iterations"]),
            }
        )
    return out


def cmd_detect(args) -> int:
    _require(args, "out")
    net = _load(args)
    eff = resolve(args, DETECT_KEYS)
    response = _read_response(getattr(args, "response", None), net.p)
    t0 = time.perf_counter()
    clusters = detect(net, eff, response)
    elapsed = time.perf_counter() - t0
    meta = _meta("detect", {**eff, "net": args.net, "attrs": args.attrs})
    meta["wall_time"] = elapsed
    write_result(args.out, clusters, meta)
    if not all(c.converged for c in clusters):
        log.warning("detection stopped without meeting the epsilon rule")
        return EXIT_NOT_CONVERGED
    return EXIT_OK


# ---------------------------------------------------------------------------
# evaluate


def evaluate_one(net: AttributedNetwork, result: list[dict], truth=None) -> dict:
    if not result:
        raise CliError("result document holds no clusters")
    c = result[0]
    if c["nodes"].size:
        as_index_set(c["nodes"], net.n, "result nodes")
        as_index_set(c["attributes"], net.p, "result attributes")
    out = {}
    if truth is not None:
        out["node_precision"], out["node_recall"], out["node_f"] = f_measure(truth.nodes, c["nodes"])
        out["attr_precision"], out["attr_recall"], out["attr_f"] = f_measure(truth.attributes, c["attributes"])
    if c["nodes"].size:
        m = cluster_metrics(net, c["nodes"], c["attributes"])
        out.update(density=m.density, size=m.size, coherence_distance=m.coherence_distance, singleton=m.singleton)
    else:
        out.update(density=0.0, size=0, coherence_distance=0.0, singleton=False)
    out["converged"] = c["converged"]
    out["iterations"] = c["iterations"]
    return out


def summarize(rows: list[dict]) -> dict:
    """Mean and standard deviation of every numeric metric over trials."""
    out = {"trials": len(rows)}
    for key in rows[0]:
        vals = np.array([float(r[key]) for r in rows])
        out[f"{key}_mean"] = float(vals.mean())
        out[f"{key}_std"] = float(vals.std())
    return out


def _evaluate_dir(d: Path) -> dict:
    net = load_network(d / NET_FILE, d / ATTR_FILE)
    truth = read_truth(d / TRUTH_FILE) if (d / TRUTH_FILE).exists() else None
    return evaluate_one(net, read_result(d / RESULT_FILE), truth)


def cmd_evaluate(args) -> int:
    _require(args, "out")
    if args.batch:
        dirs = sorted(p for p in Path(args.batch).iterdir() if (p / RESULT_FILE).exists())
        if not dirs:
            raise CliError(f"no trial directories with {RESULT_FILE} under {args.batch}")
        rows = [_evaluate_dir(d) for d in dirs]
        blocks = [(f"trial {d.name}", r) for d, r in zip(dirs, rows)]
        blocks.insert(0, ("summary", summarize(rows)))
    else:
        _require(args, "result")
        net = _load(args)
        truth = read_truth(args.truth) if args.truth else None
        blocks = [("metrics", evaluate_one(net, read_result(args.result), truth))]
    blocks.append(("metadata", _meta("evaluate", {"result": args.result, "truth": args.truth, "batch": args.batch})))
    docfmt.dump(args.out, blocks)
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify-rsc


def cmd_verify_rsc(args) -> int:
    _require(args, "out")
    net = _load(args)
    eff = resolve(args, ["score", "k", "s", "trials", "seed", "sigma", "lam", "r", "normalize", "backend"])
    eff["score"] = eff["score"] or "fisher"
    key = _score_key(eff["score"])
    eff["k"] = k = int(eff["k"] or min(10, net.n))
    eff["s"] = s = int(eff["s"] or min(5, net.p))
    r = int(eff["r"] or k) if key == "elevated_mean" else None
    if eff["normalize"] is not None:
        target = float(eff["normalize"]) * (r or 1)
        net = net.with_attributes(normalize_attributes(net.W, target))
    response = _read_response(getattr(args, "response", None), net.p)
    if key == "neg_squared_error" and response is None:
        response = np.zeros(net.p)
    cfg = ScoreConfig(sigma=float(eff["sigma"]), lam=float(eff["lam"]), response_c=response, r_sparsity=r)
    score = make_score(key, cfg)
    factors = TopologyConstraint(k, backend=eff["backend"]).approx_factors
    consts = lemma_constants(key, net, cfg, factors)
    if not consts.applicable:
        log.warning("%s", consts.note)
    sample = sample_rsc_rss(score, net, k, s, int(eff["trials"]), int(eff["seed"]), consts, sum_constraint=r)
    write_report(args.out, consts, sample, _meta("verify-rsc", {**eff, "net": args.net, "attrs": args.attrs}))
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench


def run_trial(eff: dict, trial_dir: str) -> dict:
    d = Path(trial_dir)
    data = generate(eff, d)
    det = dict(eff)
    if det["task"] == "coherent":
        det["score"] = det["score"] or "coherence-density"
        det["k"] = det["k"] or det["cluster_size"]
        det["s"] = det["s"] or (det["n_attrs"] or 10)
    else:
        det["k"] = det["k"] or det["cluster_size"]
        det["s"] = det["s"] or (det["n_attrs"] or 5)
    t0 = time.perf_counter()
    clusters = detect(data["net"], det)
    elapsed = time.perf_counter() - t0
    meta = _meta("detect", det)
    meta["wall_time"] = elapsed
    write_result(d / RESULT_FILE, clusters, meta)
    row = evaluate_one(data["net"], read_result(d / RESULT_FILE), data["truth"])
    docfmt.dump(d / METRICS_FILE, [("metrics", row)])
    return row


def cmd_bench(args) -> int:
    _require(args, "out")
    keys = sorted(set(DETECT_KEYS) | {"task", "trials", "mu", "graph", "n", "p", "cluster_size", "n_attrs",
                                      "n_clusters", "p_in", "p_out", "jobs"})
    eff = resolve(args, keys)
    if args.trials is None and eff["trials"] == DEFAULTS["trials"]:
        eff["trials"] = 5
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    # trial t uses seed + t and writes only to its own directory
    jobs = []
    for t in range(int(eff["trials"])):
        te = dict(eff, seed=int(eff["seed"]) + t)
        jobs.append((te, str(out / f"trial_{t:03d}")))
    if int(eff["jobs"]) > 1:
        with ProcessPoolExecutor(int(eff["jobs"])) as ex:
            rows = list(ex.map(run_trial, *zip(*jobs)))
    else:
        rows = [run_trial(*j) for j in jobs]
    docfmt.dump(out / "summary.txt", [("summary", summarize(rows)), ("metadata", _meta("bench", eff))])
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sgpursuit", description="Connected subspace cluster detection in attributed networks.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key-value document whose [config] block supplies defaults")
        p.add_argument("--out", help="output file (directory for generate/bench)")
        p.add_argument("--seed", type=int)

    def network(p):
        p.add_argument("--net", help="edge list file")
        p.add_argument("--attrs", help="attribute matrix file")

    def algo(p):
        p.add_argument("--score", choices=SCORE_CHOICES)
        p.add_argument("--k", type=int, help="node budget")
        p.add_argument("--s", type=int, help="attribute budget")
        p.add_argument("--top-k", dest="top_k", type=int, help="number of clusters to extract")
        p.add_argument("--backend", choices=("exact", "pcst"))
        p.add_argument("--epsilon", type=float)
        p.add_argument("--max-iters", dest="max_iters", type=int)
        p.add_argument("--lambda", dest="lam", type=float, help="density weight")
        p.add_argument("--sigma", type=float, help="coherence variance scale")
        p.add_argument("--r", type=int, help="assumed cluster size for the elevated-mean bounds")
        p.add_argument("--init", choices=("local_seeds", "top_norm", "zeros", "random"))
        p.add_argument("--n-starts", dest="n_starts", type=int)
        p.add_argument("--deflation", choices=("column_mean", "remove_nodes"))
        p.add_argument("--response", help="file with the p-vector of the squared-error target")

    def synth(p):
        p.add_argument("--task", choices=("coherent", "anomalous"))
        p.add_argument("--mu", type=float, help="elevated mean of the anomalous block")
        p.add_argument("--graph", choices=("grid", "knn", "erdos-renyi"))
        p.add_argument("--n", type=int)
        p.add_argument("--p", type=int)
        p.add_argument("--cluster-size", dest="cluster_size", type=int)
        p.add_argument("--n-attrs", dest="n_attrs", type=int, help="coherent or anomalous attribute count")
        p.add_argument("--n-clusters", dest="n_clusters", type=int, help="incoherent cluster count")
        p.add_argument("--p-in", dest="p_in", type=float)
        p.add_argument("--p-out", dest="p_out", type=float)

    p = sub.add_parser("generate", help="write a synthetic instance")
    common(p)
    synth(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("detect", help="detect subspace clusters")
    common(p)
    network(p)
    algo(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("evaluate", help="score a result against truth")
    common(p)
    network(p)
    p.add_argument("--result")
    p.add_argument("--truth")
    p.add_argument("--batch", help="directory of trial subdirectories to average")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("verify-rsc", help="curvature constants and sampled checks")
    common(p)
    network(p)
    p.add_argument("--score", choices=SCORE_CHOICES)
    p.add_argument("--k", type=int)
    p.add_argument("--s", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--r", type=int)
    p.add_argument("--backend", choices=("exact", "pcst"))
    p.add_argument("--normalize", type=float, help="rescale W so that ||W||_2^2 equals this value")
    p.add_argument("--response")
    p.set_defaults(func=cmd_verify_rsc)

    p = sub.add_parser("bench", help="seeded generate/detect/evaluate trials")
    common(p)
    synth(p)
    algo(p)
    p.add_argument("--trials", type=int)
    p.add_argument("--jobs", type=int, help="parallel worker processes")
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    level = os.environ.get("SGP_LOG_LEVEL", "warn").lower()
    logging.basicConfig(level=LOG_LEVELS.get(level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_ERROR if e.code else EXIT_OK
    try:
        return args.func(args)
    except (CliError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
