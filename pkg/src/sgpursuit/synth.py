"""Synthetic benchmarks with planted subspace clusters, and evaluation metrics.

Two generators are provided:

* :func:`generate_coherent` plants one dense cluster whose members agree on a
  few attributes among several dense but incoherent clusters.
* :func:`generate_anomalous` plants a connected cluster whose members have an
  elevated mean on a few attributes inside an otherwise Gaussian background.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import docfmt
from .graph import AttributedNetwork, _connected, as_index_set, connected_components


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class GroundTruth:
    nodes: np.ndarray
    attributes: np.ndarray


@dataclass(frozen=True)
class CoherentSynthConfig:
    """Planted coherent dense cluster among incoherent dense clusters.

    ``cluster_sizes`` optionally lists one size per cluster (coherent cluster
    first) and overrides ``cluster_size`` and ``n_clusters_incoherent``.
    """

    n_clusters_incoherent: int = 9
    n_attrs_total: int = 100
    n_attrs_coherent: int = 10
    cluster_size: int = 30
    p_in: float = 0.35
    p_out: float = 0.1
    coherent_std: float = math.sqrt(0.001)
    mean_low: float = -2.0
    mean_high: float = 2.0
    cluster_sizes: tuple | None = None
    rng_seed: int = 0

    def __post_init__(self):
        if not (0 <= self.p_out < self.p_in <= 1):
            raise ValueError(f"need 0 <= p_out < p_in <= 1, got p_out={self.p_out}, p_in={self.p_in}")
        if not 1 <= self.n_attrs_coherent <= self.n_attrs_total:
            raise ValueError("n_attrs_coherent must lie in [1, n_attrs_total]")
        if self.coherent_std < 0:
            raise ValueError("coherent_std must be non-negative")
        if self.cluster_sizes is not None:
            object.__setattr__(self, "cluster_sizes", tuple(int(c) for c in self.cluster_sizes))
            if len(self.cluster_sizes) < 1 or min(self.cluster_sizes) < 1:
                raise ValueError("cluster_sizes must list positive sizes")

    def sizes(self) -> tuple:
        if self.cluster_sizes is not None:
            return self.cluster_sizes
        return (self.cluster_size,) * (self.n_clusters_incoherent + 1)


GRAPHS = ("erdos-renyi", "grid", "knn")


@dataclass(frozen=True)
class AnomalySynthConfig:
    """Connected cluster with elevated attribute means in a Gaussian background."""

    n: int = 400
    p: int = 50
    cluster_size: int = 30
    n_attrs_anomalous: int = 5
    signal_mu: float = 3.0
    base_graph: str = "grid"
    er_q: float | None = None
    knn_k: int = 5
    rng_seed: int = 0

    def __post_init__(self):
        if self.base_graph not in GRAPHS:
            raise ValueError(f"base_graph must be one of {GRAPHS}, got {self.base_graph!r}")
        if not 1 <= self.cluster_size <= self.n:
            raise ValueError("cluster_size must lie in [1, n]")
        if not 1 <= self.n_attrs_anomalous <= self.p:
            raise ValueError("n_attrs_anomalous must lie in [1, p]")


def _block_edges(rng, labels, p_in, p_out):
    n = labels.size
    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(labels[iu] == labels[ju], p_in, p_out)
    keep = rng.random(iu.size) < prob
    return np.column_stack([iu[keep], ju[keep]])


def generate_coherent(cfg: CoherentSynthConfig = CoherentSynthConfig()):
    """Dense clusters with one coherent cluster planted among them.

    Returns
    -------
    net : AttributedNetwork
    truth : GroundTruth
        Members of the coherent cluster and its coherent attributes.
    means : ndarray of shape (n_attrs_coherent,)
        Per-attribute means of the coherent block.
    """
    rng = np.random.default_rng(cfg.rng_seed)
    sizes = cfg.sizes()
    n = int(sum(sizes))
    labels = np.repeat(np.arange(len(sizes)), sizes)
    # shuffle node ids so the planted cluster is not a contiguous index range
    perm = rng.permutation(n)
    labels = labels[np.argsort(perm)]
    truth_nodes = np.sort(perm[: sizes[0]])

    for _ in range(100):
        edges = _block_edges(rng, labels, cfg.p_in, cfg.p_out)
        net = AttributedNetwork(np.zeros((n, 1)), edges)
        if _connected(net, truth_nodes):
            break
    else:
        raise GenerationError("planted cluster stayed disconnected after 100 edge draws")

    W = rng.standard_normal((n, cfg.n_attrs_total))
    attrs = np.sort(rng.choice(cfg.n_attrs_total, cfg.n_attrs_coherent, replace=False))
    means = rng.uniform(cfg.mean_low, cfg.mean_high, cfg.n_attrs_coherent)
    W[np.ix_(truth_nodes, attrs)] = means + cfg.coherent_std * rng.standard_normal((truth_nodes.size, attrs.size))
    return AttributedNetwork(W, edges), GroundTruth(truth_nodes, attrs), means


def _grid_edges(n):
    cols = int(math.ceil(math.sqrt(n)))
    idx = np.arange(n)
    right = idx[(idx % cols < cols - 1) & (idx + 1 < n)]
    down = idx[idx + cols < n]
    return np.concatenate([np.column_stack([right, right + 1]), np.column_stack([down, down + cols])])


def _knn_edges(rng, n, k):
    from sklearn.neighbors import NearestNeighbors

    pts = rng.random((n, 2))
    k = min(k, n - 1)
    _, nbr = NearestNeighbors(n_neighbors=k + 1).fit(pts).kneighbors(pts)
    src = np.repeat(np.arange(n), k)
    return np.column_stack([src, nbr[:, 1:].ravel()])


def _base_graph(rng, cfg):
    n = cfg.n
    for _ in range(100):
        if cfg.base_graph == "grid":
            e = _grid_edges(n)
        elif cfg.base_graph == "knn":
            e = _knn_edges(rng, n, cfg.knn_k)
        else:
            q = cfg.er_q if cfg.er_q is not None else min(1.0, 2.0 * math.log(max(n, 2)) / n)
            iu, ju = np.triu_indices(n, k=1)
            keep = rng.random(iu.size) < q
            e = np.column_stack([iu[keep], ju[keep]])
        net = AttributedNetwork(np.zeros((n, 1)), e)
        if n == 1 or len(connected_components(net)) == 1:
            return net
    raise GenerationError(f"could not draw a connected {cfg.base_graph} graph in 100 attempts")


def random_walk_subset(rng, net: AttributedNetwork, size: int) -> np.ndarray:
    """Connected node set of the given size collected by a random walk."""
    v = int(rng.integers(net.n))
    seen = {v}
    for _ in range(100 * net.n):
        if len(seen) >= size:
            break
        nb = net.neighbors[v]
        if nb.size == 0:
            break
        v = int(nb[rng.integers(nb.size)])
        seen.add(v)
    if len(seen) < size:
        raise GenerationError(f"random walk reached only {len(seen)} of {size} nodes")
    return np.array(sorted(seen), dtype=np.int64)


def generate_anomalous(cfg: AnomalySynthConfig = AnomalySynthConfig()):
    """Gaussian attributes with a connected cluster shifted by ``signal_mu`` on a few attributes."""
    rng = np.random.default_rng(cfg.rng_seed)
    base = _base_graph(rng, cfg)
    nodes = random_walk_subset(rng, base, cfg.cluster_size)
    attrs = np.sort(rng.choice(cfg.p, cfg.n_attrs_anomalous, replace=False))
    W = rng.standard_normal((cfg.n, cfg.p))
    W[np.ix_(nodes, attrs)] += cfg.signal_mu
    return AttributedNetwork(W, base.edges), GroundTruth(nodes, attrs)


# ---------------------------------------------------------------------------
# metrics


def f_measure(truth, detected) -> tuple[float, float, float]:
    """Precision, recall and their harmonic mean between two index sets."""
    t = set(np.asarray(truth).ravel().tolist())
    d = set(np.asarray(detected).ravel().tolist())
    if not d or not t:
        return 0.0, 0.0, 0.0
    hit = len(t & d)
    prec, rec = hit / len(d), hit / len(t)
    f = 0.0 if hit == 0 else 2 * prec * rec / (prec + rec)
    return prec, rec, f


@dataclass(frozen=True)
class ClusterMetrics:
    density: float
    size: int
    coherence_distance: float
    singleton: bool = False


def cluster_metrics(net: AttributedNetwork, nodes, attributes) -> ClusterMetrics:
    """Average induced degree, size, and mean pairwise distance on the chosen attributes."""
    from scipy.spatial.distance import pdist

    S = as_index_set(nodes, net.n, "cluster nodes")
    R = as_index_set(attributes, net.p, "cluster attributes")
    if S.size == 0:
        raise ValueError("cluster metrics need a nonempty node set")
    inside = np.zeros(net.n, dtype=bool)
    inside[S] = True
    e = net.edges
    m_in = int(np.count_nonzero(inside[e[:, 0]] & inside[e[:, 1]])) if e.size else 0
    if S.size == 1:
        return ClusterMetrics(0.0, 1, 0.0, singleton=True)
    dist = float(pdist(net.W[np.ix_(S, R)]).mean()) if R.size else 0.0
    return ClusterMetrics(2.0 * m_in / S.size, int(S.size), dist)


# ---------------------------------------------------------------------------
# truth and metadata files


def write_truth(path, truth: GroundTruth, meta: dict | None = None) -> None:
    blocks = [("truth", {"nodes": truth.nodes, "attributes": truth.attributes})]
    if meta:
        blocks.append(("metadata", meta))
    docfmt.dump(path, blocks)


def read_truth(path) -> GroundTruth:
    b = docfmt.first_block(docfmt.load(path), "truth")
    return GroundTruth(docfmt.as_ints(b.get("nodes", "")), docfmt.as_ints(b.get("attributes", "")))


def config_fields(cfg) -> dict:
    out = {}
    for k, v in asdict(cfg).items():
        if v is None:
            out[k] = "none"
        elif isinstance(v, tuple):
            out[k] = np.asarray(v)
        else:
            out[k] = v
    return out
