"""Attributed network data model, validation and text I/O."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import docfmt


class NetworkParseError(ValueError):
    """Malformed edge or attribute file."""


class NetworkValidationError(ValueError):
    """Structurally invalid network (bad index, self-loop, non-finite value...)."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class AttributedNetwork:
    """Undirected, unweighted graph whose nodes carry a row of the n x p matrix ``W``.

    Edges are stored canonically as ``(u, v)`` with ``u < v``, sorted and
    deduplicated.  The object is immutable after construction; all arrays are
    read-only so instances can be shared between threads.
    """

    attributes: np.ndarray
    edges: np.ndarray = field(default_factory=lambda: np.empty((0, 2), dtype=np.int64))

    def __post_init__(self):
        W = np.array(self.attributes, dtype=float, copy=True)
        if W.ndim == 1:
            W = W.reshape(-1, 1)
        if W.ndim != 2 or W.shape[0] < 1 or W.shape[1] < 1:
            raise NetworkValidationError(
                f"attribute matrix must be 2-D with n >= 1 rows and p >= 1 columns, got shape {W.shape}"
            )
        if not np.all(np.isfinite(W)):
            bad = np.argwhere(~np.isfinite(W))[0]
            raise NetworkValidationError(f"non-finite attribute value at row {bad[0]}, column {bad[1]}")
        object.__setattr__(self, "attributes", _readonly(W))
        object.__setattr__(self, "edges", _readonly(canonical_edges(self.edges, W.shape[0])))

    @property
    def n(self) -> int:
        return self.attributes.shape[0]

    @property
    def p(self) -> int:
        return self.attributes.shape[1]

    @property
    def W(self) -> np.ndarray:
        return self.attributes

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        """Symmetric 0/1 adjacency matrix in CSR form."""
        n, e = self.n, self.edges
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        A = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))
        A.sort_indices()
        return A

    @cached_property
    def degrees(self) -> np.ndarray:
        return _readonly(np.diff(self.adjacency.indptr).astype(np.int64))

    @cached_property
    def neighbors(self) -> tuple[np.ndarray, ...]:
        A = self.adjacency
        return tuple(_readonly(A.indices[A.indptr[i] : A.indptr[i + 1]].astype(np.int64)) for i in range(self.n))

    @cached_property
    def neighbor_sets(self) -> tuple[frozenset, ...]:
        return tuple(frozenset(nb.tolist()) for nb in self.neighbors)

    def subnetwork(self, nodes) -> "AttributedNetwork":
        """Induced subnetwork on ``nodes``; node ``nodes[i]`` becomes node ``i``."""
        nodes = np.asarray(nodes, dtype=np.int64)
        pos = np.full(self.n, -1, dtype=np.int64)
        pos[nodes] = np.arange(nodes.size)
        e = self.edges
        keep = (pos[e[:, 0]] >= 0) & (pos[e[:, 1]] >= 0) if e.size else np.zeros(0, dtype=bool)
        return AttributedNetwork(self.attributes[nodes], pos[e[keep]].reshape(-1, 2))

    def with_attributes(self, W) -> "AttributedNetwork":
        return AttributedNetwork(W, self.edges)

    def same_as(self, other: "AttributedNetwork") -> bool:
        return (
            self.attributes.shape == other.attributes.shape
            and np.array_equal(self.attributes, other.attributes)
            and np.array_equal(self.edges, other.edges)
        )

    def __repr__(self) -> str:
        return f"AttributedNetwork(n={self.n}, p={self.p}, edges={self.n_edges})"


def canonical_edges(edges, n: int) -> np.ndarray:
    e = np.asarray(edges)
    if e.size == 0:
        return np.empty((0, 2), dtype=np.int64)
    if e.ndim != 2 or e.shape[1] != 2:
        raise NetworkValidationError(f"edges must be an (m, 2) array, got shape {e.shape}")
    if not np.issubdtype(e.dtype, np.integer):
        if not np.all(np.equal(np.mod(e, 1), 0)):
            raise NetworkValidationError("edge endpoints must be integers")
    e = e.astype(np.int64)
    if e.min() < 0 or e.max() >= n:
        bad = e[(e < 0).any(axis=1) | (e >= n).any(axis=1)][0]
        raise NetworkValidationError(f"edge ({bad[0]}, {bad[1]}) has an endpoint outside [0, {n})")
    loops = e[:, 0] == e[:, 1]
    if loops.any():
        v = e[loops][0, 0]
        raise NetworkValidationError(f"self-loop on node {v}")
    e = np.sort(e, axis=1)
    return np.unique(e, axis=0)


def as_index_set(values, upper: int, name: str = "index set") -> np.ndarray:
    """Sorted, duplicate-free int64 array of indices in ``[0, upper)``."""
    a = np.unique(np.asarray(values, dtype=np.int64).ravel())
    if a.size and (a[0] < 0 or a[-1] >= upper):
        raise ValueError(f"{name} has indices outside [0, {upper})")
    return a


def induced_subgraph_connected(net: AttributedNetwork, s) -> bool:
    """True iff the subgraph induced by the node subset ``s`` is connected."""
    nodes = as_index_set(s, net.n, "node subset")
    if nodes.size == 0:
        raise ValueError("connectivity of an empty node subset is undefined")
    return _connected(net, nodes)


def _connected(net: AttributedNetwork, nodes: np.ndarray) -> bool:
    inside = set(nodes.tolist())
    start = int(nodes[0])
    seen = {start}
    queue = deque([start])
    nbrs = net.neighbors
    while queue:
        u = queue.popleft()
        for v in nbrs[u].tolist():
            if v in inside and v not in seen:
                seen.add(v)
                queue.append(v)
    return len(seen) == len(inside)


def connected_components(net: AttributedNetwork) -> list[np.ndarray]:
    from scipy.sparse.csgraph import connected_components as cc

    ncomp, labels = cc(net.adjacency, directed=False)
    order = np.argsort(labels, kind="stable")
    splits = np.cumsum(np.bincount(labels, minlength=ncomp))[:-1]
    return [np.sort(c) for c in np.split(order, splits)]


# ---------------------------------------------------------------------------
# file formats


def read_edge_file(path) -> np.ndarray:
    pairs = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            if len(tokens) == 3:
                raise NetworkParseError(f"{path}:{lineno}: weighted edges are not supported")
            if len(tokens) != 2:
                raise NetworkParseError(f"{path}:{lineno}: expected two node indices, got {line!r}")
            try:
                pairs.append((int(tokens[0]), int(tokens[1])))
            except ValueError:
                raise NetworkParseError(f"{path}:{lineno}: node indices must be integers, got {line!r}") from None
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)


def read_attribute_file(path) -> np.ndarray:
    rows = []
    width = None
    header_seen = False
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if line.startswith("#"):
                if header_seen or rows:
                    raise NetworkParseError(f"{path}:{lineno}: only a single leading header line is allowed")
                header_seen = True
                continue
            if not line:
                continue
            try:
                row = [float(t) for t in line.split()]
            except ValueError:
                raise NetworkParseError(f"{path}:{lineno}: non-numeric attribute value in {line!r}") from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise NetworkParseError(f"{path}:{lineno}: expected {width} columns, found {len(row)}")
            rows.append(row)
    if not rows:
        raise NetworkParseError(f"{path}: no attribute rows")
    return np.array(rows, dtype=float)


def load_network(edge_file, attribute_file) -> AttributedNetwork:
    """Read an edge list and an attribute matrix into a validated network.

    The attribute file fixes ``n`` (one row per node); every edge endpoint must
    index one of those rows.
    """
    edges = read_edge_file(edge_file)
    W = read_attribute_file(attribute_file)
    loops = edges[:, 0] == edges[:, 1]
    if loops.any():
        raise NetworkValidationError(f"self-loop on node {int(edges[loops][0, 0])}")
    if edges.size and edges.max() >= W.shape[0]:
        raise NetworkParseError(
            f"edge file references node {int(edges.max())} but the attribute file has only {W.shape[0]} rows"
        )
    return AttributedNetwork(W, edges)


def save_network(net: AttributedNetwork, edge_file, attribute_file) -> None:
    with open(edge_file, "w") as fh:
        fh.write(f"# n={net.n} edges={net.n_edges}\n")
        for u, v in net.edges.tolist():
            fh.write(f"{u} {v}\n")
    with open(attribute_file, "w") as fh:
        fh.write(f"# n={net.n} p={net.p}\n")
        for row in net.attributes.tolist():
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def network_summary(net: AttributedNetwork) -> dict:
    deg = net.degrees
    return {
        "n": net.n,
        "p": net.p,
        "edges": net.n_edges,
        "degree_min": int(deg.min()),
        "degree_max": int(deg.max()),
        "degree_mean": float(deg.mean()),
        "components": len(connected_components(net)),
    }


def write_summary(net: AttributedNetwork, path) -> None:
    docfmt.dump(Path(path), [("network", network_summary(net))])
