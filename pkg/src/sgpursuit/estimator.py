"""scikit-learn style wrapper around the pursuit driver."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .graph import AttributedNetwork
from .projections import TopologyConstraint
from .pursuit import PursuitConfig, extract_top_k_clusters
from .scores import ScoreConfig, make_score


class SGPursuit(ClusterMixin, TransformerMixin, BaseEstimator):
    """Detect connected subspace clusters in an attributed network.

    Parameters
    ----------
    score : str
        Score function name (``fisher``, ``elevated_mean``, ``coherence``,
        ``coherence_density``, ``neg_squared_error``, ``logistic``).
    k, s : int
        Node and attribute budgets.
    n_clusters : int
        Number of clusters extracted with deflation between rounds.
    backend : {"pcst", "exact"}
    epsilon, max_iters : float, int
        Stopping rule of the pursuit loop.
    sigma, lam, response_c, r_sparsity
        Score parameters, see :class:`ScoreConfig`.
    init_mode, n_starts : str, int
        Starting points of the loop.
    deflation : {"column_mean", "remove_nodes"}
    random_state : int

    Attributes
    ----------
    clusters_ : list of SubspaceCluster
    nodes_, attributes_ : ndarray
        Support of the first cluster.
    score_ : float
    converged_ : bool
        True when every extracted cluster stopped on the epsilon rule.
    n_iter_ : int
    n_features_in_ : int
    """

    def __init__(
        self,
        score="elevated_mean",
        k=10,
        s=5,
        n_clusters=1,
        backend="pcst",
        epsilon=1e-4,
        max_iters=50,
        sigma=0.01,
        lam=5.0,
        response_c=None,
        r_sparsity=None,
        init_mode="local_seeds",
        n_starts=5,
        deflation="column_mean",
        random_state=0,
    ):
        self.score = score
        self.k = k
        self.s = s
        self.n_clusters = n_clusters
        self.backend = backend
        self.epsilon = epsilon
        self.max_iters = max_iters
        self.sigma = sigma
        self.lam = lam
        self.response_c = response_c
        self.r_sparsity = r_sparsity
        self.init_mode = init_mode
        self.n_starts = n_starts
        self.deflation = deflation
        self.random_state = random_state

    def _network(self, X, edges):
        if isinstance(X, AttributedNetwork):
            return X
        if edges is None:
            raise ValueError("edges are required when X is an attribute matrix")
        X = check_array(X, dtype=float)
        return AttributedNetwork(X, np.asarray(edges, dtype=np.int64).reshape(-1, 2))

    def fit(self, X, y=None, edges=None):
        """Run the detector.

        Parameters
        ----------
        X : array of shape (n, p) or AttributedNetwork
            Node attribute matrix.
        y : ignored
        edges : array of shape (m, 2), optional
            Undirected edge list; required unless ``X`` is a network.
        """
        net = self._network(X, edges)
        score = make_score(
            self.score,
            ScoreConfig(sigma=self.sigma, lam=self.lam, response_c=self.response_c, r_sparsity=self.r_sparsity),
        )
        cfg = PursuitConfig(
            k=self.k,
            s=self.s,
            epsilon=self.epsilon,
            max_iters=self.max_iters,
            init_mode=self.init_mode,
            n_starts=self.n_starts,
            rng_seed=self.random_state,
        )
        constraint = TopologyConstraint(self.k, backend=self.backend)
        self.clusters_ = extract_top_k_clusters(net, score, constraint, cfg, self.n_clusters, self.deflation)
        self.n_features_in_ = net.p
        self.n_nodes_ = net.n
        first = self.clusters_[0] if self.clusters_ else None
        self.nodes_ = first.nodes if first else np.empty(0, dtype=np.int64)
        self.attributes_ = first.attributes if first else np.empty(0, dtype=np.int64)
        self.score_ = first.score if first else float("-inf")
        self.converged_ = bool(self.clusters_) and all(c.converged for c in self.clusters_)
        self.n_iter_ = sum(c.iterations_used for c in self.clusters_)
        self.labels_ = self._labels()
        return self

    def _labels(self):
        labels = np.full(self.n_nodes_, -1, dtype=np.int64)
        for j, c in enumerate(self.clusters_):
            free = c.nodes[labels[c.nodes] < 0]
            labels[free] = j
        return labels

    def _check_rows(self, X):
        check_is_fitted(self, "clusters_")
        n = X.n if isinstance(X, AttributedNetwork) else check_array(X, dtype=float).shape[0]
        if n != self.n_nodes_:
            raise ValueError(f"X has {n} rows but the detector was fitted on {self.n_nodes_} nodes")

    def predict(self, X):
        """Cluster index of every node of the fitted network (-1 outside all clusters)."""
        self._check_rows(X)
        return self.labels_.copy()

    def fit_predict(self, X, y=None, edges=None):
        return self.fit(X, edges=edges).labels_.copy()

    def transform(self, X):
        """Node coefficients of every cluster, shape (n, n_clusters_found)."""
        self._check_rows(X)
        if not self.clusters_:
            return np.zeros((self.n_nodes_, 0))
        return np.column_stack([c.x for c in self.clusters_])

    def fit_transform(self, X, y=None, edges=None):
        return self.fit(X, edges=edges).transform(X)
