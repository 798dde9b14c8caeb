"""Connected subspace cluster detection in attributed networks by graph-structured matching pursuit."""

__version__ = "0.1.0"

from .estimator import SGPursuit
from .graph import AttributedNetwork, load_network, save_network
from .projections import TopologyConstraint, head_project, tail_project, top_s_select
from .pursuit import PursuitConfig, SubspaceCluster, extract_top_k_clusters, sg_pursuit
from .rsc import RscConstants, lemma_constants, sample_rsc_rss, spectral_bounds
from .scores import SCORES, ScoreConfig, make_score
from .synth import (
    AnomalySynthConfig,
    CoherentSynthConfig,
    GroundTruth,
    cluster_metrics,
    f_measure,
    generate_anomalous,
    generate_coherent,
)

__all__ = [
    "AnomalySynthConfig",
    "AttributedNetwork",
    "CoherentSynthConfig",
    "GroundTruth",
    "PursuitConfig",
    "RscConstants",
    "SCORES",
    "SGPursuit",
    "ScoreConfig",
    "SubspaceCluster",
    "TopologyConstraint",
    "cluster_metrics",
    "extract_top_k_clusters",
    "f_measure",
    "generate_anomalous",
    "generate_coherent",
    "head_project",
    "lemma_constants",
    "load_network",
    "make_score",
    "sample_rsc_rss",
    "save_network",
    "sg_pursuit",
    "spectral_bounds",
    "tail_project",
    "top_s_select",
]
