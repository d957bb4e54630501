"""Residual-attention graph convolutional anomaly detection on attributed networks."""

from .errors import (
    CapacityError,
    ConfigError,
    DimensionMismatchError,
    GraphParseError,
    InvalidGraphError,
    NumericalError,
    ResGCNError,
    ShapeError,
    StateError,
    TrainingError,
    UndefinedMetricError,
)
from .graph import (
    AttributedGraph,
    NormalizedAdjacency,
    load_graph,
    normalize_adjacency,
    pca_reduce,
    save_graph,
)
from .inject import InjectionResult, InjectionSpec, inject_attribute, inject_benchmark, inject_structural
from .metrics import EvalResult, compare_strategies, evaluate, precision_recall_at, roc_auc
from .model import (
    ForwardState,
    Hyperparams,
    ModelParams,
    ResGCN,
    ScoreReport,
    load_checkpoint,
    save_checkpoint,
    score_nodes,
    train,
)

from .synthetic import random_graph, sbm_graph

__version__ = "0.1.0"
