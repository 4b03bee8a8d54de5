"""Stochastic ADMM with adaptive proximal metrics.

Subpackages: linalg (kernels), problem (graph-guided SVM), solver (the
iteration and its metric policies), data (file formats and splits),
diagnostics (bound verification), bench (experiment harness), cli.
"""

from .bench import ExperimentSpec, grid_search_eta, run_experiment
from .data import (
    MetricsRecord,
    build_graph_precision,
    load_edges,
    load_libsvm,
    parse_libsvm,
    split,
    write_metrics_csv,
)
from .problem import (
    Dataset,
    GgsvmParams,
    GraphIncidence,
    Sample,
    SparseVector,
    feasibility,
    full_gradient,
    objective,
    stochastic_subgradient,
    test_error,
)
from .solver import (
    RunConfig,
    SolverDivergedError,
    averaged_iterates,
    run,
    step_theta,
    step_v,
    step_w,
)

__all__ = [
    "Dataset",
    "ExperimentSpec",
    "GgsvmParams",
    "GraphIncidence",
    "MetricsRecord",
    "RunConfig",
    "Sample",
    "SolverDivergedError",
    "SparseVector",
    "averaged_iterates",
    "build_graph_precision",
    "feasibility",
    "full_gradient",
    "grid_search_eta",
    "load_edges",
    "load_libsvm",
    "objective",
    "parse_libsvm",
    "run",
    "run_experiment",
    "split",
    "step_theta",
    "step_v",
    "step_w",
    "stochastic_subgradient",
    "test_error",
    "write_metrics_csv",
]

__version__ = "0.1.0"
