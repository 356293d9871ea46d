"""relaml: Mahalanobis metric learning by regressing sample-pair relations."""

from .data import Dataset, DataError, Task, load_dataset
from .evaluate import (EvalReport, accuracy, cross_validate, ldl_metrics,
                       multilabel_metrics)
from .learners import (FitReport, Hyperparams, Method, MetricModel, fit,
                       fit_ncsvr, fit_pcsvr, fit_svr, psd_project)
from .modelio import load_model, save_model
from .pairspace import (DimensionError, PairSet, ParameterError, SamplePair,
                        generate_pairs, pair_kernel, relation_l1, standardize)
from .predict import (MlknnTables, aaknn_predict, knn_classify, mahalanobis_sq,
                      mlknn_fit, mlknn_predict, regress_pair)
from .qp import QpError, QpProblem, QpSolution, QpStatus, check_kkt, solve_qp

__version__ = "0.1.0"

__all__ = [
    "Dataset", "DataError", "Task", "load_dataset",
    "EvalReport", "accuracy", "cross_validate", "ldl_metrics", "multilabel_metrics",
    "FitReport", "Hyperparams", "Method", "MetricModel", "fit",
    "fit_ncsvr", "fit_pcsvr", "fit_svr", "psd_project",
    "load_model", "save_model",
    "DimensionError", "PairSet", "ParameterError", "SamplePair",
    "generate_pairs", "pair_kernel", "relation_l1", "standardize",
    "MlknnTables", "aaknn_predict", "knn_classify", "mahalanobis_sq",
    "mlknn_fit", "mlknn_predict", "regress_pair",
    "QpError", "QpProblem", "QpSolution", "QpStatus", "check_kkt", "solve_qp",
]
