"""Command-line front end: train, eval, cv, inspect.

Exit codes: 0 success, 2 bad flags, 3 file/parse error, 4 solver failure,
5 model/dataset dimension mismatch. Errors go to stderr only.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .data import DataError, Task, load_dataset
from .evaluate import (METRIC_DIRECTIONS, Direction, accuracy, cross_validate,
                       ldl_metrics, multilabel_metrics)
from .learners import Hyperparams, fit
from .modelio import load_model, save_model
from .pairspace import DimensionError, ParameterError
from .predict import aaknn_predict, knn_classify, mlknn_fit, mlknn_predict
from .qp import QpError

EXIT_BAD_FLAGS = 2
EXIT_PARSE = 3
EXIT_SOLVER = 4
EXIT_MISMATCH = 5


def _add_dataset_flags(p: argparse.ArgumentParser):
    p.add_argument("--data", required=True, help="dataset file")
    p.add_argument("--format", default="csv",
                   choices=["csv", "svmlight", "svmlight-like", "mulan-csv"])
    p.add_argument("--task", required=True,
                   choices=[t.value for t in Task])
    p.add_argument("--labels", type=int, default=1,
                   help="number of label columns (ignored for single-label)")
    p.add_argument("--label-position", default="tail", choices=["head", "tail"])


def _add_train_flags(p: argparse.ArgumentParser):
    p.add_argument("--method", required=True, choices=["svr", "pcsvr", "ncsvr"])
    p.add_argument("--lambda", dest="lambda_", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--pairs-k", type=int, default=3)


def _add_predictor_flags(p: argparse.ArgumentParser):
    p.add_argument("--knn-k", type=int, default=1)
    p.add_argument("--mlknn-k", type=int, default=10)
    p.add_argument("--mlknn-s", type=float, default=1.0)
    p.add_argument("--aaknn-k", type=int, default=5)


def _load(args):
    return load_dataset(args.data, args.format, args.task,
                        n_labels=args.labels, label_position=args.label_position)


def _hyper(args) -> Hyperparams:
    return Hyperparams(lambda_=args.lambda_, epsilon=args.epsilon,
                       pairs_k=args.pairs_k)


def cmd_train(args) -> int:
    data = _load(args)
    model = fit(data, args.method, _hyper(args))
    save_model(model, args.out, _hyper(args))
    rep = model.diagnostics
    eigs = np.linalg.eigvalsh(model.M)
    print(json.dumps({
        "method": model.method.value,
        "dual_objective": rep.dual_objective,
        "outer_iterations": rep.outer_iterations,
        "min_eigenvalue": float(eigs.min()) if eigs.size else 0.0,
        "pre_projection_min_eig": rep.pre_projection_min_eig,
        "clip_mass": rep.clip_mass,
        "kkt_residual": rep.kkt_residual,
        "wall_time": rep.wall_time,
    }, sort_keys=True))
    return 0


def _loo_eval(model, data, args) -> dict[str, float]:
    """Leave-one-out evaluation of a metric on one dataset."""
    m = data.n_samples
    keep = [np.flatnonzero(np.arange(m) != i) for i in range(m)]
    if data.task is Task.SINGLE_LABEL:
        preds = [knn_classify(model, data.subset(keep[i]),
                              data.features[:, i], k=args.knn_k)
                 for i in range(m)]
        return {"accuracy": accuracy(preds, data.labels)}
    if data.task is Task.MULTI_LABEL:
        bits, scores = [], []
        for i in range(m):
            ref = data.subset(keep[i])
            tables = mlknn_fit(model, ref, k=min(args.mlknn_k, m - 2), s=args.mlknn_s)
            b, s = mlknn_predict(tables, model, ref, data.features[:, i])
            bits.append(b)
            scores.append(s)
        out = multilabel_metrics(np.stack(bits), np.stack(scores), data.labels)
        out.pop("excluded")
        return out
    per = [ldl_metrics(aaknn_predict(model, data.subset(keep[i]),
                                     data.features[:, i],
                                     k=min(args.aaknn_k, m - 2)),
                       data.labels[i])
           for i in range(m)]
    return {k: float(np.mean([p[k] for p in per])) for k in per[0]}


def _print_metric_table(metrics: dict, stream=None):
    stream = stream if stream is not None else sys.stdout
    for name in sorted(metrics):
        entry = metrics[name]
        arrow = "v" if METRIC_DIRECTIONS[name] is Direction.LOWER_BETTER else "^"
        if isinstance(entry, dict):
            print(f"{name:20s} {entry['mean']:.4f} +/- {entry['std']:.4f} {arrow}",
                  file=stream)
        else:
            print(f"{name:20s} {entry:.4f} {arrow}", file=stream)


def cmd_eval(args) -> int:
    model, _ = load_model(args.model)
    data = _load(args)
    if model.n_features != data.n_features:
        print(f"error: model expects d={model.n_features}, "
              f"dataset has d={data.n_features}", file=sys.stderr)
        return EXIT_MISMATCH
    metrics = _loo_eval(model, data, args)
    _print_metric_table(metrics)
    if args.report:
        with open(args.report, "w") as fh:
            json.dump({name: {"mean": val,
                              "direction": METRIC_DIRECTIONS[name].value}
                       for name, val in sorted(metrics.items())}, fh, sort_keys=True)
            fh.write("\n")
    return 0


def cmd_cv(args) -> int:
    data = _load(args)
    report = cross_validate(data, args.method, _hyper(args), folds=args.folds,
                            seed=args.seed, stratified=not args.no_stratify,
                            knn_k=args.knn_k, mlknn_k=args.mlknn_k,
                            mlknn_s=args.mlknn_s, aaknn_k=args.aaknn_k)
    payload = report.to_json_dict()
    _print_metric_table(payload["metrics"])
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(payload, fh, sort_keys=True)
            fh.write("\n")
    return 0


def cmd_inspect(args) -> int:
    model, _ = load_model(args.model)
    eigs = np.sort(np.linalg.eigvalsh(model.M))[::-1]
    nnz = int(np.sum(np.abs(model.coefficients) > 1e-10))
    print(f"method {model.method.value}")
    print(f"d {model.n_features}")
    print(f"bias {model.bias:.17g}")
    print("eigenvalues " + " ".join(format(v, ".17g") for v in eigs))
    print(f"nonzero_coefficients {nnz}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relaml",
                                     description="Relation-aligned metric learning")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a metric and save it")
    _add_dataset_flags(p)
    _add_train_flags(p)
    p.add_argument("--out", required=True, help="model output path")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="leave-one-out evaluation of a saved model")
    p.add_argument("--model", required=True)
    _add_dataset_flags(p)
    _add_predictor_flags(p)
    p.add_argument("--report", default=None, help="JSON report path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("cv", help="k-fold cross validation")
    _add_dataset_flags(p)
    _add_train_flags(p)
    _add_predictor_flags(p)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-stratify", action="store_true")
    p.add_argument("--report", default=None, help="JSON report path")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("inspect", help="print model summary")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except QpError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except DimensionError as exc:
        print(f"dimension error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_FLAGS


if __name__ == "__main__":
    sys.exit(main())
