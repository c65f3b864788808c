"""Command-line entry point: ``ccafuse <command> [<action>] --flag value``.

Exit codes: 0 success, 1 a check failed (gradcheck above threshold),
2 invalid input or config, 3 training diverged.
"""
import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cca import fit_cca
from .cca2d import fit_2dcca
from .depth import DEFAULT_LAMBDA, DEFAULT_WINDOW, depth_report
from .errors import CcaError, ConfigError, TrainingError
from .experiment import build_datasets, load_config, run_experiment, run_sweep
from .fusion import Mode, TrainSchedule, TwoViewDataset, corrupt_view, evaluate, make_synthetic_twoview, network_gradcheck
from .fusion.net import FeatureNet, NetConfig
from .gradcheck import THRESHOLD, corr_gradcheck
from .io import load_array, load_model, save_array, save_model
from .linalg import DEFAULT_EPS
from .metrics import DEFAULT_IOU, DetBox, compute_metrics

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT = 2
EXIT_DIVERGED = 3


class _Formatter(argparse.ArgumentDefaultsHelpFormatter, argparse.RawDescriptionHelpFormatter):
    pass


def _emit(obj):
    print(json.dumps(obj, indent=2))


def _cmd_cca_fit(args):
    model = fit_cca(load_array(args.x), load_array(args.y), args.k, args.eps)
    save_model(args.out, model)
    _emit({"out": str(args.out), "k": model.k, "correlations": model.correlations.tolist()})
    return EXIT_OK


def _cmd_cca2d_fit(args):
    model = fit_2dcca(
        load_array(args.x), load_array(args.y), args.d1, args.d2,
        max_iters=args.max_iters, tol=args.tol, reg_epsilon=args.eps, init=args.init, seed=args.seed,
    )
    save_model(args.out, model)
    _emit({
        "out": str(args.out),
        "objective": model.objective,
        "n_iter": model.n_iter,
        "converged": model.converged,
        "correlations": model.correlations.tolist(),
    })
    return EXIT_OK


def _print_progress(cfg, mode, res):
    parts = " ".join(f"{key}={value:.4f}" for key, value in res.items())
    print(f"seed={cfg.seed} mode={mode} {parts}", file=sys.stderr)


def _cmd_fuse_train(args):
    cfg = load_config(args.config)
    if args.sweep:
        target, summary = run_sweep(cfg, args.out_dir, workers=args.workers)
        d = summary["directional"]
        print(f"{'mode':<10} {'clean':>8} {'corrupt':>8} {'drop':>8}")
        for mode in cfg.modes:
            m = d[mode]
            print(f"{mode:<10} {m['median_clean_accuracy']:8.4f} {m['median_corrupt_accuracy']:8.4f} {m['median_drop']:8.4f}")
        if "accar_drop_smaller" in d:
            print(f"ACCAR drop smaller: {d['accar_drop_smaller']}; corrupt-accuracy gap: {d['corrupt_gap']:+.4f}")
        print(f"aggregate: {target}")
        return EXIT_OK
    target = run_experiment(cfg, args.out_dir, progress=_print_progress)
    print(target)
    return EXIT_OK


def _cmd_fuse_eval(args):
    net = load_model(args.model)
    if not isinstance(net, FeatureNet):
        raise ConfigError("model", f"{args.model} is not a fusion network")
    if args.config:
        cfg = load_config(args.config)
        _, data = build_datasets(cfg)
        if args.corrupt and cfg.corruption is not None:
            c = cfg.corruption
            data = corrupt_view(data, c["view"], c["sigma"], cfg.seed + c["seed_offset"])
    elif args.a and args.b and args.labels:
        labels = load_array(args.labels).reshape(-1).astype(np.int64)
        data = TwoViewDataset(load_array(args.a), load_array(args.b), labels, net.n_classes)
    else:
        raise ConfigError("", "fuse eval needs --config or all of --a, --b, --labels")
    schedule = TrainSchedule(mode=args.mode, reg_epsilon=args.eps, k=net.k, d1=net.d1, d2=net.d2)
    _emit({"accuracy": evaluate(net, schedule, data), "n": data.n})
    return EXIT_OK


def _load_boxes(path):
    try:
        items = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(items, list):
        raise ConfigError("", f"{path}: expected a JSON array of boxes")
    return [DetBox.from_dict(d) for d in items]


def _cmd_metrics_eval(args):
    report = compute_metrics(_load_boxes(args.pred), _load_boxes(args.gt), args.iou, interpolated=args.interpolated)
    _emit(report.as_dict())
    return EXIT_OK


def _cmd_depthloss(args):
    rep = depth_report(
        load_array(args.a), load_array(args.b), args.lambda_w, window=args.window, data_range=args.data_range
    )
    _emit(rep)
    return EXIT_OK


def _cmd_gradcheck(args):
    if args.target == "corr":
        worst = corr_gradcheck(args.batches, args.seed, reg_epsilon=args.eps)
    else:
        data = make_synthetic_twoview(args.samples, 2, 3, 0.3, 0.3, args.seed, dim_a=5, dim_b=4)
        schedule = TrainSchedule(mode=args.mode, k=2, epochs=0, cca_first_m=0, reg_epsilon=args.eps, seed=args.seed)
        net = FeatureNet.init(NetConfig(hidden=(6,), classifier_hidden=5), (5,), (4,), 3, np.random.default_rng(args.seed), k=2)
        worst = network_gradcheck(net, schedule, data.view_a, data.view_b, data.labels)
    ok = worst <= args.threshold
    print(f"max relative error {worst:.3e} ({'ok' if ok else 'FAIL'}, threshold {args.threshold:.0e})")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def _cmd_convert(args):
    save_array(args.output, load_array(args.input))
    print(args.output)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(
        prog="ccafuse",
        description="Canonical-correlation fusion toolkit.",
        formatter_class=_Formatter,
        allow_abbrev=False,
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def leaf(parent, name, help_text, func):
        q = parent.add_parser(name, help=help_text, description=help_text, formatter_class=_Formatter, allow_abbrev=False)
        q.set_defaults(func=func)
        return q

    cca = sub.add_parser("cca", help="closed-form CCA", formatter_class=_Formatter).add_subparsers(dest="action", required=True)
    q = leaf(cca, "fit", "fit CCA between two sample matrices (rows are samples)", _cmd_cca_fit)
    q.add_argument("--x", required=True, type=Path, help="view X (.ccat or .csv)")
    q.add_argument("--y", required=True, type=Path, help="view Y (.ccat or .csv)")
    q.add_argument("--k", type=int, default=1, help="number of canonical pairs")
    q.add_argument("--eps", type=float, default=DEFAULT_EPS, help="ridge added to both covariances")
    q.add_argument("--out", type=Path, default=Path("model.json"), help="output model JSON")

    cca2d = sub.add_parser("cca2d", help="two-dimensional CCA", formatter_class=_Formatter).add_subparsers(dest="action", required=True)
    q = leaf(cca2d, "fit", "fit 2-D CCA between two matrix stacks of shape (N, m, n)", _cmd_cca2d_fit)
    q.add_argument("--x", required=True, type=Path, help="stack X (.ccat, 3-D)")
    q.add_argument("--y", required=True, type=Path, help="stack Y (.ccat, 3-D)")
    q.add_argument("--d1", type=int, default=2, help="left projection size")
    q.add_argument("--d2", type=int, default=2, help="right projection size")
    q.add_argument("--eps", type=float, default=DEFAULT_EPS, help="ridge added to the side covariances")
    q.add_argument("--max-iters", type=int, default=100, help="alternation limit")
    q.add_argument("--tol", type=float, default=1e-7, help="stop when the objective gains less than this")
    q.add_argument("--init", choices=("identity", "uniform"), default="identity", help="initial right transforms")
    q.add_argument("--seed", type=int, default=0, help="seed for --init uniform")
    q.add_argument("--out", type=Path, default=Path("model2d.json"), help="output model JSON")

    fuse = sub.add_parser("fuse", help="two-view fusion training", formatter_class=_Formatter).add_subparsers(dest="action", required=True)
    q = leaf(fuse, "train", "train the configured modes and write a run directory", _cmd_fuse_train)
    q.add_argument("--config", required=True, type=Path, help="experiment JSON, or a run's summary.json")
    q.add_argument("--out-dir", type=Path, default=Path("runs"), help="parent of the run directories")
    q.add_argument("--sweep", action="store_true", help="run every seed in sweep_seeds concurrently and compare")
    q.add_argument("--workers", type=int, default=None, help="sweep processes; None uses every CPU")
    q = leaf(fuse, "eval", "accuracy of a saved fusion network", _cmd_fuse_eval)
    q.add_argument("--model", required=True, type=Path, help="net_<MODE>.json from a run directory")
    q.add_argument("--config", type=Path, default=None, help="evaluate on this config's test split")
    q.add_argument("--corrupt", action="store_true", help="apply the config's view corruption first")
    q.add_argument("--a", type=Path, default=None, help="view A file (instead of --config)")
    q.add_argument("--b", type=Path, default=None, help="view B file (instead of --config)")
    q.add_argument("--labels", type=Path, default=None, help="label file (instead of --config)")
    q.add_argument("--mode", choices=list(Mode.__members__), default="BASELINE", help="schedule mode; only CCA_LAYER changes the forward pass")
    q.add_argument("--eps", type=float, default=DEFAULT_EPS, help="ridge for CCA_LAYER")

    metrics = sub.add_parser("metrics", help="detection metrics", formatter_class=_Formatter).add_subparsers(dest="action", required=True)
    q = leaf(metrics, "eval", "mAP, mRecall and mIoU of predicted boxes against ground truth", _cmd_metrics_eval)
    q.add_argument("--pred", required=True, type=Path, help="JSON array of {image_id, class_id, score, x1, y1, x2, y2}")
    q.add_argument("--gt", required=True, type=Path, help="JSON array of ground-truth boxes (score ignored)")
    q.add_argument("--iou", type=float, default=DEFAULT_IOU, help="IoU threshold for a match")
    q.add_argument("--interpolated", action="store_true", help="use 11-point interpolated AP")

    q = leaf(sub, "depthloss", "L1, gradient, SSIM and combined depth losses as JSON", _cmd_depthloss)
    q.add_argument("--a", required=True, type=Path, help="reference depth map")
    q.add_argument("--b", required=True, type=Path, help="predicted depth map")
    q.add_argument("--lambda", dest="lambda_w", type=float, default=DEFAULT_LAMBDA, help="weight of the L1 term")
    q.add_argument("--window", type=int, default=DEFAULT_WINDOW, help="odd SSIM window size")
    q.add_argument("--data-range", type=float, default=1.0, help="dynamic range for the SSIM constants")

    q = leaf(sub, "gradcheck", "compare analytic gradients with central finite differences", _cmd_gradcheck)
    q.add_argument("--target", choices=("corr", "net"), default="corr", help="correlation loss or full network")
    q.add_argument("--batches", type=int, default=100, help="seeded batches for --target corr")
    q.add_argument("--mode", choices=["BASELINE", "CCAR", "ACCAR"], default="CCAR", help="schedule for --target net")
    q.add_argument("--samples", type=int, default=16, help="batch size for --target net")
    q.add_argument("--seed", type=int, default=0, help="batch seed")
    q.add_argument("--eps", type=float, default=DEFAULT_EPS, help="covariance ridge")
    q.add_argument("--threshold", type=float, default=THRESHOLD, help="maximum admissible relative error")

    q = leaf(sub, "convert", "convert between CSV and CCAT (chosen by extension)", _cmd_convert)
    q.add_argument("--input", required=True, type=Path, help="source file")
    q.add_argument("--output", required=True, type=Path, help="destination file")
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TrainingError as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (CcaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
