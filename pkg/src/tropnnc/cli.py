"""Command-line entry point: ``tropnnc <subcommand> --flag value ...``.

Exit codes: 0 success, 1 a bound check failed, 2 invalid flags, 3 unsupported
topology, 4 I/O or file-format error, 5 shape mismatch.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from tropnnc.compression.network import FUSE_MODES, METHODS, CompressionConfig, compress_network
from tropnnc.errors import DatasetError, ModelFormatError, ShapeError, UnsupportedTopologyError
from tropnnc.harness.bounds_suite import KINDS, run_bounds_suite
from tropnnc.harness.data import filter_classes, load_idx
from tropnnc.harness.experiment import ExperimentSpec, run_experiment
from tropnnc.harness.train import eval_accuracy, train_mlp
from tropnnc.hausdorff.bounds import CSV_HEADER as BOUNDS_HEADER
from tropnnc.nn.tnnc import load_model, save_model
from tropnnc.nn.transforms import count_flops, count_params, fuse_batchnorm, layer_flops, layer_params

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE, EXIT_TOPOLOGY, EXIT_IO, EXIT_SHAPE = 0, 1, 2, 3, 4, 5


class UsageError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _method(text: str) -> str:
    key = text.strip().lower().replace("-", "_")
    if key not in METHODS:
        raise argparse.ArgumentTypeError(f"unknown method {text!r}; choose from {', '.join(METHODS)}")
    return key


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected on or off")
    return text == "on"


def _announce(name: str, config: dict) -> None:
    print(f"[{name}] config: {json.dumps(config, sort_keys=True, default=str)}", file=sys.stderr)


def cmd_compress(args) -> int:
    targets = [args.ratio is not None, args.k is not None, args.threshold_c is not None]
    if sum(targets) != 1:
        raise UsageError("give exactly one of --ratio, --k, --threshold-c")
    if args.threshold_c is not None and args.variant is None:
        raise UsageError("--threshold-c needs --variant 1 or 2")
    if args.variant is not None and args.threshold_c is None:
        raise UsageError("--variant only applies with --threshold-c")
    try:
        config = CompressionConfig(
            args.method,
            ratio=args.ratio,
            k=args.k,
            threshold_c=args.threshold_c,
            variant=args.variant,
            num_iter=args.iters,
            seed=args.seed,
            cluster_on_prefusion=args.prefusion,
            fuse_bn=args.fuse_bn,
            layers=args.layers,
            split=tuple(args.split) if args.split else None,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    report_path = args.report or f"{args.out}.report.csv"
    _announce("compress", {**config.as_dict(), "model": args.model, "out": args.out, "report": report_path})
    net = load_model(args.model)
    compressed, report = compress_network(net, config)
    save_model(compressed, args.out)
    Path(report_path).write_text("\n".join([report.CSV_HEADER, *report.csv_rows()]) + "\n")
    print(
        f"params {report.params_before} -> {report.params_after}, "
        f"flops {report.flops_before} -> {report.flops_after}; wrote {args.out}"
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    _announce("eval", vars_of(args))
    net = load_model(args.model)
    ds = load_idx(args.images, args.labels)
    if args.classes:
        # a model with one output per kept class was trained on relabelled data;
        # a wider one still predicts the original label values
        outputs = net.output_shape[0]
        ds = filter_classes(ds, args.classes, relabel=outputs == len(args.classes))
    if tuple(ds.sample_shape) != net.input_shape:
        if len(net.input_shape) == 3 and net.input_shape[0] == 1 and tuple(ds.sample_shape) == net.input_shape[1:]:
            ds = type(ds)(ds.images[:, None], ds.labels)
        else:
            raise ShapeError(f"model expects {net.input_shape}, data has {tuple(ds.sample_shape)}")
    print("accuracy,params,flops", file=sys.stderr)
    print(f"{eval_accuracy(net, ds):.6f},{count_params(net)},{count_flops(net)}")
    return EXIT_OK


def cmd_fuse_bn(args) -> int:
    _announce("fuse-bn", vars_of(args))
    net = load_model(args.model)
    fused = fuse_batchnorm(net)
    save_model(fused, args.out)
    print(f"fused {len(net.layers) - len(fused.layers)} batch-norm layer(s); wrote {args.out}")
    return EXIT_OK


def cmd_train_mlp(args) -> int:
    _announce("train-mlp", vars_of(args))
    ds = load_idx(args.images, args.labels)
    if args.classes:
        ds = filter_classes(ds, args.classes)
    net = train_mlp(args.arch, ds, args.epochs, args.lr, args.batch, args.seed)
    save_model(net, args.out)
    print(f"train accuracy {eval_accuracy(net, ds):.4f}; wrote {args.out}")
    return EXIT_OK


def cmd_bounds(args) -> int:
    _announce("bounds", vars_of(args))
    reports = run_bounds_suite(args.check, args.trials, args.seed)
    lines = [BOUNDS_HEADER] + [r.to_csv_row() for r in reports]
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n")
    else:
        print("\n".join(lines))
    failed = sum(not r.holds for r in reports)
    print(f"{args.check}: {len(reports) - failed}/{len(reports)} hold", file=sys.stderr)
    return EXIT_CHECK_FAILED if failed else EXIT_OK


def cmd_inspect(args) -> int:
    _announce("inspect", vars_of(args))
    net = load_model(args.model)
    print("index,kind,input_shape,output_shape,params,flops")
    for i, layer in enumerate(net.layers):
        params = layer_params(layer)
        flops = layer_flops(layer, net.shapes[i], net.shapes[i + 1])
        shape_in = "x".join(map(str, net.shapes[i]))
        shape_out = "x".join(map(str, net.shapes[i + 1]))
        print(f"{i},{layer.kind},{shape_in},{shape_out},{params},{flops}")
    print(f"total,,,,{count_params(net)},{count_flops(net)}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    if args.model is None and (args.arch is None or args.train_images is None or args.train_labels is None):
        raise UsageError("give --model, or --arch with --train-images and --train-labels")
    try:
        spec = ExperimentSpec(
            test_images=args.test_images,
            test_labels=args.test_labels,
            methods=args.methods,
            targets=args.targets,
            seeds=args.seeds,
            output_path=args.out,
            model_path=args.model,
            train_images=args.train_images,
            train_labels=args.train_labels,
            train_arch=args.arch,
            epochs=args.epochs,
            lr=args.lr,
            batch=args.batch,
            target_kind=args.target_kind,
            variant=args.variant,
            num_iter=args.iters,
            classes=args.classes,
            layers=args.layers,
            fuse_bn=args.fuse_bn,
            plot_path=args.plot,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _announce("experiment", vars_of(args))
    result = run_experiment(spec)
    for seed, (acc, params, flops) in sorted(result.baseline.items()):
        print(f"# uncompressed seed {seed}: accuracy {acc:.6f}, params {params}, flops {flops}", file=sys.stderr)
    print("method,target,mean_accuracy,std_accuracy,runs,failed")
    for m, t, mean, std, n, bad in result.summary():
        print(f"{m},{t:g},{mean:.6f},{std:.6f},{n},{bad}")
    return EXIT_OK


def vars_of(args) -> dict:
    return {k: v for k, v in vars(args).items() if k not in ("func",)}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tropnnc",
        description="Compress ReLU networks by clustering zonotope generators, and check approximation bounds.",
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    p = sub.add_parser("compress", help="compress the hidden layers of a model")
    p.add_argument("--model", required=True, help="input TNNC model")
    p.add_argument("--out", required=True, help="output TNNC model")
    p.add_argument("--method", required=True, type=_method, help=f"one of {', '.join(METHODS)} (dashes allowed)")
    p.add_argument("--ratio", type=float, help="fraction of neurons/channels kept per layer, in (0, 1]")
    p.add_argument("--k", type=int, help="number of neurons/channels kept per layer")
    p.add_argument("--threshold-c", type=float, help="non-uniform mode: global clustering threshold constant")
    p.add_argument("--variant", type=int, choices=(1, 2), help="threshold rule: 1 = c*sqrt(dim), 2 = c*mean norm")
    p.add_argument("--iters", type=int, default=10, help="iterations for the iterative methods (default 10)")
    p.add_argument("--seed", type=int, default=0, help="clustering seed (default 0)")
    p.add_argument("--layers", type=_int_list, help="comma-separated hidden linear/conv ordinals (default all)")
    p.add_argument("--prefusion", type=_on_off, default=True, help="cluster on pre-fusion weights: on|off (default on)")
    p.add_argument("--fuse-bn", choices=FUSE_MODES, default="none", help="batch-norm handling (default none)")
    p.add_argument("--split", type=_int_list, help="single-output methods: explicit K+,K- pair")
    p.add_argument("--report", help="per-layer report CSV (default <out>.report.csv)")
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("eval", help="accuracy, params and flops of a model on an IDX split")
    p.add_argument("--model", required=True)
    p.add_argument("--images", required=True, help="IDX images file (.gz allowed)")
    p.add_argument("--labels", required=True, help="IDX labels file (.gz allowed)")
    p.add_argument("--classes", type=_int_list, help="keep only these classes, e.g. 3,5")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("fuse-bn", help="fold every batch-norm into the preceding linear/conv layer")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fuse_bn)

    p = sub.add_parser("train-mlp", help="train a ReLU MLP with plain SGD")
    p.add_argument("--images", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--arch", required=True, type=_int_list, help="layer widths, e.g. 784,64,10")
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--classes", type=_int_list, help="keep only these classes, e.g. 3,5")
    p.set_defaults(func=cmd_train_mlp)

    p = sub.add_parser("bounds", help="run a bound-verification suite; exit 1 if any check fails")
    p.add_argument("--check", required=True, choices=KINDS)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the CSV here instead of stdout")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("inspect", help="print the layer table of a model")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("experiment", help="sweep methods x targets x seeds and record accuracy")
    p.add_argument("--test-images", required=True)
    p.add_argument("--test-labels", required=True)
    p.add_argument("--model", help="model to compress (otherwise one MLP is trained per seed)")
    p.add_argument("--train-images")
    p.add_argument("--train-labels")
    p.add_argument("--arch", type=_int_list, help="MLP widths when training, e.g. 784,64,10")
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--methods", required=True, type=lambda s: [_method(m) for m in s.split(",")])
    p.add_argument("--targets", required=True, type=_float_list, help="comma-separated targets")
    p.add_argument("--target-kind", choices=("ratio", "k", "threshold"), default="ratio")
    p.add_argument("--variant", type=int, choices=(1, 2))
    p.add_argument("--seeds", type=_int_list, default=[0, 1, 2, 3, 4])
    p.add_argument("--iters", type=int, default=10)
    p.add_argument("--classes", type=_int_list)
    p.add_argument("--layers", type=_int_list)
    p.add_argument("--fuse-bn", choices=FUSE_MODES, default="none")
    p.add_argument("--out", help="per-cell CSV; a .summary.csv is written next to it")
    p.add_argument("--plot", help="SVG plot of accuracy against remaining neurons")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except UnsupportedTopologyError as exc:
        print(f"error: unsupported topology: {exc}", file=sys.stderr)
        return EXIT_TOPOLOGY
    except ShapeError as exc:
        print(f"error: shape mismatch: {exc}", file=sys.stderr)
        return EXIT_SHAPE
    except (OSError, ModelFormatError, DatasetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
