"""Command-line entry point.

Subcommands: train, grad-check, oracle-check, flops, metrics, gen-data,
bench. Exit codes: 0 success, 1 check or training failure, 2 bad usage,
bad config, or malformed input files.
"""
from __future__ import annotations

import argparse
import dataclasses
import math
import sys

import numpy as np

from . import bench, checks, featio, harness, metrics
from .backend import active_backend
from .config import RunConfig, load_config, validate_config
from .data import ToyDatasetSpec, gen_toy_dataset, save_dataset
from .errors import (
    ConfigError,
    DegenerateInputError,
    FormatError,
    GenerationError,
    NumericError,
    ParameterError,
    ShapeError,
    TrainingError,
)
from .partition import pair_count_model

USAGE_ERROR = 2
CHECK_ERROR = 1


def _int_list(text: str) -> list[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated ints: {text!r}") from exc
    if not values:
        raise argparse.ArgumentTypeError("expected at least one value")
    return values


def _parse_hw(text: str) -> tuple[int, int]:
    """Map size as either a pixel count ("4096") or explicit "HxW"."""
    if "x" in text:
        h_part, _, w_part = text.partition("x")
        try:
            return int(h_part), int(w_part)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"bad HxW value: {text!r}") from exc
    try:
        area = int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad map size: {text!r}") from exc
    side = math.isqrt(area)
    if side * side != area:
        raise argparse.ArgumentTypeError(
            f"map size {area} is not a perfect square; pass HxW instead"
        )
    return side, side


def _cmd_train(args: argparse.Namespace) -> int:
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out_dir"] = args.out
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
        validate_config(cfg)
    record = harness.run_experiment(cfg)
    print(f"backend: {active_backend()}")
    print(f"teacher mIoU: {record.teacher_miou:.4f}")
    print(f"student mIoU: {record.student_miou:.4f}")
    print(f"ts distance mean: {record.ts_init_mean:.6f} -> {record.ts_final_mean:.6f}")
    print(f"self-similarity variance: {record.selfsim_variance:.6e}")
    for name, path in sorted(record.files.items()):
        print(f"wrote {name}: {path}")
    return 0


def _print_reports(reports: list[checks.SuiteReport]) -> int:
    failed = False
    for rep in reports:
        status = "ok" if rep.ok else "FAIL"
        print(f"{rep.name}: {rep.instances} instances, worst {rep.worst:.3e} [{status}]")
        for line in rep.failures[:5]:
            print(f"  {line}")
        failed = failed or not rep.ok
    return CHECK_ERROR if failed else 0


def _cmd_grad_check(args: argparse.Namespace) -> int:
    return _print_reports(checks.run_grad_suite(trials=args.trials, seed=args.seed))


def _cmd_oracle_check(args: argparse.Namespace) -> int:
    return _print_reports(
        checks.run_oracle_suite(trials=args.trials, seed=args.seed, tol=args.tol)
    )


def _cmd_flops(args: argparse.Namespace) -> int:
    h, w = args.hw
    print("n,q,samples,negatives,distances,flops")
    for q in args.pool:
        for n in args.patch:
            counts = pair_count_model(
                h, w, args.channels, args.groups, n,
                pool_factor=q, ops_per_element=args.ops,
            )
            print(
                f"{n},{q},{counts.samples},{counts.negatives},"
                f"{counts.distances},{counts.flops}"
            )
    return 0


def _cmd_metrics(args: argparse.Namespace) -> int:
    student = featio.read_features(args.student)
    rng = np.random.default_rng(args.seed)
    if args.teacher is not None:
        teacher = featio.read_features(args.teacher)
        hist = metrics.ts_distance_stats(
            student, teacher, args.groups, sample_count=args.samples, rng=rng
        )
    else:
        hist = metrics.self_similarity_stats(
            student, args.window, args.groups, sample_count=args.samples, rng=rng
        )
    text = metrics.format_histogram_csv(hist)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_gen_data(args: argparse.Namespace) -> int:
    spec = ToyDatasetSpec(
        image_size=args.size,
        num_classes=args.classes,
        train_count=args.train,
        val_count=args.val,
        noise_std=args.noise,
        seed=args.seed,
    )
    dataset = gen_toy_dataset(spec)
    save_dataset(args.out, spec, dataset)
    print(
        f"wrote {args.out}: {spec.train_count} train + {spec.val_count} val, "
        f"{spec.image_size}x{spec.image_size}, {spec.num_classes} classes"
    )
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    rows = bench.run_bench(repeats=args.repeats, seed=args.seed)
    sys.stdout.write(bench.format_table(rows))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="afdcd",
        description="Dense contrastive distillation losses, oracles, and toy runs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run one distillation experiment from a config")
    p.add_argument("--config", help="JSON config file (defaults when omitted)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", help="artifact directory (run.csv, config.json, ...)")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("grad-check", help="finite-difference gradient suite")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_grad_check)

    p = sub.add_parser("oracle-check", help="brute-force loss oracle suite")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=_cmd_oracle_check)

    p = sub.add_parser("flops", help="pair-count and FLOPs model sweep")
    p.add_argument("--hw", type=_parse_hw, required=True,
                   help="feature map size, pixel count or HxW")
    p.add_argument("--channels", type=int, required=True)
    p.add_argument("--groups", type=int, default=16)
    p.add_argument("--patch", type=_int_list, default=[4],
                   help="patch sides, comma separated")
    p.add_argument("--pool", type=_int_list, default=[1],
                   help="pre-pool factors, comma separated")
    p.add_argument("--ops", type=int, default=3, help="ops per element per distance")
    p.set_defaults(func=_cmd_flops)

    p = sub.add_parser("metrics", help="distance stats over saved feature dumps")
    p.add_argument("--student", required=True, help="student feature dump")
    p.add_argument("--teacher",
                   help="teacher dump; cross-model distances when given, "
                        "self-similarity otherwise")
    p.add_argument("--groups", type=int, default=16)
    p.add_argument("--window", type=int, default=4,
                   help="tile side for self-similarity")
    p.add_argument("--samples", type=int, help="subsample size (policy default otherwise)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write CSV here instead of stdout")
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("gen-data", help="materialize a synthetic dataset to .npz")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=int, default=32)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--train", type=int, default=512)
    p.add_argument("--val", type=int, default=128)
    p.add_argument("--noise", type=float, default=0.05)
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("bench", help="time the numpy and compiled kernels")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(args)
    except (ConfigError, FormatError, ParameterError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (TrainingError, GenerationError, NumericError, DegenerateInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return CHECK_ERROR


if __name__ == "__main__":
    sys.exit(main())
