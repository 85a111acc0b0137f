"""Command-line interface.

Subcommands:
    generate    synthesize a record file (optionally consensus-filtered)
    calibrate   pick a threshold on a dataset with one strategy
    evaluate    score a dataset at a fixed threshold
    experiment  run a plan file: repeated splits, all strategies, CSV outputs
    curve       one split; emit the sensitivity-vs-FP curve and strategy markers

Exit status is 0 on success, 1 on data/config errors (with a diagnostic line
on stderr), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .calibrate import Strategy, calibrate_crc, calibrate_froc, calibrate_naive, evaluate as evaluate_result
from .calibrate import CalibrationResult
from .detections import load_dataset, save_dataset, filter_consensus
from .harness import ExperimentPlan, StrategySpec, emit_curve, run_experiment
from .synth import GeneratorConfig, generate

__all__ = ["main"]

logger = logging.getLogger(__name__)


def _add_dataset_arg(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--in", dest="input", required=True, metavar="RECORDS", help="line-delimited record file")
    parser.add_argument("--nms-threshold", type=float, default=None,
                        help="apply greedy NMS at this IoU on ingest (e.g. 0.22)")


def _load(args: argparse.Namespace):
    path = Path(args.input)
    if not path.exists():
        raise FileNotFoundError(f"input file not found: {path}")
    return load_dataset(path, nms_threshold=args.nms_threshold)


def _emit_json(obj: dict, out: str | None) -> None:
    text = json.dumps(obj, indent=2)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _result_dict(result: CalibrationResult) -> dict:
    d = dataclasses.asdict(result)
    d["strategy"] = result.strategy.value
    return d


def _cmd_generate(args: argparse.Namespace) -> int:
    if args.config:
        cfg_path = Path(args.config)
        if not cfg_path.exists():
            raise FileNotFoundError(f"config file not found: {cfg_path}")
        raw = json.loads(cfg_path.read_text(encoding="utf-8"))
    else:
        raw = {}
    if args.n_scans is not None:
        raw["n_scans"] = args.n_scans
    if args.seed is not None:
        raw["seed"] = args.seed
    cfg = GeneratorConfig.from_dict(raw)
    dataset = generate(cfg)
    if args.consensus_r is not None:
        dataset = filter_consensus(dataset, args.consensus_r)
    save_dataset(dataset, args.out)
    print(f"wrote {len(dataset.scans)} scans to {args.out}")
    return 0


def _cmd_calibrate(args: argparse.Namespace) -> int:
    strategy = Strategy(args.strategy)
    if strategy is Strategy.NAIVE:
        result = calibrate_naive(args.fixed_lambda)
    else:
        dataset = _load(args)
        if strategy is Strategy.FROC:
            result = calibrate_froc(dataset, args.target_sensitivity)
        else:
            result = calibrate_crc(dataset, args.alpha)
    _emit_json(_result_dict(result), args.out)
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    dataset = _load(args)
    result = CalibrationResult(Strategy.NAIVE, args.lambda_hat, n=0)
    report = evaluate_result(result, dataset)
    d = dataclasses.asdict(report)
    d["strategy"] = "fixed"
    d["dataset_name"] = Path(args.input).stem
    _emit_json(d, args.out)
    return 0


def _cmd_experiment(args: argparse.Namespace) -> int:
    plan_path = Path(args.plan)
    if not plan_path.exists():
        raise FileNotFoundError(f"plan file not found: {plan_path}")
    plan = ExperimentPlan.from_file(plan_path)
    overrides = {}
    if args.seed is not None:
        overrides["base_seed"] = args.seed
    if args.out is not None:
        overrides["output_dir"] = args.out
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.repetitions is not None:
        overrides["repetitions"] = args.repetitions
    if overrides:
        plan = dataclasses.replace(plan, **overrides)
    summary = run_experiment(plan)
    for row in summary.rows:
        print(
            f"{row.dataset:>12} {row.strategy:>8}  sens={row.sensitivity:.4f} "
            f"prec={row.precision:.4f} eff={row.efficiency:.2f} fn={row.fn:.2f} fp={row.fp:.2f}"
        )
    if summary.failures:
        print(f"{len(summary.failures)} trial(s) failed; see failures.csv", file=sys.stderr)
    print(f"outputs in {plan.output_dir}")
    return 0


def _cmd_curve(args: argparse.Namespace) -> int:
    dataset = _load(args)
    strategies = (
        StrategySpec(Strategy.NAIVE, fixed_lambda=args.fixed_lambda),
        StrategySpec(Strategy.FROC, target_sensitivity=args.target_sensitivity),
        StrategySpec(Strategy.CRC, alpha=args.alpha),
    )
    markers = emit_curve(dataset, args.seed, args.out, strategies)
    print(f"wrote {args.out} and {markers}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="confdet", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true", help="info-level logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="synthesize a record file")
    p.add_argument("--out", required=True, help="output record file")
    p.add_argument("--config", help="generator config JSON file")
    p.add_argument("--n-scans", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--consensus-r", type=int, default=None,
                   help="keep only nodules with consensus >= r, dropping empty scans")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("calibrate", help="select a threshold on a dataset")
    _add_dataset_arg(p)
    p.add_argument("--strategy", required=True, choices=[s.value for s in Strategy])
    p.add_argument("--alpha", type=float, default=0.1, help="CRC target risk level")
    p.add_argument("--fixed-lambda", type=float, default=0.5, help="naive threshold")
    p.add_argument("--target-sensitivity", type=float, default=0.9, help="FROC target")
    p.add_argument("--out", help="write the result JSON here instead of stdout")
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("evaluate", help="score a dataset at a fixed threshold")
    _add_dataset_arg(p)
    p.add_argument("--lambda-hat", type=float, required=True)
    p.add_argument("--out", help="write the report JSON here instead of stdout")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("experiment", help="run a plan file")
    p.add_argument("--plan", required=True, help="experiment plan JSON")
    p.add_argument("--seed", type=int, default=None, help="override the plan's base seed")
    p.add_argument("--out", default=None, help="override the plan's output directory")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--repetitions", type=int, default=None)
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("curve", help="emit a sensitivity/FP curve with strategy markers")
    _add_dataset_arg(p)
    p.add_argument("--seed", type=int, default=0, help="split seed")
    p.add_argument("--out", required=True, help="curve CSV path")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--fixed-lambda", type=float, default=0.5)
    p.add_argument("--target-sensitivity", type=float, default=0.9)
    p.set_defaults(func=_cmd_curve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
