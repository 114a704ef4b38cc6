"""Command-line driver.

Verbs: gen-dataset, train, benchmark, freq-sweep, solve-tb.
Exit codes: 0 success, 2 config error, 3 data-validation error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import fnn, harness, policy
from .channel import GeometryError, PathLossDomainError, Scene
from .dataset import DataValidationError
from .mobility import Trajectory

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def _common_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", type=Path, default=None,
                     help="flat dotted-key config file; defaults reproduce the reference setup")
    sub.add_argument("--seed", type=int, default=0, help="master seed (no implicit entropy)")
    sub.add_argument("--scale", type=float, default=None,
                     help="multiply trajectory count and dataset size, e.g. 0.1 for desk scale")
    sub.add_argument("--out", type=Path, default=Path("out"), help="output directory")


def _load_config(args) -> dict:
    overrides = harness.parse_config_file(args.config) if args.config else {}
    return harness.resolve_config(overrides, scale=args.scale)


def cmd_gen_dataset(args) -> int:
    cfg = _load_config(args)
    args.out.mkdir(parents=True, exist_ok=True)

    def progress(done, target):
        print(f"  labeled {done}/{target} samples", flush=True)

    manifest = harness.generate_dataset(cfg, args.seed, args.out, progress=progress)
    print(f"wrote {manifest}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load_config(args)
    if args.epochs is not None:
        cfg["train.epochs"] = args.epochs
    if args.batch is not None:
        cfg["train.batch_size"] = args.batch
    model_path, history_path, report = harness.train_model(cfg, args.dataset, args.out)
    print(f"wrote {model_path}")
    print(f"wrote {history_path}")
    print(f"final train loss {report['final_train_loss']:.6f}  "
          f"best val loss {report['best_val_loss']:.6f}  "
          f"test loss {report['test_loss']:.6f}")
    return EXIT_OK


def _load_predictor(model_path):
    if model_path is None:
        return None
    return fnn.load_model(model_path)


def cmd_benchmark(args) -> int:
    cfg = _load_config(args)
    policies = args.policies.split(",") if args.policies else None
    predictor = _load_predictor(args.model)
    if policies is None:
        policies = list(policy.POLICY_KINDS) if predictor is not None else \
            ["upper_bound", "statistical_tc", "numerical_tb"]
    result = harness.run_benchmark(
        cfg, args.seed, policies=policies, predictor=predictor,
        progress=lambda c, i, n: print(f"  {c}: trajectory {i + 1}/{n}", flush=True))
    args.out.mkdir(parents=True, exist_ok=True)
    written = harness.write_benchmark_csvs(result, args.out)
    written.append(harness.write_summary_json(result, args.out))
    harness.write_manifest(args.out, "benchmark", cfg, args.seed, written)
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def cmd_freq_sweep(args) -> int:
    cfg = _load_config(args)
    predictor = _load_predictor(args.model)
    if predictor is None:
        raise harness.ConfigError("freq-sweep needs a trained model (--model)")
    sweep = harness.run_freq_sweep(cfg, args.seed, predictor)
    args.out.mkdir(parents=True, exist_ok=True)
    path = harness.write_freq_sweep_csv(sweep, args.out)
    harness.write_manifest(args.out, "freq-sweep", cfg, args.seed, [path])
    print(f"wrote {path}")
    return EXIT_OK


def cmd_solve_tb(args) -> int:
    scene = Scene.from_json(args.scene)
    traj = Trajectory.from_csv(args.traj)
    step = args.step if args.step is not None else traj.delta
    outcome = policy.solve_beam_coherence_time(
        scene, traj, args.t0, xi=args.xi,
        search=policy.SolverParams(step=step, horizon=args.horizon),
        return_ratios=args.print_ratios)
    flag = " (censored)" if outcome.censored else ""
    print(f"T_B = {outcome.tau:.6f} s{flag}")
    if args.fine:
        # dense scan cannot go below the trajectory's native sampling step
        stride = max(1, round(step / args.fine / traj.delta))
        fine_step = stride * traj.delta
        fine_outcome = policy.solve_beam_coherence_time(
            scene, traj, args.t0, xi=args.xi,
            search=policy.SolverParams(step=fine_step, horizon=args.horizon))
        print(f"dense scan at {fine_step:.6g} s: T_B = {fine_outcome.tau:.6f} s"
              f"{' (censored)' if fine_outcome.censored else ''}")
    if args.print_ratios and outcome.ratios is not None:
        for i, ratio in enumerate(outcome.ratios, 1):
            print(f"  tau={i * traj.delta:.6f}s ratio={ratio:.6f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nfbeam",
        description="Near-field THz beam-lifetime simulator and policy benchmark")
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("gen-dataset", help="generate a labeled beam-lifetime dataset")
    _common_flags(sub)
    sub.set_defaults(func=cmd_gen_dataset)

    sub = subs.add_parser("train", help="train the lifetime predictor on a dataset")
    _common_flags(sub)
    sub.add_argument("--dataset", type=Path, required=True, help="dataset manifest JSON")
    sub.add_argument("--epochs", type=int, default=None)
    sub.add_argument("--batch", type=int, default=None)
    sub.set_defaults(func=cmd_train)

    sub = subs.add_parser("benchmark", help="run the beam-update policy benchmark")
    _common_flags(sub)
    sub.add_argument("--model", type=Path, default=None, help="trained model JSON")
    sub.add_argument("--policies", type=str, default=None,
                     help="comma-separated subset of "
                          "upper_bound,statistical_tc,numerical_tb,predicted_tb")
    sub.set_defaults(func=cmd_benchmark)

    sub = subs.add_parser("freq-sweep", help="benchmark across carrier frequencies")
    _common_flags(sub)
    sub.add_argument("--model", type=Path, required=True)
    sub.set_defaults(func=cmd_freq_sweep)

    sub = subs.add_parser("solve-tb", help="solve one beam lifetime on stored world files")
    sub.add_argument("--scene", type=Path, required=True, help="scene JSON")
    sub.add_argument("--traj", type=Path, required=True, help="trajectory CSV")
    sub.add_argument("--t0", type=float, default=0.0)
    sub.add_argument("--xi", type=float, default=0.5)
    sub.add_argument("--step", type=float, default=None, help="search grid step (s)")
    sub.add_argument("--horizon", type=float, default=2.0)
    sub.add_argument("--fine", type=int, default=0,
                     help="also run a dense scan at step/FINE for cross-checking")
    sub.add_argument("--print-ratios", action="store_true")
    sub.set_defaults(func=cmd_solve_tb)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except harness.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataValidationError,) as exc:
        print(f"data validation error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (policy.NumericalFailure, fnn.TrainingDiverged,
            GeometryError, PathLossDomainError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"data validation error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
