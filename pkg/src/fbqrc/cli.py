"""Command-line entry point: ``fbqrc run|sweep|train-feedback|esn|preset``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import traceback
from pathlib import Path

from .harness import presets
from .harness.config import ExperimentConfig
from .harness.emit import emit_csv, emit_svg, write_rows
from .harness.runner import (AXES, ResultTable, run_esn, run_experiment, run_sweep,
                             train_feedback, write_outputs)

METHODS = ("brute", "brute-nm", "de")


def _parse_values(text: str) -> list:
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        out.append(int(tok) if tok.lstrip("-").isdigit() else float(tok))
    return out


def _apply_flags(config: ExperimentConfig, args) -> ExperimentConfig:
    if getattr(args, "out_dir", None):
        config = config.replace(output={"out_dir": args.out_dir})
    if getattr(args, "trajectories", None):
        config = config.replace(trajectories={"mode": "trajectories", "count": args.trajectories})
    if getattr(args, "substeps", None):
        config = config.replace(reservoir={"substeps": args.substeps},
                                trajectories={"substeps": args.substeps})
    return config


def _print_table(table: ResultTable) -> None:
    for row in table.rows:
        print(f"{row['config_id']}\t{row['segment']}\tNRMSE={row['nrmse']:.6f}\t"
              f"{row['wall_time']:.1f}s")
    for fail in table.failures:
        print(f"{fail['config_id']}\tFAILED\t{fail['error']}")


def cmd_run(args) -> int:
    config = _apply_flags(ExperimentConfig.load(args.config), args)
    _print_table(run_experiment(config, seed=args.seed))
    return 0


def cmd_sweep(args) -> int:
    config = _apply_flags(ExperimentConfig.load(args.config), args)
    table = run_sweep(config, args.axis, _parse_values(args.values), seed=args.seed)
    _print_table(table)
    return 0 if not table.failures else 3


def _train(config: ExperimentConfig, method: str, seed: int) -> dict:
    task = config.task.build()
    from .reservoir import Reservoir

    res = Reservoir.build(config.reservoir.params(), config.reservoir.n_fock)
    report = train_feedback(config, res, task, method, seed or 0)
    trained = config.replace(feedback={"weights": tuple(report.best_V), "optimizer": "none"})
    table = run_experiment(trained, seed=seed, config_id=f"{config.name}-{method}")
    return {"method": method, "V": [float(v) for v in report.best_V],
            "train_objective": report.best_nrmse, "n_evals": report.n_evals,
            "test": table.nrmse("test"), "table": table, "log": report.log}


def _write_training(config, results) -> None:
    out = config.output.out_dir
    if not out:
        return
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    for r in results:
        stem = f"{config.name}-{r['method']}"
        write_outputs(r["table"], config, out, stem)
        rows = [{"index": i, "nrmse": v, **{f"V{j + 1}": float(x) for j, x in enumerate(V)}}
                for i, (V, v) in enumerate(r["log"])]
        dims = len(r["V"])
        write_rows(out / f"{stem}_evaluations.csv",
                   ("index", *[f"V{j + 1}" for j in range(dims)], "nrmse"), rows)
    if len(results) > 1:
        write_rows(out / f"{config.name}_methods.csv", ("method", "train_objective", "test", "n_evals"),
                   results)


def cmd_train(args) -> int:
    config = _apply_flags(ExperimentConfig.load(args.config), args)
    result = _train(config, args.method, args.seed)
    _write_training(config, [result])
    print(f"{config.name}\t{args.method}\tV={result['V']}\ttrain={result['train_objective']:.6f}"
          f"\ttest={result['test']:.6f}\tevals={result['n_evals']}")
    return 0


def cmd_esn(args) -> int:
    config = _apply_flags(ExperimentConfig.load(args.config), args)
    if args.seed is not None:
        config = config.replace(esn={"seed": args.seed})
    table = run_esn(config)
    if config.output.out_dir:
        out = Path(config.output.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        emit_csv(table, out / f"{config.name}_esn.csv")
    _print_table(table)
    return 0


def cmd_preset(args) -> int:
    preset = presets.get_preset(args.name)
    config, values = preset.resolve(args.full)
    config = _apply_flags(config, args)
    if args.dump:
        print(config.dumps(), end="")
        return 0
    if preset.kind == "run":
        _print_table(run_experiment(config, seed=args.seed))
    elif preset.kind == "sweep":
        table = run_sweep(config, preset.axis, values, seed=args.seed)
        _print_table(table)
        if table.failures:
            return 3
    elif preset.kind == "train":
        results = [_train(config, m, args.seed) for m in METHODS]
        _write_training(config, results)
        for r in results:
            print(f"{config.name}\t{r['method']}\tV={r['V']}\ttest={r['test']:.6f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fbqrc", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out-dir", default=None)
        sp.add_argument("--trajectories", type=int, default=None, metavar="M")
        sp.add_argument("--substeps", type=int, default=None, metavar="K")

    sp = sub.add_parser("run", help="run one experiment config")
    sp.add_argument("config")
    common(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", help="sweep one axis")
    sp.add_argument("config")
    sp.add_argument("--axis", required=True, choices=AXES)
    sp.add_argument("--values", required=True, help="comma-separated axis values")
    common(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("train-feedback", help="optimize feedback weights, then test")
    sp.add_argument("config")
    sp.add_argument("--method", choices=METHODS, default="brute")
    common(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("esn", help="classical echo-state-network ensemble")
    sp.add_argument("config")
    common(sp)
    sp.set_defaults(func=cmd_esn)

    sp = sub.add_parser("preset", help="run a figure preset")
    sp.add_argument("name", choices=sorted(presets.PRESETS))
    sp.add_argument("--full", action="store_true", help="full-scale parameters (slow)")
    sp.add_argument("--dump", action="store_true", help="print the resolved config and exit")
    common(sp)
    sp.set_defaults(func=cmd_preset)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
        cause = getattr(exc, "cause", None)
        if cause is not None:
            err["cause"] = type(cause).__name__
        if args.verbose:
            err["traceback"] = traceback.format_exc()
        print(json.dumps(err), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
