"""Command-line entry point: ``ldpkm run | sweep | calibrate | verify``.

Outputs go to ``--out`` (default ``ldpkm-out``); the environment variable
``LDPKM_OUTPUT_DIR`` overrides it.  The exit code is 0 exactly when every
checked invariant held.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import fields, replace
from pathlib import Path

from .experiment import (ExperimentConfig, plot_data, run_experiment, sweep, write_csv)
from .protocol import assert_protocol_path_clean

OUT_ENV = "LDPKM_OUTPUT_DIR"


def _bool(s: str) -> bool:
    if s.lower() in ("1", "true", "yes", "on"):
        return True
    if s.lower() in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {s}")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON file with ExperimentConfig fields")
    for f in fields(ExperimentConfig):
        typ = {"int": int, "float": float, "bool": _bool, "str": str}.get(
            str(f.type).split(" ")[0], None)
        if f.name == "ng_cap":
            typ = int
        p.add_argument("--" + f.name.replace("_", "-"), dest=f.name, type=typ or str,
                       default=None, help=f"default {f.default!r}")


def _config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
    over = {f.name: getattr(args, f.name) for f in fields(ExperimentConfig)
            if getattr(args, f.name, None) is not None}
    return replace(cfg, **over).validate()


def out_dir(args) -> Path:
    d = Path(os.environ.get(OUT_ENV) or args.out)
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_run(args) -> int:
    cfg = _config(args)
    t: dict = {}
    row = run_experiment(cfg, t)
    d = out_dir(args)
    write_csv(d / "results.csv", [row])
    write_csv(d / "timings.csv", [t], columns=sorted(t))
    keys = ("algorithm", "n", "returned_centers", "candidate_set_size", "private_cost",
            "baseline_cost", "mult_ratio", "gap_over_opt", "invariants_ok", "failures")
    for k in keys:
        print(f"{k:>20}: {row[k]}")
    return 0 if row["invariants_ok"] else 1


def cmd_sweep(args) -> int:
    base = _config(args)
    timing: list = []
    rows = sweep(base, args.ns, range(args.seeds), args.algorithms, timing)
    d = out_dir(args)
    write_csv(d / "sweep.csv", rows)
    pd = plot_data(rows)
    write_csv(d / "plot_data.csv", pd, columns=["run", "algorithm", "n", "seed", "metric", "value"])
    if timing:
        write_csv(d / "timings.csv", timing, columns=sorted({k for r in timing for k in r}))
    if not args.no_plots:
        from .plots import plot_sweep
        for p in plot_sweep(rows, d):
            print("wrote", p)
    bad = [r for r in rows if not r["invariants_ok"]]
    print(f"{len(rows)} runs, {len(bad)} with failed invariants; results in {d}")
    return 0 if not bad else 1


def cmd_calibrate(args) -> int:
    from .calibrate import calibration_report
    rep = calibration_report(trials=args.trials)
    d = out_dir(args)
    (d / "calibration.json").write_text(json.dumps(rep, indent=2, default=str))
    for k, v in rep.items():
        print(f"{k:>20}: {v}")
    return 0 if rep["floor_p1_ok"] and rep["hist_ok"] else 1


def cmd_verify(args) -> int:
    from .verify import run_checks
    results = run_checks(quick=not args.full)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
    return 0 if all(ok for _, ok, _ in results) else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ldpkm", description="LDP k-means simulator")
    sub = ap.add_subparsers(dest="cmd", required=True)

    def common(p):
        p.add_argument("--out", default="ldpkm-out", help=f"output directory ({OUT_ENV} overrides)")

    p = sub.add_parser("run", help="one experiment, one CSV row")
    _add_config_flags(p)
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="grid over n, seeds and algorithms")
    _add_config_flags(p)
    common(p)
    p.add_argument("--ns", type=int, nargs="+", default=[10_000, 100_000])
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--algorithms", nargs="+", default=["one_round", "low_error"],
                   choices=["one_round", "low_error", "baseline"])
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("calibrate", help="re-measure frozen implementation constants")
    common(p)
    p.add_argument("--trials", type=int, default=10)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("verify", help="invariant checks on small instances")
    common(p)
    p.add_argument("--full", action="store_true", help="larger instances")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    assert_protocol_path_clean()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:   # surfaced with context, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
