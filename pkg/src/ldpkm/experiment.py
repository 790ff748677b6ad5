"""Experiment configs, single runs, sweeps and CSV output.

The results CSV is a pure function of the configs: wall-clock runtimes go to
a separate timings file so that reruns produce byte-identical results.
"""
from __future__ import annotations

import csv
import json
import math
import statistics
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from .alg_low_error import low_error_kmeans
from .alg_one_round import one_round_kmeans
from .core import ContractError, Timer, clustering_cost
from .data import gen_gaussian_mixture
from .kmeans_np import KMeansConfig, standard_kmeans

CSV_SCHEMA_VERSION = 1
ALGORITHMS = ("one_round", "low_error", "baseline")
ROUNDS = {"one_round": 1, "low_error": 4}


@dataclass(frozen=True)
class ExperimentConfig:
    algorithm: str = "one_round"
    n: int = 10_000
    d_prime: int = 10
    k: int = 5
    epsilon: float = 2.0
    delta: float = 1e-6
    alpha: float = 0.3
    c: float = 2.0
    beta: float = 0.05
    separation: float = 0.4
    stddev: float = 0.03
    data_seed: int = 0
    seed: int = 0
    c_dim: float = 1.0
    c_s: float = 1.0
    ng_cap: int | None = None
    c_B: float = 1e-6
    c_R: float = 4.0
    R_max: int = 32
    restarts: int = 10
    noiseless: bool = False
    canaries: int = 32

    def validate(self) -> "ExperimentConfig":
        errs = []
        if self.algorithm not in ALGORITHMS:
            errs.append(f"algorithm must be one of {ALGORITHMS}")
        if self.n < max(self.k, 1) or self.k < 1 or self.d_prime < 1:
            errs.append("need n >= k >= 1 and d_prime >= 1")
        if not self.epsilon > 0 or not 0 < self.delta < 1:
            errs.append("need epsilon > 0 and 0 < delta < 1")
        if not 0 < self.alpha < 0.5:
            errs.append("alpha must lie in (0, 1/2)")
        if not 0 < self.beta < 1:
            errs.append("beta must lie in (0, 1)")
        if self.algorithm == "low_error" and not self.c > math.sqrt(2):
            errs.append("c must exceed sqrt(2)")
        if self.stddev < 0 or self.separation < 0:
            errs.append("stddev and separation must be nonnegative")
        if errs:
            raise ContractError("invalid config: " + "; ".join(errs))
        return self

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        raw = json.loads(Path(path).read_text())
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ContractError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)


COLUMNS = (["schema"] + [f.name for f in fields(ExperimentConfig)] + [
    "returned_centers", "candidate_set_size", "eps_spent", "delta_spent",
    "private_cost", "baseline_cost", "opt_estimate", "mult_ratio", "additive_gap",
    "gap_over_opt", "sentinel_centers", "transcript_length", "invariants_ok", "failures"])


def canary_leaks(artifacts, points: np.ndarray, count: int) -> list:
    """Agents among the first ``count`` whose raw coordinates appear verbatim
    in any serialized round artifact."""
    text = json.dumps(artifacts, default=str)
    leaks = []
    for j in range(min(count, len(points))):
        reps = [repr(float(x)) for x in points[j] if len(repr(float(x))) >= 10]
        if any(r in text for r in reps):
            leaks.append(j)
    return leaks


def run_experiment(config: ExperimentConfig, timings: dict | None = None) -> dict:
    """One CSV row.  ``timings`` (optional) receives wall-clock seconds."""
    cfg = config.validate()
    try:
        data, _ = gen_gaussian_mixture(cfg.n, cfg.d_prime, cfg.k, cfg.separation, cfg.stddev,
                                       np.random.default_rng([cfg.data_seed, 7]))
        X = data.points
        km = KMeansConfig(restarts=cfg.restarts, seed=cfg.seed)
        with Timer() as tb:
            base = clustering_cost(X, standard_kmeans(X, cfg.k, km))
        row = {"schema": CSV_SCHEMA_VERSION, **asdict(cfg)}
        row.update({c: "" for c in COLUMNS if c not in row})
        row.update(baseline_cost=base, opt_estimate=base)
        if timings is not None:
            timings["baseline"] = tb.elapsed
        if cfg.algorithm == "baseline":
            row.update(invariants_ok=True, failures="")
            return row
        if cfg.algorithm == "one_round":
            res = one_round_kmeans(X, cfg.k, cfg.epsilon, cfg.delta, cfg.alpha, cfg.beta,
                                   seed=cfg.seed, noiseless=cfg.noiseless, ng_cap=cfg.ng_cap,
                                   kmeans_config=km, baseline_cost=base,
                                   c_dim=cfg.c_dim, c_s=cfg.c_s)
            size = res.report.extras["proxy_points"]
        else:
            res = low_error_kmeans(X, cfg.k, cfg.c, cfg.epsilon, cfg.delta, cfg.beta,
                                   seed=cfg.seed, noiseless=cfg.noiseless, alpha=cfg.alpha,
                                   kmeans_config=km, baseline_cost=base, c_dim=cfg.c_dim,
                                   c_B=cfg.c_B, c_R=cfg.c_R, R_max=cfg.R_max)
            size = res.report.extras["candidates"]
    except ContractError:
        raise
    except Exception as exc:
        raise RuntimeError(f"run failed for config {asdict(cfg)}: {exc}") from exc

    rep = res.report
    failures = []
    lengths = res.transcript.lengths()
    if not np.all(lengths == ROUNDS[cfg.algorithm]):
        failures.append("transcript_length")
    if not cfg.noiseless and res.ledger.total() != res.ledger.budget:
        failures.append("ledger_composition")
    if len(res.centers) != cfg.k:
        failures.append("center_count")
    if not cfg.noiseless and canary_leaks(res.artifacts, X, cfg.canaries):
        failures.append("canary_leak")
    eps, dlt = rep.budget_spent
    row.update(
        returned_centers=len(res.centers), candidate_set_size=size,
        eps_spent=eps, delta_spent=dlt, private_cost=rep.private_cost,
        mult_ratio=rep.mult_ratio, additive_gap=rep.additive_gap,
        gap_over_opt=rep.additive_gap / max(rep.opt_estimate, 1e-12),
        sentinel_centers=rep.extras.get("sentinel_centers", 0),
        transcript_length=int(lengths[0]), invariants_ok=not failures,
        failures=";".join(failures))
    if timings is not None:
        timings["private"] = rep.runtime
    return row


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def write_csv(path, rows: list, columns=COLUMNS) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c, "")) for c in columns])
    return path


def read_csv(path) -> list:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def sweep(base: ExperimentConfig, ns, seeds, algorithms, timing_rows: list | None = None) -> list:
    rows = []
    for alg in algorithms:
        for n in ns:
            for s in seeds:
                cfg = replace(base, algorithm=alg, n=int(n), seed=int(s), data_seed=int(s))
                t: dict = {}
                rows.append(run_experiment(cfg, t))
                if timing_rows is not None:
                    timing_rows.append({"algorithm": alg, "n": n, "seed": s, **t})
    return rows


PLOT_METRICS = ("mult_ratio", "gap_over_opt", "private_cost", "baseline_cost",
                "candidate_set_size")


def plot_data(rows: list) -> list:
    """Long format: one (run, metric, value) record per numeric metric."""
    out = []
    for i, r in enumerate(rows):
        for m in PLOT_METRICS:
            v = r.get(m, "")
            if v == "" or v is None:
                continue
            out.append({"run": i, "algorithm": r["algorithm"], "n": r["n"], "seed": r["seed"],
                        "metric": m, "value": float(v)})
    return out


def median_by_n(rows: list, metric: str, algorithm: str) -> dict:
    by: dict = {}
    for r in rows:
        if r["algorithm"] == algorithm and r.get(metric, "") != "":
            by.setdefault(int(r["n"]), []).append(float(r[metric]))
    return {n: statistics.median(v) for n, v in sorted(by.items())}
