"""Measure the implementation constants that the library freezes.

* ``FLOOR_P1_CONST`` in ``lsh``: the smallest ratio of the tuned p1 to
  B^(-1/c') / max(1, ln B) over a grid of (c, B).
* Histogram error bounds: planted heavy-hitter trials that report how often
  the declared E and M hold.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .freq import bitstogram_round, index_mapping
from .lsh import FLOOR_P1_CONST, TuningError, c_prime, tune_t
from .privacy import AgentLedger, PrivacyBudget
from .protocol import Population, run_round


def measure_floor_p1(cs=None, Bs=None) -> tuple[float, tuple]:
    cs = np.linspace(1.5, 4.0, 11) if cs is None else cs
    Bs = np.logspace(math.log10(2.0), 4.0, 13) if Bs is None else Bs
    best, arg = math.inf, None
    for c in cs:
        for B in Bs:
            try:
                _, prof = tune_t(float(B), float(c))
            except TuningError:
                continue
            r = prof.p1 / (B ** (-1.0 / c_prime(c)) / max(1.0, math.log(B)))
            if r < best:
                best, arg = r, (float(c), float(B), prof.t)
    return best, arg


@dataclass
class HistogramTrials:
    trials: int
    error_ok: int        # every stored estimate within E of the truth
    recall_ok: int       # every value with frequency >= M was listed
    both_ok: int
    E: float
    M: float
    mode: str

    @property
    def rate(self) -> float:
        return self.both_ok / self.trials if self.trials else 0.0


def planted_values(n: int, log_universe: int, fractions, rng) -> tuple[np.ndarray, list]:
    U = 2 ** log_universe
    heavy = [int(v) for v in rng.choice(U, size=len(fractions), replace=False)]
    vals = rng.integers(0, U, size=n)
    start = 0
    for v, fr in zip(heavy, fractions):
        m = int(round(fr * n))
        vals[start:start + m] = v
        start += m
    rng.shuffle(vals)
    return vals, heavy


def histogram_trials(n: int = 50_000, log_universe: int = 20, epsilon: float = 2.0,
                     beta: float = 0.05, trials: int = 50, fractions=(0.30, 0.20, 0.05),
                     mode: str = "auto", seed: int = 0) -> HistogramTrials:
    err_ok = rec_ok = both = 0
    E = M = 0.0
    used = mode
    f = index_mapping("v", lambda p: p[:, 0].astype(np.int64), 2 ** log_universe)
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        vals, _ = planted_values(n, log_universe, fractions, rng)
        uniq, cnt = np.unique(vals, return_counts=True)
        truth = dict(zip(uniq.tolist(), cnt.tolist()))
        pop = Population(vals[:, None].astype(np.float64), AgentLedger(n, PrivacyBudget(epsilon, 0)),
                         seed=int(rng.integers(2 ** 31)))
        h = run_round(pop, 1, {}, lambda a: bitstogram_round(a, f, epsilon, beta, mode=mode))
        E, M, used = h.E, h.M, h.mode
        listed = {int(h.values[k][0]): v for k, v in h.entries.items()}
        e = all(abs(v - truth.get(x, 0)) <= h.E for x, v in listed.items())
        r = all(x in listed for x, c in truth.items() if c >= h.M)
        err_ok += e
        rec_ok += r
        both += e and r
    return HistogramTrials(trials, err_ok, rec_ok, both, E, M, used)


def calibration_report(trials: int = 10) -> dict:
    measured, arg = measure_floor_p1()
    h = histogram_trials(trials=trials)
    return {
        "floor_p1_measured": measured, "floor_p1_argmin": arg,
        "floor_p1_frozen": FLOOR_P1_CONST, "floor_p1_ok": FLOOR_P1_CONST <= measured,
        "hist_mode": h.mode, "hist_E": h.E, "hist_M": h.M, "hist_trials": h.trials,
        "hist_error_ok": h.error_ok, "hist_recall_ok": h.recall_ok,
        "hist_ok": h.rate >= 0.95,
    }
