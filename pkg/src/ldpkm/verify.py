"""Invariant checks shared by ``ldpkm verify`` and the test suite.

This module loads the ground-truth oracle, so it is imported lazily and only
after the CLI's startup check.
"""
from __future__ import annotations

import math

import numpy as np

from . import oracle
from .alg_low_error import Alg2Params, round1_cell_histograms
from .alg_one_round import one_round_kmeans
from .cells import mark_heavy_light
from .data import gen_gaussian_mixture
from .dimred import make_domain_map_alg2
from .experiment import ExperimentConfig, run_experiment
from .privacy import AgentLedger, PrivacyBudget
from .protocol import Population


def alg1_shadow_mismatches(X, k: int, seed: int = 0, alpha: float = 0.3, beta: float = 0.05,
                           ng_cap: int | None = None) -> tuple[int, int, dict]:
    """Noiseless one-round run; returns (count mismatches, sum mismatches, diag)."""
    res = one_round_kmeans(X, k, 1.0, 1e-6, alpha, beta, seed=seed, noiseless=True,
                           ng_cap=ng_cap, baseline_cost=1.0)
    diag = res.diagnostics
    Q, specs, states = diag["domain_map"], diag["specs"], diag["states"]
    shadow = oracle.shadow_bookkeeping(Q(X), X, specs, states)
    bad_c = bad_s = 0
    for st, (cnt, sums) in zip(states, shadow):
        for key in set(st.count) | set(cnt):
            if st.count.get(key, 0.0) != cnt.get(key, 0):
                bad_c += 1
        for key, s in st.sums.items():
            if not np.allclose(s, sums.get(key, 0.0), rtol=0, atol=1e-9):
                bad_s += 1
    return bad_c, bad_s, diag


def alg2_transition_mismatches(X, k: int, seed: int = 0, beta: float = 0.05,
                               c: float = 2.0) -> tuple[int, int]:
    """Noiseless round 1 plus marking for every guess; returns (mismatched
    points, points checked) against the oracle's exact recomputation."""
    n, dp = X.shape
    rng = np.random.default_rng([seed, 2])
    Q = make_domain_map_alg2(dp, k, 0.3, beta, rng)
    params = Alg2Params(k, 1.0, 1e-6, beta, c, n, Q.dim)
    pop = Population(X, AgentLedger(n, PrivacyBudget(1.0, 1e-6), enabled=False),
                     seed=seed, noiseless=True)
    ch = round1_cell_histograms(pop, Q, params)
    imgs = Q(X)
    bad = total = 0
    for g in params.guesses:
        labels = mark_heavy_light(ch, g, k, beta, params.L, Q.dim, params.d_power)
        heavy = oracle.exact_heavy_cells(imgs, g, k, beta, params.L, Q.dim, params.d_power)
        want = oracle.exact_transition_levels(imgs, heavy, params.L)
        got = labels.transition_levels(imgs)
        bad += int(np.sum(want != got))
        total += n
    return bad, total


def run_checks(quick: bool = True) -> list:
    out = []
    n = 2000 if quick else 10_000
    for alg in ("one_round", "low_error"):
        row = run_experiment(ExperimentConfig(algorithm=alg, n=n, restarts=3))
        out.append((f"{alg} private run invariants", bool(row["invariants_ok"]),
                    row["failures"] or f"eps={row['eps_spent']} delta={row['delta_spent']}"))

    data, _ = gen_gaussian_mixture(500, 6, 3, 0.4, 0.05, np.random.default_rng(1))
    bc, bs, _ = alg1_shadow_mismatches(data.points, 3)
    out.append(("one_round noiseless shadow bookkeeping", bc == 0 and bs == 0,
                f"count mismatches={bc} sum mismatches={bs}"))

    bad, tot = alg2_transition_mismatches(data.points, 3)
    out.append(("low_error transition levels vs oracle", bad == 0, f"{bad}/{tot} mismatched"))

    rng = np.random.default_rng(3)
    pts = rng.uniform(-0.6, 0.6, size=(12, 2))
    th = oracle.TheoryOracle.brute_force(pts, 2, L=6)
    lhs, rhs = th.abel_check()
    out.append(("layer summation identity", math.isclose(lhs, rhs, rel_tol=1e-9, abs_tol=1e-12),
                f"{lhs:.12g} vs {rhs:.12g}"))

    fails = 0
    for t in range(20):
        r = np.random.default_rng([4, t])
        sets = [set(r.choice(30, size=r.integers(1, 8), replace=False).tolist())
                for _ in range(int(r.integers(3, 12)))]
        ok, _, _ = oracle.greedy_guarantee_holds(sets, 2, 0.3)
        fails += not ok
    out.append(("greedy cover guarantee", fails == 0, f"{fails}/20 violations"))
    return out
