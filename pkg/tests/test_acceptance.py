"""Acceptance suite: one test and one printed PASS/FAIL line per criterion.

Tolerances are pinned below.  A failing criterion is reported as-is; the
analysis for the ones that cannot hold at this scale lives in the project's
decisions ledger, not in weakened thresholds here.
"""
import math
import time
import warnings

import numpy as np
import pytest

from ldpkm import oracle
from ldpkm.alg_low_error import low_error_kmeans
from ldpkm.alg_one_round import one_round_kmeans
from ldpkm.calibrate import histogram_trials
from ldpkm.cells import cells_within
from ldpkm.core import clustering_cost
from ldpkm.data import gen_gaussian_mixture
from ldpkm.dimred import make_domain_map_alg2, sample_jl, target_dim
from ldpkm.freq import heavy_sums_round, hso_error_bound, index_mapping
from ldpkm.kmeans_np import KMeansConfig, brute_force_kmeans, standard_kmeans
from ldpkm.lsh import atom_collision_prob, hash, sample_lsh, tune_t
from ldpkm.privacy import AgentLedger, PrivacyBudget, gaussian_perturb, gaussian_spec
from ldpkm.protocol import Population, run_round
from ldpkm.verify import alg1_shadow_mismatches, alg2_transition_mismatches

# pinned tolerances ---------------------------------------------------------
C1_N, C1_RUNTIME = 10_000, 60.0
C2_SPECS, C2_DRAWS, C2_STD_TOL = 1000, 100_000, 0.02
C3_TRIALS, C3_RATE, C3_RUNTIME = 50, 0.95, 120.0
C4_N, C4_D, C4_TRIALS, C4_RATE, C4_SE, C4_RUNTIME = 20_000, 8, 50, 0.95, 4.0, 120.0
C5_PAIRS, C5_PAIR_RATE, C5_TRIALS, C5_TRIAL_RATE, C5_ALPHA = 1000, 0.95, 20, 0.90, 0.3
C6_SEEDS, C6_K, C6_LEVELS, C6_FACTOR = 100, 10, range(3, 11), 8
C7_BS, C7_CS, C7_PAIRS, C7_REL = (10, 100, 1000), (2, 3), 10_000, 0.20
C8_INSTANCES, C8_NMAX = 20, 2000
C9_INSTANCES, C9_RATIO = 50, 1.05
C10_NS, C10_SEEDS, C10_RATIO, C10_MIN_OK, C10_RUNTIME = (10_000, 100_000), 5, 10.0, 4, 1200.0
BETA = 0.05


def quiet():
    w = warnings.catch_warnings()
    w.__enter__()
    warnings.simplefilter("ignore")
    return w


def test_c01_privacy_accounting(criterion):
    data, _ = gen_gaussian_mixture(C1_N, 10, 5, 0.4, 0.03, np.random.default_rng(0))
    X = data.points
    total = PrivacyBudget(2.0, 1e-6)
    notes, ok = [], True
    w = quiet()
    for name, run, rounds in (
            ("one_round", lambda: one_round_kmeans(X, 5, 2.0, 1e-6, 0.3, BETA, seed=0,
                                                   baseline_cost=1.0), 1),
            ("low_error", lambda: low_error_kmeans(X, 5, 2.0, 2.0, 1e-6, BETA, seed=0,
                                                   baseline_cost=1.0), 4)):
        t0 = time.perf_counter()
        res = run()
        dt = time.perf_counter() - t0
        exact = all(b == total for b in res.ledger.totals())
        lengths = bool(np.all(res.transcript.lengths() == rounds))
        ok &= exact and lengths and dt < C1_RUNTIME
        notes.append(f"{name}: ledger exact={exact} rounds={rounds}:{lengths} {dt:.1f}s")
    w.__exit__(None, None, None)
    criterion(1, "privacy accounting and transcript lengths", ok, "; ".join(notes))


def test_c02_gaussian_calibration(criterion):
    rng = np.random.default_rng(2)
    strict = True
    for _ in range(C2_SPECS):
        eps, dlt = rng.uniform(0.01, 10), 10 ** rng.uniform(-12, -0.5)
        s = gaussian_spec(eps, dlt, rng.uniform(0.1, 5))
        strict &= s.c_G ** 2 > 2 * math.log(1.25 / dlt)
    worst = 0.0
    for _ in range(5):
        s = gaussian_spec(rng.uniform(0.1, 4), 10 ** rng.uniform(-9, -2), rng.uniform(0.1, 3))
        x = gaussian_perturb(np.zeros(C2_DRAWS), s, rng)
        worst = max(worst, abs(x.std() / s.sigma - 1))
    criterion(2, "Gaussian mechanism calibration", strict and worst <= C2_STD_TOL,
              f"strict inequality on {C2_SPECS} specs={strict}; worst std deviation {worst:.4f}")


def test_c03_histogram_contract(criterion):
    t0 = time.perf_counter()
    h = histogram_trials(n=50_000, log_universe=20, epsilon=2.0, beta=BETA, trials=C3_TRIALS)
    dt = time.perf_counter() - t0
    criterion(3, "succinct histogram error and recall", h.rate >= C3_RATE and dt < C3_RUNTIME,
              f"{h.both_ok}/{h.trials} trials, E={h.E:.0f} M={h.M:.0f} mode={h.mode} {dt:.1f}s")


def test_c04_heavy_sums_contract(criterion):
    t0 = time.perf_counter()
    n, d, eps, dlt = C4_N, C4_D, 1.0, 1e-5
    within, off = 0, []
    bound = None
    for t in range(C4_TRIALS):
        rng = np.random.default_rng([4, t])
        x = rng.normal(size=(n, d))
        x *= (rng.uniform(size=(n, 1)) ** (1 / d)) / np.linalg.norm(x, axis=1, keepdims=True)
        vals = rng.integers(2, 2 ** 16, size=n)
        vals[: n // 2] = 1
        pts = np.c_[vals, x]
        f = index_mapping("v", lambda p: p[:, 0].astype(np.int64), 2 ** 16)
        pop = Population(pts, AgentLedger(n, PrivacyBudget(eps, dlt)), seed=t)
        o = run_round(pop, 1, {}, lambda a: heavy_sums_round(a, f, lambda p: p[:, 1:], d, eps, dlt,
                                                             diameter=2.0, sensitivity=2.0))
        bound = hso_error_bound(n, d, 2.0, 2.0, eps, o.c_G, BETA)
        within += np.linalg.norm(o.query("1") - x[: n // 2].sum(0)) <= bound
        off.append(o.query("0"))
    off = np.array(off)
    se = off.std(axis=0, ddof=1) / math.sqrt(len(off))
    unbiased = bool(np.all(np.abs(off.mean(axis=0)) <= C4_SE * se))
    dt = time.perf_counter() - t0
    ok = within / C4_TRIALS >= C4_RATE and unbiased and dt < C4_RUNTIME
    criterion(4, "heavy-sums oracle bound and off-support mean", ok,
              f"{within}/{C4_TRIALS} within {bound:.0f}; off-support unbiased={unbiased} {dt:.1f}s")


def test_c05_jl_cost_preservation(criterion):
    rng = np.random.default_rng(5)
    d = target_dim(5, C5_ALPHA, BETA)
    jl = sample_jl(4 * d, d, rng)
    a, b = rng.normal(size=(2, C5_PAIRS, 4 * d))
    r = np.linalg.norm(jl(a) - jl(b), axis=1) / np.linalg.norm(a - b, axis=1)
    pair_rate = float(np.mean(np.abs(r - 1) <= C5_ALPHA))
    good = 0
    for s in range(C5_TRIALS):
        g = np.random.default_rng([55, s])
        Q = make_domain_map_alg2(4 * d, 5, C5_ALPHA, BETA, g)
        X = g.normal(size=(500, 4 * d))
        X *= (g.uniform(size=(500, 1)) ** (1 / (4 * d))) / np.linalg.norm(X, axis=1, keepdims=True)
        lab = g.integers(0, 2, size=500)
        Y = Q(X)

        def cost(P):
            return sum(clustering_cost(P[lab == j], [P[lab == j].mean(0)]) for j in range(2))
        good += abs(cost(Y) / (cost(X) * Q.scale ** 2) - 1) <= 2 * C5_ALPHA
    ok = pair_rate >= C5_PAIR_RATE and good / C5_TRIALS >= C5_TRIAL_RATE
    criterion(5, "JL distances and clustering cost", ok,
              f"d={d}; pairs within 1±a: {pair_rate:.3f}; clusterings preserved {good}/{C5_TRIALS}")


def test_c06_random_shift_cells(criterion):
    worst = 0.0
    per = {}
    for l in C6_LEVELS:
        counts = []
        for s in range(C6_SEEDS):
            g = np.random.default_rng([6, s])
            Q = make_domain_map_alg2(10, C6_K, 0.3, BETA, g)
            x = g.normal(size=(C6_K, 10))
            x *= (g.uniform(size=(C6_K, 1)) ** 0.1) / np.linalg.norm(x, axis=1, keepdims=True)
            counts.append(len(cells_within(Q(x), l, 2.0 ** -l / Q.dim)))
        per[l] = float(np.mean(counts))
        worst = max(worst, per[l])
    criterion(6, "random-shift cell count near anchors", worst <= C6_FACTOR * C6_K,
              f"max mean {worst:.1f} vs {C6_FACTOR * C6_K}; " +
              " ".join(f"l{l}:{v:.1f}" for l, v in per.items()))


def _collision_rate(prof, dist, pairs, seed, dim=5):
    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(pairs):
        fn = sample_lsh(dim, 1.0, prof, rng)
        x = rng.uniform(-1, 1, size=dim)
        u = rng.normal(size=dim)
        hits += np.array_equal(hash(fn, x), hash(fn, x + dist * u / np.linalg.norm(u)))
    return hits / pairs


def test_c07_lsh_tuner(criterion):
    notes, ok = [], True
    for c in C7_CS:
        for B in C7_BS:
            t, prof = tune_t(B, c)
            a1, ac = atom_collision_prob(prof.w, 1.0), atom_collision_prob(prof.w, float(c))
            analytic = t * math.log(a1 * a1 / ac) >= math.log(B)
            e1 = _collision_rate(prof, 1.0, C7_PAIRS, [7, c, B, 1])
            ec = _collision_rate(prof, float(c), C7_PAIRS, [7, c, B, 2])
            r1 = abs(e1 / prof.p1 - 1) <= C7_REL
            rc = abs(ec / prof.pc - 1) <= C7_REL
            ok &= analytic and r1 and rc
            notes.append(f"c={c} B={B} t={t} ratio={analytic} p1 {e1:.2e}/{prof.p1:.2e}:{r1} "
                         f"pc {ec:.2e}/{prof.pc:.2e}:{rc}")
    criterion(7, "LSH tuner ratio and empirical collision rates", ok, "; ".join(notes))


def test_c08_noiseless_equivalence(criterion):
    a_bad = 0
    for s in range(C8_INSTANCES):
        g = np.random.default_rng([8, s])
        n = int(g.integers(200, C8_NMAX + 1))
        data, _ = gen_gaussian_mixture(n, int(g.integers(2, 6)), int(g.integers(1, 4)),
                                       0.3, float(g.uniform(0.01, 0.1)), g)
        bc, bs, _ = alg1_shadow_mismatches(data.points, 3, seed=s)
        a_bad += bc + bs
    b_bad = b_tot = 0
    for s in range(5):
        data, _ = gen_gaussian_mixture(1000, 4, 3, 0.3, 0.05, np.random.default_rng([88, s]))
        bad, tot = alg2_transition_mismatches(data.points, 3, seed=s)
        b_bad, b_tot = b_bad + bad, b_tot + tot
    c_bad = c_tot = 0
    for t in range(40):
        r = np.random.default_rng([888, t])
        sets = [set(r.choice(50, size=r.integers(1, 12), replace=False).tolist())
                for _ in range(int(r.integers(2, 64)))]
        okc, _, _ = oracle.greedy_guarantee_holds(sets, 2, 0.3)
        c_bad += not okc
        c_tot += 1
    ok = a_bad == 0 and b_bad == 0 and c_bad == 0
    criterion(8, "noiseless combinatorial equivalence", ok,
              f"(a) {a_bad} bookkeeping mismatches over {C8_INSTANCES} runs; "
              f"(b) {b_bad}/{b_tot} transition levels differ; (c) {c_bad}/{c_tot} cover violations")


def test_c09_oracle_kmeans(criterion):
    worst = 0.0
    for s in range(C9_INSTANCES):
        g = np.random.default_rng([9, s])
        n, k = int(g.integers(4, 13)), int(g.integers(1, 4))
        X = g.uniform(-1, 1, size=(n, int(g.integers(1, 4))))
        _, opt = brute_force_kmeans(X, k)
        got = clustering_cost(X, standard_kmeans(X, k, KMeansConfig(seed=s)))
        worst = max(worst, got / opt if opt > 0 else (1.0 if got <= 1e-12 else math.inf))
    criterion(9, "k-means against brute force", worst <= C9_RATIO, f"worst ratio {worst:.4f}")


def test_c10_end_to_end(criterion):
    rows = {alg: {n: [] for n in C10_NS} for alg in ("one_round", "low_error")}
    elapsed = {alg: 0.0 for alg in rows}
    w = quiet()
    for n in C10_NS:
        for s in range(C10_SEEDS):
            data, _ = gen_gaussian_mixture(n, 10, 5, 0.4, 0.03, np.random.default_rng([10, s]))
            X = data.points
            base = clustering_cost(X, standard_kmeans(X, 5, KMeansConfig(restarts=3, seed=s)))
            for alg in rows:
                t0 = time.perf_counter()
                if alg == "one_round":
                    res = one_round_kmeans(X, 5, 2.0, 1e-6, 0.3, BETA, seed=s, baseline_cost=base)
                else:
                    res = low_error_kmeans(X, 5, 2.0, 2.0, 1e-6, BETA, seed=s, baseline_cost=base)
                elapsed[alg] += time.perf_counter() - t0
                rep = res.report
                rows[alg][n].append((len(res.centers), rep.mult_ratio,
                                     rep.additive_gap / rep.opt_estimate))
    w.__exit__(None, None, None)
    notes, ok = [], True
    big, small = max(C10_NS), min(C10_NS)
    for alg, by_n in rows.items():
        good = sum(1 for m, r, _ in by_n[big] if m == 5 and r <= C10_RATIO)
        med_big = float(np.median([g for *_, g in by_n[big]]))
        med_small = float(np.median([g for *_, g in by_n[small]]))
        this = good >= C10_MIN_OK and med_big <= med_small and elapsed[alg] < C10_RUNTIME
        ok &= this
        ratios = ", ".join(f"{r:.1f}" for _, r, _ in by_n[big])
        notes.append(f"{alg}: ratios@{big}=[{ratios}] ok {good}/{C10_SEEDS}; median gap/opt "
                     f"{med_small:.2f}@{small} -> {med_big:.2f}@{big}; {elapsed[alg]:.0f}s")
    criterion(10, "end-to-end desk-scale benchmark", ok, "; ".join(notes))


def test_c11_candidate_audit(criterion):
    data, _ = gen_gaussian_mixture(400, 10, 5, 0.4, 0.03, np.random.default_rng(11))
    X = data.points
    sizes, audit_ok = {}, True
    for c in (2.0, 4.0):
        res = low_error_kmeans(X, 5, c, 2.0, 1e-6, BETA, seed=1, noiseless=True, baseline_cost=1.0)
        diag = res.diagnostics
        cap = sum(ctx.labels.heavy_count(l) for ctx in diag["contexts"]
                  for l in range(ctx.labels.L))
        cap += sum(a["cap"] for a in diag["audit"] if not a["skipped"])
        per_level = all(a["qualified"] <= a["cap"] for a in diag["audit"] if not a["skipped"])
        sizes[c] = len(diag["candidates"])
        audit_ok &= per_level and sizes[c] <= cap
    ok = audit_ok and sizes[4.0] < sizes[2.0]
    criterion(11, "candidate-count audit and monotonicity in c", ok,
              f"audit holds={audit_ok}; |S| c=2: {sizes[2.0]}, c=4: {sizes[4.0]}")
