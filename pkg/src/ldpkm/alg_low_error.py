"""Four-round private k-means with dyadic cells and locality-sensitive hashing.

1. Cell histograms for levels 1..L-1 of the shifted dyadic hierarchy.
2. For every OPT guess f, level l, scale m and repetition r: agents whose
   level-l cell is light with a heavy parent hash their synthetic-space image
   and report the bucket to a histogram and to a heavy-sum oracle; everyone
   else reports the reserved token.  Heavy buckets give candidate centers
   (projected noisy bucket averages); heavy-cell centers are candidates too.
3. Agents report their nearest candidate; the weighted candidates form a
   proxy dataset for non-private k-means.
4. Agents report their original point in the block of their nearest proxy
   center (Gaussian mechanism) and the center index (histogram); the
   analyzer divides sums by counts.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .alg_one_round import RunResult
from .cells import CellLabels, anc_star_gap, cell_center, cell_mapping, cell_of, mark_heavy_light
from .core import CenterSet, ContractError, CostReport, Timer, clustering_cost, nearest
from .dimred import DomainMap, make_domain_map_alg2
from .freq import (bitstogram_round, heavy_sums_round, histogram_bounds, index_mapping,
                   vector_sum_round)
from .kmeans_np import KMeansConfig, standard_kmeans
from .lsh import (CollisionProfile, LevelImages, bucket_mapping, lambda_map, project_to_heavy_cells,
                  sample_lsh, synthetic_space, tune_t)
from .privacy import (AgentLedger, PrivacyBudget, four_round_scheme, gaussian_spec,
                      split_budget)
from .protocol import Population, run_round

# frozen constants (see ``ldpkm calibrate``)
C_R = 4.0
C_T = 1.0


@dataclass(frozen=True)
class Alg2Params:
    k: int
    epsilon: float
    delta: float
    beta: float
    c: float
    n: int
    d: int
    alpha: float = 0.3
    c_B: float = 1e-6
    c_R: float = C_R
    c_T: float = C_T
    R_max: int = 32
    d_power: float = 0.0
    heavy_cap_const: float = 1.0

    def __post_init__(self):
        if self.c <= math.sqrt(2):
            raise ContractError("need c > sqrt(2)")
        if self.n < self.k:
            raise ContractError("need n >= k")

    @property
    def L(self) -> int:
        return max(2, math.ceil(math.log2(self.n)))

    @property
    def guesses(self) -> list:
        return opt_guesses(self.n, self.k)

    @property
    def M(self) -> int:
        return 1 + math.ceil(math.log2(self.d ** 1.5 * math.sqrt(self.L)))

    @property
    def eps_ch(self) -> float:
        return self.epsilon / 4.0 / (self.L - 1)

    @property
    def B(self) -> float:
        return self.c_B * self.k * math.log(self.n) ** 3 / (self.eps_ch * self.beta ** 2)

    def profile(self) -> CollisionProfile:
        return tune_t(max(self.B, 1.0 + 1e-9), self.c)[1]

    def R_theory(self, p1: float) -> float:
        F = len(self.guesses)
        return math.ceil(self.c_R * math.log(self.k * self.L ** 2 * self.M * F / self.beta) / p1)

    @property
    def R(self) -> int:
        return int(min(self.R_max, self.R_theory(self.profile().p1)))

    @property
    def bucket_pairs(self) -> int:
        return len(self.guesses) * (self.L - 1) * self.M * self.R

    def budgets(self) -> dict:
        total = PrivacyBudget(self.epsilon, self.delta)
        return split_budget(total, four_round_scheme(total, self.L - 1, self.bucket_pairs))

    def scale(self, l: int, m: int) -> float:
        return 2.0 ** m * 2.0 ** -l / (self.d * math.sqrt(self.L))

    @property
    def heavy_cap(self) -> float:
        return self.heavy_cap_const * self.k * self.L / self.beta


def opt_guesses(n: int, k: int) -> list:
    if n < 4 * k * k:
        return [float(n)]
    F = math.ceil(math.log2(math.sqrt(n) / k))
    return [k * math.sqrt(n) * 2.0 ** f for f in range(F + 1)]


def round1_cell_histograms(agents: Population, Q: DomainMap, params: Alg2Params) -> dict:
    b = params.budgets()["round1_cells"]

    def execute(pop):
        return {l: bitstogram_round(pop, cell_mapping(l, Q.dim, Q), b.epsilon,
                                    params.beta / params.L, label=f"CH{l}")
                for l in range(1, params.L)}

    return run_round(agents, 1, {"domain_map": Q}, execute)


def level_threshold(params: Alg2Params, l: int, opt: float, prof: CollisionProfile,
                    bh_M: float, eps_bso: float, sigma_c: float, noiseless: bool) -> float:
    t = 2.0 ** -l
    first = params.beta * opt / (t * t * params.k * params.L ** 2 * params.d)
    if noiseless:
        return prof.p1 / 2.0 * first
    third = params.c_T * sigma_c * math.sqrt(params.n * math.log(params.n) ** 2 / params.beta) / eps_bso
    return prof.p1 / 2.0 * max(first, 4.0 * bh_M / prof.p1, third)


@dataclass
class Candidate:
    point: np.ndarray
    source: str                 # "heavy" or "bucket"
    tag: tuple                  # (f, l) or (l, m, r, f)


@dataclass
class GuessContext:
    f: int
    opt_guess: float
    labels: CellLabels
    candidates: list = field(default_factory=list)


class _CachedMap:
    """Agent-side memo of the public domain map within a round."""

    def __init__(self, Q):
        self.Q = Q
        self._src = None
        self._img = None

    def __call__(self, pts):
        if self._src is not pts:
            self._src, self._img = pts, self.Q(pts)
        return self._img


def round2_lsh(agents: Population, Q: DomainMap, contexts: list, params: Alg2Params,
               prof: CollisionProfile, rng: np.random.Generator):
    b = params.budgets()
    bh_b, bso_b = b["round2_hist"], b["round2_sums"]
    noiseless = agents.noiseless
    cq = _CachedMap(Q)
    audit = []

    def execute(pop):
        calls = []
        for ctx in contexts:
            for l in range(1, params.L):
                space = synthetic_space(ctx.labels, l, params.c)
                dummy = bucket_mapping((l, 0, 0, ctx.f), sample_lsh(space.dim, 1.0, prof, rng),
                                       LevelImages(space, lambda p: np.zeros(len(p), bool)))
                bh_E, bh_M, _ = (0.0, 0.0, "") if noiseless else histogram_bounds(
                    pop.n, dummy.bits, bh_b.eps, params.beta)
                c_G = gaussian_spec(bso_b.eps, bso_b.dlt, 1.0).c_G
                T = level_threshold(params, l, ctx.opt_guess, prof, bh_M, bso_b.eps, c_G, noiseless)
                skip = T > pop.n or ctx.labels.heavy_count(l - 1) == 0
                pairs = params.M * params.R
                audit.append({"f": ctx.f, "l": l, "T": T, "E": bh_E, "skipped": skip,
                              "qualified": 0, "cap": 0})
                if skip:
                    pop.skip_calls(f"BH{l}:{ctx.f}", "histogram", bh_b, pairs)
                    pop.skip_calls(f"BSO{l}:{ctx.f}", "sum_oracle", bso_b, pairs)
                    continue

                def part(img, l=l, labels=ctx.labels):
                    return labels.is_medium(l, cell_of(img, l))

                images = LevelImages(space, part, cq)
                X = space.norm_bound()

                for m in range(1, params.M + 1):
                    r_lm = params.scale(l, m)
                    for r in range(params.R):
                        fn = sample_lsh(space.dim, r_lm, prof, rng)
                        tag = (l, m, r, ctx.f)
                        fmap = bucket_mapping(tag, fn, images)
                        bh = bitstogram_round(pop, fmap, bh_b.epsilon, params.beta, label=f"BH{tag}")
                        bso = heavy_sums_round(pop, fmap, lambda pts: images(pts)[0], space.dim,
                                               bso_b.epsilon, bso_b.delta, diameter=2 * X,
                                               sensitivity=2 * X, label=f"BSO{tag}")
                        T_call = level_threshold(params, l, ctx.opt_guess, prof, bh.M, bso_b.eps,
                                                 c_G, noiseless)
                        calls.append((ctx, l, tag, space, T_call, bh, bso))
                        a = audit[-1]
                        a["cap"] += math.floor(pop.n / max(T_call - bh.E, 1e-300))
        return calls

    calls = run_round(agents, 2, {"contexts": contexts}, execute)
    return calls, audit


def candidate_centers(calls, contexts, audit, params: Alg2Params):
    """Bucket averages above threshold, projected into heavy cells, plus the
    centers of all heavy cells."""
    by_fl = {(a["f"], a["l"]): a for a in audit}
    for ctx in contexts:
        for l, cells in enumerate(ctx.labels.heavy):
            for c in cells:
                ctx.candidates.append(Candidate(cell_center(l, c), "heavy", (ctx.f, l)))
    ctx_of = {ctx.f: ctx for ctx in contexts}
    for ctx, l, tag, space, T, bh, bso in calls:
        keys = [k_ for k_, v in bh.entries.items() if v >= T]
        by_fl[(ctx.f, l)]["qualified"] += len(keys)
        if not keys:
            continue
        cnt = np.array([bh.query(k_) for k_ in keys])
        avg = bso.query_many(keys) / cnt[:, None]
        pts, j = project_to_heavy_cells(avg, space)
        if not np.array_equal(cell_of(pts, space.anc_level), space.anchors[j]):
            raise AssertionError("projected candidate left its heavy cell")
        ctx_of[ctx.f].candidates.extend(Candidate(p, "bucket", tag) for p in pts)
    for a in audit:
        if not a["skipped"] and a["qualified"] > a["cap"]:
            raise AssertionError(f"candidate audit failed at {a}")
    pts = np.array([c.point for ctx in contexts for c in ctx.candidates])
    uniq, first = np.unique(pts, axis=0, return_index=True)
    order = np.sort(first)
    provenance = [c for ctx in contexts for c in ctx.candidates]
    return pts[order], [provenance[i] for i in order]


def round3_proxy(agents: Population, Q: DomainMap, S: np.ndarray, params: Alg2Params,
                 config: KMeansConfig):
    b = params.budgets()["round3_nearest"]
    f = index_mapping("nearest_candidate", lambda pts: nearest(Q(pts), S)[0], len(S))

    def execute(pop):
        return bitstogram_round(pop, f, b.epsilon, params.beta, label="CCH")

    cch = run_round(agents, 3, {"candidates": S}, execute)
    w = np.array([cch.query(str(i)) for i in range(len(S))])
    if w.sum() <= 0:
        warnings.warn("all candidate weights are zero; proxy centers fall back to candidates")
        s_star = CenterSet(np.repeat(S[:1], params.k, axis=0), flags=(("empty_proxy", -1),))
        return cch, CenterSet(S, np.zeros(len(S))), s_star
    proxy = CenterSet(S, w)
    keep = w > 0
    s_star = standard_kmeans(S[keep], params.k, config, weights=w[keep])
    return cch, proxy, s_star


def round4_recover(agents: Population, Q: DomainMap, s_star: CenterSet, params: Alg2Params):
    b = params.budgets()
    k, dp = params.k, agents.dim
    f = index_mapping("nearest_center", lambda pts: nearest(Q(pts), s_star.centers)[0], k)

    def blocks(pts):
        lab = nearest(Q(pts), s_star.centers)[0]
        v = np.zeros((len(pts), k * dp))
        for j in range(k):
            v[lab == j, j * dp:(j + 1) * dp] = pts[lab == j]
        return v

    def execute(pop):
        vs = vector_sum_round(pop, blocks, k * dp, b["round4_vectors"].epsilon,
                              b["round4_vectors"].delta, math.sqrt(2.0), label="Gv")
        sh = bitstogram_round(pop, f, b["round4_counts"].epsilon, params.beta, label="SH")
        return vs, sh

    vs, sh = run_round(agents, 4, {"proxy_centers": s_star.centers}, execute)
    out = np.zeros((k, dp))
    flags = []
    for j in range(k):
        cnt = sh.query(str(j))
        if cnt > 0:
            out[j] = vs.total[j * dp:(j + 1) * dp] / cnt
        else:
            flags.append(("empty", j))
    return vs, sh, CenterSet(out, flags=tuple(flags))


def low_error_kmeans(points, k: int, c: float, epsilon: float, delta: float, beta: float,
                     seed: int = 0, noiseless: bool = False, alpha: float = 0.3,
                     kmeans_config: KMeansConfig | None = None, baseline_cost: float | None = None,
                     **overrides) -> RunResult:
    X = np.asarray(points, dtype=np.float64)
    n, d_prime = X.shape
    rng = np.random.default_rng([seed, 2])
    Q = make_domain_map_alg2(d_prime, k, alpha, beta, rng, overrides.pop("c_dim", 1.0))
    params = Alg2Params(k, epsilon, delta, beta, c, n, Q.dim, alpha, **overrides)
    total = PrivacyBudget(epsilon, delta)
    ledger = AgentLedger(n, total, enabled=not noiseless)
    pop = Population(X, ledger, seed=seed, noiseless=noiseless)
    cfg = kmeans_config or KMeansConfig(seed=seed)
    prof = params.profile()
    with Timer() as tm:
        ch = round1_cell_histograms(pop, Q, params)
        contexts = [GuessContext(f, g, mark_heavy_light(ch, g, k, beta, params.L, Q.dim,
                                                        params.d_power, params.heavy_cap))
                    for f, g in enumerate(params.guesses)]
        calls, audit = round2_lsh(pop, Q, contexts, params, prof, rng)
        S, prov = candidate_centers(calls, contexts, audit, params)
        cch, proxy, s_star = round3_proxy(pop, Q, S, params, cfg)
        vs, sh, centers = round4_recover(pop, Q, s_star, params)
    spent = ledger.total()
    if ledger.enabled and spent != total:
        raise AssertionError(f"ledger composed to {spent}, expected {total}")
    if baseline_cost is None:
        baseline_cost = clustering_cost(X, standard_kmeans(X, k, cfg))
    report = CostReport(clustering_cost(X, centers), baseline_cost, baseline_cost,
                        tm.elapsed, spent.as_floats())
    n_heavy = sum(1 for p in prov if p.source == "heavy")
    report.extras.update({
        "algorithm": "low_error", "levels": params.L, "c": c, "reduced_dim": Q.dim,
        "guesses": len(params.guesses), "scales": params.M, "repetitions": params.R,
        "repetitions_theory": params.R_theory(prof.p1), "R_capped": params.R < params.R_theory(prof.p1),
        "lsh_t": prof.t, "lsh_w": prof.w, "lsh_p1": prof.p1, "lsh_pc": prof.pc, "lsh_B": params.B,
        "candidates": len(S), "heavy_candidates": n_heavy, "bucket_candidates": len(S) - n_heavy,
        "levels_run": sum(1 for a in audit if not a["skipped"]),
        "sentinel_centers": len(centers.flags), "noiseless": noiseless,
    })
    diag = {"audit": audit, "contexts": contexts, "domain_map": Q, "params": params,
            "profile": prof, "candidates": S, "provenance": prov, "proxy": proxy,
            "s_star": s_star, "cch": cch, "sh": sh}
    artifacts = {
        "round1": {"domain_map": Q.to_json(), "histograms": [h.to_json() for h in ch.values()]},
        "round2": {"bucket_histograms": [c_[5].to_json() for c_ in calls],
                   "candidates": S.tolist()},
        "round3": {"histogram": cch.to_json(), "proxy_centers": s_star.centers.tolist()},
        "round4": {"vector_sum": vs.to_json(), "histogram": sh.to_json()},
    }
    return RunResult(centers, report, ledger, pop.transcript, artifacts, diag)
