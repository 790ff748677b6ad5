"""One-round private k-means over a hierarchy of flooring grids.

Round 1: for every level l = 1..L each agent reports its grid point of level
l (dimension-reduced space) to a private histogram and its original point to
a heavy-sum oracle keyed by the same grid point.

Analyzer: greedy coverage from fine to coarse levels.  A grid point picked at
some level covers all points flooring to it; ``maximal`` holds the picks not
yet absorbed by a coarser pick, and counts/sums of later levels subtract the
mass of maximal picks underneath, so no point is counted twice.  The picks,
weighted by their adjusted counts, form a proxy dataset for non-private
k-means; each final center is the average of the sums of the picks it
serves.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import CenterSet, ContractError, CostReport, Timer, clustering_cost, nearest
from .dimred import DomainMap, make_domain_map_alg1
from .freq import bitstogram_round, heavy_sums_round
from .grids import GridSpec, coarsen
from .kmeans_np import KMeansConfig, standard_kmeans
from .privacy import AgentLedger, PrivacyBudget, compose, one_round_scheme, split_budget
from .protocol import Population, run_round


@dataclass(frozen=True)
class Alg1Params:
    k: int
    epsilon: float
    delta: float
    alpha: float
    beta: float
    n: int
    ng_cap: int | None = None
    c_dim: float = 1.0
    c_s: float = 1.0

    def __post_init__(self):
        if not 0 < self.alpha < 0.5:
            raise ContractError("alpha must lie in (0, 1/2)")
        if self.n < self.k:
            raise ContractError("need n >= k")

    @property
    def L(self) -> int:
        return max(1, math.ceil(math.log2(self.n)))

    @property
    def n_g(self) -> int:
        return self.ng_cap if self.ng_cap is not None else 20 * self.k

    @property
    def picks(self) -> int:
        return math.ceil(2 * self.n_g * math.log(1.0 / self.alpha))

    def budgets(self) -> dict:
        total = PrivacyBudget(self.epsilon, self.delta)
        return split_budget(total, one_round_scheme(total, self.L))


@dataclass
class LevelState:
    level: int
    picked: list                 # keys picked at this level, in pick order
    maximal: list                # (level, key) pairs after the update
    count: dict                  # key -> adjusted count
    sums: dict                   # key -> adjusted sum (picked keys only)
    coords: dict                 # key -> integer coords


def _key(coords) -> str:
    return ",".join(str(int(c)) for c in coords)


def run_interaction(agents: Population, Q: DomainMap, params: Alg1Params):
    """Single round: L histograms and L sum oracles."""
    b = params.budgets()
    specs = [GridSpec(l, params.L, params.alpha, Q.dim) for l in range(1, params.L + 1)]
    beta_call = params.beta / (2 * params.L)

    def execute(pop):
        hs, os_ = [], []
        for g in specs:
            f = g.mapping(Q)
            hs.append(bitstogram_round(pop, f, b["hist"].epsilon, beta_call, label=f"PH{g.level}"))
            os_.append(heavy_sums_round(pop, f, lambda p: p, pop.dim, b["sums"].epsilon,
                                        b["sums"].delta, diameter=2.0, sensitivity=2.0,
                                        label=f"PSO{g.level}"))
        return hs, os_

    hists, oracles = run_round(agents, 1, {"domain_map": Q, "grids": specs}, execute)
    return hists, oracles, specs


def build_proxy(hists, oracles, specs, params: Alg1Params):
    L = len(specs)
    maximal: list[tuple[int, tuple]] = []
    states: list[LevelState] = []
    cache_ph: dict = {}
    cache_pso: dict = {}

    def ph(level, coords):
        key = (level, coords)
        if key not in cache_ph:
            cache_ph[key] = hists[level - 1].query(specs[level - 1].key(coords))
        return cache_ph[key]

    def pso(level, coords):
        key = (level, coords)
        if key not in cache_pso:
            cache_pso[key] = oracles[level - 1].query(specs[level - 1].key(coords))
        return cache_pso[key]

    for l in range(1, L + 1):
        h = hists[l - 1]
        count: dict[str, float] = {}
        coords: dict[str, tuple] = {}
        for key, val in h.values.items():
            k_ = _key(val)
            coords[k_] = tuple(val)
            count[k_] = h.query(key)
        below: dict[str, list] = {}
        for (lm, gm) in maximal:
            up = tuple(int(x) for x in coarsen(np.array(gm), lm, l))
            k_ = _key(up)
            if k_ not in count:
                coords[k_] = up
                count[k_] = ph(l, up)
            count[k_] -= ph(lm, gm)
            below.setdefault(k_, []).append((lm, gm))
        cand = [k_ for k_, v in count.items() if v > 0]
        cand.sort(key=lambda k_: (-count[k_], coords[k_]))
        picked = cand[:params.picks]
        sums = {}
        for k_ in picked:
            s = pso(l, coords[k_]).copy()
            for (lm, gm) in below.get(k_, []):
                s -= pso(lm, gm)
            sums[k_] = s
        pset = {coords[k_] for k_ in picked}
        maximal = [(lm, gm) for (lm, gm) in maximal
                   if tuple(int(x) for x in coarsen(np.array(gm), lm, l)) not in pset]
        maximal += [(l, coords[k_]) for k_ in picked]
        states.append(LevelState(l, picked, list(maximal), count, sums, coords))
        assert len(maximal) <= l * params.picks

    pts, w = [], []
    for st in states:
        t = specs[st.level - 1].t
        for k_ in st.picked:
            pts.append(np.array(st.coords[k_], dtype=np.float64) * t)
            w.append(max(0.0, st.count[k_]))
    if not pts or sum(w) <= 0:
        return states, None
    return states, CenterSet(np.array(pts), np.array(w))


def recover_centers(proxy: CenterSet | None, states, k: int, d_prime: int,
                    config: KMeansConfig = KMeansConfig()) -> CenterSet:
    if proxy is None:
        warnings.warn("proxy dataset is empty; returning sentinel centers")
        return CenterSet(np.zeros((k, d_prime)), flags=tuple(("empty", j) for j in range(k)))
    s_star = standard_kmeans(proxy.centers, k, config, weights=proxy.weights)
    lab, _ = nearest(proxy.centers, s_star.centers)
    sums = np.zeros((k, d_prime))
    cnt = np.zeros(k)
    i = 0
    for st in states:
        for k_ in st.picked:
            sums[lab[i]] += st.sums[k_]
            cnt[lab[i]] += max(0.0, st.count[k_])
            i += 1
    out = np.zeros((k, d_prime))
    flags = []
    for j in range(k):
        if cnt[j] > 0:
            out[j] = sums[j] / cnt[j]
        else:
            flags.append(("empty", j))
    return CenterSet(out, flags=tuple(flags))


@dataclass
class RunResult:
    centers: CenterSet
    report: CostReport
    ledger: AgentLedger
    transcript: object
    artifacts: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)


def one_round_kmeans(points, k: int, epsilon: float, delta: float, alpha: float, beta: float,
                     seed: int = 0, noiseless: bool = False, ng_cap: int | None = None,
                     kmeans_config: KMeansConfig | None = None, baseline_cost: float | None = None,
                     c_dim: float = 1.0, c_s: float = 1.0) -> RunResult:
    X = np.asarray(points, dtype=np.float64)
    n, d_prime = X.shape
    params = Alg1Params(k, epsilon, delta, alpha, beta, n, ng_cap, c_dim, c_s)
    total = PrivacyBudget(epsilon, delta)
    ledger = AgentLedger(n, total, enabled=not noiseless)
    pop = Population(X, ledger, seed=seed, noiseless=noiseless)
    rng = np.random.default_rng([seed, 1])
    cfg = kmeans_config or KMeansConfig(seed=seed)
    with Timer() as tm:
        Q = make_domain_map_alg1(d_prime, k, alpha, beta, n, rng, c_dim, c_s)
        hists, oracles, specs = run_interaction(pop, Q, params)
        states, proxy = build_proxy(hists, oracles, specs, params)
        centers = recover_centers(proxy, states, k, d_prime, cfg)
    spent = ledger.total()
    if ledger.enabled and spent != total:
        raise AssertionError(f"ledger composed to {spent}, expected {total}")
    if baseline_cost is None:
        baseline_cost = clustering_cost(X, standard_kmeans(X, k, cfg))
    report = CostReport(clustering_cost(X, centers), baseline_cost, baseline_cost,
                        tm.elapsed, spent.as_floats())
    report.extras.update({
        "algorithm": "one_round", "levels": params.L, "ng_cap": params.n_g,
        "picks_per_level": params.picks, "reduced_dim": Q.dim,
        "proxy_points": 0 if proxy is None else len(proxy),
        "proxy_mass": 0.0 if proxy is None else float(proxy.weights.sum()),
        "sentinel_centers": len(centers.flags), "noiseless": noiseless,
    })
    diag = {"levels": [{"level": st.level, "picked": len(st.picked),
                        "picked_mass": float(sum(max(0.0, st.count[k_]) for k_ in st.picked)),
                        "listed": len(hists[st.level - 1].entries),
                        "hist_E": hists[st.level - 1].E, "hist_M": hists[st.level - 1].M}
                       for st in states],
            "states": states, "domain_map": Q, "specs": specs}
    artifacts = {"round1": {"domain_map": Q.to_json(),
                            "histograms": [h.to_json() for h in hists],
                            "oracles": [o.to_json(include_reports=False) for o in oracles]}}
    return RunResult(centers, report, ledger, pop.transcript, artifacts, diag)
