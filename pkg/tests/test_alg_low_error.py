import math
import warnings

import numpy as np
import pytest

from ldpkm.alg_low_error import Alg2Params, low_error_kmeans, opt_guesses, round1_cell_histograms
from ldpkm.cells import anc_star_gap, cell_key, cell_of
from ldpkm.core import clustering_cost, nearest
from ldpkm.data import gen_gaussian_mixture
from ldpkm.dimred import make_domain_map_alg2
from ldpkm.privacy import AgentLedger, PrivacyBudget
from ldpkm.protocol import Population
from ldpkm.verify import alg2_transition_mismatches


def test_opt_guesses_examples():
    n, k = 2 ** 20, 2
    g = opt_guesses(n, k)
    F = math.ceil(math.log2(2 ** 10 / 2))
    assert g == [2 * 2 ** 10 * 2.0 ** f for f in range(F + 1)]
    assert opt_guesses(4, 2) == [4.0]
    for v in np.geomspace(k * math.sqrt(n), n, 50):
        assert any(x / 2 <= v <= 2 * x for x in g)


def test_round1_noiseless_exact():
    X = np.random.default_rng(0).uniform(-0.5, 0.5, size=(400, 3))
    Q = make_domain_map_alg2(3, 2, 0.3, 0.05, np.random.default_rng(1))
    params = Alg2Params(2, 1.0, 1e-6, 0.05, 2.0, 400, Q.dim)
    pop = Population(X, AgentLedger(400, PrivacyBudget(1, 1e-6), enabled=False), noiseless=True)
    ch = round1_cell_histograms(pop, Q, params)
    for l, h in ch.items():
        cells, cnt = np.unique(cell_of(Q(X), l), axis=0, return_counts=True)
        assert {cell_key(l, c): float(n) for c, n in zip(cells, cnt)} == dict(h.entries)
        assert h.query(cell_key(l, [(1 << l) - 1] * Q.dim)) in (0.0, h.entries.get(
            cell_key(l, [(1 << l) - 1] * Q.dim), 0.0))


@pytest.mark.parametrize("seed", range(3))
def test_transition_levels_match_oracle(seed):
    data, _ = gen_gaussian_mixture(600, 4, 3, 0.3, 0.05, np.random.default_rng(seed))
    bad, total = alg2_transition_mismatches(data.points, 3, seed=seed)
    assert bad == 0 and total > 0


@pytest.fixture(scope="module")
def noiseless_run():
    data, truth = gen_gaussian_mixture(300, 4, 2, 0.5, 0.02, np.random.default_rng(3))
    res = low_error_kmeans(data.points, 2, 3.0, 2.0, 1e-6, 0.05, seed=1, noiseless=True,
                           baseline_cost=1.0, R_max=4)
    return data.points, truth, res


def test_noiseless_run_structure(noiseless_run):
    X, truth, res = noiseless_run
    assert res.transcript.lengths().tolist() == [4] * len(X)
    S = res.diagnostics["candidates"]
    cap = 0
    for ctx in res.diagnostics["contexts"]:
        cap += sum(ctx.labels.heavy_count(l) for l in range(ctx.labels.L))
    cap += sum(a["cap"] for a in res.diagnostics["audit"] if not a["skipped"])
    assert len(S) <= cap
    for p in res.diagnostics["provenance"]:
        if p.source == "bucket":
            l, _, _, f = p.tag
            ctx = res.diagnostics["contexts"][f]
            a = max(0, l - anc_star_gap(ctx.labels.d))
            assert ctx.labels.is_heavy(a, cell_of(p.point[None], a))[0]


def test_noiseless_weights_are_exact_counts(noiseless_run):
    X, _, res = noiseless_run
    Q, S, proxy = (res.diagnostics[k] for k in ("domain_map", "candidates", "proxy"))
    lab, _ = nearest(Q(X), S)
    assert np.array_equal(proxy.weights, np.bincount(lab, minlength=len(S)).astype(float))


def test_noiseless_recovery_exact_means(noiseless_run):
    X, _, res = noiseless_run
    Q, s_star = res.diagnostics["domain_map"], res.diagnostics["s_star"]
    lab, _ = nearest(Q(X), s_star.centers)
    for j in range(2):
        if np.any(lab == j):
            assert np.allclose(res.centers.centers[j], X[lab == j].mean(0), atol=1e-12)


def test_proxy_versus_actual(noiseless_run):
    X, _, res = noiseless_run
    Q, S, proxy = (res.diagnostics[k] for k in ("domain_map", "candidates", "proxy"))
    D = Q(X)
    rng = np.random.default_rng(0)
    fS = clustering_cost(D, S)
    for _ in range(10):
        S1 = rng.uniform(0.3, 0.7, size=(2, D.shape[1]))
        fd1 = clustering_cost(D, S1)
        fp1 = clustering_cost(proxy.centers, S1, proxy.weights)
        assert fp1 <= 2 * fS + 2 * fd1 + 1e-6
        assert fd1 <= 2 * fS + 2 * fp1 + 1e-6


def test_private_run_ledger_and_rounds():
    data, _ = gen_gaussian_mixture(3000, 4, 2, 0.5, 0.03, np.random.default_rng(4))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = low_error_kmeans(data.points, 2, 2.0, 2.0, 1e-6, 0.05, seed=2)
    assert res.ledger.total() == PrivacyBudget(2.0, 1e-6)
    assert res.transcript.lengths().tolist() == [4] * 3000
    assert res.ledger.rounds() == [1, 2, 3, 4]
    assert len(res.centers) == 2
