import numpy as np
import pytest

from ldpkm.core import ContractError, clustering_cost
from ldpkm.kmeans_np import KMeansConfig, brute_force_kmeans, kmeanspp_seed, lloyd, standard_kmeans


def test_seed_k_equals_n():
    X = np.array([[0.0], [1.0], [5.0]])
    S = kmeanspp_seed(X, 3, np.random.default_rng(0))
    assert clustering_cost(X, S) == 0.0


def test_k1_single_lloyd_step_gives_weighted_mean():
    X = np.array([[0.0], [1.0], [4.0]])
    w = np.array([1.0, 2.0, 1.0])
    S = kmeanspp_seed(X, 1, np.random.default_rng(0), w)
    assert any(np.array_equal(S.centers[0], x) for x in X)
    C = lloyd(X, S, KMeansConfig(max_iter=1), w)
    assert C.centers[0, 0] == pytest.approx(6.0 / 4.0)


def test_two_blobs_split_every_seed():
    rng = np.random.default_rng(1)
    X = np.r_[rng.normal(-5, 0.1, size=(50, 2)), rng.normal(5, 0.1, size=(50, 2))]
    for s in range(20):
        S = kmeanspp_seed(X, 2, np.random.default_rng(s))
        assert np.sign(S.centers[0, 0]) != np.sign(S.centers[1, 0])


def test_lloyd_fixed_point_and_history():
    X = np.array([[0.0], [1.0], [9.0], [10.0]])
    hist = []
    C = lloyd(X, [[0.5], [9.5]], history=hist)
    assert C.centers.tolist() == [[0.5], [9.5]]
    rng = np.random.default_rng(2)
    Y = rng.uniform(size=(200, 3))
    hist = []
    lloyd(Y, Y[:5], KMeansConfig(max_iter=50), history=hist)
    assert all(b <= a * (1 + 1e-12) for a, b in zip(hist, hist[1:]))


def test_best_of_restarts():
    rng = np.random.default_rng(3)
    X = rng.uniform(size=(300, 2))
    best, costs = standard_kmeans(X, 4, KMeansConfig(restarts=6), return_costs=True)
    assert clustering_cost(X, best) == pytest.approx(min(costs))


def test_brute_force_examples():
    X = np.array([[0.0], [1.0], [9.0], [10.0]])
    S, c = brute_force_kmeans(X, 2)
    assert c == pytest.approx(1.0)
    assert sorted(S.centers[:, 0].tolist()) == [0.5, 9.5]
    assert brute_force_kmeans(X[:3], 3)[1] == 0.0
    Y = np.random.default_rng(4).normal(size=(7, 2))
    assert brute_force_kmeans(Y, 1)[1] == pytest.approx(np.sum((Y - Y.mean(0)) ** 2))
    with pytest.raises(ContractError):
        brute_force_kmeans(np.zeros((15, 1)), 2)


def test_tiny_instance_close_to_optimum():
    X = np.random.default_rng(5).uniform(size=(10, 2))
    _, opt = brute_force_kmeans(X, 2)
    assert clustering_cost(X, standard_kmeans(X, 2)) <= 1.05 * opt + 1e-12


def test_weighted_equals_repeated():
    X = np.array([[0.0], [1.0], [10.0]])
    w = np.array([3.0, 1.0, 2.0])
    rep = np.repeat(X, w.astype(int), axis=0)
    a = standard_kmeans(X, 2, weights=w)
    b = standard_kmeans(rep, 2)
    assert clustering_cost(X, a, w) == pytest.approx(clustering_cost(rep, b))
