"""Non-private weighted k-means and an exhaustive optimum for tiny inputs."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .core import CenterSet, ContractError, as_points, nearest


@dataclass(frozen=True)
class KMeansConfig:
    restarts: int = 10
    max_iter: int = 100
    tol: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        if self.restarts < 1:
            raise ContractError("restarts must be >= 1")


def _weights(X: np.ndarray, w) -> np.ndarray:
    w = np.ones(X.shape[0]) if w is None else np.asarray(w, dtype=np.float64)
    if w.shape != (X.shape[0],) or np.any(w < 0):
        raise ContractError("bad weights")
    return w


def _cost(X, w, C) -> float:
    _, d2 = nearest(X, C)
    return math.fsum(d2 * w)


def kmeanspp_seed(D, k: int, rng: np.random.Generator, weights=None) -> CenterSet:
    X = as_points(D)
    w = _weights(X, weights if weights is not None else getattr(D, "weights", None))
    if k < 1 or w.sum() <= 0:
        raise ContractError("need k >= 1 and positive total weight")
    centers = [X[rng.choice(X.shape[0], p=w / w.sum())]]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        mass = d2 * w
        tot = mass.sum()
        if tot <= 0:
            # every weighted point already sits on a center
            i = rng.choice(X.shape[0], p=w / w.sum())
        else:
            i = rng.choice(X.shape[0], p=mass / tot)
        centers.append(X[i])
        d2 = np.minimum(d2, np.sum((X - X[i]) ** 2, axis=1))
    return CenterSet(np.array(centers))


def lloyd(D, centers, config: KMeansConfig = KMeansConfig(), weights=None,
          history: list | None = None) -> CenterSet:
    """Alternate assignment and weighted means.  Empty clusters keep their
    previous center so the cost never goes up."""
    X = as_points(D)
    w = _weights(X, weights if weights is not None else getattr(D, "weights", None))
    C = np.array(as_points(centers), dtype=np.float64)
    k = C.shape[0]
    lab, d2 = nearest(X, C)
    cost = math.fsum(d2 * w)
    hist = [cost]
    for _ in range(config.max_iter):
        tot = np.bincount(lab, weights=w, minlength=k)
        sums = np.zeros_like(C)
        np.add.at(sums, lab, X * w[:, None])
        ok = tot > 0
        newC = C.copy()
        newC[ok] = sums[ok] / tot[ok, None]
        lab, d2 = nearest(X, newC)
        new_cost = math.fsum(d2 * w)
        if new_cost > cost * (1 + 1e-12) + 1e-15:
            raise AssertionError(f"Lloyd cost increased: {cost} -> {new_cost}")
        C = newC
        hist.append(new_cost)
        if cost - new_cost <= config.tol * max(cost, 1e-300):
            cost = new_cost
            break
        cost = new_cost
    if history is not None:
        history.extend(hist)
    return CenterSet(C)


def standard_kmeans(D, k: int, config: KMeansConfig = KMeansConfig(), weights=None,
                    return_costs: bool = False):
    X = as_points(D)
    w = _weights(X, weights if weights is not None else getattr(D, "weights", None))
    rng = np.random.default_rng(config.seed)
    best, best_cost, costs = None, math.inf, []
    for _ in range(config.restarts):
        C = lloyd(X, kmeanspp_seed(X, k, rng, w), config, w)
        c = _cost(X, w, C.centers)
        costs.append(c)
        if c < best_cost:
            best, best_cost = C, c
    return (best, costs) if return_costs else best


def brute_force_kmeans(D, k: int) -> tuple[CenterSet, float]:
    """Exact optimum by enumerating every labelling into at most k parts."""
    X = as_points(D)
    n, dim = X.shape
    if n > 14 or k > 3:
        raise ContractError("brute force is limited to n <= 14 and k <= 3")
    if k >= n:
        return CenterSet(X.copy()), 0.0
    sq = float(np.sum(X * X))
    best_cost, best_lab = math.inf, None
    # the first point always gets label 0; that removes one symmetry
    labels = np.array(list(itertools.product(range(k), repeat=n - 1)), dtype=np.int64)
    labels = np.concatenate([np.zeros((labels.shape[0], 1), np.int64), labels], axis=1)
    for lo in range(0, labels.shape[0], 200_000):
        lab = labels[lo:lo + 200_000]
        onehot = (lab[:, :, None] == np.arange(k)).astype(np.float64)   # (m, n, k)
        cnt = onehot.sum(axis=1)                                          # (m, k)
        sums = np.einsum("mnk,nd->mkd", onehot, X)
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = np.where(cnt > 0, np.einsum("mkd,mkd->mk", sums, sums) / cnt, 0.0)
        cost = sq - gain.sum(axis=1)
        i = int(np.argmin(cost))
        if cost[i] < best_cost:
            best_cost, best_lab = float(cost[i]), lab[i]
    centers = np.zeros((k, dim))
    for j in range(k):
        m = best_lab == j
        if m.any():
            centers[j] = X[m].mean(axis=0)
        else:
            centers[j] = X[0]
    exact = float(sum(np.sum((X[best_lab == j] - centers[j]) ** 2) for j in range(k)))
    return CenterSet(centers), max(0.0, exact)
