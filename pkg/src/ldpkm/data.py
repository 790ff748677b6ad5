"""Synthetic benchmark data: separated Gaussian mixtures inside the unit ball."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ContractError, Dataset


@dataclass(frozen=True)
class PlantedTruth:
    means: np.ndarray        # (k, d') planted centers
    labels: np.ndarray       # (n,) index of the generating component


def _uniform_ball(m: int, dim: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    x = rng.normal(size=(m, dim))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    return x * radius * rng.uniform(size=(m, 1)) ** (1.0 / dim)


def gen_gaussian_mixture(n: int, d_prime: int, k: int, separation: float, stddev: float,
                         rng: np.random.Generator | int, max_tries: int = 10_000):
    """Equal-weight mixture of k isotropic Gaussians.

    Means are uniform in a ball of radius 0.75 and resampled until every pair
    is at least ``separation`` apart.  Noise draws that would leave B(0,1) are
    redrawn a few times, then the rare survivors are scaled back onto the
    sphere, so every output point has norm <= 1.
    """
    if n < 1 or k < 1 or d_prime < 1 or stddev < 0 or separation < 0:
        raise ContractError("bad mixture parameters")
    rng = np.random.default_rng(rng)
    radius = 0.75
    means = None
    for _ in range(max_tries):
        m = _uniform_ball(k, d_prime, radius, rng)
        diff = m[:, None, :] - m[None, :, :]
        dist = np.sqrt((diff ** 2).sum(-1))
        np.fill_diagonal(dist, np.inf)
        if k == 1 or dist.min() >= separation:
            means = m
            break
    if means is None:
        raise ContractError(f"could not place {k} means {separation} apart")
    labels = np.arange(n) % k
    rng.shuffle(labels)
    pts = means[labels].copy()
    if stddev > 0:
        todo = np.arange(n)
        for _ in range(20):
            cand = means[labels[todo]] + rng.normal(0.0, stddev, size=(todo.size, d_prime))
            pts[todo] = cand
            todo = todo[np.linalg.norm(cand, axis=1) > 1.0]
            if todo.size == 0:
                break
        if todo.size:
            pts[todo] /= np.linalg.norm(pts[todo], axis=1, keepdims=True)
    return Dataset(pts), PlantedTruth(means, labels)
