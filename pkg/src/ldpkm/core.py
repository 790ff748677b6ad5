"""Geometry, clustering cost and shared data types.

Points are plain float64 numpy rows.  ``Dataset`` and ``CenterSet`` are thin
immutable wrappers so that weights travel with the points they belong to.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np


class ContractError(ValueError):
    """Raised when a caller violates an operation's precondition."""


def as_points(x) -> np.ndarray:
    """Coerce to a 2-d float64 array of shape (n, dim)."""
    if isinstance(x, (Dataset, CenterSet)):
        return x.points
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2:
        raise ContractError(f"expected points as a 2-d array, got shape {a.shape}")
    return a


def _weights_of(x) -> np.ndarray | None:
    if isinstance(x, (Dataset, CenterSet)):
        return x.weights
    return None


@dataclass(frozen=True)
class Dataset:
    points: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        pts = as_points(self.points)
        if pts.shape[0] == 0:
            raise ContractError("dataset must be nonempty")
        if not np.all(np.isfinite(pts)):
            raise ContractError("dataset has non-finite coordinates")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=np.float64)
            if w.shape != (pts.shape[0],) or np.any(w < 0):
                raise ContractError("weights must be nonnegative, one per point")
            w.setflags(write=False)
            object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dimension(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class CenterSet:
    """Centers with optional nonnegative weights (a weighted proxy dataset)."""

    centers: np.ndarray
    weights: np.ndarray | None = None
    flags: tuple = ()

    def __post_init__(self):
        c = as_points(self.centers)
        if c.shape[0] == 0:
            raise ContractError("center set must be nonempty")
        c.setflags(write=False)
        object.__setattr__(self, "centers", c)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=np.float64)
            if w.shape != (c.shape[0],) or np.any(w < 0):
                raise ContractError("weights must be nonnegative, one per center")
            w.setflags(write=False)
            object.__setattr__(self, "weights", w)

    @property
    def points(self) -> np.ndarray:
        return self.centers

    def __len__(self) -> int:
        return self.centers.shape[0]


@dataclass(frozen=True)
class ClusterAssignment:
    labels: np.ndarray
    num_centers: int

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.int64)
        if lab.size and (lab.min() < 0 or lab.max() >= self.num_centers):
            raise ContractError("label out of range")
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)


@dataclass
class CostReport:
    private_cost: float | None
    baseline_cost: float
    opt_estimate: float
    runtime: float = 0.0
    budget_spent: tuple = (0.0, 0.0)
    extras: dict = field(default_factory=dict)

    FLOOR = 1e-12

    @property
    def mult_ratio(self) -> float | None:
        if self.private_cost is None:
            return None
        return self.private_cost / max(self.baseline_cost, self.FLOOR)

    @property
    def additive_gap(self) -> float | None:
        if self.private_cost is None:
            return None
        return self.private_cost - self.opt_estimate


def squared_distance(p, q) -> float:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ContractError(f"dimension mismatch {p.shape} vs {q.shape}")
    diff = p - q
    return float(diff @ diff)


def pairwise_sq(points: np.ndarray, centers: np.ndarray, block: int = 65536) -> np.ndarray:
    """Squared distances, shape (n, m).  Exact differences, not the dot trick,
    so that identical points give exactly zero."""
    if points.shape[1] != centers.shape[1]:
        raise ContractError("dimension mismatch between points and centers")
    out = np.empty((points.shape[0], centers.shape[0]))
    for lo in range(0, points.shape[0], block):
        diff = points[lo:lo + block, None, :] - centers[None, :, :]
        out[lo:lo + block] = np.einsum("nmd,nmd->nm", diff, diff)
    return out


def nearest(points, centers) -> tuple[np.ndarray, np.ndarray]:
    """(labels, squared distances); argmin picks the lowest index on ties."""
    pts, cs = as_points(points), as_points(centers)
    if cs.shape[0] == 0:
        raise ContractError("empty center set")
    labels = np.empty(pts.shape[0], dtype=np.int64)
    dists = np.empty(pts.shape[0])
    step = max(1, 2_000_000 // max(1, cs.shape[0] * pts.shape[1]))
    for lo in range(0, pts.shape[0], step):
        d2 = pairwise_sq(pts[lo:lo + step], cs)
        lab = np.argmin(d2, axis=1)
        labels[lo:lo + step] = lab
        dists[lo:lo + step] = d2[np.arange(lab.size), lab]
    return labels, dists


def clustering_cost(D, S, weights=None) -> float:
    centers = as_points(S)
    if centers.shape[0] == 0:
        raise ContractError("empty center set")
    w = weights if weights is not None else _weights_of(D)
    _, d2 = nearest(D, centers)
    if w is not None:
        d2 = d2 * np.asarray(w, dtype=np.float64)
    # compensated summation keeps oracle comparisons stable at large n
    return math.fsum(d2)


def assign(D, S) -> ClusterAssignment:
    centers = as_points(S)
    labels, _ = nearest(D, centers)
    return ClusterAssignment(labels, centers.shape[0])


def cluster_means(D, assignment: ClusterAssignment, num_centers: int | None = None,
                  weights=None) -> CenterSet:
    """Per-label (weighted) means.  Empty clusters get the origin and are
    listed in ``flags`` as ("empty", j)."""
    pts = as_points(D)
    k = num_centers if num_centers is not None else assignment.num_centers
    w = weights if weights is not None else _weights_of(D)
    w = np.ones(pts.shape[0]) if w is None else np.asarray(w, dtype=np.float64)
    lab = assignment.labels
    tot = np.bincount(lab, weights=w, minlength=k)
    sums = np.zeros((k, pts.shape[1]))
    np.add.at(sums, lab, pts * w[:, None])
    means = np.zeros_like(sums)
    ok = tot > 0
    means[ok] = sums[ok] / tot[ok, None]
    flags = tuple(("empty", int(j)) for j in np.flatnonzero(~ok))
    return CenterSet(means, flags=flags)


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0
        return False
