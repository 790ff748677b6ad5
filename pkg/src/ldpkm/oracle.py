"""Exact ground-truth computations for tests.

Everything here reads raw points directly, so no protocol module may import
it.  ``ldpkm.protocol.assert_protocol_path_clean`` checks that at startup of
the CLI, and a test scans the protocol modules' imports.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .core import as_points, nearest
from .grids import GridSpec, floor_to_grid
from .kmeans_np import brute_force_kmeans


def threshold_radius(l: int, L: int) -> float:
    """r_l = 2^l / 2^(L-1), compared against squared distances."""
    return math.ldexp(1.0, l - L + 1)


def tail_sums(sizes) -> np.ndarray:
    """X_l = sum_{j >= l} sizes_j."""
    s = np.asarray(sizes, dtype=np.float64)
    return np.cumsum(s[::-1])[::-1]


def abel_sides(sizes, radii) -> tuple[float, float]:
    """Both sides of sum_l X_l (r_l - r_{l-1}) = sum_l |x_l| r_l with r_{-1} = 0."""
    r = np.asarray(radii, dtype=np.float64)
    steps = np.diff(np.concatenate([[0.0], r]))
    lhs = math.fsum(tail_sums(sizes) * steps)
    rhs = math.fsum(np.asarray(sizes, dtype=np.float64) * r)
    return lhs, rhs


@dataclass
class TheoryOracle:
    points: np.ndarray
    centers: np.ndarray
    L: int

    @classmethod
    def brute_force(cls, points, k: int, L: int) -> "TheoryOracle":
        S, _ = brute_force_kmeans(points, k)
        return cls(as_points(points), S.centers, L)

    @classmethod
    def planted(cls, points, means, L: int) -> "TheoryOracle":
        return cls(as_points(points), as_points(means), L)

    @property
    def radii(self) -> np.ndarray:
        return np.array([threshold_radius(l, self.L) for l in range(self.L + 1)])

    def layer_of(self) -> np.ndarray:
        """Layer index l in 0..L with z(p, S_OPT) in [r_l, r_{l+1}); layer 0
        also takes everything below r_1 and layer L everything above r_L."""
        if len(self.points) == 0:
            return np.zeros(0, dtype=np.int64)
        _, z = nearest(self.points, self.centers)
        r = self.radii
        return np.clip(np.searchsorted(r, z, side="right") - 1, 0, self.L)

    def partition_o(self) -> list:
        lay = self.layer_of()
        return [np.flatnonzero(lay == l) for l in range(self.L + 1)]

    def O(self) -> np.ndarray:
        return tail_sums([len(o) for o in self.partition_o()])

    def abel_check(self, parts=None) -> tuple[float, float]:
        parts = self.partition_o() if parts is None else parts
        return abel_sides([len(p) for p in parts], self.radii[:len(parts)])


# --------------------------------------------------------------------------
# cells: heavy marking and transition levels recomputed from exact counts

def exact_heavy_cells(images, opt_guess: float, k: int, beta: float, L: int, d: int,
                      d_power: float = 0.0) -> list:
    """Per level, the set of heavy cell tuples using exact occupancies."""
    pts = as_points(images)
    heavy = [{(0,) * d}]
    for l in range(1, L):
        if l == L - 1:
            heavy.append(set())
            continue
        side = 2.0 ** -l
        thr = beta * d ** d_power * opt_guess / (side * side * k * L * d)
        cells = np.floor(pts * 2 ** l).astype(np.int64)
        uniq, cnt = np.unique(cells, axis=0, return_counts=True)
        heavy.append({tuple(int(v) for v in u) for u, c in zip(uniq, cnt)
                      if c >= thr and tuple(int(v) // 2 for v in u) in heavy[l - 1]})
    return heavy


def exact_transition_levels(images, heavy: list, L: int) -> np.ndarray:
    pts = as_points(images)
    out = np.empty(len(pts), dtype=np.int64)
    for i, p in enumerate(pts):
        lvl = L - 1
        for l in range(1, L):
            if tuple(int(v) for v in np.floor(p * 2 ** l)) not in heavy[l]:
                lvl = l
                break
        out[i] = lvl
    return out


def partition_by_level(levels, L: int) -> list:
    return [np.flatnonzero(levels == l) for l in range(L)]


# --------------------------------------------------------------------------
# one-round grid bookkeeping replayed on the true data

def shadow_bookkeeping(images, originals, specs: list[GridSpec], states) -> list:
    """For each level, exact (count, sum) of points flooring to each key that
    were not covered by picks made at earlier levels."""
    q = as_points(images)
    x = as_points(originals)
    covered = np.zeros(len(q), bool)
    out = []
    for spec, st in zip(specs, states):
        g = floor_to_grid(q, spec)
        keys = [",".join(map(str, row)) for row in g]
        cnt: dict = {}
        sums: dict = {}
        for i, k_ in enumerate(keys):
            if covered[i]:
                continue
            cnt[k_] = cnt.get(k_, 0) + 1
            sums[k_] = sums.get(k_, 0.0) + x[i]
        out.append((cnt, sums))
        picked = set(st.picked)
        covered |= np.array([k_ in picked for k_ in keys], dtype=bool)
    return out


# --------------------------------------------------------------------------
# max coverage

def greedy_cover(sets: list, picks: int) -> list:
    """Greedy max coverage; ties go to the lower index."""
    covered: set = set()
    chosen = []
    for _ in range(min(picks, len(sets))):
        gains = [len(s - covered) if i not in chosen else -1 for i, s in enumerate(sets)]
        i = int(np.argmax(gains))
        if gains[i] <= 0:
            break
        chosen.append(i)
        covered |= sets[i]
    return chosen


def exhaustive_max_cover(sets: list, N: int) -> int:
    if len(sets) > 64:
        raise ValueError("exhaustive search limited to 64 sets")
    best = 0
    for combo in itertools.combinations(range(len(sets)), min(N, len(sets))):
        best = max(best, len(set().union(*(sets[i] for i in combo))))
    return best


def greedy_guarantee_holds(sets: list, N: int, alpha: float) -> tuple[bool, int, int]:
    """Greedy with ceil(N ln(1/alpha)) picks covers at least (1 - alpha) times
    the best N sets."""
    picks = math.ceil(N * math.log(1.0 / alpha))
    got = len(set().union(*(sets[i] for i in greedy_cover(sets, picks)))) if sets else 0
    best = exhaustive_max_cover(sets, N)
    return got >= (1.0 - alpha) * best - 1e-12, got, best
