"""Euclidean LSH from quantized random projections, and the synthetic space
that lays heavy ancestor cells out as far-apart blocks.

One atom is ``floor((a . x / r + b) / w)`` with a standard Gaussian
direction ``a`` and an offset ``b`` uniform on [0, w).  A hash function
concatenates t independent atoms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .cells import CellLabels, anc_star_gap, cell_center, cell_of, row_hash
from .core import ContractError
from .freq import ValueMapping

DEFAULT_WIDTHS = (0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0)
T_MAX = 400
# frozen by ``ldpkm calibrate``: min over c in [1.5, 4], B in [2, 1e4] of
# p1 / (B^(-1/c') / max(1, ln B)), rounded down
FLOOR_P1_CONST = 5e-4


def atom_collision_prob(w: float, s) -> np.ndarray | float:
    """P[two points at distance s share an atom bucket of width w]."""
    s = np.asarray(s, dtype=np.float64)
    if w <= 0 or np.any(s < 0):
        raise ContractError("need w > 0 and s >= 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        u = w / s
        p = 1.0 - 2.0 * norm.cdf(-u) - 2.0 / (math.sqrt(2 * math.pi) * u) * (1.0 - np.exp(-u * u / 2.0))
    p = np.where(s == 0, 1.0, p)
    return float(p) if p.ndim == 0 else p


@dataclass(frozen=True)
class CollisionProfile:
    p1: float
    pc: float
    c: float
    t: int
    w: float
    log_nb: float = 0.0

    @property
    def ratio(self) -> float:
        return self.p1 ** 2 / self.pc if self.pc > 0 else math.inf


class TuningError(ValueError):
    def __init__(self, msg, best):
        super().__init__(msg)
        self.best = best


def c_prime(c: float) -> float:
    return c * c / 8.0 - 0.25


def floor_p1(B: float, c: float, const: float = FLOOR_P1_CONST) -> float:
    cp = c_prime(c)
    if cp <= 0:
        return 0.0
    return const * B ** (-1.0 / cp) / max(1.0, math.log(B))


def tune_t(B: float, c: float, widths=DEFAULT_WIDTHS, t_max: int = T_MAX) -> tuple[int, CollisionProfile]:
    """Smallest t (then largest p1) with p1^2/pc >= B."""
    if c <= math.sqrt(2):
        raise ContractError("need c > sqrt(2)")
    best = None
    for w in widths:
        a1 = atom_collision_prob(w, 1.0)
        ac = atom_collision_prob(w, c)
        rho = a1 * a1 / ac
        if rho <= 1:
            continue
        t = 1 if B <= rho else math.ceil(math.log(B) / math.log(rho) - 1e-12)
        # compare in logs: ac ** t underflows for large t
        while t * math.log(rho) < math.log(B):
            t += 1
        prof = CollisionProfile(a1 ** t, ac ** t, c, t, w)
        if best is None or (t, -prof.p1) < (best.t, -best.p1):
            best = prof
    if best is None or best.t > t_max:
        raise TuningError(f"no width reaches ratio {B} within t <= {t_max}", best)
    return best.t, best


@dataclass(frozen=True)
class LshFunction:
    r: float
    c: float
    t: int
    w: float
    A: np.ndarray       # (t, D) Gaussian directions
    b: np.ndarray       # (t,) offsets in [0, w)
    seed: int

    def atoms(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return np.floor((x / self.r @ self.A.T + self.b) / self.w).astype(np.int64)

    def bound(self, x_norm_max: float) -> int:
        """Largest possible |atom output| for inputs of norm <= x_norm_max."""
        a = np.linalg.norm(self.A, axis=1).max() if self.A.size else 0.0
        return int(math.ceil(a * x_norm_max / self.r / self.w)) + 2


def sample_lsh(dim: int, r: float, profile: CollisionProfile, rng: np.random.Generator) -> LshFunction:
    seed = int(rng.integers(2**62))
    g = np.random.default_rng(seed)
    A = g.normal(size=(profile.t, dim))
    b = g.uniform(0.0, profile.w, size=profile.t)
    A.setflags(write=False)
    b.setflags(write=False)
    return LshFunction(r, profile.c, profile.t, profile.w, A, b, seed)


def hash(fn: LshFunction, x, participate=None) -> np.ndarray:
    """Bucket labels as (n, t) integer rows; rows of non-participants are
    None in the returned object array when ``participate`` is given."""
    out = fn.atoms(x)
    if participate is None:
        return out
    res = np.empty(out.shape[0], dtype=object)
    for i, row in enumerate(out):
        res[i] = tuple(row) if participate[i] else None
    return res


BOTTOM = "_|_"


def bucket_key(tag: tuple, atoms) -> str:
    if atoms is None:
        return BOTTOM
    return "(" + ",".join(map(str, tag)) + "):" + "|".join(str(int(a)) for a in atoms)


# --------------------------------------------------------------------------
# synthetic space

@dataclass
class SyntheticSpace:
    level: int
    anc_level: int
    anchors: np.ndarray      # (m, d) heavy ancestor cells at anc_level, sorted
    lam: float
    d: int

    def __post_init__(self):
        self._hash = row_hash(self.anchors) if len(self.anchors) else np.zeros(0, np.uint64)
        self._order = np.argsort(self._hash)
        self._sorted = self._hash[self._order]

    @property
    def dim(self) -> int:
        return len(self.anchors) + self.d

    @property
    def side(self) -> float:
        return 2.0 ** -self.anc_level

    def norm_bound(self) -> float:
        return math.sqrt(self.lam ** 2 + self.d * (self.side / 2.0) ** 2)

    def anchor_index(self, points: np.ndarray) -> np.ndarray:
        """Index of each point's ancestor among the anchors, -1 if absent."""
        pts = np.atleast_2d(points)
        if len(self.anchors) == 0:
            return np.full(pts.shape[0], -1)
        h = row_hash(cell_of(pts, self.anc_level))
        pos = np.searchsorted(self._sorted, h).clip(0, self._sorted.size - 1)
        found = self._sorted[pos] == h
        return np.where(found, self._order[pos], -1)


def lambda_scale(c: float, l: int, d: int) -> float:
    return (14.0 * c + 5.0) * 2.0 ** -l * math.sqrt(d)


def synthetic_space(labels: CellLabels, l: int, c: float) -> SyntheticSpace:
    a = max(0, l - anc_star_gap(labels.d))
    return SyntheticSpace(l, a, labels.heavy[a], lambda_scale(c, l, labels.d), labels.d)


def lambda_map(points, space: SyntheticSpace) -> tuple[np.ndarray, np.ndarray]:
    """(images, inside-mask).  Offsets are taken from the ancestor center, so
    distances inside one ancestor cell are preserved exactly."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    idx = space.anchor_index(pts)
    inside = idx >= 0
    out = np.zeros((pts.shape[0], space.dim))
    if inside.any():
        rows = np.flatnonzero(inside)
        out[rows, idx[rows]] = space.lam
        centers = cell_center(space.anc_level, space.anchors[idx[rows]])
        out[rows, len(space.anchors):] = pts[rows] - centers
    return out, inside


def project_to_heavy_cells(x_hat, space: SyntheticSpace) -> tuple[np.ndarray, np.ndarray]:
    """Snap synthetic vectors to points of the ancestor cell with the largest
    one-hot coordinate (lowest index on ties, also when every coordinate is
    <= 0), clamping the offset block into that cell's box.

    Accepts one vector or a matrix of rows; returns (points, anchor indices).
    """
    x = np.asarray(x_hat, dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    m = len(space.anchors)
    if m == 0:
        raise ContractError("no heavy ancestor cells to project onto")
    j = np.argmax(x[:, :m], axis=1)
    lo = space.anchors[j] * space.side
    hi = np.nextafter(lo + space.side, lo)
    p = np.clip(lo + space.side / 2.0 + x[:, m:], lo, hi)
    return (p[0], int(j[0])) if single else (p, j)


class LevelImages:
    """Agent-side memo of (synthetic images, participation) for one level,
    shared by every hash function evaluated on that level."""

    def __init__(self, space: SyntheticSpace, participate_fn, pre_map=None):
        self.space = space
        self.participate_fn = participate_fn
        self.pre_map = pre_map
        self._src = None

    def __call__(self, pts):
        if self._src is not pts:
            q = self.pre_map(pts) if self.pre_map is not None else pts
            img, inside = lambda_map(q, self.space)
            keep = self.participate_fn(q) & inside
            img[~keep] = 0.0
            self._src, self._val = pts, (img, keep)
        return self._val


def bucket_mapping(tag: tuple, fn: LshFunction, images: LevelImages) -> ValueMapping:
    """Histogram value mapping for one (l, m, r, f) hash: agents outside the
    participation set map to the reserved token."""
    bnd = fn.bound(images.space.norm_bound())
    pre = "(" + ",".join(map(str, tag)) + "):"

    def evaluate(pts):
        img, keep = images(pts)
        vals = np.zeros((len(pts), fn.t), dtype=np.int64)
        if keep.any():
            vals[keep] = fn.atoms(img[keep])
        return vals, keep

    return ValueMapping(
        f"bucket{tag}", evaluate, fn.t, -bnd, bnd,
        key_format=lambda v: pre + "|".join(map(str, v)),
        key_parse=lambda s: tuple(int(x) for x in s.split(":", 1)[1].split("|")))
