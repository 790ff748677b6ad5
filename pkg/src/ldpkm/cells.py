"""Dyadic cells on [0,1)^d, ancestors, and heavy/light marking."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import ContractError
from .freq import ValueMapping, SuccinctHistogram, mix64


def cell_of(points, l: int) -> np.ndarray:
    p = np.asarray(points, dtype=np.float64)
    if np.any(p < 0) or np.any(p >= 1):
        raise ContractError("cells are only defined on [0,1)^d")
    return np.floor(p * (1 << l)).astype(np.int64)


def ancestor(coords, l: int, i: int) -> tuple[int, np.ndarray]:
    """Ancestor i levels up; clamps at the root."""
    i = min(int(i), l)
    return l - i, np.asarray(coords, dtype=np.int64) >> i


def anc_star_gap(d: int) -> int:
    return math.ceil(1.5 * math.log2(d)) if d > 1 else 0


def cell_center(l: int, coords) -> np.ndarray:
    return (np.asarray(coords, dtype=np.float64) + 0.5) / (1 << l)


def cell_key(l: int, coords) -> str:
    return f"{l}:" + ",".join(str(int(c)) for c in coords)


def cell_mapping(l: int, d: int, domain_map) -> ValueMapping:
    pre = f"{l}:"
    return ValueMapping(
        f"cell{l}", lambda pts: cell_of(domain_map(pts), l), d, 0, (1 << l) - 1,
        key_format=lambda v: pre + ",".join(map(str, v)),
        key_parse=lambda s: tuple(int(x) for x in s.split(":", 1)[1].split(",")))


def row_hash(coords: np.ndarray) -> np.ndarray:
    """64-bit hash of integer rows, used for set membership tests."""
    c = np.atleast_2d(np.asarray(coords, dtype=np.int64)).astype(np.uint64)
    h = np.full(c.shape[0], np.uint64(c.shape[1]), dtype=np.uint64)
    for i in range(c.shape[1]):
        h = mix64(h ^ c[:, i])
    return h


@dataclass
class CellLabels:
    L: int
    d: int
    opt_guess: float
    heavy: list                      # level -> (m, d) int array of heavy cells, sorted
    thresholds: list                 # level -> heavy threshold (inf where none)
    warnings: list = field(default_factory=list)
    _hashes: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self._hashes = [np.sort(row_hash(h)) if len(h) else np.zeros(0, np.uint64)
                        for h in self.heavy]

    def is_heavy(self, l: int, coords: np.ndarray) -> np.ndarray:
        coords = np.atleast_2d(coords)
        if l < 0 or l >= len(self.heavy) or len(self.heavy[l]) == 0:
            return np.zeros(coords.shape[0], bool)
        h = row_hash(coords)
        hs = self._hashes[l]
        pos = np.searchsorted(hs, h).clip(0, hs.size - 1)
        return hs[pos] == h

    def heavy_count(self, l: int) -> int:
        return len(self.heavy[l]) if 0 <= l < len(self.heavy) else 0

    def is_medium(self, l: int, coords: np.ndarray) -> np.ndarray:
        """Light cells whose parent is heavy."""
        coords = np.atleast_2d(coords)
        return self.is_heavy(l - 1, coords >> 1) & ~self.is_heavy(l, coords)

    def transition_levels(self, points: np.ndarray) -> np.ndarray:
        """For each point the unique l with C_{l-1}(p) heavy and C_l(p) light."""
        pts = np.atleast_2d(points)
        out = np.zeros(pts.shape[0], dtype=np.int64)
        undecided = np.ones(pts.shape[0], bool)
        for l in range(1, self.L):
            light = ~self.is_heavy(l, cell_of(pts, l))
            hit = undecided & light
            out[hit] = l
            undecided &= ~light
        out[undecided] = self.L - 1
        return out


def heavy_threshold(l: int, opt_guess: float, k: int, beta: float, L: int, d: int,
                    d_power: float = 0.0) -> float:
    t = 2.0 ** -l
    return beta * d ** d_power * opt_guess / (t * t * k * L * d)


def mark_heavy_light(ch: dict, opt_guess: float, k: int, beta: float, L: int, d: int,
                     d_power: float = 0.0, cap: float | None = None) -> CellLabels:
    """``ch`` maps level -> histogram for levels 1..L-1.

    Root heavy, bottom level L-1 all light; otherwise heavy iff the estimate
    clears threshold + E and the parent is heavy.
    """
    missing = [l for l in range(1, L) if l not in ch]
    if missing:
        raise ContractError(f"missing cell histograms for levels {missing}")
    heavy = [np.zeros((1, d), dtype=np.int64)]
    thresholds = [0.0]
    notes = []
    for l in range(1, L):
        if l == L - 1:
            heavy.append(np.zeros((0, d), dtype=np.int64))
            thresholds.append(math.inf)
            continue
        h: SuccinctHistogram = ch[l]
        thr = heavy_threshold(l, opt_guess, k, beta, L, d, d_power) + h.E
        thresholds.append(thr)
        keys = [k_ for k_, v in h.entries.items() if v >= thr]
        if not keys or len(heavy[l - 1]) == 0:
            heavy.append(np.zeros((0, d), dtype=np.int64))
            continue
        coords = np.array([h.values[k_] for k_ in keys], dtype=np.int64).reshape(-1, d)
        parent_hash = np.sort(row_hash(heavy[l - 1]))
        ph = row_hash(coords >> 1)
        pos = np.searchsorted(parent_hash, ph).clip(0, parent_hash.size - 1)
        coords = coords[parent_hash[pos] == ph]
        coords = coords[np.lexsort(coords.T[::-1])] if len(coords) else coords
        if cap is not None and len(coords) > cap:
            msg = f"level {l}: {len(coords)} heavy cells exceed the cap {cap:.0f}"
            notes.append(msg)
            warnings.warn(msg)
        heavy.append(coords)
    return CellLabels(L, d, opt_guess, heavy, thresholds, notes)


def cells_within(points, l: int, radius: float) -> set:
    """Level-l cells at l2 distance <= radius from any of the points.

    Only neighbours across faces closer than ``radius`` can qualify, so the
    search branches per coordinate and prunes on the running squared gap.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    side = 2.0 ** -l
    top = (1 << l) - 1
    r2 = radius * radius
    out: set = set()
    for p in pts:
        base = np.floor(p / side).astype(np.int64)
        lo_gap = p - base * side            # distance to the lower face
        hi_gap = side - lo_gap              # distance to the upper face
        opts = []
        for e in range(len(p)):
            o = [(int(base[e]), 0.0)]
            if base[e] > 0 and lo_gap[e] * lo_gap[e] <= r2:
                o.append((int(base[e]) - 1, lo_gap[e] * lo_gap[e]))
            if base[e] < top and hi_gap[e] * hi_gap[e] <= r2:
                o.append((int(base[e]) + 1, hi_gap[e] * hi_gap[e]))
            opts.append(o)
        stack = [((), 0.0)]
        while stack:
            pre, acc = stack.pop()
            if len(pre) == len(opts):
                out.add(pre)
                continue
            for c, g in opts[len(pre)]:
                if acc + g <= r2:
                    stack.append((pre + (c,), acc + g))
    return out
