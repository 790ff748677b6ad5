"""Axis-aligned flooring grids over the box [-1, 1]^d."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ContractError
from .freq import ValueMapping


def grid_unit(l: int, L: int, alpha: float, d: int) -> float:
    if not 1 <= l <= L:
        raise ContractError(f"level {l} outside 1..{L}")
    # exact power-of-two scaling keeps levels consistent under flooring
    return math.ldexp(1.0 / (alpha * math.sqrt(d)), l - L + 1)


@dataclass(frozen=True)
class GridSpec:
    level: int
    L: int
    alpha: float
    d: int

    @property
    def t(self) -> float:
        return grid_unit(self.level, self.L, self.alpha, self.d)

    def floor(self, points: np.ndarray) -> np.ndarray:
        return floor_to_grid(points, self)

    def decode(self, coords) -> np.ndarray:
        return np.asarray(coords, dtype=np.float64) * self.t

    def coord_range(self) -> tuple[int, int]:
        return math.floor(-1.0 / self.t), math.floor(1.0 / self.t)

    def log2_size(self) -> float:
        lo, hi = self.coord_range()
        return self.d * math.log2(hi - lo + 1)

    def key(self, coords) -> str:
        return f"{self.level}:" + ",".join(str(int(c)) for c in coords)

    def mapping(self, domain_map) -> ValueMapping:
        lo, hi = self.coord_range()
        pre = f"{self.level}:"
        return ValueMapping(
            f"grid{self.level}", lambda pts: self.floor(domain_map(pts)), self.d, lo, hi,
            key_format=lambda v: pre + ",".join(map(str, v)),
            key_parse=lambda s: tuple(int(x) for x in s.split(":", 1)[1].split(",")))


def floor_to_grid(points, spec: GridSpec) -> np.ndarray:
    p = np.asarray(points, dtype=np.float64)
    if not np.all(np.isfinite(p)):
        raise ContractError("non-finite point")
    return np.floor(p / spec.t).astype(np.int64)


def coarsen(coords, from_level: int, to_level: int) -> np.ndarray:
    if to_level < from_level:
        raise ContractError("can only coarsen to a level at least as high")
    return np.asarray(coords, dtype=np.int64) >> (to_level - from_level)
