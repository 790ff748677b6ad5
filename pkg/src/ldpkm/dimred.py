"""Random linear dimension reduction, then scaling into the ball and an optional shift."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .core import ContractError


def target_dim(k: int, alpha: float, beta: float, c_dim: float = 1.0) -> int:
    if not (0 < alpha < 0.5 and 0 < beta < 1):
        raise ContractError("need 0 < alpha < 1/2 and 0 < beta < 1")
    return max(1, math.ceil(c_dim * math.log(k / (alpha * beta)) / alpha ** 2))


@dataclass(frozen=True)
class JlMap:
    d_prime: int
    d: int
    seed: int
    matrix: np.ndarray | None      # None means identity

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return x.copy() if self.matrix is None else x @ self.matrix.T


def sample_jl(d_prime: int, d: int, rng: np.random.Generator | int) -> JlMap:
    """Gaussian entries with variance 1/d; identity when d >= d_prime."""
    seed = int(rng.integers(2**62)) if isinstance(rng, np.random.Generator) else int(rng)
    if d >= d_prime:
        return JlMap(d_prime, d_prime, seed, None)
    m = np.random.default_rng(seed).normal(0.0, 1.0 / math.sqrt(d), size=(d, d_prime))
    m.setflags(write=False)
    return JlMap(d_prime, d, seed, m)


@dataclass(frozen=True)
class DomainMap:
    jl: JlMap
    scale: float
    radius: float
    shift: np.ndarray        # random translation
    offset: float = 0.0      # fixed coordinate offset applied last

    @property
    def dim(self) -> int:
        return self.jl.d

    def contract(self, x: np.ndarray) -> np.ndarray:
        """Scaled JL image radially projected onto the ball, before any shift."""
        y = self.jl(np.atleast_2d(x)) * self.scale
        nrm = np.linalg.norm(y, axis=1)
        over = nrm > self.radius
        y[over] *= (self.radius / nrm[over])[:, None]
        return y

    def __call__(self, x: np.ndarray) -> np.ndarray:
        out = self.contract(x) + self.shift + self.offset
        if self.offset:
            # keep the half-open box exact against rounding at the top face
            np.minimum(out, np.nextafter(1.0, 0.0), out=out)
            np.maximum(out, 0.0, out=out)
        return out

    def to_json(self) -> str:
        return json.dumps({"kind": "domain_map", "d_prime": self.jl.d_prime, "d": self.jl.d,
                           "jl_seed": self.jl.seed, "scale": self.scale, "radius": self.radius,
                           "shift": [float(s) for s in self.shift], "offset": self.offset})


def apply_map(Q: DomainMap, p) -> np.ndarray:
    out = Q(p)
    return out[0] if np.ndim(p) == 1 else out


def make_domain_map_alg1(d_prime: int, k: int, alpha: float, beta: float, n: int,
                         rng: np.random.Generator, c_dim: float = 1.0,
                         c_s: float = 1.0) -> DomainMap:
    d = target_dim(k, alpha, beta, c_dim)
    jl = sample_jl(d_prime, d, rng)
    scale = c_s / (alpha * math.sqrt(math.log(n / beta)))
    return DomainMap(jl, scale, 1.0, np.zeros(jl.d))


def make_domain_map_alg2(d_prime: int, k: int, alpha: float, beta: float,
                         rng: np.random.Generator, c_dim: float = 1.0) -> DomainMap:
    """Images land in [0,1)^d: ball of radius 1/4, random shift in
    [-1/4, 1/4)^d, then +1/2 on every coordinate.

    Keeping the shifted ball inside the unit cube avoids wrapping points
    around the cube, which would tear clusters apart.  A shift uniform on an
    interval of length 1/2 is uniform modulo every cell side 2^-l, l >= 1.
    """
    d = target_dim(k, alpha, beta, c_dim)
    jl = sample_jl(d_prime, d, rng)
    shift = rng.uniform(-0.25, 0.25, size=jl.d)
    return DomainMap(jl, 1.0 / (4.0 * (1.0 + alpha)), 0.25, shift, 0.5)
