"""Locally private succinct histograms and heavy-sum oracles.

Every report is a single randomized-response bit, so each histogram call is
(eps, 0)-LDP for any eps > 0.  Two internal constructions share one
error contract:

scan
    Universes of at most ``SCAN_MAX_BITS`` bits.  Each agent holds a public
    random Hadamard row and reports the randomized sign of that row at its
    value; one fast Walsh-Hadamard transform yields an unbiased estimate for
    every value of the universe.
succinct
    Larger universes.  Agents are split (publicly, at random) into a
    frequency-oracle group and one group per s-bit chunk of the value code.
    Chunk groups report a Hadamard response on (bucket hash, chunk), which
    lets the analyzer decode heavy codes bucket by bucket; decoded
    candidates are then verified by the frequency-oracle group, whose
    agents report the randomized sign of a keyed pseudo-random function of
    (value, agent).

Declared bounds
    E bounds the error of every stored estimate, M is the frequency above
    which a value is guaranteed to be listed.  Both come from Bernstein's
    inequality with a union bound over everything the analyzer looks at;
    the failure probability of the whole call is at most beta.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import ContractError
from .privacy import PrivacyBudget, gaussian_spec
from .protocol import Population

SCAN_MAX_BITS = 22
CHUNK_MAX_BITS = 18
FO_SHARE = 0.3
BEAM_WIDTH = 1024
VERIFY_PER_BUCKET = 8

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLD = np.uint64(0x9E3779B97F4A7C15)


# --------------------------------------------------------------------------
# keyed pseudo-random functions

def mix64(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.uint64).copy()
    x ^= x >> np.uint64(30)
    x *= _M1
    x ^= x >> np.uint64(27)
    x *= _M2
    x ^= x >> np.uint64(31)
    return x


def fingerprint(bits: np.ndarray, key: int = 0) -> np.ndarray:
    """64-bit fingerprint of each row of a 0/1 code matrix."""
    bits = np.atleast_2d(np.asarray(bits, dtype=np.uint8))
    packed = np.packbits(bits, axis=1)
    pad = (-packed.shape[1]) % 8
    if pad:
        packed = np.pad(packed, ((0, 0), (0, pad)))
    words = np.ascontiguousarray(packed).view("<u8")
    h = mix64(np.full(bits.shape[0], np.uint64(key) ^ np.uint64(bits.shape[1]), dtype=np.uint64))
    for i in range(words.shape[1]):
        h = mix64(h ^ words[:, i] ^ np.uint64((0x9E3779B97F4A7C15 * (i + 1)) % 2**64))
    return h


def agent_keys(n: int, seed: int) -> np.ndarray:
    return mix64(np.arange(n, dtype=np.uint64) * _GOLD ^ mix64(np.array([seed], dtype=np.uint64)))


def prf_signs(fps: np.ndarray, keys: np.ndarray) -> np.ndarray:
    """Sign matrix Z[v, j] in {-1, +1} as int8, shape (len(fps), len(keys))."""
    z = mix64(np.asarray(fps, dtype=np.uint64)[:, None] ^ np.asarray(keys, dtype=np.uint64)[None, :])
    return (1 - 2 * (z >> np.uint64(63)).astype(np.int8)).astype(np.int8)


def prf_sign_pairs(fps: np.ndarray, keys: np.ndarray) -> np.ndarray:
    """Elementwise Z[v_j, j] for paired arrays."""
    z = mix64(np.asarray(fps, dtype=np.uint64) ^ np.asarray(keys, dtype=np.uint64))
    return (1 - 2 * (z >> np.uint64(63)).astype(np.int8)).astype(np.int8)


def hadamard_entry(rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    par = np.bitwise_count(np.asarray(rows, dtype=np.uint64) & np.asarray(cols, dtype=np.uint64)) & 1
    return (1 - 2 * par.astype(np.int8)).astype(np.int8)


def fwht(a: np.ndarray) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform along the last axis (Sylvester order)."""
    a = np.array(a, dtype=np.float64)
    n = a.shape[-1]
    if n & (n - 1):
        raise ContractError("length must be a power of two")
    lead = a.shape[:-1]
    h = 1
    while h < n:
        a = a.reshape(lead + (n // (2 * h), 2, h))
        x, y = a[..., 0, :], a[..., 1, :]
        a = np.stack((x + y, x - y), axis=-2)
        h *= 2
    return a.reshape(lead + (n,))


# --------------------------------------------------------------------------
# value mappings

def _bits_for(span: int) -> int:
    # room for ``span`` values plus the reserved all-ones token
    return max(1, int(span).bit_length())


class ValueMapping:
    """A public map from an agent's point to a value in a finite universe.

    Values are integer tuples with a fixed bit layout; the all-ones code is
    reserved for the non-participation token, which aggregators drop.
    ``fn`` returns an (n, width) integer array, optionally with a boolean
    participation mask.
    """

    def __init__(self, name: str, fn: Callable, width: int, lo, hi,
                 key_format: Callable[[tuple], str] | None = None,
                 key_parse: Callable[[str], tuple] | None = None):
        self.name = name
        self.fn = fn
        self.width = int(width)
        self.lo = np.broadcast_to(np.asarray(lo, dtype=np.int64), (self.width,)).copy()
        self.hi = np.broadcast_to(np.asarray(hi, dtype=np.int64), (self.width,)).copy()
        if np.any(self.hi < self.lo):
            raise ContractError("empty coordinate range")
        self.coord_bits = _bits_for(int(np.max(self.hi - self.lo + 1)))
        self.bits = self.coord_bits * self.width
        self._fmt = key_format or (lambda v: ",".join(map(str, v)))
        self._parse = key_parse or (lambda s: tuple(int(x) for x in s.split(",")))

    @property
    def log2_universe(self) -> int:
        return self.bits

    def key(self, value) -> str:
        return self._fmt(tuple(int(x) for x in value))

    def parse(self, key: str) -> tuple:
        return self._parse(key)

    def evaluate(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        out = self.fn(points)
        if isinstance(out, tuple):
            vals, mask = out
        else:
            vals, mask = out, None
        vals = np.asarray(vals, dtype=np.int64).reshape(points.shape[0], self.width)
        mask = np.ones(points.shape[0], bool) if mask is None else np.asarray(mask, bool)
        live = vals[mask]
        if live.size and (np.any(live < self.lo) or np.any(live > self.hi)):
            raise ContractError(f"mapping {self.name!r} produced a value outside its declared range")
        return vals, mask

    def to_bits(self, vals: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
        vals = np.atleast_2d(np.asarray(vals, dtype=np.int64))
        off = (vals - self.lo).astype(np.uint64)
        shifts = np.arange(self.coord_bits - 1, -1, -1, dtype=np.uint64)
        bits = ((off[:, :, None] >> shifts) & np.uint64(1)).astype(np.uint8)
        bits = bits.reshape(vals.shape[0], self.bits)
        if mask is not None:
            bits[~mask] = 1
        return bits

    def from_bits(self, bits: np.ndarray) -> tuple | None:
        bits = np.asarray(bits, dtype=np.int64).reshape(self.width, self.coord_bits)
        if np.all(bits == 1):
            return None
        w = 1 << np.arange(self.coord_bits - 1, -1, -1, dtype=np.int64)
        vals = bits @ w + self.lo
        if np.any(vals > self.hi):
            return None
        return tuple(int(v) for v in vals)

    def to_int(self, bits: np.ndarray) -> np.ndarray:
        """Row codes as integers (only for codes of at most 63 bits)."""
        bits = np.atleast_2d(bits).astype(np.int64)
        w = 1 << np.arange(bits.shape[1] - 1, -1, -1, dtype=np.int64)
        return bits @ w

    def int_to_bits(self, codes: np.ndarray) -> np.ndarray:
        codes = np.asarray(codes, dtype=np.int64)
        shifts = np.arange(self.bits - 1, -1, -1, dtype=np.int64)
        return ((codes[:, None] >> shifts) & 1).astype(np.uint8)


def index_mapping(name: str, fn: Callable, size: int) -> ValueMapping:
    """Values 0..size-1, keyed by their decimal string."""
    return ValueMapping(name, lambda p: np.asarray(fn(p)).reshape(-1, 1), 1, 0, size - 1)


# --------------------------------------------------------------------------
# histogram

@dataclass
class SuccinctHistogram:
    entries: dict            # key -> raw estimate
    values: dict             # key -> value tuple
    E: float
    M: float
    beta: float
    epsilon: float
    n: int
    mode: str
    mapping_name: str = ""
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def query(self, v) -> float:
        key = v if isinstance(v, str) else self.meta.get("key_of", _default_key)(v)
        return max(0.0, float(self.entries.get(key, 0.0)))

    def raw(self, v) -> float:
        key = v if isinstance(v, str) else _default_key(v)
        return float(self.entries.get(key, 0.0))

    def items(self):
        return [(k, self.values[k], self.query(k)) for k in self.entries]

    def to_json(self) -> str:
        meta = {k: v for k, v in self.meta.items() if k != "key_of"}
        return json.dumps({
            "kind": "histogram", "mapping": self.mapping_name, "mode": self.mode,
            "E": self.E, "M": self.M, "beta": self.beta, "epsilon": self.epsilon,
            "n": self.n, "seed": self.seed, "meta": meta,
            "entries": [[k, float(e)] for k, e in self.entries.items()],
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str, mapping: ValueMapping | None = None) -> "SuccinctHistogram":
        d = json.loads(text)
        entries = {k: e for k, e in d["entries"]}
        parse = mapping.parse if mapping else (lambda s: s)
        h = cls(entries, {k: parse(k) for k in entries}, d["E"], d["M"], d["beta"],
                d["epsilon"], d["n"], d["mode"], d["mapping"], d["seed"], d["meta"])
        if mapping is not None:
            h.meta["key_of"] = mapping.key
        return h


def _default_key(v) -> str:
    return ",".join(str(int(x)) for x in v)


def histogram_query(h: SuccinctHistogram, v) -> float:
    return h.query(v)


def rr_constant(epsilon: float) -> float:
    return (math.exp(epsilon) + 1.0) / (math.exp(epsilon) - 1.0)


def bernstein_radius(n: int, bound: float, variance: float, count: float, beta: float) -> float:
    """Two-sided Bernstein radius for a sum of n independent centered terms
    with |X| <= bound and Var(X) <= variance, union-bounded over ``count``
    estimates at total failure probability ``beta``."""
    lg = math.log(2.0 * max(count, 1.0) / beta)
    a = bound * lg / 3.0
    return a + math.sqrt(a * a + 2.0 * n * variance * lg)


def _rr(signs: np.ndarray, epsilon: float, rng: np.random.Generator) -> np.ndarray:
    keep = rng.random(signs.shape[0]) < math.exp(epsilon) / (math.exp(epsilon) + 1.0)
    return np.where(keep, signs, -signs).astype(np.int8)


def histogram_bounds(n: int, bits: int, epsilon: float, beta: float,
                     mode: str = "auto") -> tuple[float, float, str]:
    """Declared (E, M) of a private histogram call; depends only on public
    parameters, so analyzers can size thresholds before the call."""
    eps = float(epsilon)
    if mode == "auto":
        mode = "scan" if bits <= SCAN_MAX_BITS else "succinct"
    c = rr_constant(eps)
    if mode == "scan":
        E = bernstein_radius(n, c, c * c, 1 << bits, beta)
        return E, 2.0 * E, mode
    tb, s, G = _succinct_layout(n, bits)
    q_chunk = (1.0 - FO_SHARE) / G
    err_chunk = bernstein_radius(n, c / q_chunk, c * c / q_chunk, G * ((1 << tb) << s), beta / 2.0)
    E = bernstein_radius(n, c / FO_SHARE, c * c / FO_SHARE, (1 << tb) * VERIFY_PER_BUCKET, beta / 2.0)
    return E, max(2.0 * E, 2.0 * err_chunk), mode


def bitstogram_round(agents: Population, f: ValueMapping, epsilon, beta: float,
                     label: str = "hist", mode: str = "auto") -> SuccinctHistogram:
    if f is None or getattr(f, "bits", None) is None:
        raise ContractError("value mapping with a universe descriptor is required")
    budget = PrivacyBudget(epsilon, 0)
    pub, prv = agents.start_call(label, "histogram", budget)
    seed = int(pub.integers(2**62))
    vals, mask = agents.local(f.evaluate)
    eps = float(epsilon)
    if agents.noiseless:
        return _exact_histogram(f, vals, mask, agents.n, eps, beta, seed)
    if mode == "auto":
        mode = "scan" if f.bits <= SCAN_MAX_BITS else "succinct"
    if eps <= 0:
        raise ContractError("epsilon must be positive for a private histogram")
    if mode == "scan":
        if f.bits > SCAN_MAX_BITS:
            raise ContractError(f"scan mode supports at most {SCAN_MAX_BITS}-bit universes")
        return _scan_histogram(agents, f, vals, mask, eps, beta, seed, pub, prv)
    return _succinct_histogram(agents, f, vals, mask, eps, beta, seed, pub, prv)


def _exact_histogram(f, vals, mask, n, eps, beta, seed) -> SuccinctHistogram:
    live = vals[mask]
    entries, values = {}, {}
    if live.size:
        uniq, counts = np.unique(live, axis=0, return_counts=True)
        for u, c in zip(uniq, counts):
            k = f.key(u)
            entries[k] = float(c)
            values[k] = tuple(int(x) for x in u)
    return SuccinctHistogram(entries, values, 0.0, 0.0, beta, eps, n, "exact", f.name, seed,
                             {"key_of": f.key})


def _scan_histogram(agents, f, vals, mask, eps, beta, seed, pub, prv) -> SuccinctHistogram:
    n, K = agents.n, 1 << f.bits
    codes = f.to_int(f.to_bits(vals, mask)).astype(np.uint64)
    rows = pub.integers(0, K, size=n, dtype=np.uint64)
    y = _rr(hadamard_entry(rows, codes), eps, prv)
    c = rr_constant(eps)
    acc = np.bincount(rows.astype(np.int64), weights=y.astype(np.float64), minlength=K)
    est = c * fwht(acc)
    E = bernstein_radius(n, c, c * c, K, beta)
    keep = np.flatnonzero(est >= E)
    keep = keep[keep != K - 1]
    entries, values = {}, {}
    for code in keep:
        v = f.from_bits(f.int_to_bits(np.array([code]))[0])
        if v is None:
            continue
        k = f.key(v)
        entries[k] = float(est[code])
        values[k] = v
    return SuccinctHistogram(entries, values, E, 2.0 * E, beta, eps, n, "scan", f.name, seed,
                             {"key_of": f.key})


def _succinct_layout(n: int, bits: int) -> tuple[int, int, int]:
    tb = max(1, math.ceil(math.log2(max(2.0, math.sqrt(n)))))
    s = max(1, min(bits, CHUNK_MAX_BITS - tb))
    groups = math.ceil(bits / s)
    return tb, s, groups


def _succinct_histogram(agents, f, vals, mask, eps, beta, seed, pub, prv) -> SuccinctHistogram:
    n, B = agents.n, f.bits
    tb, s, G = _succinct_layout(n, B)
    T = 1 << tb
    c = rr_constant(eps)
    bucket_key = int(pub.integers(2**62))
    fo_key = int(pub.integers(2**62))
    q_chunk = (1.0 - FO_SHARE) / G
    group = np.where(pub.random(n) < FO_SHARE, -1, pub.integers(0, G, size=n))
    bits = f.to_bits(vals, mask)
    padded = np.zeros((n, G * s), dtype=np.uint8)
    padded[:, :B] = bits
    fps = fingerprint(bits, bucket_key)
    bucket = (mix64(fps) & np.uint64(T - 1)).astype(np.int64)
    w = 1 << np.arange(s - 1, -1, -1, dtype=np.int64)
    K = T << s

    # chunk groups: Hadamard response on (bucket, chunk)
    chunk_est = np.zeros((G, T, 1 << s))
    for i in range(G):
        idx = np.flatnonzero(group == i)
        u = (bucket[idx] << s) | (padded[idx, i * s:(i + 1) * s].astype(np.int64) @ w)
        rows = pub.integers(0, K, size=idx.size, dtype=np.uint64)
        y = _rr(hadamard_entry(rows, u.astype(np.uint64)), eps, prv)
        acc = np.bincount(rows.astype(np.int64), weights=y.astype(np.float64), minlength=K)
        chunk_est[i] = (c / q_chunk * fwht(acc)).reshape(T, 1 << s)
    beta_part = beta / 2.0
    err_chunk = bernstein_radius(n, c / q_chunk, c * c / q_chunk, G * K, beta_part)

    # frequency-oracle group: randomized PRF sign of the own value
    fo_idx = np.flatnonzero(group == -1)
    keys = agent_keys(n, fo_key)[fo_idx]
    fo_fps = fingerprint(bits[fo_idx], fo_key)
    y_fo = _rr(prf_sign_pairs(fo_fps, keys), eps, prv).astype(np.float64)
    n_verify = T * VERIFY_PER_BUCKET
    E = bernstein_radius(n, c / FO_SHARE, c * c / FO_SHARE, n_verify, beta_part)

    # decode bucket by bucket
    cand_bits, truncated = [], 0
    all_ones = np.ones(B, dtype=np.uint8)
    for t in range(T):
        beam_scores = np.array([np.inf])
        beam_codes = np.zeros((1, 0), dtype=np.int64)
        for i in range(G):
            e = chunk_est[i, t]
            hits = np.flatnonzero(e >= err_chunk)
            if hits.size == 0:
                beam_codes = None
                break
            sc = np.minimum(beam_scores[:, None], e[hits][None, :]).ravel()
            codes = np.concatenate([np.repeat(beam_codes, hits.size, axis=0),
                                    np.tile(hits, beam_codes.shape[0])[:, None]], axis=1)
            if sc.size > BEAM_WIDTH:
                truncated += 1
                top = np.argsort(-sc, kind="stable")[:BEAM_WIDTH]
                sc, codes = sc[top], codes[top]
            beam_scores, beam_codes = sc, codes
        if beam_codes is None:
            continue
        chunk_bits = ((beam_codes[:, :, None] >> np.arange(s - 1, -1, -1)) & 1).astype(np.uint8)
        cb = chunk_bits.reshape(beam_codes.shape[0], G * s)[:, :B]
        ok = (mix64(fingerprint(cb, bucket_key)) & np.uint64(T - 1)).astype(np.int64) == t
        ok &= ~np.all(cb == all_ones, axis=1)
        cb, sc = cb[ok], beam_scores[ok]
        order = np.argsort(-sc, kind="stable")[:VERIFY_PER_BUCKET]
        cand_bits.extend(cb[order])

    entries, values = {}, {}
    if cand_bits:
        cb = np.array(cand_bits)
        cfps = fingerprint(cb, fo_key)
        est = np.zeros(cb.shape[0])
        step = max(1, 4_000_000 // max(1, fo_idx.size))
        for lo in range(0, cb.shape[0], step):
            est[lo:lo + step] = (c / FO_SHARE) * (prf_signs(cfps[lo:lo + step], keys) @ y_fo)
        for row, e_v in zip(cb, est):
            if e_v < E:
                continue
            v = f.from_bits(row)
            if v is None:
                continue
            k = f.key(v)
            entries[k] = float(e_v)
            values[k] = v
    M = max(2.0 * E, 2.0 * err_chunk)
    meta = {"key_of": f.key, "buckets": T, "chunk_bits": s, "groups": G,
            "chunk_error": err_chunk, "candidates": len(cand_bits), "beam_truncations": truncated}
    return SuccinctHistogram(entries, values, E, M, beta, eps, n, "succinct", f.name, seed, meta)


# --------------------------------------------------------------------------
# heavy sums

@dataclass
class SumOracle:
    mapping: ValueMapping
    dim: int
    sign_seed: int
    reports: np.ndarray | None       # (n, dim) noisy signed reports
    sigma: float
    c_G: float
    sensitivity: float               # Delta_{g,2}
    diameter: float                  # Delta
    epsilon: float
    delta: float
    n: int
    exact: dict | None = None        # noiseless mode: key -> exact sum
    _keys: np.ndarray | None = None

    def _agent_keys(self) -> np.ndarray:
        if self._keys is None:
            self._keys = agent_keys(self.n, self.sign_seed)
        return self._keys

    def sign(self, v, agents_idx: np.ndarray | None = None) -> np.ndarray:
        fp = self._fp(v)
        keys = self._agent_keys() if agents_idx is None else self._agent_keys()[agents_idx]
        return prf_signs(fp, keys)[0]

    def _fp(self, v) -> np.ndarray:
        value = self.mapping.parse(v) if isinstance(v, str) else tuple(v)
        bits = self.mapping.to_bits(np.array([value]))
        return fingerprint(bits, self.sign_seed)

    def query(self, v) -> np.ndarray:
        if self.exact is not None:
            key = v if isinstance(v, str) else self.mapping.key(v)
            return self.exact.get(key, np.zeros(self.dim)).copy()
        return self.sign(v).astype(np.float64) @ self.reports

    def query_many(self, vs: Sequence) -> np.ndarray:
        if not len(vs):
            return np.zeros((0, self.dim))
        if self.exact is not None:
            return np.array([self.query(v) for v in vs])
        fps = np.concatenate([self._fp(v) for v in vs])
        out = np.zeros((len(vs), self.dim))
        step = max(1, 4_000_000 // self.n)
        for lo in range(0, len(vs), step):
            out[lo:lo + step] = prf_signs(fps[lo:lo + step], self._agent_keys()).astype(np.float64) @ self.reports
        return out

    def error_bound(self, beta: float) -> float:
        if self.exact is not None:
            return 0.0
        return hso_error_bound(self.n, self.dim, self.diameter, self.sensitivity,
                               self.epsilon, self.c_G, beta)

    def to_json(self, include_reports: bool = True) -> str:
        d = {"kind": "sum_oracle", "mapping": self.mapping.name, "dim": self.dim,
             "sign_seed": self.sign_seed, "sigma": self.sigma, "c_G": self.c_G,
             "sensitivity": self.sensitivity, "diameter": self.diameter,
             "epsilon": self.epsilon, "delta": self.delta, "n": self.n}
        if include_reports and self.reports is not None:
            d["reports"] = self.reports.tolist()
        return json.dumps(d, sort_keys=True)


def hso_error_bound(n: int, d: int, diameter: float, sens: float, epsilon: float,
                    c_G: float, beta: float) -> float:
    return (2.0 * diameter * math.sqrt(2.0 * n * math.log((d + 1) / beta))
            + (4.0 * c_G * sens / epsilon) * math.sqrt(2.0 * d * n * math.log(4.0 / beta)))


def heavy_sums_round(agents: Population, f: ValueMapping, g: Callable, dim: int,
                     epsilon, delta, diameter: float, sensitivity: float,
                     label: str = "sums") -> SumOracle:
    """Each agent sends sign(f(x), j) * g(x) plus Gaussian noise.

    Non-participants (mask False) send noise only.  ``g`` must map into a
    ball of the declared diameter around the origin.
    """
    if not (math.isfinite(diameter) and diameter > 0 and sensitivity > 0):
        raise ContractError("g must be bounded: give a finite diameter and sensitivity")
    budget = PrivacyBudget(epsilon, delta)
    pub, prv = agents.start_call(label, "sum_oracle", budget)
    sign_seed = int(pub.integers(2**62))
    vals, mask = agents.local(f.evaluate)
    gv = np.asarray(agents.local(g), dtype=np.float64).reshape(agents.n, dim)
    gv = np.where(mask[:, None], gv, 0.0)
    if np.any(np.linalg.norm(gv, axis=1) > diameter * (1 + 1e-9)):
        raise ContractError("g left its declared ball")
    if agents.noiseless:
        exact = {}
        if mask.any():
            uniq, inv = np.unique(vals[mask], axis=0, return_inverse=True)
            sums = np.zeros((uniq.shape[0], dim))
            np.add.at(sums, inv.ravel(), gv[mask])
            exact = {f.key(u): s for u, s in zip(uniq, sums)}
        return SumOracle(f, dim, sign_seed, None, 0.0, 0.0, sensitivity, diameter,
                         float(epsilon), float(delta), agents.n, exact)
    spec = gaussian_spec(epsilon, delta, 2.0 * sensitivity)
    fps = fingerprint(f.to_bits(vals, mask), sign_seed)
    s = prf_sign_pairs(fps, agent_keys(agents.n, sign_seed)).astype(np.float64)
    y = s[:, None] * gv + prv.normal(0.0, spec.sigma, size=gv.shape)
    return SumOracle(f, dim, sign_seed, y, spec.sigma, spec.c_G, sensitivity, diameter,
                     float(epsilon), float(delta), agents.n)


def sum_query(o: SumOracle, v) -> np.ndarray:
    return o.query(v)


def noisy_average(h: SuccinctHistogram, o: SumOracle, v) -> np.ndarray | None:
    """Sum over count, or None when the count estimate is not positive."""
    cnt = h.query(v)
    if cnt <= 0:
        return None
    return o.query(v) / cnt


def noisy_average_bound(n_v: float, count_err: float, sum_err: float, mean_norm: float) -> float:
    if n_v <= count_err:
        return math.inf
    return (sum_err + count_err * mean_norm) / (n_v - count_err)


@dataclass
class VectorSum:
    total: np.ndarray
    sigma: float
    c_G: float
    n: int
    epsilon: float
    delta: float

    def to_json(self) -> str:
        return json.dumps({"kind": "vector_sum", "total": self.total.tolist(), "sigma": self.sigma,
                           "n": self.n, "epsilon": self.epsilon, "delta": self.delta})


def vector_sum_round(agents: Population, fn: Callable, dim: int, epsilon, delta,
                     sensitivity: float, label: str = "vectors") -> VectorSum:
    """Gaussian mechanism on a per-agent vector; the analyzer keeps the sum."""
    pub, prv = agents.start_call(label, "gaussian_vector", PrivacyBudget(epsilon, delta))
    v = np.asarray(agents.local(fn), dtype=np.float64).reshape(agents.n, dim)
    if agents.noiseless:
        return VectorSum(v.sum(axis=0), 0.0, 0.0, agents.n, float(epsilon), float(delta))
    spec = gaussian_spec(epsilon, delta, sensitivity)
    total = np.zeros(dim)
    for lo in range(0, agents.n, 8192):
        block = v[lo:lo + 8192]
        total += (block + prv.normal(0.0, spec.sigma, size=block.shape)).sum(axis=0)
    return VectorSum(total, spec.sigma, spec.c_G, agents.n, float(epsilon), float(delta))
