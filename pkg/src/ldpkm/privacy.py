"""Budget accounting under basic composition, and the Gaussian mechanism.

Budgets are held as exact rationals (``fractions.Fraction`` built from the
binary value of the user's float), so that splitting a budget into parts and
composing the parts back gives the original value bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np

from .core import ContractError

C_G_MARGIN = 1e-9


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


@dataclass(frozen=True)
class PrivacyBudget:
    epsilon: Fraction
    delta: Fraction = Fraction(0)

    def __post_init__(self):
        e, d = _frac(self.epsilon), _frac(self.delta)
        if e < 0:
            raise ContractError(f"epsilon must be >= 0, got {float(e)}")
        if not (0 <= d < 1):
            raise ContractError(f"delta must lie in [0, 1), got {float(d)}")
        object.__setattr__(self, "epsilon", e)
        object.__setattr__(self, "delta", d)

    @property
    def eps(self) -> float:
        return float(self.epsilon)

    @property
    def dlt(self) -> float:
        return float(self.delta)

    def __add__(self, other: "PrivacyBudget") -> "PrivacyBudget":
        return PrivacyBudget(self.epsilon + other.epsilon, self.delta + other.delta)

    def __mul__(self, m: int) -> "PrivacyBudget":
        return PrivacyBudget(self.epsilon * m, self.delta * m)

    __rmul__ = __mul__

    def __truediv__(self, m: int) -> "PrivacyBudget":
        return PrivacyBudget(self.epsilon / m, self.delta / m)

    def fits_in(self, other: "PrivacyBudget") -> bool:
        return self.epsilon <= other.epsilon and self.delta <= other.delta

    def as_floats(self) -> tuple[float, float]:
        return float(self.epsilon), float(self.delta)

    def __repr__(self):
        return f"PrivacyBudget(eps={float(self.epsilon):.6g}, delta={float(self.delta):.3g})"


def compose(budgets: Iterable[PrivacyBudget]) -> PrivacyBudget:
    """Basic composition: epsilons and deltas add."""
    eps, dlt = Fraction(0), Fraction(0)
    for b in budgets:
        eps += b.epsilon
        dlt += b.delta
    return PrivacyBudget(eps, dlt)


@dataclass(frozen=True)
class GaussianNoiseSpec:
    sigma: float
    sensitivity: float
    c_G: float
    epsilon: float
    delta: float


def gaussian_spec(epsilon, delta, sensitivity) -> GaussianNoiseSpec:
    epsilon, delta = float(epsilon), float(delta)
    if delta <= 0:
        raise ContractError("the Gaussian mechanism needs delta > 0")
    if not (epsilon > 0 and delta < 1 and sensitivity > 0):
        raise ContractError("need epsilon > 0, delta < 1, sensitivity > 0")
    c = math.sqrt(2.0 * math.log(1.25 / delta)) * (1.0 + C_G_MARGIN)
    return GaussianNoiseSpec(c * sensitivity / epsilon, float(sensitivity), c, epsilon, delta)


def gaussian_perturb(v, spec: GaussianNoiseSpec, rng: np.random.Generator) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    return v + rng.normal(0.0, spec.sigma, size=v.shape)


class LedgerOverflow(RuntimeError):
    pass


@dataclass(frozen=True)
class Charge:
    round_id: int
    label: str
    budget: PrivacyBudget
    count: int = 1


class AgentLedger:
    """Per-agent charge lists, stored compactly.

    Every simulated agent answers every call of a round (non-participants
    answer on a reserved token), so a charge is recorded once together with
    the agent population it covers.  ``charges_of(j)`` expands it for agent j.
    ``enabled=False`` is the noiseless test mode: charges are still recorded
    but the ledger reports itself as inactive.
    """

    def __init__(self, n_agents: int, budget: PrivacyBudget, enabled: bool = True):
        self.n_agents = int(n_agents)
        self.budget = budget
        self.enabled = enabled
        self._records: list[Charge] = []
        self._total = PrivacyBudget(0, 0)

    def charge(self, round_id: int, label: str, b: PrivacyBudget, count: int = 1) -> None:
        new_total = self._total + b * count
        if self.enabled and not new_total.fits_in(self.budget):
            raise LedgerOverflow(
                f"round {round_id} call {label!r}: composed budget {new_total} "
                f"exceeds {self.budget} for every agent (first offender: agent 0)")
        self._records.append(Charge(round_id, label, b, count))
        self._total = new_total

    @property
    def records(self) -> tuple[Charge, ...]:
        return tuple(self._records)

    def charges_of(self, agent: int) -> list[tuple[int, PrivacyBudget]]:
        if not 0 <= agent < self.n_agents:
            raise IndexError(agent)
        out = []
        for r in self._records:
            out.extend([(r.round_id, r.budget)] * r.count)
        return out

    def num_charges(self, agent: int = 0) -> int:
        if not 0 <= agent < self.n_agents:
            raise IndexError(agent)
        return sum(r.count for r in self._records)

    def total(self, agent: int = 0) -> PrivacyBudget:
        if not 0 <= agent < self.n_agents:
            raise IndexError(agent)
        return self._total

    def totals(self) -> list[PrivacyBudget]:
        return [self._total] * self.n_agents

    def rounds(self) -> list[int]:
        return sorted({r.round_id for r in self._records})


def split_budget(total: PrivacyBudget, scheme: Mapping[str, tuple[PrivacyBudget, int]]) -> dict:
    """Validate a named allocation ``name -> (per-call budget, number of calls)``.

    Returns ``name -> per-call budget``.  Rejects allocations whose composition
    exceeds ``total``.
    """
    spent = compose(b * m for b, m in scheme.values())
    if not spent.fits_in(total):
        raise ContractError(f"scheme spends {spent}, more than the total {total}")
    return {name: b for name, (b, _) in scheme.items()}


def one_round_scheme(total: PrivacyBudget, levels: int) -> dict:
    """2*levels equal calls: pure histograms and Gaussian sum oracles."""
    calls = 2 * levels
    return {
        "hist": (PrivacyBudget(total.epsilon / calls, 0), levels),
        "sums": (PrivacyBudget(total.epsilon / calls, total.delta / levels), levels),
    }


def four_round_scheme(total: PrivacyBudget, cell_levels: int, bucket_pairs: int) -> dict:
    """Quarters of epsilon per round; delta is spent in rounds two and four."""
    q = total.epsilon / 4
    return {
        "round1_cells": (PrivacyBudget(q / cell_levels, 0), cell_levels),
        "round2_hist": (PrivacyBudget(q / (2 * bucket_pairs), 0), bucket_pairs),
        "round2_sums": (PrivacyBudget(q / (2 * bucket_pairs), total.delta / (2 * bucket_pairs)),
                        bucket_pairs),
        "round3_nearest": (PrivacyBudget(q, 0), 1),
        "round4_vectors": (PrivacyBudget(q / 2, total.delta / 2), 1),
        "round4_counts": (PrivacyBudget(q / 2, 0), 1),
    }
