"""Simulated agents, protocol rounds and transcripts.

The population owns every private point.  The only way to touch a point is
``Population.local(fn)``, which the local randomizers in ``freq`` call while a
round is open; everything that leaves a randomizer is a privatized report.
Per-agent randomness is drawn as one vectorized block per call from a stream
keyed by (seed, call index), which is equivalent to independent per-agent
streams and keeps runs a pure function of the seed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .core import ContractError
from .privacy import AgentLedger, PrivacyBudget


@dataclass
class CallRecord:
    label: str
    kind: str
    budget: PrivacyBudget
    count: int = 1


@dataclass
class RoundRecord:
    round_id: int
    calls: list = field(default_factory=list)


class Transcript:
    """Ordered per-agent round records.  All agents answer every call, so
    the records are shared and ``length(j)`` is the same for every j."""

    def __init__(self, n_agents: int):
        self.n_agents = n_agents
        self.rounds: list[RoundRecord] = []

    def length(self, agent: int) -> int:
        if not 0 <= agent < self.n_agents:
            raise IndexError(agent)
        return len(self.rounds)

    def lengths(self) -> np.ndarray:
        return np.full(self.n_agents, len(self.rounds), dtype=np.int64)

    def budget_of(self, agent: int) -> PrivacyBudget:
        total = PrivacyBudget(0, 0)
        for r in self.rounds:
            for c in r.calls:
                total = total + c.budget * c.count
        return total


class Population:
    def __init__(self, points, ledger: AgentLedger | None, seed: int = 0,
                 noiseless: bool = False):
        pts = np.array(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ContractError("population needs a nonempty (n, d) point array")
        pts.setflags(write=False)
        self.__points = pts
        self.n, self.dim = pts.shape
        self.ledger = ledger
        self.noiseless = noiseless
        self.transcript = Transcript(self.n)
        self._root = np.random.SeedSequence([int(seed), 0x5EED])
        self._calls = 0
        self._open: RoundRecord | None = None

    # round control -----------------------------------------------------
    def begin_round(self, round_id: int) -> None:
        if self._open is not None:
            raise ContractError(f"round {self._open.round_id} is still open")
        self._open = RoundRecord(round_id)

    def end_round(self) -> None:
        if self._open is None:
            raise ContractError("no open round")
        self.transcript.rounds.append(self._open)
        self._open = None

    @property
    def round_id(self) -> int:
        if self._open is None:
            raise ContractError("randomizers only run inside an open round")
        return self._open.round_id

    # randomizer plumbing ----------------------------------------------
    def local(self, fn: Callable[[np.ndarray], Any]):
        """Evaluate an agent-side function on the private points."""
        if self._open is None:
            raise ContractError("agent data is only reachable inside an open round")
        return fn(self.__points)

    def start_call(self, label: str, kind: str, budget: PrivacyBudget,
                   count: int = 1) -> tuple[np.random.Generator, np.random.Generator]:
        """Charge the ledger and hand out (public, private) generators."""
        if self.ledger is None:
            raise ContractError("randomizer refused to run without a ledger")
        rid = self.round_id
        self.ledger.charge(rid, label, budget, count)
        self._open.calls.append(CallRecord(label, kind, budget, count))
        idx = self._calls
        self._calls += 1
        pub = np.random.default_rng(np.random.SeedSequence(
            self._root.entropy, spawn_key=(1, idx)))
        prv = np.random.default_rng(np.random.SeedSequence(
            self._root.entropy, spawn_key=(2, idx)))
        return pub, prv

    def skip_calls(self, label: str, kind: str, budget: PrivacyBudget, count: int) -> None:
        """Account for calls whose reports cannot change the analyzer's
        output (for example levels whose threshold exceeds n).  The budget is
        charged in full; no reports are simulated."""
        if count <= 0:
            return
        if self.ledger is None:
            raise ContractError("randomizer refused to run without a ledger")
        self.ledger.charge(self.round_id, label, budget, count)
        self._open.calls.append(CallRecord(label, kind, budget, count))


@dataclass
class ProtocolRound:
    round_id: int
    public: dict
    execute: Callable[[Population], Any]


def simulate_protocol(population: Population, rounds: Sequence[ProtocolRound]):
    """Run rounds in order with a barrier between them."""
    out = []
    for rnd in rounds:
        population.begin_round(rnd.round_id)
        try:
            out.append(rnd.execute(population))
        finally:
            population.end_round()
    return out, population.transcript


def run_round(population: Population, round_id: int, public: dict, execute):
    (agg,), _ = simulate_protocol(population, [ProtocolRound(round_id, public, execute)])
    return agg


PROTOCOL_MODULES = ("core", "privacy", "protocol", "freq", "dimred", "grids", "cells",
                    "lsh", "kmeans_np", "alg_one_round", "alg_low_error")


def assert_protocol_path_clean() -> None:
    """Fail if the ground-truth oracle has been loaded into this process."""
    import sys
    if "ldpkm.oracle" in sys.modules:
        raise AssertionError("ldpkm.oracle must not be loaded on the protocol path")
