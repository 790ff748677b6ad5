import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ldpkm.core import ContractError
from ldpkm.privacy import (AgentLedger, LedgerOverflow, PrivacyBudget, compose, four_round_scheme,
                           gaussian_perturb, gaussian_spec, one_round_scheme, split_budget)


def test_compose_examples():
    assert compose([]) == PrivacyBudget(0, 0)
    assert compose([PrivacyBudget(1, 0), PrivacyBudget(1, 0)]) == PrivacyBudget(2, 0)
    got = compose([PrivacyBudget(0.5, 1e-6), PrivacyBudget(0.25, 1e-6), PrivacyBudget(0.25, 0)])
    assert got.as_floats() == pytest.approx((1.0, 2e-6), rel=1e-15)


budgets = st.lists(st.builds(PrivacyBudget, st.fractions(0, 5), st.fractions(0, Fraction(1, 100))),
                   max_size=8)


@settings(max_examples=100)
@given(budgets, budgets)
def test_compose_commutative_and_associative(a, b):
    assert compose(a + b) == compose(b + a)
    assert compose([compose(a), compose(b)]) == compose(a + b)
    assert compose(a[::-1]) == compose(a)


def test_budget_validation():
    with pytest.raises(ContractError):
        PrivacyBudget(-1, 0)
    with pytest.raises(ContractError):
        PrivacyBudget(1, 1)


def test_gaussian_spec_examples():
    s = gaussian_spec(1, 1e-5, 1)
    assert s.c_G == pytest.approx(4.85, abs=0.01) and s.sigma == pytest.approx(4.85, abs=0.01)
    assert gaussian_spec(2, 1e-5, 1).sigma == pytest.approx(s.sigma / 2)
    r = gaussian_spec(1, 1e-5, math.sqrt(2)).sigma / gaussian_spec(1, 1e-5, math.sqrt(2) / 2).sigma
    assert r == pytest.approx(2)
    with pytest.raises(ContractError):
        gaussian_spec(1, 0, 1)


@settings(max_examples=200)
@given(st.floats(1e-3, 10), st.floats(1e-12, 0.5), st.floats(1e-3, 10))
def test_gaussian_constant_strict(eps, delta, sens):
    s = gaussian_spec(eps, delta, sens)
    assert s.c_G ** 2 > 2 * math.log(1.25 / delta)
    assert s.sigma == pytest.approx(s.c_G * sens / eps)


def test_gaussian_perturb_statistics():
    s = gaussian_spec(1, 1e-5, 1)
    rng = np.random.default_rng(0)
    x = gaussian_perturb(np.zeros((100_000, 2)), s, rng)
    assert np.all(np.abs(x.std(axis=0) / s.sigma - 1) < 0.02)
    assert np.all(np.abs(x.mean(axis=0)) < 4 * s.sigma / math.sqrt(100_000))
    tiny = gaussian_spec(1e9, 0.5, 1e-9)
    v = np.array([0.25, -0.5])
    assert np.allclose(gaussian_perturb(v, tiny, rng), v, atol=1e-12)


def test_split_budget_schemes():
    total = PrivacyBudget(1, 1e-6)
    b = split_budget(total, one_round_scheme(total, 10))
    assert b["hist"].epsilon == Fraction(1, 20) and b["sums"].epsilon == Fraction(1, 20)
    sch = four_round_scheme(total, 9, 100)
    b = split_budget(total, sch)
    rounds = {1: ["round1_cells"], 2: ["round2_hist", "round2_sums"], 3: ["round3_nearest"],
              4: ["round4_vectors", "round4_counts"]}
    for names in rounds.values():
        eps = compose(sch[n][0] * sch[n][1] for n in names).epsilon
        assert eps == Fraction(1, 4)
    with pytest.raises(ContractError):
        split_budget(total, {"x": (PrivacyBudget(2, 0), 1)})


def test_ledger_overflow_and_totals():
    led = AgentLedger(3, PrivacyBudget(1, 0))
    led.charge(1, "a", PrivacyBudget(Fraction(1, 2), 0), 2)
    assert led.total() == PrivacyBudget(1, 0)
    assert led.num_charges() == 2
    with pytest.raises(LedgerOverflow):
        led.charge(2, "b", PrivacyBudget(Fraction(1, 10), 0))
