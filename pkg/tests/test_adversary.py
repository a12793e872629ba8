import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from evarkit import adversary
from evarkit.adversary import (is_evar_on_grid, maximality_check, worst_case_expectation)
from evarkit.constraints import builtin_constraints
from evarkit.finite import dominating_weights
from evarkit.measure import ConstraintFunction, EVariable, Hypothesis, SampleGrid, membership

from oracles import vertex_lp


def G(*pts):
    return SampleGrid(np.array(pts, dtype=float))


def test_constant_one():
    H = builtin_constraints("mean_var", {"sigma": 1.0}, G(-2, -1, 0, 1, 2))
    assert worst_case_expectation(EVariable.constant(H.grid, 1.0), H).worst_value == pytest.approx(1.0)


def test_x_squared_witness():
    g = G(-1, 0, 1)
    H = builtin_constraints("mean_var", {"sigma": 1.0}, g)
    rep = worst_case_expectation(EVariable(g, g.points**2), H)
    assert rep.worst_value == pytest.approx(1.0)
    np.testing.assert_allclose(rep.witness.weights, [0.5, 0, 0.5], atol=1e-12)
    assert rep.verdict == adversary.E_VARIABLE


def test_quantile_violation():
    g = G(-1, 1)
    H = builtin_constraints("quantile", {"alpha": 0.5, "q": 0.0}, g)
    h = EVariable(g, np.maximum(1 + 2.5 * (0.5 - (g.points <= 0)), 0))
    rep = worst_case_expectation(h, H)
    assert rep.worst_value == pytest.approx(1.125)
    assert rep.verdict == adversary.VIOLATED
    np.testing.assert_allclose(rep.witness.weights, [0.5, 0.5], atol=1e-12)


def test_is_evar_examples():
    g = G(-1, 0, 1)
    H = builtin_constraints("mean_var", {"sigma": 1.0}, g)
    assert is_evar_on_grid(EVariable(g, g.points**2), H)
    assert not is_evar_on_grid(EVariable.constant(g, 1.5), H)


def test_empty_hypothesis_accepts_anything():
    g = G(0, 1, 2)
    H = Hypothesis(g, (ConstraintFunction(g.points - 3), ConstraintFunction(3 - g.points)))
    rep = worst_case_expectation(EVariable.constant(g, 100.0), H)
    assert rep.verdict == adversary.HYPOTHESIS_EMPTY
    assert is_evar_on_grid(EVariable.constant(g, 100.0), H)


class TestMaximality:
    def test_zero_mean_one(self):
        g = G(-1, 0, 1)
        H = builtin_constraints("zero_mean", {}, g)
        assert maximality_check(EVariable.constant(g, 1.0), H).verdict == adversary.MAXIMAL

    def test_half_dominated(self):
        H = builtin_constraints("mean_var", {"sigma": 1.0}, G(-2, -1, 0, 1, 2))
        res = maximality_check(EVariable.constant(H.grid, 0.5), H)
        assert res.verdict == adversary.DOMINATED
        assert np.all(res.dominator.values >= 0.5 - 1e-12)
        assert is_evar_on_grid(res.dominator, H)

    def test_x_squared_maximal(self):
        g = G(-2, -1, 0, 1, 2)
        H = builtin_constraints("mean_var", {"sigma": 1.0}, g)
        res = maximality_check(EVariable(g, g.points**2), H)
        assert res.verdict == adversary.MAXIMAL
        assert res.grid_hash == g.digest()

    def test_cq_failure_undetermined(self):
        g = G(0, 1, 2)
        H = Hypothesis(g, (ConstraintFunction([-1.0, 0.0, 0.0]),))
        assert maximality_check(EVariable.constant(g, 1.0), H).verdict == adversary.UNDETERMINED

    def test_requires_evar(self):
        H = builtin_constraints("mean_var", {"sigma": 1.0}, G(-1, 0, 1))
        with pytest.raises(ValueError):
            maximality_check(EVariable.constant(H.grid, 2.0), H)


def _instance(rng):
    n = int(rng.integers(2, 8))
    d = int(rng.integers(1, 5))
    g = SampleGrid(np.arange(n, dtype=float))
    rows = np.round(rng.standard_normal((d, n)) * 2) / 2
    return g, Hypothesis(g, tuple(ConstraintFunction(r) for r in rows))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_duality_bridge_against_enumeration(seed):
    rng = np.random.default_rng(seed)
    g, H = _instance(rng)
    n = len(g)
    h = EVariable(g, np.round(rng.uniform(0, 2.5, n) * 4) / 4)
    rep = worst_case_expectation(h, H)
    status, value = vertex_lp(h.values, H.matrix, np.zeros(len(H)), np.ones((1, n)), [1.0])
    if status == "infeasible":
        assert rep.verdict == adversary.HYPOTHESIS_EMPTY
        return
    assert rep.worst_value == pytest.approx(value, abs=1e-9)
    assert membership(rep.witness, H, 1e-8)
    assert (rep.worst_value <= 1 + 1e-8) == dominating_weights(h, H, 1e-8).feasible


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_monotone(seed):
    rng = np.random.default_rng(seed)
    g, H = _instance(rng)
    h1 = rng.uniform(0, 2, len(g))
    h2 = h1 + rng.uniform(0, 1, len(g))
    a = worst_case_expectation(EVariable(g, h1), H)
    b = worst_case_expectation(EVariable(g, h2), H)
    if a.worst_value is not None:
        assert a.worst_value <= b.worst_value + 1e-9
