import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from evarkit.constraints import builtin_constraints
from evarkit.measure import (AlignmentError, ConstraintFunction, DiscreteMeasure, EVariable,
                             Hypothesis, SampleGrid, VALUE_CAP, expectation, grid_from_json,
                             is_empty, membership, negligible_points, problem_from_json,
                             problem_to_json)


def grid(*pts):
    return SampleGrid(np.array(pts, dtype=float))


def hyp(g, *rows):
    return Hypothesis(g, tuple(ConstraintFunction(r) for r in rows))


class TestGrid:
    def test_rejects_unsorted_scalar(self):
        with pytest.raises(ValueError):
            grid(1, 0)

    def test_rejects_duplicate_vectors(self):
        with pytest.raises(ValueError):
            SampleGrid(np.array([[0, 1], [0, 1]]))

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            SampleGrid(np.array([]))

    def test_digest_stable(self):
        assert grid(0, 1, 2).digest() == grid(0, 1, 2).digest()
        assert grid(0, 1, 2).digest() != grid(0, 1, 3).digest()

    def test_range_json(self):
        g = grid_from_json({"start": -1, "stop": 1, "step": 0.5})
        np.testing.assert_allclose(g.points, [-1, -0.5, 0, 0.5, 1])

    def test_nearest(self):
        assert grid(0, 1, 2).nearest(1.2) == (1, pytest.approx(0.2))


class TestExpectation:
    def test_dirac(self):
        g = grid(-1, 0, 3)
        assert expectation(DiscreteMeasure.dirac(g, 2), [5, 6, 7]) == 7

    def test_uniform_symmetric(self):
        g = grid(-1, 1)
        assert expectation(DiscreteMeasure.uniform(g), g.points) == 0

    def test_hand_dot(self):
        g = grid(0, 4)
        assert expectation(DiscreteMeasure(g, [0.25, 0.75]), g.points) == 3.0

    def test_misaligned(self):
        with pytest.raises(AlignmentError):
            expectation(DiscreteMeasure.uniform(grid(0, 1)), [1, 2, 3])


class TestMembership:
    def setup_method(self):
        self.g = grid(-1, 0, 1)
        x = self.g.points
        self.H = hyp(self.g, x, -x, x**2 - 1)

    def test_two_point_member(self):
        assert membership(DiscreteMeasure(self.g, [0.5, 0, 0.5]), self.H)

    def test_dirac_one_not_member(self):
        assert not membership(DiscreteMeasure.dirac(self.g, 2), self.H)

    def test_zero_constraint(self):
        H0 = hyp(self.g, np.zeros(3))
        assert membership(DiscreteMeasure(self.g, [0.2, 0.3, 0.5]), H0)

    def test_grid_mismatch(self):
        with pytest.raises(AlignmentError):
            membership(DiscreteMeasure.uniform(grid(0, 1, 2)), self.H)


class TestNegligible:
    def test_mean_var_none(self):
        g = grid(-2, -1, 0, 1, 2)
        assert negligible_points(builtin_constraints("mean_var", {"sigma": 1}, g)) == frozenset()

    def test_empty_hypothesis_all(self):
        g = grid(0, 1, 2)
        x = g.points
        H = hyp(g, x - 3, 3 - x)
        assert is_empty(H)
        assert negligible_points(H) == frozenset({0, 1, 2})

    def test_indicator_point(self):
        g = grid(0, 1)
        assert negligible_points(hyp(g, [1.0, 0.0])) == frozenset({0})


def test_evariable_cap_and_sign():
    g = grid(0, 1)
    h = EVariable(g, [1.0, 1e301])
    assert h.capped and h.values[1] == VALUE_CAP
    with pytest.raises(ValueError):
        EVariable(g, [-1.0, 0.0])


def test_problem_json_round_trip():
    doc = {"grid": [0.0, 0.5, 1.0], "constraints": [{"kind": "bounded_mean", "params": {"m": 0.5}},
                                                    {"values": [1.0, 0.0, -1.0]}],
           "weights": [0.25, 0.5, 0.25]}
    g, H, mu = problem_from_json(doc)
    back = problem_to_json(g, H, mu)
    g2, H2, mu2 = problem_from_json(json.loads(json.dumps(back)))
    np.testing.assert_array_equal(H.matrix, H2.matrix)
    np.testing.assert_array_equal(mu.weights, mu2.weights)


weights = st.lists(st.floats(0.01, 10), min_size=2, max_size=8)


@given(weights, st.floats(-1e3, 1e3))
def test_constant_expectation(w, c):
    w = np.array(w) / np.sum(w)
    g = SampleGrid(np.arange(len(w), dtype=float))
    assert abs(expectation(DiscreteMeasure(g, w), np.full(len(w), c)) - c) <= 1e-12 * max(1, abs(c))


@given(weights, st.floats(0, 1e-3), st.floats(0, 1e-3), st.integers(0, 2**32 - 1))
def test_membership_monotone_in_tol(w, t1, dt, seed):
    w = np.array(w) / np.sum(w)
    g = SampleGrid(np.arange(len(w), dtype=float))
    rows = np.random.default_rng(seed).standard_normal((2, len(w))) * 1e-3
    H = hyp(g, *rows)
    mu = DiscreteMeasure(g, w)
    if membership(mu, H, t1):
        assert membership(mu, H, t1 + dt)


@settings(max_examples=30, deadline=None)
@given(weights, st.integers(0, 2**32 - 1))
def test_full_support_member_means_no_negligible(w, seed):
    w = np.array(w) / np.sum(w)
    g = SampleGrid(np.arange(len(w), dtype=float))
    rng = np.random.default_rng(seed)
    rows = rng.standard_normal((3, len(w)))
    rows -= (rows @ w)[:, None] + rng.uniform(0, 1, (3, 1))   # make mu strictly feasible
    H = hyp(g, *rows)
    mu = DiscreteMeasure(g, w)
    assert membership(mu, H)
    assert negligible_points(H) == frozenset()
