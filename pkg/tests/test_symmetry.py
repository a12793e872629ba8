import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from evarkit import symmetry as Y
from evarkit.adversary import is_evar_on_grid
from evarkit.measure import DiscreteMeasure, EVariable, SampleGrid, expectation, membership

PAIRS = Y.product_grid([0, 1], 2)          # (0,0) (0,1) (1,0) (1,1)
S2 = Y.group_from_name("s2", PAIRS)


class TestGroup:
    def test_orders(self):
        g3 = Y.product_grid([-1, 0, 1], 3)
        assert Y.group_from_name("s3", g3).order == 6
        assert Y.group_from_name("cyclic:3", g3).order == 3
        assert Y.group_from_name("signs:3", g3).order == 8

    def test_not_closed(self):
        g = SampleGrid(np.arange(3.0))
        with pytest.raises(Y.GroupError):
            Y.FiniteGroupAction(g, (np.arange(3), np.array([1, 2, 0])))

    def test_not_bijection(self):
        with pytest.raises(Y.GroupError):
            Y.FiniteGroupAction(SampleGrid(np.arange(2.0)), (np.array([0, 0]),))

    def test_grid_not_closed_under_action(self):
        with pytest.raises(Y.GroupError):
            Y.group_from_name("signs:1", SampleGrid(np.array([0.0, 1.0])))

    def test_unknown(self):
        with pytest.raises(Y.GroupError):
            Y.group_from_name("so3", PAIRS)


class TestOrbitAverage:
    def test_first_coordinate(self):
        x = PAIRS.points
        np.testing.assert_allclose(Y.orbit_average(x[:, 0], S2), x.sum(axis=1) / 2)

    def test_constant(self):
        np.testing.assert_array_equal(Y.orbit_average(np.full(4, 3.5), S2), 3.5)

    def test_indicator(self):
        f = np.zeros(4)
        f[1] = 1.0
        np.testing.assert_allclose(Y.orbit_average(f, S2), [0, 0.5, 0.5, 0])


class TestSymmetrize:
    def test_invariant_fixed(self):
        mu = DiscreteMeasure(PAIRS, [0.1, 0.3, 0.3, 0.3])
        np.testing.assert_allclose(Y.symmetrize_measure(mu, S2).weights, mu.weights)

    def test_dirac(self):
        mu = DiscreteMeasure.dirac(PAIRS, 1)
        np.testing.assert_allclose(Y.symmetrize_measure(mu, S2).weights, [0, 0.5, 0.5, 0])

    def test_unit_mass_and_invariance(self):
        g = Y.product_grid([0, 1, 2], 3)
        G = Y.group_from_name("s3", g)
        mu = DiscreteMeasure(g, np.random.default_rng(0).dirichlet(np.ones(len(g))))
        nu = Y.symmetrize_measure(mu, G)
        assert nu.mass == pytest.approx(1.0, abs=1e-14)
        assert Y.is_invariant(nu, G)


class TestExactEvar:
    def test_invariant_f(self):
        np.testing.assert_array_equal(Y.exact_evar(PAIRS.points.sum(axis=1), S2).values, 1.0)

    def test_first_coordinate(self):
        x = PAIRS.points
        h = Y.exact_evar(x[:, 0], S2)
        np.testing.assert_allclose(h.values, 1 + (x[:, 0] - x[:, 1]) / 2)
        assert h.params["c"] == 1.0 and h.form == "symmetry"

    def test_rescaled(self):
        x = PAIRS.points
        h = Y.exact_evar(10 * x[:, 0], S2)
        assert h.params["c"] == pytest.approx(0.2)
        assert h.values.min() == pytest.approx(0.0)


class TestEnvelope:
    def test_one(self):
        e = Y.evar_upper_envelope(EVariable.constant(PAIRS, 1.0), S2)
        assert e.verdict == "e-variable"
        np.testing.assert_array_equal(e.f_pi, 0)
        np.testing.assert_array_equal(e.envelope.values, 1)

    def test_indicator_above_diagonal(self):
        x = PAIRS.points
        h = EVariable(PAIRS, 2.0 * (x[:, 0] > x[:, 1]))
        e = Y.evar_upper_envelope(h, S2)
        np.testing.assert_allclose(e.f_pi, [-1, 0, 0, -1])
        assert e.verdict == "e-variable"
        assert np.all(e.envelope.values >= h.values)

    def test_violated(self):
        e = Y.evar_upper_envelope(EVariable.constant(PAIRS, 1.1), S2)
        assert e.verdict == "violated"
        np.testing.assert_allclose(e.f_pi, 0.1)


class TestInvariance:
    def test_exchangeable_membership(self):
        H = Y.invariance_constraints(S2)
        rng = np.random.default_rng(5)
        for _ in range(100):
            mu = DiscreteMeasure(PAIRS, rng.dirichlet(np.ones(4)))
            if rng.random() < 0.5:
                mu = Y.symmetrize_measure(mu, S2)
            assert membership(mu, H) == Y.is_invariant(mu, S2, 1e-9)

    def test_non_separating_is_vacuous(self):
        H = Y.invariance_constraints(S2, separating=[np.ones(4)])
        assert np.all(H.matrix == 0)
        assert membership(DiscreteMeasure.dirac(PAIRS, 1), H)

    def test_trivial_group(self):
        H = Y.invariance_constraints(Y.FiniteGroupAction.trivial(PAIRS))
        assert np.all(H.matrix == 0)

    def test_generators_must_generate(self):
        g3 = Y.product_grid([0, 1], 3)
        G = Y.group_from_name("s3", g3)
        with pytest.raises(Y.GroupError, match="miss group element"):
            Y.invariance_constraints(G, generators=[G.generator_perms()[0]])


def _random_setup(rng):
    name, vals, d = [("s2", [0, 1], 2), ("s2", [0, 1, 2], 2), ("s3", [0, 1], 3),
                     ("cyclic:3", [0, 1], 3), ("signs:1", [-1, 0, 1], 1),
                     ("signs:2", [-1, 1], 2)][rng.integers(0, 6)]
    g = Y.product_grid(vals, d)
    return g, Y.group_from_name(name, g)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_adjoint_and_idempotence(seed):
    rng = np.random.default_rng(seed)
    g, G = _random_setup(rng)
    f = rng.standard_normal(len(g))
    mu = DiscreteMeasure(g, rng.dirichlet(np.ones(len(g))))
    fp = Y.orbit_average(f, G)
    assert abs(expectation(mu, fp) - expectation(Y.symmetrize_measure(mu, G), f)) <= 1e-12
    np.testing.assert_allclose(Y.orbit_average(fp, G), fp, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_exactness(seed):
    rng = np.random.default_rng(seed)
    g, G = _random_setup(rng)
    h = Y.exact_evar(rng.standard_normal(len(g)) * rng.choice([0.1, 1, 10]), G)
    mu = Y.symmetrize_measure(DiscreteMeasure(g, rng.dirichlet(np.ones(len(g)))), G)
    assert abs(expectation(mu, h) - 1) <= 1e-10


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_envelope_agrees_with_adversary(seed):
    rng = np.random.default_rng(seed)
    g, G = _random_setup(rng)
    if len(g) > 6:
        g = Y.product_grid([0, 1], 2)
        G = Y.group_from_name("s2", g)
    h = EVariable(g, rng.uniform(0, 2, len(g)))
    env = Y.evar_upper_envelope(h, G)
    H = Y.invariance_constraints(G)
    assert (env.verdict == "e-variable") == is_evar_on_grid(h, H)
