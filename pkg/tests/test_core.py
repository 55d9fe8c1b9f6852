import numpy as np
import pytest
from fractions import Fraction
from hypothesis import given, settings, strategies as st

from fprates.core import (
    ContractionProblem,
    ControlSchedule,
    DimensionError,
    NotContractiveError,
    affine_fixed_point,
    apply_map,
    contraction_violation,
    cosine_problem,
    make_affine_contraction,
    norm,
    schedule_eval,
    standard_problem,
)


@pytest.fixture
def std():
    return standard_problem()


class TestApplyMap:
    def test_values(self, std):
        assert apply_map(std, [0.0])[0] == 1.0
        assert apply_map(std, [2.0])[0] == 2.0

    def test_contraction_equality_for_affine(self, std):
        lhs = abs(apply_map(std, [4.0])[0] - apply_map(std, [0.0])[0])
        assert lhs == 2.0 == 0.5 * 4.0

    def test_dimension_mismatch(self, std):
        with pytest.raises(DimensionError):
            apply_map(std, [1.0, 2.0])

    @pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
    def test_non_finite(self, std, bad):
        with pytest.raises(ValueError):
            apply_map(std, [bad])

    def test_deterministic(self, std):
        assert np.array_equal(apply_map(std, [0.3]), apply_map(std, [0.3]))


class TestAffine:
    def test_scalar(self):
        p = make_affine_contraction([[0.5]], [1.0])
        assert p.delta == 0.5
        assert p.known_fixed_point[0] == 2.0

    def test_diagonal(self):
        p = make_affine_contraction([[0.3, 0.0], [0.0, 0.4]], [7.0, 6.0])
        np.testing.assert_allclose(p.known_fixed_point, [10.0, 10.0], rtol=1e-14)
        assert p.delta == pytest.approx(0.4, rel=1e-14)

    def test_near_one(self):
        p = make_affine_contraction([[0.999]], [1.0])
        assert p.delta == 0.999
        assert p.known_fixed_point[0] == pytest.approx(1000.0, rel=1e-12)

    @pytest.mark.parametrize("a", [[[1.0]], [[-1.2]], [[0.6, 0.6], [0.6, 0.6]]])
    def test_norm_at_least_one_rejected(self, a):
        with pytest.raises(NotContractiveError, match="operator norm"):
            make_affine_contraction(a, [1.0] * len(a))

    def test_fixed_point_zero_matrix(self):
        np.testing.assert_array_equal(affine_fixed_point(np.zeros((2, 2)), [3.0, 4.0]), [3.0, 4.0])

    def test_fixed_point_symmetric_2x2(self):
        # exact solve: x = 0.2 y + 1, y = 0.2 x + 1  ->  x = y = 1 / 0.8
        exact = Fraction(1) / (1 - Fraction(1, 5))
        assert exact == Fraction(5, 4)
        np.testing.assert_allclose(affine_fixed_point([[0, 0.2], [0.2, 0]], [1, 1]), [1.25, 1.25], rtol=1e-15)

    def test_fixed_point_rejects_expansive(self):
        with pytest.raises(NotContractiveError):
            affine_fixed_point([[2.0]], [1.0])

    def test_operator_norm_matches_power_iteration(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((5, 5))
        a *= 0.8 / np.linalg.norm(a, 2)
        v = np.ones(5)
        for _ in range(2000):
            v = a.T @ (a @ v)
            v /= np.linalg.norm(v)
        power = np.sqrt(v @ (a.T @ (a @ v)))
        assert make_affine_contraction(a, np.ones(5)).delta == pytest.approx(power, rel=1e-12)

    def test_declared_fixed_point_is_validated(self):
        with pytest.raises(ValueError, match="fixed point"):
            ContractionProblem(lambda x: 0.5 * x, 0.5, 1, known_fixed_point=np.array([1.0]))

    def test_delta_range(self):
        with pytest.raises(NotContractiveError):
            ContractionProblem(lambda x: x, 1.0, 1)


@settings(max_examples=25, deadline=None)
@given(
    d=st.integers(1, 4),
    scale=st.floats(0.05, 0.95),
    seed=st.integers(0, 2**16),
)
def test_random_affine_contracts_and_fixes(d, scale, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((d, d))
    a *= scale / np.linalg.norm(a, 2)
    p = make_affine_contraction(a, rng.standard_normal(d) * 5)
    assert contraction_violation(p, n_pairs=1000, seed=seed) <= 1e-12
    x = p.known_fixed_point
    assert norm(apply_map(p, x) - x) <= 1e-12 * max(1.0, norm(x))


class TestCosine:
    def test_fixed_point(self):
        p = cosine_problem()
        x = p.known_fixed_point[0]
        assert abs(0.5 * np.cos(x) - x) <= 1e-14
        assert p.delta == 0.5

    def test_sampled_contraction(self):
        assert contraction_violation(cosine_problem(3), n_pairs=1000) <= 1e-12


class TestSchedule:
    def test_constant(self):
        assert schedule_eval(ControlSchedule.constant(0.5, 0.5, 0.5), 7) == (0.5, 0.5, 0.5)

    def test_harmonic_start(self):
        assert schedule_eval(ControlSchedule("harmonic"), 0) == (1.0, 1.0, 1.0)

    def test_harmonic_complement_start(self):
        assert schedule_eval(ControlSchedule("harmonic-complement"), 0) == (0.5, 0.5, 0.5)

    def test_flags(self):
        assert ControlSchedule.constant(0.3).first_series_diverges
        assert not ControlSchedule.constant(0.0, 0.5, 0.5).first_series_diverges
        assert ControlSchedule("harmonic").first_series_diverges
        assert ControlSchedule("harmonic").bounded_below() == (False, False, False)
        assert ControlSchedule("harmonic-complement").bounded_below() == (True, True, True)

    def test_partial_sums(self):
        h = ControlSchedule("harmonic")
        assert h.partial_sum(3) == pytest.approx(1 + 1 / 2 + 1 / 3 + 1 / 4, rel=1e-15)
        hc = ControlSchedule("harmonic-complement")
        assert hc.partial_sum(2) == pytest.approx(1 / 2 + 2 / 3 + 3 / 4, rel=1e-15)
        assert ControlSchedule.constant(0.25).partial_sum(9) == 2.5

    def test_parameters_validated(self):
        with pytest.raises(ValueError):
            ControlSchedule.constant(1.5)
        with pytest.raises(ValueError):
            ControlSchedule("geometric")

    @given(n=st.integers(0, 10**6), family=st.sampled_from(["constant", "harmonic", "harmonic-complement"]),
           params=st.tuples(*[st.floats(0, 1)] * 3))
    def test_values_in_unit_interval(self, n, family, params):
        vals = schedule_eval(ControlSchedule(family, params), n)
        assert all(0.0 <= v <= 1.0 for v in vals)

    @given(n=st.integers(0, 10**6), params=st.tuples(*[st.floats(0, 1)] * 3))
    def test_constant_is_n_independent(self, n, params):
        s = ControlSchedule("constant", params)
        assert schedule_eval(s, n) == schedule_eval(s, 0)
