import math

import numpy as np
import pytest

from concaveclf import comparison as cmp
from concaveclf.errors import ClassificationError, PreconditionError


def rational(sigma, k_min, k_max, ell):
    return cmp.RationalConcave(sigma, cmp.RationalFactorParams(k_min, k_max, ell))


class TestEvalAlpha:
    def test_linear(self):
        assert cmp.eval_alpha(cmp.Linear(3.0), 2.0) == 6.0

    def test_sqrt_cap(self):
        # 2*theta*sqrt(V) with theta = 1 at V = 100
        assert cmp.eval_alpha(cmp.SqrtComparison(2.0), 100.0) == pytest.approx(20.0)

    def test_zero_at_origin(self):
        fn = rational(3.0, 0.1, 2.3, 0.6923)
        assert cmp.eval_alpha(fn, 0.0) == 0.0

    def test_negative_level_rejected(self):
        with pytest.raises(PreconditionError):
            cmp.eval_alpha(cmp.Linear(1.0), -1.0)

    def test_vectorized(self):
        v = np.linspace(0.0, 5.0, 11)
        np.testing.assert_allclose(cmp.Linear(2.0).alpha(v), 2.0 * v)


class TestDynamicFactor:
    def test_linear_constant(self):
        for v in (0.0, 0.3, 7.0):
            assert cmp.dynamic_factor(cmp.Linear(3.0), v) == 3.0

    def test_rational_at_zero_is_kmax(self):
        assert cmp.dynamic_factor(rational(1.0, 0.1, 2.3, 1.0), 0.0) == pytest.approx(2.3)

    def test_rational_at_ell_is_mean(self):
        # s(ell) = (k_min + k_max)/2 by hand
        assert cmp.dynamic_factor(rational(1.0, 0.1, 2.3, 1.0), 1.0) == pytest.approx(1.2)

    def test_infinite_limit_sentinel(self):
        assert math.isinf(cmp.dynamic_factor(cmp.SqrtComparison(2.0), 0.0))
        assert math.isinf(cmp.dynamic_factor(cmp.PowerComparison(1.0, 0.5), 0.0))
        assert cmp.dynamic_factor(cmp.PowerComparison(2.5, 1.0), 0.0) == 2.5
        assert cmp.dynamic_factor(cmp.PowerComparison(1.0, 2.0), 0.0) == 0.0

    def test_tabulated_limit_unknown(self):
        fn = cmp.Tabulated([[1.0, 1.0], [2.0, 3.0]])
        with pytest.raises(PreconditionError):
            cmp.dynamic_factor(fn, 0.0)


class TestRationalFactor:
    def test_endpoints(self):
        p = cmp.RationalFactorParams(0.1, 2.3, 1.0)
        assert cmp.rational_factor(p, 0.0) == pytest.approx(2.3)
        assert cmp.rational_factor(p, 1e12) == pytest.approx(0.1, rel=1e-8)

    def test_hand_value(self):
        assert cmp.rational_factor(cmp.RationalFactorParams(0.0, 2.0, 1.0), 1.0) == 1.0

    def test_strictly_decreasing_and_bounded(self):
        p = cmp.RationalFactorParams(0.1, 2.3, 0.5)
        v = np.linspace(0.0, 50.0, 500)
        s = cmp.rational_factor(p, v)
        assert np.all(np.diff(s) < 0.0)
        assert np.all(s > p.k_min) and np.all(s <= p.k_max)

    def test_param_validation(self):
        with pytest.raises(PreconditionError):
            cmp.RationalFactorParams(2.0, 1.0, 1.0)
        with pytest.raises(PreconditionError):
            cmp.RationalFactorParams(0.1, 2.3, 0.0)
        # k_min = k_max degenerates to a constant factor and is allowed
        cmp.RationalFactorParams(1.0, 1.0, 1.0)


class TestPowerComposedFactor:
    def test_values(self):
        p = cmp.RationalFactorParams(0.1, 2.3, 1.0)
        assert cmp.power_composed_factor(p, 0.5, 0.0) == pytest.approx(2.3)
        assert cmp.power_composed_factor(p, 0.5, 1.0) == pytest.approx(1.2)
        assert cmp.power_composed_factor(p, 0.5, 4.0) == pytest.approx((0.2 + 2.3) / 3.0)

    def test_exponent_range(self):
        p = cmp.RationalFactorParams(0.1, 2.3, 1.0)
        for bad in (0.0, 1.0, 1.5, -0.2):
            with pytest.raises(PreconditionError):
                cmp.power_composed_factor(p, bad, 1.0)


class TestMakeConcave:
    def test_composition_consistency(self):
        p = cmp.RationalFactorParams(0.1, 2.3, 0.6923)
        fn = cmp.make_concave_comparison(3.0, p)
        for v in np.linspace(0.1, 10.0, 10):
            assert fn.alpha(v) == pytest.approx(cmp.rational_factor(p, v) * 3.0 * v)

    def test_lipschitz_slope_bound(self):
        p = cmp.RationalFactorParams(0.1, 2.3, 0.6923)
        fn = cmp.make_concave_comparison(3.0, p)
        v = np.linspace(0.0, 10.0, 4001)
        slopes = np.abs(np.diff(fn.alpha(v)) / np.diff(v))
        assert np.max(slopes) <= 3.0 * 2.3 + 1e-9

    def test_degenerate_equals_linear(self):
        fn = cmp.make_concave_comparison(3.0, cmp.RationalFactorParams(1.0, 1.0, 1.0))
        lin = cmp.Linear(3.0)
        v = np.linspace(0.0, 20.0, 100)
        np.testing.assert_allclose(fn.alpha(v), lin.alpha(v), rtol=1e-14)

    def test_power_composed_kind(self):
        p = cmp.RationalFactorParams(0.1, 2.3, 1.0)
        fn = cmp.make_concave_comparison(2.0, p, p=0.5)
        assert isinstance(fn, cmp.PowerComposedRational)
        assert fn.alpha(4.0) == pytest.approx((0.2 + 2.3) / 3.0 * 2.0 * 4.0)


class TestNormalizedConcave:
    def test_endpoint_exact(self):
        template = rational(1.0, 0.1, 2.3, 1.0)
        for c, r, sigma in [(1.0, 0.9, 3.0), (4.5, 0.6, 2.0), (0.3, 1.0, 5.0)]:
            fn = cmp.normalized_concave(template, c, r, sigma)
            assert fn.alpha(c) == pytest.approx(r * sigma * c, rel=1e-12)

    def test_hand_value(self):
        fn = cmp.normalized_concave(rational(1.0, 0.1, 2.3, 1.0), 1.0, 0.9, 3.0)
        assert fn.alpha(1.0) == pytest.approx(2.7)

    def test_constant_template_gives_linear(self):
        fn = cmp.normalized_concave(cmp.Linear(4.0), 2.0, 1.0, 3.0)
        v = np.linspace(0.0, 2.0, 50)
        np.testing.assert_allclose(fn.alpha(v), 3.0 * v, rtol=1e-14)

    def test_nonpositive_template_rejected(self):
        with pytest.raises(PreconditionError):
            cmp.normalized_concave(lambda y: -1.0, 1.0, 0.9, 3.0)


LIBRARY = [
    cmp.Linear(3.0),
    cmp.SqrtComparison(2.0),
    cmp.PowerComparison(0.7, 1.8),
    rational(3.0, 0.1, 2.3, 0.6923),
    cmp.PowerComposedRational(2.0, cmp.RationalFactorParams(0.1, 2.3, 1.0), 0.5),
    cmp.Tabulated([[0.5, 0.4], [1.0, 1.1], [2.0, 1.9], [5.0, 3.7]]),
    cmp.NormalizedConcave(rational(1.0, 0.1, 2.3, 1.0), 2.0, 0.8, 3.0),
]


class TestClassKInvariants:
    @pytest.mark.parametrize("fn", LIBRARY, ids=lambda f: type(f).__name__)
    def test_zero_and_strictly_increasing(self, fn):
        grid = np.linspace(0.0, 5.0, 1000)
        vals = np.asarray(fn.alpha(grid))
        assert vals[0] == 0.0
        assert np.all(np.diff(vals) > 0.0)
        assert np.all(vals[1:] > 0.0)

    def test_factor_monotonicity_by_shape(self):
        grid = np.linspace(0.01, 5.0, 400)
        assert np.ptp(cmp.Linear(3.0).factor(grid)) < 1e-12
        assert np.all(np.diff(rational(3.0, 0.1, 2.3, 1.0).factor(grid)) < 0.0)
        assert np.all(np.diff(
            cmp.PowerComposedRational(2.0, cmp.RationalFactorParams(0.1, 2.3, 1.0),
                                      0.5).factor(grid)) < 0.0)
        assert np.all(np.diff(cmp.PowerComparison(1.0, 2.0).factor(grid)) > 0.0)

    def test_rational_product_concavity(self):
        # second central differences of v*s(v) and v*s(v^p) stay negative
        p = cmp.RationalFactorParams(0.1, 2.3, 0.7)
        for fn in (rational(1.0, 0.1, 2.3, 0.7),
                   cmp.PowerComposedRational(1.0, p, 0.5)):
            v = np.linspace(1e-3, 30.0, 2000)
            a = np.asarray(fn.alpha(v))
            d2 = a[2:] - 2.0 * a[1:-1] + a[:-2]
            assert np.all(d2 < 0.0)


class TestClassifyShape:
    def test_linear(self):
        assert cmp.classify_shape(cmp.Linear(3.0), (0.01, 1.0)).kind == cmp.LINEAR_SHAPE

    def test_rational_concave(self):
        fn = rational(3.0, 0.1, 2.3, 0.69)
        assert cmp.classify_shape(fn, (0.01, 1.0)).kind == cmp.CONCAVE_SHAPE

    def test_power_convex(self):
        fn = cmp.PowerComparison(1.0, 2.0)
        assert cmp.classify_shape(fn, (0.01, 1.0)).kind == cmp.CONVEX_SHAPE

    def test_degenerate_rational_is_linear(self):
        fn = rational(3.0, 1.0, 1.0, 1.0)
        assert cmp.classify_shape(fn, (0.01, 1.0)).kind == cmp.LINEAR_SHAPE

    def test_mixed_segments(self):
        # concave then convex sample curve
        v = np.linspace(0.0, 2.0, 41)[1:]
        a = np.where(v < 1.0, np.sqrt(v), 1.0 + (v - 1.0) ** 2 + (v - 1.0))
        fn = cmp.Tabulated(np.column_stack([v, a]))
        shape = cmp.classify_shape(fn, (0.05, 2.0), grid_size=64)
        assert shape.kind == cmp.MIXED_SHAPE
        kinds = {seg[2] for seg in shape.segments}
        assert cmp.CONCAVE_SHAPE in kinds and cmp.CONVEX_SHAPE in kinds

    def test_grid_size_precondition(self):
        with pytest.raises(PreconditionError):
            cmp.classify_shape(cmp.Linear(1.0), (0.01, 1.0), grid_size=8)

    def test_contradiction_raises(self):
        class Lying(cmp.Linear):
            def factor(self, v):
                return np.asarray(v) * 0.0 + np.linspace(1.0, 2.0, np.size(v))

        with pytest.raises(ClassificationError) as err:
            cmp.classify_shape(Lying(3.0), (0.01, 1.0))
        assert err.value.diagnostics["kind"] == cmp.LINEAR_SHAPE


class TestSerialization:
    @pytest.mark.parametrize("fn", LIBRARY, ids=lambda f: type(f).__name__)
    def test_round_trip(self, fn):
        clone = cmp.from_dict(fn.to_dict())
        v = np.linspace(0.0, 3.0, 50)
        np.testing.assert_allclose(np.asarray(clone.alpha(v)), np.asarray(fn.alpha(v)),
                                   rtol=1e-14)

    def test_unknown_kind(self):
        with pytest.raises(PreconditionError):
            cmp.from_dict({"kind": "mystery"})
