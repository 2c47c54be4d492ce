import math

import numpy as np
import pytest

from concaveclf import comparison as cmp
from concaveclf import windowed as wd
from concaveclf.errors import IntegrabilityError, PreconditionError
from concaveclf.tuning import closed_form_rate, normalize_ell


def rational(sigma, k_min, k_max, ell):
    return cmp.RationalConcave(sigma, cmp.RationalFactorParams(k_min, k_max, ell))


def scaled_sqrt_to_endpoint(c, target):
    # coeff*sqrt(c) = target
    return cmp.SqrtComparison(target / math.sqrt(c))


def scaled_power_to_endpoint(c, target, p):
    return cmp.PowerComparison(target / c ** p, p)


class TestWindow:
    def test_validation(self):
        with pytest.raises(PreconditionError):
            wd.Window(1.0, 1.0)
        with pytest.raises(PreconditionError):
            wd.Window(-0.1, 1.0)

    def test_log_span(self):
        assert wd.Window(0.01, 1.0).log_span == pytest.approx(math.log(100.0))


class TestCrossingTime:
    def test_linear_table_row(self):
        # sigma = 3 over two decades: ln(100)/3 = 1.535
        T = wd.crossing_time(cmp.Linear(3.0), wd.Window(0.01, 1.0))
        assert T == pytest.approx(math.log(100.0) / 3.0, rel=1e-12)
        assert T == pytest.approx(1.535, rel=1e-3)

    def test_sqrt_closed_antiderivative(self):
        T = wd.crossing_time(cmp.SqrtComparison(2.0), wd.Window(1e-4, 100.0))
        assert T == pytest.approx(9.99, rel=1e-10)

    def test_rational_matches_closed_form(self):
        ell = normalize_ell(0.1, 2.3, 1.0, 1.0)
        w = wd.Window(0.01, 1.0)
        fn = rational(3.0, 0.1, 2.3, ell)
        sigma_q = wd.nominal_rate(fn, w)
        sigma_c = closed_form_rate(0.1, 2.3, ell, 3.0, w)
        assert sigma_q == pytest.approx(sigma_c, rel=1e-8)

    def test_vanishing_alpha_rejected(self):
        class Shifted(cmp.ComparisonFn):
            def alpha(self, v):
                return np.asarray(v) - 0.5

        with pytest.raises(IntegrabilityError):
            wd.crossing_time(Shifted(), wd.Window(0.1, 1.0))


class TestNominalRate:
    def test_linear_rate_is_sigma(self):
        for w in (wd.Window(0.01, 1.0), wd.Window(1e-5, 30.0)):
            assert wd.nominal_rate(cmp.Linear(3.0), w) == pytest.approx(3.0, rel=1e-12)

    def test_integrator_cap_rate(self):
        sig = wd.nominal_rate(cmp.SqrtComparison(2.0), wd.Window(1e-4, 100.0))
        assert sig == pytest.approx(1.382, rel=1e-3)

    def test_power_closed_antiderivative(self):
        sig = wd.nominal_rate(cmp.PowerComparison(1.0, 2.0), wd.Window(0.01, 1.0))
        assert sig == pytest.approx(math.log(100.0) / 99.0, rel=1e-10)
        assert sig == pytest.approx(0.04652, rel=1e-3)

    def test_report_identity(self):
        w = wd.Window(0.003, 2.0)
        rep = wd.rate_report(rational(2.0, 0.2, 3.0, 0.5), w)
        assert rep.nominal_rate * rep.crossing_time == pytest.approx(w.log_span, rel=1e-12)


class TestComposeRates:
    def test_equal_rates(self):
        assert wd.compose_rates(3.0, 3.0, 0.01, 0.5, 2.0) == pytest.approx(3.0)

    def test_hand_value(self):
        assert wd.compose_rates(4.0, 2.0, 0.01, 1.0, 100.0) == pytest.approx(8.0 / 3.0)

    def test_ordering_violation(self):
        with pytest.raises(PreconditionError):
            wd.compose_rates(1.0, 1.0, 0.5, 0.1, 1.0)

    @pytest.mark.parametrize("fn", [cmp.Linear(2.0), rational(3.0, 0.1, 2.3, 0.5),
                                    cmp.SqrtComparison(1.5)],
                             ids=lambda f: type(f).__name__)
    def test_consistency_with_quadrature(self, fn):
        eps, c0, c = 0.02, 0.7, 5.0
        s1 = wd.nominal_rate(fn, wd.Window(eps, c0))
        s2 = wd.nominal_rate(fn, wd.Window(c0, c))
        s = wd.nominal_rate(fn, wd.Window(eps, c))
        assert wd.compose_rates(s1, s2, eps, c0, c) == pytest.approx(s, abs=1e-10)

    def test_additivity_and_harmonic_identity(self):
        rng = np.random.default_rng(7)
        fn = rational(2.5, 0.15, 3.1, 0.4)
        for _ in range(25):
            eps = rng.uniform(1e-4, 1e-2)
            c0 = rng.uniform(0.1, 1.0)
            c = rng.uniform(2.0, 50.0)
            T = wd.crossing_time(fn, wd.Window(eps, c))
            T1 = wd.crossing_time(fn, wd.Window(eps, c0))
            T2 = wd.crossing_time(fn, wd.Window(c0, c))
            assert T == pytest.approx(T1 + T2, abs=1e-10)
            lam = math.log(c / c0) / math.log(c / eps)
            s, s1, s2 = (math.log(c / eps) / T, math.log(c0 / eps) / T1,
                         math.log(c / c0) / T2)
            assert 1.0 / s == pytest.approx((1.0 - lam) / s1 + lam / s2, abs=1e-10)
            assert min(s1, s2) - 1e-12 <= s <= max(s1, s2) + 1e-12


class TestRelaxationRatio:
    def test_linear_is_one(self):
        assert wd.relaxation_ratio(cmp.Linear(5.0), wd.Window(0.01, 2.0)) == \
            pytest.approx(1.0, rel=1e-12)

    def test_integrator_value(self):
        r = wd.relaxation_ratio(cmp.SqrtComparison(2.0), wd.Window(1e-4, 100.0))
        assert r == pytest.approx(0.145, rel=5e-3)

    def test_convex_above_one(self):
        assert wd.relaxation_ratio(cmp.PowerComparison(1.0, 2.0), wd.Window(0.01, 1.0)) > 1.0

    def test_scale_invariance(self):
        w = wd.Window(0.03, 4.0)
        base = rational(2.0, 0.1, 2.3, 0.7)
        r0 = wd.relaxation_ratio(base, w)
        s0 = wd.nominal_rate(base, w)
        for k in (0.1, 1.0, 10.0):
            fk = rational(2.0 * k, 0.1, 2.3, 0.7)  # k*alpha via the sigma factor
            assert wd.relaxation_ratio(fk, w) == pytest.approx(r0, rel=1e-10)
            assert wd.nominal_rate(fk, w) == pytest.approx(k * s0, rel=1e-10)


class TestVerifyOrdering:
    def test_matched_triple(self):
        c = 1.0
        lin = cmp.Linear(3.0)
        cave = scaled_sqrt_to_endpoint(c, 3.0 * c)
        vex = scaled_power_to_endpoint(c, 3.0 * c, 2.0)
        verdict = wd.verify_ordering(cave, lin, vex, wd.Window(0.01, c))
        assert verdict.ok
        assert verdict.sigma_vex < verdict.sigma_lin < verdict.sigma_cave

    def test_tie_diagnostic(self):
        lin = cmp.Linear(3.0)
        degenerate = rational(3.0, 1.0, 1.0, 1.0)
        vex = scaled_power_to_endpoint(1.0, 3.0, 2.0)
        verdict = wd.verify_ordering(degenerate, lin, vex, wd.Window(0.01, 1.0))
        assert not verdict.ok
        assert verdict.note == "tie"

    def test_endpoint_mismatch_rejected(self):
        with pytest.raises(PreconditionError):
            wd.verify_ordering(cmp.SqrtComparison(1.0), cmp.Linear(3.0),
                               cmp.PowerComparison(3.0, 2.0), wd.Window(0.01, 1.0))

    def test_randomized_triples(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            c = rng.uniform(0.5, 20.0)
            sigma = rng.uniform(0.5, 5.0)
            target = sigma * c
            kind = rng.integers(0, 2)
            if kind == 0:
                cave = scaled_sqrt_to_endpoint(c, target)
            else:
                k_min = rng.uniform(0.0, 0.8)
                k_max = rng.uniform(1.2, 6.0)
                ell = rng.uniform(0.05, 2.0) * c
                base = cmp.RationalFactorParams(k_min, k_max, ell)
                s_c = cmp.rational_factor(base, c)
                cave = rational(sigma / s_c, k_min, k_max, ell)
            vex = scaled_power_to_endpoint(c, target, rng.uniform(1.3, 3.0))
            verdict = wd.verify_ordering(cave, cmp.Linear(sigma), vex,
                                         wd.Window(c * 10 ** -rng.uniform(1.0, 4.0), c))
            assert verdict.ok


class TestDetectConcaveSubinterval:
    def test_linear_none(self):
        assert wd.detect_concave_subinterval(cmp.Linear(2.0), wd.Window(0.01, 1.0)) is None

    def test_rational_whole_window(self):
        fn = rational(3.0, 0.1, 2.3, 0.69)
        w = wd.Window(0.01, 1.0)
        lo, hi = wd.detect_concave_subinterval(fn, w)
        assert hi - lo >= 0.9 * w.c

    def test_mixed_tabulated(self):
        # concave head, convex tail, relaxation ratio below one
        v = np.linspace(0.0, 2.0, 81)[1:]
        a = np.where(v < 1.2, np.sqrt(v / 1.2) * 1.2, v + 0.02 * (v - 1.2) ** 2)
        fn = cmp.Tabulated(np.column_stack([v, a]))
        w = wd.Window(0.02, 2.0)
        assert wd.relaxation_ratio(fn, w) < 1.0
        seg = wd.detect_concave_subinterval(fn, w, grid_size=256)
        assert seg is not None
        lo, hi = seg
        # brute-force curvature scan agrees on that subinterval
        grid = np.linspace(lo, hi, 64)
        av = np.asarray(fn.alpha(grid))
        assert np.all(av[2:] - 2.0 * av[1:-1] + av[:-2] <= 1e-12)

    def test_grid_precondition(self):
        with pytest.raises(PreconditionError):
            wd.detect_concave_subinterval(cmp.Linear(1.0), wd.Window(0.1, 1.0), 32)


class TestRelaxedEndpointAcceleration:
    def test_small_eps_beats_baseline(self):
        # alpha(c) < sigma*c yet the windowed rate exceeds sigma for small eps
        sigma, c = 3.0, 1.0
        fn = cmp.normalized_concave(rational(1.0, 0.05, 2.5, 0.3), c, 0.9, sigma)
        assert fn.alpha(c) < sigma * c
        found = None
        eps = 0.3 * c
        for _ in range(40):
            if wd.nominal_rate(fn, wd.Window(eps, c)) > sigma:
                found = eps
                break
            eps /= 2.0
        assert found is not None
        # and it keeps holding below the sweep-found threshold
        assert wd.nominal_rate(fn, wd.Window(found / 4.0, c)) > sigma
