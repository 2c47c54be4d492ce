import math

import numpy as np
import pytest
from oracles import pg_qp_oracle

from concaveclf import comparison as cmp
from concaveclf import qp
from concaveclf.errors import InfeasibleError, PreconditionError
from concaveclf.plant import get_plant, single_integrator_model


def random_problem(rng):
    """Random small instance mixing slack/rate variables and active boxes."""
    m = int(rng.integers(1, 7))
    A = rng.normal(size=(m, m))
    H = A @ A.T + np.diag(rng.uniform(0.3, 3.0, m))
    a = rng.normal(size=m)
    b = rng.normal(scale=3.0)
    theta = rng.uniform(0.2, 3.0)
    kind = rng.integers(0, 3)
    if kind == 0:
        return qp.QpProblem(H=H, a=a, b=b, theta=theta)
    if kind == 1:
        return qp.QpProblem(H=H, a=a, b=b, theta=theta, q=10.0 ** rng.uniform(0, 4))
    return qp.QpProblem(H=H, a=a, b=b, theta=theta,
                        sigma_bounds=(0.1, rng.uniform(1.0, 8.0)),
                        sigma_weight=rng.uniform(0.1, 0.9),
                        sigma_target=rng.uniform(1.0, 8.0),
                        sigma_coeff=rng.uniform(0.1, 4.0))


class TestSolveSmallQp:
    def test_unconstrained_optimum_is_zero(self):
        sol = qp.solve_small_qp(qp.QpProblem(H=np.eye(2), a=np.array([1.0, 0.0]),
                                             b=-5.0, theta=4.0))
        np.testing.assert_allclose(sol.u, 0.0, atol=1e-12)
        assert sol.status == qp.OPTIMAL

    def test_hand_kkt_1d(self):
        # min u^2 s.t. 2u + 3 <= 0, |u| <= 10  ->  u = -1.5
        sol = qp.solve_small_qp(qp.QpProblem(H=[[1.0]], a=[2.0], b=3.0, theta=10.0))
        assert sol.u[0] == pytest.approx(-1.5, abs=1e-10)
        assert "ineq" in sol.active_set

    def test_box_active(self):
        sol = qp.solve_small_qp(qp.QpProblem(H=[[1.0]], a=[2.0], b=3.0, theta=1.0))
        assert sol.status == qp.INFEASIBLE  # 2u+3 <= 0 needs u <= -1.5

    def test_infeasible_hard(self):
        p = qp.QpProblem(H=np.eye(2), a=np.array([1.0, 1.0]), b=10.0, theta=1.0)
        assert qp.solve_small_qp(p).status == qp.INFEASIBLE

    def test_dimension_cap(self):
        with pytest.raises(PreconditionError):
            qp.QpProblem(H=np.eye(9), a=np.zeros(9), b=0.0, theta=1.0)

    def test_random_instances_match_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(60):
            p = random_problem(rng)
            Hz, gz, az, bub, lo, hi = qp.assemble(p)
            sol = qp.solve_small_qp(p)
            if sol.status == qp.INFEASIBLE:
                # no box point satisfies the inequality; verify via the vertex
                vert = np.where(az > 0, lo, np.where(az < 0, hi, 0.0))
                vert = np.where(np.isfinite(vert), vert, 0.0)
                assert az @ vert > bub
                continue
            assert sol.status == qp.OPTIMAL
            assert sol.kkt_residual <= 1e-8
            zstar, ref = pg_qp_oracle(Hz, gz, az, bub, lo, hi)
            got = 0.5 * np.concatenate([sol.u, [sol.delta] if p.q is not None else [],
                                        [sol.sigma_star] if p.sigma_bounds else []]) \
                .__matmul__(Hz @ np.concatenate(
                    [sol.u, [sol.delta] if p.q is not None else [],
                     [sol.sigma_star] if p.sigma_bounds else []])) \
                + gz @ np.concatenate([sol.u, [sol.delta] if p.q is not None else [],
                                       [sol.sigma_star] if p.sigma_bounds else []])
            assert got <= ref + 1e-7 * (1.0 + abs(ref))
            assert got >= ref - 1e-7 * (1.0 + abs(ref))


class TestMiniNorm:
    def test_zero_when_decaying(self):
        integ = single_integrator_model(1.0)
        fn = cmp.Linear(2.0)

        class Damped:
            n, m = 1, 1
            V = staticmethod(integ.V)
            LgV = staticmethod(integ.LgV)
            LfV = staticmethod(lambda x: -10.0 * float(x[0] * x[0]))

        assert np.all(qp.mini_norm(Damped, np.array([0.5]), fn) == 0.0)

    def test_integrator_closed_form(self):
        integ = single_integrator_model(1.0)
        fn = cmp.Linear(3.0)
        for x in (0.5, -2.0, 7.0):
            u = qp.mini_norm(integ, np.array([x]), fn)
            assert u[0] == pytest.approx(-3.0 * x / 2.0, rel=1e-12)

    def test_zero_gradient_infeasible(self):
        integ = single_integrator_model(1.0)

        class Stuck:
            n, m = 1, 1
            V = staticmethod(lambda x: 1.0)
            LgV = staticmethod(lambda x: np.zeros(1))
            LfV = staticmethod(lambda x: 0.0)

        with pytest.raises(InfeasibleError):
            qp.mini_norm(Stuck, np.array([1.0]), cmp.Linear(1.0))

    def test_agrees_with_qp_at_large_theta(self):
        pend = get_plant("pendulum")
        fn = cmp.Linear(3.0)
        rng = np.random.default_rng(0)
        for _ in range(100):
            x = rng.uniform(-0.8, 0.8, size=2)
            u_closed = qp.mini_norm(pend, x, fn)
            sol = qp.clf_qp_hard(pend, x, fn, theta=1e6)
            assert sol.status == qp.OPTIMAL
            np.testing.assert_allclose(u_closed, sol.u, rtol=1e-8, atol=1e-8)


class TestHardQp:
    def test_feasible_iff_cap_holds(self):
        pend = get_plant("pendulum")
        from concaveclf.actuation import pointwise_decay_cap

        rng = np.random.default_rng(1)
        theta = 10.0
        seen = {True: 0, False: 0}
        for _ in range(200):
            x = rng.uniform([-1.0, -4.0], [1.0, 4.0])
            for sigma in (1.0, 30.0):
                fn = cmp.Linear(sigma)
                demand = float(fn.alpha(pend.V(x)))
                cap = pointwise_decay_cap(pend, x, theta)
                sol = qp.clf_qp_hard(pend, x, fn, theta)
                feasible = sol.status == qp.OPTIMAL
                assert feasible == (demand <= cap + 1e-9)
                seen[feasible] += 1
        assert min(seen.values()) > 10  # both branches exercised

    def test_infeasible_is_reported_not_raised(self):
        integ = single_integrator_model(1.0)
        sol = qp.clf_qp_hard(integ, np.array([9.0]), cmp.Linear(50.0), theta=1.0)
        assert sol.status == qp.INFEASIBLE


class TestSoftQp:
    def test_tiny_slack_when_hard_feasible(self):
        pend = get_plant("pendulum")
        x = pend.x0_protocol
        fn = cmp.Linear(3.0)
        sol = qp.clf_qp_soft(pend, x, fn, theta=10.0, q=1e5)
        b0 = pend.LfV(x) + float(fn.alpha(pend.V(x)))
        assert 0.0 < sol.delta <= 1e-4 * b0
        # naturally decaying state: zero demand, slack exactly zero
        calm = np.array([0.02, -0.08])
        assert pend.LfV(calm) + float(fn.alpha(pend.V(calm))) <= 0.0
        easy = qp.clf_qp_soft(pend, calm, fn, theta=10.0, q=1e5)
        assert easy.delta <= 1e-9
        assert easy.delta_reported == 0.0
        assert np.all(easy.u == 0.0)

    def test_closed_loop_inequality_holds(self):
        pend = get_plant("pendulum")
        fn = cmp.Linear(3.0)
        rng = np.random.default_rng(2)
        for _ in range(50):
            x = rng.uniform([-1.0, -4.0], [1.0, 4.0])
            sol = qp.clf_qp_soft(pend, x, fn, theta=10.0, q=1e5)
            lhs = pend.LfV(x) + float(pend.LgV(x) @ sol.u) + float(fn.alpha(pend.V(x)))
            assert lhs <= sol.delta + 1e-9

    def test_zero_theta_gives_positive_part(self):
        pend = get_plant("pendulum")
        x = pend.x0_protocol
        fn = cmp.Linear(3.0)
        sol = qp.clf_qp_soft(pend, x, fn, theta=0.0, q=1e9)
        b0 = pend.LfV(x) + float(fn.alpha(pend.V(x)))
        assert np.all(sol.u == 0.0)
        assert sol.delta == pytest.approx(max(b0, 0.0), rel=1e-6)

    def test_slack_monotone_in_theta(self):
        pend = get_plant("pendulum")
        fn = cmp.Linear(8.0)
        rng = np.random.default_rng(3)
        for _ in range(50):
            x = rng.uniform([-1.0, -4.0], [1.0, 4.0])
            deltas = [qp.clf_qp_soft(pend, x, fn, theta=th, q=1e4).delta
                      for th in (1.0, 3.0, 10.0)]
            assert deltas[0] >= deltas[1] - 1e-12 >= deltas[2] - 2e-12


class TestFlexibleQp:
    def test_kappa_limits(self):
        pend = get_plant("pendulum")
        x = np.array([0.6, -0.2])
        lo_k = qp.flexible_clf_qp(pend, x, 0.5, 8.0, kappa=1e-6, theta=1e6)
        assert lo_k.sigma_star == pytest.approx(0.5, abs=1e-4)
        hi_k = qp.flexible_clf_qp(pend, x, 0.5, 8.0, kappa=1.0 - 1e-6, theta=1e6)
        assert hi_k.sigma_star == pytest.approx(8.0, abs=1e-3)

    def test_constraint_active_and_bounds(self):
        pend = get_plant("pendulum")
        rng = np.random.default_rng(4)
        for _ in range(40):
            x = rng.uniform([-1.0, -3.0], [1.0, 3.0])
            sol = qp.flexible_clf_qp(pend, x, 0.29, 10.0, kappa=0.6, theta=10.0)
            if sol.status != qp.OPTIMAL:
                continue
            assert 0.29 - 1e-9 <= sol.sigma_star <= 10.0 + 1e-9
            lhs = pend.LfV(x) + float(pend.LgV(x) @ sol.u) + sol.sigma_star * pend.V(x)
            assert lhs <= 1e-8

    def test_parameter_validation(self):
        pend = get_plant("pendulum")
        with pytest.raises(PreconditionError):
            qp.flexible_clf_qp(pend, np.ones(2), 2.0, 1.0, 0.5, 1.0)
        with pytest.raises(PreconditionError):
            qp.flexible_clf_qp(pend, np.ones(2), 0.5, 1.0, 1.5, 1.0)
