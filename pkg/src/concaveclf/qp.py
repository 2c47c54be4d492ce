"""Small dense convex QPs behind the CLF controllers.

One structure covers all four controllers: minimize

    u'Hu  [+ q*delta^2]  [+ w*(sigma_target - sigma)^2]

subject to a single decay inequality  a.u + b <= delta  (or <= 0, or with a
sigma*V term), the input box |u_i| <= theta, delta >= 0, and sigma bounds.
A primal active-set method solves the assembled problem exactly; hard-form
infeasibility is a first-class outcome, not an error.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .comparison import ComparisonFn
from .errors import InfeasibleError, PreconditionError

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
MAXITER = "maxiter"

_STATUS = {_kernels.QP_OPTIMAL: OPTIMAL, _kernels.QP_INFEASIBLE: INFEASIBLE,
           _kernels.QP_MAXITER: MAXITER}

# slack values below this floor are reported as exactly zero in metrics
SLACK_FLOOR = 1e-9


@dataclass
class QpProblem:
    """min u'Hu (+ q d^2) (+ w (target - s)^2)  s.t.  a.u (+ s*sigma_coeff) + b <= d."""

    H: np.ndarray
    a: np.ndarray
    b: float
    theta: float
    q: float = None                    # slack weight; None means hard form
    sigma_bounds: tuple = None         # (lo, hi) enables the rate variable
    sigma_weight: float = 0.0
    sigma_target: float = 0.0
    sigma_coeff: float = 0.0           # coefficient of sigma inside the inequality

    def __post_init__(self):
        self.H = np.atleast_2d(np.asarray(self.H, dtype=float))
        self.a = np.atleast_1d(np.asarray(self.a, dtype=float))
        m = self.H.shape[0]
        if self.H.shape != (m, m) or self.a.shape != (m,):
            raise PreconditionError("H must be m x m and a length m")
        if np.max(np.abs(self.H - self.H.T)) > 1e-10:
            raise PreconditionError("H must be symmetric")
        if np.any(np.linalg.eigvalsh(self.H) <= 0.0):
            raise PreconditionError("H must be positive definite")
        if self.theta < 0.0:
            raise PreconditionError("box bound theta must be nonnegative")
        if self.q is not None and self.q <= 0.0:
            raise PreconditionError("slack weight q must be positive when present")
        ndec = m + (self.q is not None) + (self.sigma_bounds is not None)
        if ndec > 8:
            raise PreconditionError("solver is limited to 8 decision variables")


@dataclass
class QpSolution:
    u: np.ndarray
    delta: float
    sigma_star: float
    objective: float
    active_set: tuple
    status: str
    kkt_residual: float
    lam_ineq: float

    @property
    def delta_reported(self):
        """Slack with the numerical floor applied (raw value kept in `delta`)."""
        return 0.0 if self.delta < SLACK_FLOOR else self.delta


def assemble(p: QpProblem):
    """Stack (u, [delta], [sigma]) into the solver's (Hz, gz, az, bub, lo, hi)."""
    m = p.H.shape[0]
    n = m + (p.q is not None) + (p.sigma_bounds is not None)
    Hz = np.zeros((n, n))
    gz = np.zeros(n)
    az = np.zeros(n)
    lo = np.empty(n)
    hi = np.empty(n)
    Hz[:m, :m] = 2.0 * p.H
    az[:m] = p.a
    lo[:m] = -p.theta
    hi[:m] = p.theta
    j = m
    if p.q is not None:
        Hz[j, j] = 2.0 * p.q
        az[j] = -1.0
        lo[j] = 0.0
        hi[j] = np.inf
        j += 1
    if p.sigma_bounds is not None:
        Hz[j, j] = 2.0 * p.sigma_weight
        gz[j] = -2.0 * p.sigma_weight * p.sigma_target
        az[j] = p.sigma_coeff
        lo[j], hi[j] = p.sigma_bounds
    return Hz, gz, az, -p.b, lo, hi


def _kkt_residual(Hz, gz, az, bub, lo, hi, z, lam):
    """Max of stationarity (free coords), primal violation, complementarity.

    Stationarity rows are scaled by 1/(1 + H_ii) so the residual measures
    the displacement needed to restore optimality; otherwise an extreme
    slack weight q inflates an O(1e-12) error into raw units.
    """
    grad = Hz @ z + gz + lam * az
    res = 0.0
    for i in range(len(z)):
        if lo[i] == hi[i]:
            continue  # pinned variable carries any multiplier sign
        scale = 1.0 + abs(Hz[i, i])
        at_lo = lo[i] > -np.inf and z[i] <= lo[i] + 1e-9
        at_hi = hi[i] < np.inf and z[i] >= hi[i] - 1e-9
        if at_lo:
            res = max(res, (-grad[i] if grad[i] < 0.0 else 0.0) / scale)
        elif at_hi:
            res = max(res, (grad[i] if grad[i] > 0.0 else 0.0) / scale)
        else:
            res = max(res, abs(grad[i]) / scale)
    viol = az @ z - bub
    res = max(res, viol, -lam)
    res = max(res, abs(lam * min(viol, 0.0)))
    res = max(res, float(np.max(np.maximum(lo - z, 0.0), initial=0.0)))
    res = max(res, float(np.max(np.maximum(z - hi, 0.0), initial=0.0)))
    return float(res)


def solve_small_qp(p: QpProblem) -> QpSolution:
    """Solve the assembled problem with the dense primal active-set kernel.

    Optimal solutions carry a KKT residual (stationarity, feasibility,
    complementarity) which is asserted to be <= 1e-8 in debug builds.
    """
    Hz, gz, az, bub, lo, hi = assemble(p)
    z, lam, code, iters = _kernels.qp_solve_box_ineq(Hz, gz, az, bub, lo, hi, True)
    status = _STATUS[int(code)]
    m = p.H.shape[0]
    u = z[:m]
    j = m
    delta = 0.0
    if p.q is not None:
        delta = float(z[j])
        j += 1
    sigma_star = float(z[j]) if p.sigma_bounds is not None else 0.0

    obj = float(u @ p.H @ u)
    if p.q is not None:
        obj += p.q * delta ** 2
    if p.sigma_bounds is not None:
        obj += p.sigma_weight * (p.sigma_target - sigma_star) ** 2

    active = []
    if az @ z >= bub - 1e-9:
        active.append("ineq")
    names = [f"u{i}" for i in range(m)]
    if p.q is not None:
        names.append("delta")
    if p.sigma_bounds is not None:
        names.append("sigma")
    for i, nm in enumerate(names):
        if lo[i] > -np.inf and z[i] <= lo[i] + 1e-9:
            active.append(f"{nm}_lo")
        elif hi[i] < np.inf and z[i] >= hi[i] - 1e-9:
            active.append(f"{nm}_hi")

    res = _kkt_residual(Hz, gz, az, bub, lo, hi, z, lam) if status == OPTIMAL else math.inf
    if __debug__ and status == OPTIMAL:
        assert res <= 1e-8, f"KKT residual {res:g} exceeds certification threshold"
    return QpSolution(u, delta, sigma_star, obj, tuple(active), status, res, float(lam))


# ---------------------------------------------------------------------------
# controllers
# ---------------------------------------------------------------------------


def mini_norm(plant, x, fn: ComparisonFn):
    """Minimum-norm CLF input with unbounded actuation (closed form)."""
    lfv = plant.LfV(x)
    lgv = np.atleast_1d(plant.LgV(x))
    b0 = lfv + float(fn.alpha(plant.V(x)))
    if b0 <= 0.0:
        return np.zeros(plant.m)
    nrm2 = float(lgv @ lgv)
    if nrm2 == 0.0:
        raise InfeasibleError("L_gV = 0 with positive decay residual")
    return -(b0 / nrm2) * lgv


def clf_qp_hard(plant, x, fn: ComparisonFn, theta, H=None) -> QpSolution:
    """Hard-constrained CLF-QP; Infeasible status signals a cap violation."""
    if theta <= 0.0:
        raise PreconditionError("theta must be positive")
    lgv = np.atleast_1d(plant.LgV(x))
    b0 = plant.LfV(x) + float(fn.alpha(plant.V(x)))
    H = np.eye(plant.m) if H is None else H
    # phase 1: the vertex minimizing the constraint decides feasibility
    if b0 - theta * float(np.sum(np.abs(lgv))) > 1e-12:
        u = -theta * np.sign(lgv)
        return QpSolution(u, 0.0, 0.0, float(u @ H @ u), ("ineq",), INFEASIBLE,
                          math.inf, 0.0)
    return solve_small_qp(QpProblem(H=H, a=lgv, b=b0, theta=theta))


def clf_qp_soft(plant, x, fn: ComparisonFn, theta, H=None, q=1e5) -> QpSolution:
    """Soft CLF-QP with slack; always feasible."""
    lgv = np.atleast_1d(plant.LgV(x))
    b0 = plant.LfV(x) + float(fn.alpha(plant.V(x)))
    H = np.eye(plant.m) if H is None else H
    return solve_small_qp(QpProblem(H=H, a=lgv, b=b0, theta=theta, q=q))


def flexible_clf_qp(plant, x, sigma_min, sigma_max, kappa, theta) -> QpSolution:
    """CLF-QP with the rate as a decision variable, objective
    (1-kappa) u'u + kappa (sigma_max - sigma)^2."""
    if not 0.0 < sigma_min <= sigma_max:
        raise PreconditionError("need 0 < sigma_min <= sigma_max")
    if not 0.0 < kappa < 1.0:
        raise PreconditionError("kappa must lie in (0, 1)")
    lgv = np.atleast_1d(plant.LgV(x))
    v = plant.V(x)
    return solve_small_qp(QpProblem(
        H=(1.0 - kappa) * np.eye(plant.m), a=lgv, b=plant.LfV(x), theta=theta,
        sigma_bounds=(sigma_min, sigma_max), sigma_weight=kappa,
        sigma_target=sigma_max, sigma_coeff=v))
