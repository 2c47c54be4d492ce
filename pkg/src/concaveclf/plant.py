"""Case-study plants with control Lyapunov functions and exact Lie derivatives.

Three presets: the saturated single integrator, a torque-saturated pendulum
with a Lyapunov-equation CLF, and quadrotor attitude dynamics on SO(3) with
the geometric CLF. All evaluators are pure functions of the state; the
attitude plant uses a flat 12-vector state (rotation matrix rows, then body
rates) so every plant shares one interface.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import PreconditionError


def hat(v):
    """Skew matrix of a 3-vector: hat(v) @ w == cross(v, w)."""
    v = np.asarray(v, dtype=float)
    return np.array([[0.0, -v[2], v[1]],
                     [v[2], 0.0, -v[0]],
                     [-v[1], v[0], 0.0]])


def vee(M):
    """Inverse of hat; requires skew-symmetry to 1e-9."""
    M = np.asarray(M, dtype=float)
    if np.max(np.abs(M + M.T)) > 1e-9:
        raise PreconditionError("vee expects a skew-symmetric matrix")
    return np.array([M[2, 1], M[0, 2], M[1, 0]])


def rodrigues_exp(w):
    """Closed-form matrix exponential of hat(w)."""
    return _kernels.rodrigues(np.asarray(w, dtype=float))


def polar_orthonormalize(R):
    """Nearest rotation matrix (polar factor) to R."""
    return _kernels.polar_orthonormalize(np.asarray(R, dtype=float))


def lyap_solve_2x2(A, Q, sigma=1.0):
    """Solve A'P + P A = -sigma*Q exactly for symmetric 2x2 P.

    A must be Hurwitz and Q symmetric positive definite, otherwise no
    positive definite solution exists and PreconditionError is raised.
    """
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if A.shape != (2, 2) or Q.shape != (2, 2):
        raise PreconditionError("lyap_solve_2x2 works on 2x2 matrices")
    if np.max(np.abs(Q - Q.T)) > 1e-12 or np.any(np.linalg.eigvalsh(Q) <= 0.0):
        raise PreconditionError("Q must be symmetric positive definite")
    if np.any(np.linalg.eigvals(A).real >= 0.0):
        raise PreconditionError("A is not Hurwitz; no positive definite solution")
    a11, a12, a21, a22 = A[0, 0], A[0, 1], A[1, 0], A[1, 1]
    # unknowns (p11, p12, p22); rows are the (1,1), (1,2), (2,2) equations
    M = np.array([
        [2.0 * a11, 2.0 * a21, 0.0],
        [a12, a11 + a22, a21],
        [0.0, 2.0 * a12, 2.0 * a22],
    ])
    rhs = -sigma * np.array([Q[0, 0], Q[0, 1], Q[1, 1]])
    p11, p12, p22 = np.linalg.solve(M, rhs)
    P = np.array([[p11, p12], [p12, p22]])
    if np.any(np.linalg.eigvalsh(P) <= 0.0):
        raise PreconditionError("Lyapunov solution is not positive definite")
    return P


@dataclass
class PlantModel:
    """Control-affine plant xdot = f(x) + g(x) u with a CLF V.

    Evaluators are immutable pure functions; instances are safe to share
    across threads. `sample_box` bounds the operating domain for sublevel
    sampling, `quadratic_P` marks V(x) = x'Px (enables exact level scaling),
    and `kernel` names a compiled fast path for the simulator.
    """

    name: str
    n: int
    m: int
    f: callable
    g: callable
    V: callable
    grad_V: callable
    LfV: callable
    LgV: callable
    k1: float = None
    k2: float = None
    c_max: float = None
    sample_box: np.ndarray = None
    quadratic_P: np.ndarray = None
    exact_level_cap: callable = None
    L1: float = None
    L2: float = None
    g_bars: np.ndarray = None
    kernel: str = None
    kernel_args: dict = field(default_factory=dict)
    x0_protocol: np.ndarray = None

    def V_batch(self, X):
        if self.quadratic_P is not None:
            return np.einsum("ij,jk,ik->i", X, self.quadratic_P, X)
        return np.array([self.V(x) for x in X])

    def LfV_batch(self, X):
        return np.array([self.LfV(x) for x in X])

    def LgV_batch(self, X):
        return np.array([self.LgV(x) for x in X])


# ---------------------------------------------------------------------------
# single integrator
# ---------------------------------------------------------------------------


def single_integrator_model(theta: float, c_max: float = 100.0) -> PlantModel:
    """xdot = u with V = x^2; L_fV = 0, L_gV = 2x, cap 2*theta*sqrt(v)."""
    if theta <= 0.0:
        raise PreconditionError("actuation level theta must be positive")
    L = math.sqrt(c_max)
    model = PlantModel(
        name="integrator",
        n=1, m=1,
        f=lambda x: np.zeros(1),
        g=lambda x: np.ones((1, 1)),
        V=lambda x: float(x[0] * x[0]),
        grad_V=lambda x: 2.0 * np.asarray(x, dtype=float),
        LfV=lambda x: 0.0,
        LgV=lambda x: 2.0 * np.asarray(x, dtype=float),
        k1=1.0, k2=1.0, c_max=c_max,
        sample_box=np.array([[-L, L]]),
        quadratic_P=np.array([[1.0]]),
        exact_level_cap=lambda th, v: 2.0 * th * math.sqrt(v),
        L1=0.0, L2=2.0, g_bars=np.array([1.0]),
        kernel=None,
        x0_protocol=np.array([math.sqrt(c_max)]),
    )
    model.LfV_batch = lambda X: np.zeros(len(X))
    model.LgV_batch = lambda X: 2.0 * np.asarray(X, dtype=float)
    return model


# ---------------------------------------------------------------------------
# inverted pendulum
# ---------------------------------------------------------------------------


@dataclass
class PendulumParams:
    """Torque-saturated pendulum (uniform rod) and its PD-template CLF data."""

    m: float = 1.0
    l: float = 1.0
    b: float = 0.01
    gravity: float = 9.81
    K1: float = 6.0
    K2: float = 5.0
    sigma_clf: float = 3.0
    Q_clf: np.ndarray = field(default_factory=lambda: np.eye(2))

    def __post_init__(self):
        if min(self.m, self.l, self.b, self.gravity, self.K1, self.K2,
               self.sigma_clf) <= 0.0:
            raise PreconditionError("pendulum parameters must be positive")
        self.I = self.m * self.l ** 2 / 3.0
        # torque-level PD template u = K1*psi + K2*omega closing the loop
        # psi-ddot = (m g l/2 sin(psi) - b omega - u)/I
        self.A_clf = np.array([
            [0.0, 1.0],
            [(self.m * self.gravity * self.l / 2.0 - self.K1) / self.I,
             -(self.b + self.K2) / self.I],
        ])
        self.P = lyap_solve_2x2(self.A_clf, self.Q_clf, self.sigma_clf)


def pendulum_model(params: PendulumParams = None, x0=None) -> PlantModel:
    """Pendulum plant with V = x'Px from the Lyapunov-equation template.

    The input enters with a minus sign (torque opposes the drift), which the
    controllers see transparently through L_gV. The certified level set is
    c_max = V(x0) and the sampling box is its bounding box inflated by 10%.
    """
    params = params or PendulumParams()
    P = params.P
    gcoef = params.m * params.gravity * params.l / (2.0 * params.I)
    bI = params.b / params.I
    gin = -1.0 / params.I
    gvec = np.array([0.0, gin])

    def f(x):
        return np.array([x[1], gcoef * math.sin(x[0]) - bI * x[1]])

    def g(x):
        return gvec.reshape(2, 1)

    def V(x):
        return float(x @ P @ x)

    def grad_V(x):
        return 2.0 * P @ np.asarray(x, dtype=float)

    def LfV(x):
        return float(2.0 * (x @ P) @ f(x))

    def LgV(x):
        return np.array([2.0 * (x @ P) @ gvec])

    x0 = np.array([math.pi / 4.0, 0.05]) if x0 is None else np.asarray(x0, dtype=float)
    c_max = V(x0)
    Pinv = np.linalg.inv(P)
    half = np.sqrt(1.1 * c_max * np.diag(Pinv))
    drift_M = np.array([[0.0, 1.0], [gcoef, bI]])
    lam = np.linalg.eigvalsh(P)

    model = PlantModel(
        name="pendulum",
        n=2, m=1,
        f=f, g=g, V=V, grad_V=grad_V, LfV=LfV, LgV=LgV,
        k1=float(lam[0]), k2=float(lam[-1]), c_max=c_max,
        sample_box=np.column_stack([-half, half]),
        quadratic_P=P,
        L1=float(np.linalg.svd(drift_M, compute_uv=False)[0]),
        L2=2.0 * float(lam[-1]),
        g_bars=np.array([abs(gin)]),
        kernel="pendulum",
        kernel_args={"P": P, "gcoef": gcoef, "bI": bI, "gin": gin},
        x0_protocol=x0,
    )

    def LfV_batch(X):
        PX = X @ P
        F = np.column_stack([X[:, 1], gcoef * np.sin(X[:, 0]) - bI * X[:, 1]])
        return 2.0 * np.einsum("ij,ij->i", PX, F)

    def LgV_batch(X):
        return (2.0 * gin * (X @ P)[:, 1]).reshape(-1, 1)

    model.LfV_batch = LfV_batch
    model.LgV_batch = LgV_batch
    return model


# ---------------------------------------------------------------------------
# quadrotor attitude
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AttitudeState:
    """Rotation matrix plus body angular velocity, validated on construction."""

    R: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.R, dtype=float)
        if np.max(np.abs(R.T @ R - np.eye(3))) > 1e-9 or abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise PreconditionError("R is not in SO(3) within tolerance")

    def flat(self):
        return np.concatenate([np.asarray(self.R, dtype=float).ravel(),
                               np.asarray(self.omega, dtype=float)])

    @staticmethod
    def from_flat(x):
        return AttitudeState(np.asarray(x[:9], dtype=float).reshape(3, 3),
                             np.asarray(x[9:12], dtype=float))


# Table-II protocol initial attitude (projected onto SO(3) before use)
QUAD_R0 = np.array([
    [0.2500, -0.0580, 0.9665],
    [0.4330, 0.8995, -0.0580],
    [-0.8660, 0.4330, 0.2500],
])


@dataclass
class QuadParams:
    J: np.ndarray = field(default_factory=lambda: np.diag([0.0820, 0.0845, 0.1377]))
    kR: float = 8.81
    kc: float = 0.1377
    R0: np.ndarray = field(default_factory=lambda: QUAD_R0.copy())

    def __post_init__(self):
        J = np.asarray(self.J, dtype=float)
        if np.max(np.abs(J - J.T)) > 1e-12 or np.any(np.linalg.eigvalsh(J) <= 0.0):
            raise PreconditionError("inertia J must be symmetric positive definite")


def quad_attitude_model(params: QuadParams = None) -> PlantModel:
    """Attitude dynamics Rdot = R hat(w), J wdot = -w x Jw + u, R_d = I, w_d = 0.

    CLF: V = 1/2 w'Jw + kR*Psi(R) + kc*eR'w with Psi = 1/2 tr(I - R) and
    eR = 1/2 vee(R - R'). Hand-derived Lie derivatives (validated against
    geodesic finite differences in the test suite):

        L_gV = (w + kc J^-1 eR)'          (input enters through J wdot = u)
        L_fV = kR eR'w + kc w'C(R)'w - kc eR' J^-1 (w x Jw),
        C(R) = 1/2 (tr(R) I - R)'         (eR-dot = C(R) w; w'(w x Jw) = 0)
    """
    params = params or QuadParams()
    J = np.asarray(params.J, dtype=float)
    Jinv = np.linalg.inv(J)
    kR, kc = params.kR, params.kc

    def split(x):
        return np.asarray(x[:9], dtype=float).reshape(3, 3), np.asarray(x[9:12], dtype=float)

    def V(x):
        R, w = split(x)
        v, _, _ = _kernels._att_lie(R, w, J, Jinv, kR, kc)
        return float(v)

    def LfV(x):
        R, w = split(x)
        _, lfv, _ = _kernels._att_lie(R, w, J, Jinv, kR, kc)
        return float(lfv)

    def LgV(x):
        R, w = split(x)
        _, _, lgv = _kernels._att_lie(R, w, J, Jinv, kR, kc)
        return np.asarray(lgv)

    def f(x):
        R, w = split(x)
        return np.concatenate([(R @ hat(w)).ravel(), Jinv @ (-np.cross(w, J @ w))])

    def g(x):
        out = np.zeros((12, 3))
        out[9:12, :] = Jinv
        return out

    def grad_V(x):
        # flat-embedding gradient: d(kR*Psi)/dR = -kR/2 I, d(kc eR'w)/dR = kc/2 hat(w)
        R, w = split(x)
        dR = -0.5 * kR * np.eye(3) + 0.5 * kc * hat(w)
        return np.concatenate([dR.ravel(), J @ w + kc * 0.5 * vee(R - R.T)])

    R0 = polar_orthonormalize(params.R0)
    x0 = np.concatenate([R0.ravel(), np.zeros(3)])

    return PlantModel(
        name="quadrotor",
        n=12, m=3,
        f=f, g=g, V=V, grad_V=grad_V, LfV=LfV, LgV=LgV,
        c_max=V(x0),
        kernel="quadrotor",
        kernel_args={"J": J, "Jinv": Jinv, "kR": kR, "kc": kc},
        x0_protocol=x0,
    )


def get_plant(name: str, theta: float = 1.0) -> PlantModel:
    """Build one of the named presets: integrator, pendulum, quadrotor."""
    if name == "integrator":
        return single_integrator_model(theta)
    if name == "pendulum":
        return pendulum_model()
    if name == "quadrotor":
        return quad_attitude_model()
    raise PreconditionError(f"unknown plant preset {name!r}")
