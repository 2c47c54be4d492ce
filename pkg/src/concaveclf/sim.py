"""Closed-loop simulation with zero-order-hold control and windowed metrics.

Fixed-step RK4 (4 substeps per control period by default) keeps runs
deterministic and reproducible; crossing times are interpolated in ln V,
which is exact for pure exponential decay. Preset plants run through the
compiled stepping kernels; any other PlantModel (or a Tabulated comparison)
takes the generic evaluator-driven path, which computes identical
trajectories step for step.
"""

import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, qp
from .comparison import ComparisonFn
from .errors import NoCrossingError, PreconditionError
from .plant import PlantModel

CONTROLLER_CODES = {
    "mini_norm": _kernels.CTRL_MININORM,
    "hard_qp": _kernels.CTRL_HARDQP,
    "soft_qp": _kernels.CTRL_SOFTQP,
    "flex_qp": _kernels.CTRL_FLEXQP,
    "bang_bang": _kernels.CTRL_BANGBANG,
}

# simulation stops once V falls below this fraction of V(x0)
V_STOP_REL = 1e-12


@dataclass
class SimConfig:
    controller: str
    horizon: float
    dt: float = 1e-3
    comparison: ComparisonFn = None
    theta: float = 10.0
    q: float = 1e5
    H: np.ndarray = None
    sigma_min: float = 0.1
    sigma_max: float = 10.0
    kappa: object = 0.5       # float, (k0, rate) for k0*(1 - exp(-rate*V)), or callable
    substeps: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.dt <= 0.0 or self.horizon < self.dt:
            raise PreconditionError("need dt > 0 and horizon >= dt")
        if self.controller not in CONTROLLER_CODES:
            raise PreconditionError(f"unknown controller {self.controller!r}")
        if self.controller in ("mini_norm", "hard_qp", "soft_qp") and self.comparison is None:
            raise PreconditionError(f"{self.controller} requires a comparison function")


@dataclass
class TrajectoryRecord:
    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    V: np.ndarray
    delta: np.ndarray
    sigma_star: np.ndarray
    rate: np.ndarray
    status: np.ndarray
    plant: str = ""
    controller: str = ""
    dt: float = 0.0
    substeps: int = 4
    theta: float = 0.0

    @property
    def u_samples(self):
        """Held inputs aligned with the time grid (last value repeated)."""
        if len(self.u) == 0:
            return np.zeros((len(self.t), 1))
        return np.vstack([self.u, self.u[-1]])

    def to_csv(self, path):
        cols = ["t_s"] + [f"x{i}" for i in range(self.x.shape[1])] \
            + [f"u{i}_input" for i in range(self.u_samples.shape[1])] \
            + ["V_level", "delta_slack", "rate_1_per_s", "status"]
        pad = lambda a: np.concatenate([a, [a[-1] if len(a) else 0.0]])
        data = np.column_stack([
            self.t, self.x, self.u_samples, self.V,
            pad(self.delta), pad(self.rate), pad(self.status.astype(float)),
        ])
        np.savetxt(path, data, delimiter=",", header=",".join(cols), comments="")


def _kappa_params(kappa):
    if isinstance(kappa, tuple):
        return float(kappa[0]), float(kappa[1])
    if isinstance(kappa, (int, float)):
        return float(kappa), math.inf
    return None


def _kappa_value(kappa, v):
    if callable(kappa):
        return float(kappa(v))
    k0, rate = _kappa_params(kappa)
    return k0 if math.isinf(rate) else k0 * (1.0 - math.exp(-rate * v))


def _kernel_dispatch(plant, cfg, x0, nsteps, vstop):
    if os.environ.get("CONCAVECLF_FORCE_GENERIC"):
        return None
    if plant.kernel not in ("pendulum", "quadrotor"):
        return None
    ctrl = CONTROLLER_CODES[cfg.controller]
    if cfg.controller in ("mini_norm", "hard_qp", "soft_qp"):
        coded = cfg.comparison.kernel_code()
        if coded is None:
            return None
        ccode, cparams = coded
    else:
        ccode, cparams = _kernels.CMP_LINEAR, np.array([1.0])
    kp = _kappa_params(cfg.kappa) if cfg.controller == "flex_qp" else (0.5, math.inf)
    if kp is None:
        return None
    k0, krate = kp

    if plant.kernel == "pendulum":
        ka = plant.kernel_args
        h = 1.0 if cfg.H is None else float(np.atleast_2d(cfg.H)[0, 0])
        return _kernels.pendulum_loop(
            ka["P"], ka["gcoef"], ka["bI"], ka["gin"], ccode, cparams, ctrl,
            cfg.theta, cfg.q, h, cfg.sigma_min, cfg.sigma_max, k0, krate,
            np.asarray(x0, dtype=float), cfg.dt, cfg.substeps, nsteps, vstop)

    ka = plant.kernel_args
    Hc = np.eye(3) if cfg.H is None else np.asarray(cfg.H, dtype=float)
    R0 = np.ascontiguousarray(np.asarray(x0[:9], dtype=float).reshape(3, 3))
    w0 = np.asarray(x0[9:12], dtype=float)
    return _kernels.quad_loop(
        ka["J"], ka["Jinv"], ka["kR"], ka["kc"], ccode, cparams, ctrl,
        cfg.theta, cfg.q, Hc, cfg.sigma_min, cfg.sigma_max, k0, krate,
        R0, w0, cfg.dt, cfg.substeps, nsteps, vstop)


def _generic_loop(plant, cfg, x0, nsteps, vstop):
    n, m = plant.n, plant.m
    xs = np.zeros((nsteps + 1, n))
    us = np.zeros((nsteps, m))
    Vs = np.zeros(nsteps + 1)
    deltas = np.zeros(nsteps)
    sigmas = np.zeros(nsteps)
    rates = np.zeros(nsteps)
    statuses = np.zeros(nsteps, dtype=np.int64)
    x = np.asarray(x0, dtype=float).copy()
    xs[0] = x
    Vs[0] = plant.V(x)
    H = None if cfg.H is None else np.asarray(cfg.H, dtype=float)
    used = 0
    h = cfg.dt / cfg.substeps
    for k in range(nsteps):
        v = Vs[k]
        lfv = plant.LfV(x)
        lgv = np.atleast_1d(plant.LgV(x))
        u = np.zeros(m)
        delta = 0.0
        sig = 0.0
        status = _kernels.QP_OPTIMAL
        if cfg.controller == "bang_bang":
            u = -cfg.theta * np.sign(lgv)
        elif cfg.controller == "mini_norm":
            b0 = lfv + float(cfg.comparison.alpha(v))
            if b0 > 0.0:
                nrm2 = float(lgv @ lgv)
                if nrm2 == 0.0:
                    status = _kernels.QP_INFEASIBLE
                else:
                    u = -(b0 / nrm2) * lgv
        elif cfg.controller == "hard_qp":
            sol = qp.clf_qp_hard(plant, x, cfg.comparison, cfg.theta, H)
            u = sol.u
            status = _kernels.QP_INFEASIBLE if sol.status == qp.INFEASIBLE \
                else _kernels.QP_OPTIMAL
        elif cfg.controller == "soft_qp":
            sol = qp.clf_qp_soft(plant, x, cfg.comparison, cfg.theta, H, cfg.q)
            u = sol.u
            delta = sol.delta
        else:
            sol = qp.flexible_clf_qp(plant, x, cfg.sigma_min, cfg.sigma_max,
                                     _kappa_value(cfg.kappa, v), cfg.theta)
            u = sol.u
            sig = sol.sigma_star
            if sol.status == qp.INFEASIBLE:
                status = _kernels.QP_INFEASIBLE
        us[k] = u
        deltas[k] = delta
        sigmas[k] = sig
        statuses[k] = status
        rates[k] = -(lfv + float(lgv @ u)) / v if v > 0.0 else 0.0
        for _ in range(cfg.substeps):
            k1 = plant.f(x) + plant.g(x) @ u
            k2 = plant.f(x + 0.5 * h * k1) + plant.g(x + 0.5 * h * k1) @ u
            k3 = plant.f(x + 0.5 * h * k2) + plant.g(x + 0.5 * h * k2) @ u
            k4 = plant.f(x + h * k3) + plant.g(x + h * k3) @ u
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if plant.kernel == "quadrotor":
            R = _kernels.polar_orthonormalize(
                np.ascontiguousarray(x[:9].reshape(3, 3)))
            x = np.concatenate([R.ravel(), x[9:12]])
        xs[k + 1] = x
        Vs[k + 1] = plant.V(x)
        used = k + 1
        if Vs[k + 1] < vstop:
            break
    return xs, us, Vs, deltas, sigmas, rates, statuses, used


def simulate(plant: PlantModel, cfg: SimConfig, x0) -> TrajectoryRecord:
    """Run the configured controller under ZOH and record the trajectory.

    Hard-QP infeasible steps continue with the minimum-violation vertex
    input and are flagged in `status`. The run ends at the horizon or once
    V drops below 1e-12 * V(x0).
    """
    x0 = np.asarray(x0, dtype=float)
    v0 = float(plant.V(x0))
    nsteps = int(round(cfg.horizon / cfg.dt))
    if v0 <= 0.0:
        return TrajectoryRecord(
            t=np.zeros(1), x=x0.reshape(1, -1), u=np.zeros((0, plant.m)),
            V=np.zeros(1), delta=np.zeros(0), sigma_star=np.zeros(0),
            rate=np.zeros(0), status=np.zeros(0, dtype=np.int64),
            plant=plant.name, controller=cfg.controller, dt=cfg.dt,
            substeps=cfg.substeps, theta=cfg.theta)
    vstop = V_STOP_REL * v0
    out = _kernel_dispatch(plant, cfg, x0, nsteps, vstop)
    if out is None:
        out = _generic_loop(plant, cfg, x0, nsteps, vstop)
    xs, us, Vs, deltas, sigmas, rates, statuses, used = out
    us = np.asarray(us)
    if us.ndim == 1:
        us = us.reshape(-1, 1)
    t = np.arange(used + 1) * cfg.dt
    return TrajectoryRecord(
        t=t, x=xs[:used + 1], u=us[:used], V=Vs[:used + 1], delta=deltas[:used],
        sigma_star=sigmas[:used], rate=rates[:used], status=statuses[:used],
        plant=plant.name, controller=cfg.controller, dt=cfg.dt,
        substeps=cfg.substeps, theta=cfg.theta)


def crossing_time_empirical(rec: TrajectoryRecord, eps: float) -> float:
    """First time V enters the eps-sublevel set, interpolated in ln V."""
    below = np.nonzero(rec.V <= eps)[0]
    if len(below) == 0:
        raise NoCrossingError(
            f"V never crossed {eps:g} (final V = {rec.V[-1]:g})",
            final_value=float(rec.V[-1]))
    i = int(below[0])
    if i == 0:
        return float(rec.t[0])
    v0, v1 = rec.V[i - 1], rec.V[i]
    if v1 <= 0.0:
        lam = (v0 - eps) / (v0 - v1)
    else:
        lam = (math.log(v0) - math.log(eps)) / (math.log(v0) - math.log(v1))
    return float(rec.t[i - 1] + lam * (rec.t[i] - rec.t[i - 1]))


@dataclass
class MetricsReport:
    c: float
    eps_list: np.ndarray
    crossing_times: np.ndarray
    nominal_rates: np.ndarray
    energies: np.ndarray
    peak_input: float
    rate_times: np.ndarray = field(default=None, repr=False)
    rate_series: np.ndarray = field(default=None, repr=False)

    def csv_rows(self):
        return [
            [float(e), float(T), float(s), float(en)]
            for e, T, s, en in zip(self.eps_list, self.crossing_times,
                                   self.nominal_rates, self.energies)
        ]


def metrics(rec: TrajectoryRecord, c: float, eps_list) -> MetricsReport:
    """Crossing times, nominal rates, truncated energies and peak input.

    Energy uses the trapezoid rule on ||u||^2 sampled at the control grid,
    truncated at the (interpolated) crossing time of each eps.
    """
    if abs(rec.V[0] - c) > 1e-9 * max(abs(c), 1.0):
        raise PreconditionError("c must equal V at the start of the record")
    eps_arr = np.asarray(list(eps_list), dtype=float)
    u2 = np.sum(rec.u_samples ** 2, axis=1)
    Ts, sigmas, energies = [], [], []
    for eps in eps_arr:
        T = crossing_time_empirical(rec, eps)
        Ts.append(T)
        sigmas.append(math.log(c / eps) / T if T > 0.0 else math.inf)
        mask = rec.t <= T
        tt = np.concatenate([rec.t[mask], [T]])
        yy = np.concatenate([u2[mask], [np.interp(T, rec.t, u2)]])
        energies.append(float(np.trapezoid(yy, tt)))
    peak = float(np.max(np.abs(rec.u))) if len(rec.u) else 0.0
    floor = V_STOP_REL * c
    keep = rec.V[:-1] > floor if len(rec.V) > 1 else np.zeros(0, dtype=bool)
    return MetricsReport(
        c=c, eps_list=eps_arr, crossing_times=np.array(Ts),
        nominal_rates=np.array(sigmas), energies=np.array(energies),
        peak_input=peak, rate_times=rec.t[:-1][keep], rate_series=rec.rate[keep])


@dataclass(frozen=True)
class BoundVerdict:
    holds: bool
    max_ratio: float


def state_bound_check(rec: TrajectoryRecord, k1, k2, sigma,
                      slack: float = 0.01) -> BoundVerdict:
    """Check ||x(t)|| <= sqrt(k2/k1) e^(-sigma t / 2) ||x(0)|| with 1% slack."""
    nrm = np.linalg.norm(rec.x, axis=1)
    if nrm[0] == 0.0:
        return BoundVerdict(True, 0.0)
    envelope = math.sqrt(k2 / k1) * np.exp(-0.5 * sigma * rec.t) * nrm[0]
    ratio = nrm / envelope
    return BoundVerdict(bool(np.max(ratio) <= 1.0 + slack), float(np.max(ratio)))


def comparison_envelope(rec: TrajectoryRecord, fn: ComparisonFn):
    """Co-integrate ydot = -alpha(y) with the record's RK4 stepping.

    Returns (y, max(V - y)); the comparison principle requires V <= y up to
    integration tolerance for hard-constrained runs.
    """
    y = np.empty(len(rec.t))
    y[0] = rec.V[0]
    h = rec.dt / rec.substeps
    cur = y[0]

    def f(val):
        return -float(fn.alpha(max(val, 0.0)))

    for k in range(len(rec.t) - 1):
        for _ in range(rec.substeps):
            k1 = f(cur)
            k2 = f(cur + 0.5 * h * k1)
            k3 = f(cur + 0.5 * h * k2)
            k4 = f(cur + h * k3)
            cur = cur + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        y[k + 1] = cur
    return y, float(np.max(rec.V - y))
