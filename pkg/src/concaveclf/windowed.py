"""Windowed decay metrics: crossing times, nominal rates, relaxation ratios.

The crossing time of the comparison ODE ydot = -alpha(y) from level c down
to eps is T = integral of 1/alpha over [eps, c]; the windowed nominal rate
is ln(c/eps)/T. Quadrature is performed after the substitution v = eps*e^t,
which turns 1/alpha(v) dv into dt/s(v(t)) and matches the logarithmic decay
geometry near eps.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from . import _kernels
from .comparison import ComparisonFn
from .errors import IntegrabilityError, PreconditionError

QUAD_ABS_TOL = 1e-10
QUAD_REL_TOL = 1e-11
# scipy's subdivision limit; integrands are smooth after the log substitution
QUAD_LIMIT = 2000


@dataclass(frozen=True)
class Window:
    """Evaluation interval [eps, c] with 0 < eps < c."""

    eps: float
    c: float

    def __post_init__(self):
        if not 0.0 < self.eps < self.c:
            raise PreconditionError(f"window needs 0 < eps < c, got [{self.eps}, {self.c}]")

    @property
    def log_span(self):
        return math.log(self.c / self.eps)


@dataclass(frozen=True)
class RateReport:
    crossing_time: float
    nominal_rate: float
    relaxation_ratio: float
    quadrature_error_estimate: float

    def csv_row(self, fn_id, w: Window):
        return [fn_id, w.eps, w.c, self.crossing_time, self.nominal_rate,
                self.relaxation_ratio]


def _closed_form_time(fn: ComparisonFn, eps, c):
    """Antiderivative-based crossing time for kinds that admit one, else None."""
    coded = fn.kernel_code()
    if coded is None:
        return None
    code, p = coded
    if code == _kernels.CMP_LINEAR:
        return math.log(c / eps) / p[0]
    if code == _kernels.CMP_SQRT:
        return 2.0 * (math.sqrt(c) - math.sqrt(eps)) / p[0]
    if code == _kernels.CMP_POWER:
        C, q = p[0], p[1]
        if q == 1.0:
            return math.log(c / eps) / C
        return (c ** (1.0 - q) - eps ** (1.0 - q)) / (C * (1.0 - q))
    if code == _kernels.CMP_RATIONAL:
        sigma, kmin, kmax, ell = p[0], p[1], p[2], p[3]
        if kmin > 0.0:
            t = (math.log(c / eps) / kmax
                 + (kmax - kmin) / (kmax * kmin)
                 * math.log((kmin * c + kmax * ell) / (kmin * eps + kmax * ell)))
            return t / sigma
        return ((c - eps) / (kmax * ell) + math.log(c / eps) / kmax) / sigma
    return None


def crossing_time(fn: ComparisonFn, w: Window) -> float:
    """T(eps, c) by adaptive quadrature (abs tol 1e-10).

    Kinds with a closed antiderivative are cross-validated against it; a
    disagreement beyond 1e-8 relative indicates a numerical defect and
    raises RuntimeError.
    """
    eps, c = w.eps, w.c
    probe = np.concatenate([[eps, c], np.geomspace(eps, c, 64)])
    vals = np.asarray(fn.alpha(probe))
    if np.any(vals <= 0.0):
        bad = float(probe[np.argmin(vals)])
        raise IntegrabilityError(f"alpha is not positive on the window (alpha({bad:g}) <= 0)")

    L = w.log_span

    def integrand(t):
        v = eps * math.exp(t)
        return v / float(fn.alpha(v))

    with warnings.catch_warnings():
        # piecewise-linear kinds trip the roundoff detector while still
        # meeting the absolute tolerance
        warnings.simplefilter("ignore", IntegrationWarning)
        val, err = quad(integrand, 0.0, L, epsabs=QUAD_ABS_TOL, epsrel=QUAD_REL_TOL,
                        limit=QUAD_LIMIT)
    ref = _closed_form_time(fn, eps, c)
    if ref is not None and abs(val - ref) > max(1e-8 * abs(ref), 1e-9):
        raise RuntimeError(
            f"quadrature ({val!r}) and closed form ({ref!r}) disagree for {fn!r}")
    return val


def nominal_rate(fn: ComparisonFn, w: Window) -> float:
    """sigma_alpha(eps, c) = ln(c/eps) / T(eps, c); equals sigma for Linear."""
    return w.log_span / crossing_time(fn, w)


def rate_report(fn: ComparisonFn, w: Window) -> RateReport:
    eps, c = w.eps, w.c
    L = w.log_span

    def integrand(t):
        v = eps * math.exp(t)
        return v / float(fn.alpha(v))

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        T, err = quad(integrand, 0.0, L, epsabs=QUAD_ABS_TOL, epsrel=QUAD_REL_TOL,
                      limit=QUAD_LIMIT)
    sigma = L / T
    r = float(fn.alpha(c)) / (sigma * c)
    return RateReport(T, sigma, r, err)


def compose_rates(sigma1, sigma2, eps, c0, c) -> float:
    """Weighted harmonic mean of adjacent-window rates (split level c0)."""
    if not 0.0 < eps < c0 < c:
        raise PreconditionError("need 0 < eps < c0 < c")
    if sigma1 <= 0.0 or sigma2 <= 0.0:
        raise PreconditionError("rates must be positive")
    lam = math.log(c / c0) / math.log(c / eps)
    return sigma1 * sigma2 / (lam * sigma1 + (1.0 - lam) * sigma2)


def relaxation_ratio(fn: ComparisonFn, w: Window) -> float:
    """r_alpha = alpha(c) / (sigma_alpha(eps,c) * c); 1 for linear, < 1 concave."""
    return float(fn.alpha(w.c)) / (nominal_rate(fn, w) * w.c)


@dataclass(frozen=True)
class OrderingVerdict:
    sigma_cave: float
    sigma_lin: float
    sigma_vex: float
    ok: bool
    note: str = ""


def verify_ordering(cave: ComparisonFn, lin: ComparisonFn, vex: ComparisonFn,
                    w: Window) -> OrderingVerdict:
    """Check sigma_vex < sigma_lin < sigma_cave under an equal endpoint value."""
    ac, al, av = (float(f.alpha(w.c)) for f in (cave, lin, vex))
    scale = max(abs(al), 1e-300)
    if abs(ac - al) > 1e-10 * scale or abs(av - al) > 1e-10 * scale:
        raise PreconditionError(
            f"endpoint values differ: alpha_cave(c)={ac!r} alpha_lin(c)={al!r} "
            f"alpha_vex(c)={av!r}")
    s_cave = nominal_rate(cave, w)
    s_lin = nominal_rate(lin, w)
    s_vex = nominal_rate(vex, w)
    tie = 1e-12 * s_lin
    if abs(s_cave - s_lin) <= tie or abs(s_vex - s_lin) <= tie:
        return OrderingVerdict(s_cave, s_lin, s_vex, False, "tie")
    ok = s_vex < s_lin < s_cave
    return OrderingVerdict(s_cave, s_lin, s_vex, ok)


def detect_concave_subinterval(fn: ComparisonFn, w: Window, grid_size: int = 128):
    """Locate negative curvature when the relaxation ratio certifies some.

    If r_alpha(eps, c) < 1, a strictly concave subinterval of (0, c) must
    exist for C^2 functions; this returns the longest grid run with strictly
    negative second central differences, or None when no run is found (or
    when r_alpha >= 1).
    """
    if grid_size < 64:
        raise PreconditionError("grid_size must be at least 64")
    if relaxation_ratio(fn, w) >= 1.0:
        return None
    grid = np.linspace(w.c / grid_size, w.c, grid_size)
    av = np.asarray(fn.alpha(grid))
    d2 = av[2:] - 2.0 * av[1:-1] + av[:-2]
    neg = d2 < -1e-14 * max(1.0, float(np.max(np.abs(av))))
    best = (0, -1, -1)  # length, start, end
    start = None
    for i, flag in enumerate(neg):
        if flag and start is None:
            start = i
        if (not flag or i == len(neg) - 1) and start is not None:
            end = i if flag else i - 1
            if end - start + 1 > best[0]:
                best = (end - start + 1, start, end)
            start = None
    if best[0] == 0:
        return None
    lo = float(grid[best[1]])
    hi = float(grid[best[2] + 2])
    return lo, hi
