"""Endpoint normalization and the practical tuning recipe for rational factors.

Workflow: pick a window and a target nominal rate above the feasible linear
baseline, normalize the factor at the window endpoint (s_rat(c) = r), solve
for the gain that meets the rate target, then repair feasibility against
the level-wise actuation cap if needed. Feasibility repair takes priority
over the rate target when the two conflict.
"""

import math
import warnings
from dataclasses import dataclass, field

from .comparison import RationalConcave, RationalFactorParams, make_concave_comparison
from .errors import PreconditionError, RecipeError, TuningError
from .windowed import Window, nominal_rate

RATE_TOL_REL = 1e-6


@dataclass
class TuningSpec:
    window: Window
    sigma: float                  # feasible linear baseline rate
    sigma_star: float             # target windowed nominal rate
    r: float = 1.0                # endpoint ratio s_rat(c) = r
    k_min: float = 0.1
    k_max: float = 2.0
    theta: float = math.inf       # available actuation level
    consts: object = None         # optional RegularityConstants
    p: float = None               # optional power-composition exponent

    def __post_init__(self):
        if not (self.sigma > 0.0 and self.sigma_star >= self.sigma):
            raise PreconditionError("need sigma_star >= sigma > 0")
        if not 0.0 <= self.k_min < 1.0:
            raise PreconditionError("seed k_min must lie in [0, 1)")
        if not 0.0 < self.r <= 1.0:
            raise PreconditionError("endpoint ratio r must lie in (0, 1]")


def normalize_ell(k_min, k_max, r, c) -> float:
    """ell making s_rat(c) = r exactly: ell = (r - k_min) c / (k_max - r)."""
    if not k_min < r < k_max:
        raise PreconditionError(
            f"endpoint normalization needs k_min < r < k_max, got "
            f"k_min={k_min!r}, r={r!r}, k_max={k_max!r}")
    return (r - k_min) * c / (k_max - r)


def closed_form_rate(k_min, k_max, ell, sigma, w: Window) -> float:
    """Windowed nominal rate of s_rat * sigma * v in closed form (k_min > 0).

    For k_min = 0 the log formula degenerates; we fall back to quadrature
    and say so.
    """
    if ell <= 0.0 or k_max <= 0.0 or k_min < 0.0:
        raise PreconditionError("invalid rational-factor parameters")
    if k_min == 0.0:
        warnings.warn("closed_form_rate: k_min = 0, falling back to quadrature",
                      stacklevel=2)
        fn = RationalConcave(sigma, RationalFactorParams(k_min, k_max, ell))
        return nominal_rate(fn, w)
    L = w.log_span
    term = (k_max - k_min) / k_min * math.log(
        (k_min * w.c + k_max * ell) / (k_min * w.eps + k_max * ell))
    return sigma * k_max * L / (L + term)


def _rate_at(k_max, spec: TuningSpec):
    # r == k_min degenerates to the constant factor k_min (ell -> 0 limit)
    if spec.r <= spec.k_min:
        if spec.r < spec.k_min:
            raise PreconditionError("endpoint ratio below k_min is not normalizable")
        return spec.sigma * spec.k_min
    ell = normalize_ell(spec.k_min, k_max, spec.r, spec.window.c)
    return closed_form_rate(spec.k_min, k_max, ell, spec.sigma, spec.window)


def solve_kmax(spec: TuningSpec) -> float:
    """Bisect k_max so the closed-form windowed rate meets sigma_star.

    The rate is continuous and strictly increasing in k_max, so bisection
    on (max(sigma_star/sigma, r), 1e3] converges; an unreachable target
    raises TuningError carrying the supremum actually achieved.
    """
    lo = max(spec.sigma_star / spec.sigma, spec.r) + 1e-9
    hi = 1e3
    target = spec.sigma_star
    tol = RATE_TOL_REL * target
    r_lo = _rate_at(lo, spec)
    if abs(r_lo - target) <= tol or r_lo > target:
        return lo
    r_hi = _rate_at(hi, spec)
    if r_hi < target - tol:
        raise TuningError(
            f"target rate {target:g} unreachable within k_max bracket (achieved "
            f"{r_hi:g} at k_max={hi:g})", achieved=r_hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        r_mid = _rate_at(mid, spec)
        if abs(r_mid - target) <= tol:
            return mid
        if r_mid < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def feasibility_margin(fn, theta, consts, w: Window, grid: int = 256) -> float:
    """min over the window of k3*v + k4*theta*sqrt(v) - alpha(v).

    Nonnegative means the necessary level-wise cap condition holds on the
    window for the supplied regularity constants.
    """
    import numpy as np

    levels = np.geomspace(w.eps, w.c, grid)
    cap = consts.k3 * levels + consts.k4 * theta * np.sqrt(levels)
    return float(np.min(cap - np.asarray(fn.alpha(levels))))


@dataclass
class RecipeResult:
    params: RationalFactorParams
    r: float
    p: float
    sigma: float
    sigma_alpha: float
    margin: float
    feasible: bool
    trace: list = field(default_factory=list)

    @property
    def comparison(self):
        return make_concave_comparison(self.sigma, self.params, self.p)


def _build(spec, k_min, k_max, r, p):
    ell = normalize_ell(k_min, k_max, r, spec.window.c)
    params = RationalFactorParams(k_min, k_max, ell)
    fn = make_concave_comparison(spec.sigma, params, p)
    if p is None:
        rate = closed_form_rate(k_min, k_max, ell, spec.sigma, spec.window)
    else:
        rate = nominal_rate(fn, spec.window)
    return params, fn, rate


def _feasible(spec, fn, plant, samples, seed, trace):
    # analytic necessary condition when constants exist; sampled sup otherwise
    margin = math.inf
    theta_req = None
    if spec.consts is not None:
        margin = feasibility_margin(fn, spec.theta, spec.consts, spec.window)
        ok = margin >= 0.0
    elif plant is not None:
        from .actuation import required_actuation

        theta_req = required_actuation(plant, fn, spec.window.c, samples=samples,
                                       seed=seed)
        ok = theta_req <= spec.theta
    else:
        ok = True
    trace.append({"step": "feasibility", "margin": margin,
                  "theta_required": theta_req, "feasible": ok})
    return ok, margin


def tuning_recipe(spec: TuningSpec, plant=None, samples: int = 4000,
                  seed: int = 0, max_iters: int = 100) -> RecipeResult:
    """Run the full design recipe and return parameters plus a step trace.

    Steps: normalize ell at the endpoint; push (k_max up, r up, k_min down)
    until the windowed rate meets sigma_star; check feasibility through the
    analytic cap (and sampled required actuation when a plant is given);
    on failure relax the endpoint (r down, k_max down), which overrides the
    rate adjustments; optionally switch to the power-composed factor.
    RecipeError carries the trace when the budget runs out.
    """
    k_min, k_max, r, p = spec.k_min, spec.k_max, spec.r, spec.p
    trace = [{"step": "targets", "window": (spec.window.eps, spec.window.c),
              "sigma": spec.sigma, "sigma_star": spec.sigma_star,
              "seeds": (k_min, k_max, r)}]
    iters = 0

    params, fn, rate = _build(spec, k_min, k_max, r, p)
    trace.append({"step": "normalize", "ell": params.ell, "rate": rate})
    while rate < spec.sigma_star * (1.0 - RATE_TOL_REL):
        if iters >= max_iters:
            raise RecipeError("rate target not met within iteration budget", trace)
        iters += 1
        k_max *= 1.25
        k_min *= 0.8
        r = min(1.0, r + 0.05)
        params, fn, rate = _build(spec, k_min, k_max, r, p)
        trace.append({"step": "raise_rate", "k_max": k_max, "k_min": k_min,
                      "r": r, "rate": rate})

    ok, margin = _feasible(spec, fn, plant, samples, seed, trace)
    while not ok:
        if iters >= max_iters:
            raise RecipeError("no feasible parameters within iteration budget", trace)
        iters += 1
        if r - 0.05 > k_min:
            r -= 0.05
        k_max = max(k_max / 1.25, max(r, 1.0) + 1e-6)
        params, fn, rate = _build(spec, k_min, k_max, r, p)
        trace.append({"step": "relax_endpoint", "k_max": k_max, "r": r, "rate": rate})
        ok, margin = _feasible(spec, fn, plant, samples, seed, trace)
        if ok and rate < spec.sigma_star * (1.0 - RATE_TOL_REL) and p is None:
            # last resort: steepen near-origin gain with the composed factor
            p = 0.5
            params, fn, rate = _build(spec, k_min, k_max, r, p)
            trace.append({"step": "power_compose", "p": p, "rate": rate})
            ok, margin = _feasible(spec, fn, plant, samples, seed, trace)

    if rate < spec.sigma_star * (1.0 - RATE_TOL_REL):
        raise RecipeError(
            f"feasible parameters reach rate {rate:g} < target {spec.sigma_star:g}",
            trace)
    return RecipeResult(params, r, p, spec.sigma, rate, margin, True, trace)
