"""Actuation-level analysis: decay caps, required peak input, lower bounds.

Sup-type quantities over sublevel sets are estimated by seeded rejection
sampling biased toward maximizers (boundary-scaled candidates for quadratic
CLFs, then coordinate-wise hill climbing). Estimates are sampling-based by
nature; exact closed forms are used where a plant supplies them.
"""

import math
from dataclasses import dataclass

import numpy as np

from .comparison import ComparisonFn
from .errors import PreconditionError, SamplingError

INF = math.inf


@dataclass(frozen=True)
class RegularityConstants:
    """Growth bounds (L1, L2, g_bars, k1, k2) and the derived k3, k4."""

    L1: float
    L2: float
    g_bars: tuple
    k1: float
    k2: float

    def __post_init__(self):
        if self.L1 < 0.0 or self.L2 <= 0.0 or self.k1 <= 0.0 or self.k2 < self.k1:
            raise PreconditionError("need L1 >= 0, L2 > 0, 0 < k1 <= k2")
        if any(gb <= 0.0 for gb in self.g_bars):
            raise PreconditionError("per-column input bounds must be positive")

    @property
    def k3(self):
        return self.L1 * self.L2 / self.k1

    @property
    def k4(self):
        return self.L2 / math.sqrt(self.k1) * float(np.sum(self.g_bars))


def regularity_from_plant(plant, samples: int = 10000, seed: int = 0,
                          inflation: float = 1.05) -> RegularityConstants:
    """Analytic constants when the plant carries them, else empirical maxima
    of the defining ratios over a seeded sample, inflated by 5%."""
    if None not in (plant.L1, plant.L2, plant.g_bars, plant.k1, plant.k2):
        return RegularityConstants(plant.L1, plant.L2, tuple(plant.g_bars),
                                   plant.k1, plant.k2)
    X = sample_sublevel(plant, plant.c_max, samples, seed)
    nrm = np.linalg.norm(X, axis=1)
    keep = nrm > 1e-9
    X, nrm = X[keep], nrm[keep]
    fX = np.array([np.linalg.norm(plant.f(x)) for x in X])
    gradX = np.array([np.linalg.norm(plant.grad_V(x)) for x in X])
    gb = np.max([[np.linalg.norm(plant.g(x)[:, i]) for i in range(plant.m)]
                 for x in X], axis=0)
    VX = plant.V_batch(X)
    return RegularityConstants(
        L1=inflation * float(np.max(fX / nrm)),
        L2=inflation * float(np.max(gradX / nrm)),
        g_bars=tuple(inflation * gb),
        k1=float(np.min(VX / nrm ** 2)) / inflation,
        k2=inflation * float(np.max(VX / nrm ** 2)),
    )


def pointwise_decay_cap(plant, x, theta: float) -> float:
    """D_max(x, theta) = -L_fV(x) + theta * ||L_gV(x)||_1 (infinity-norm input set)."""
    if theta < 0.0:
        raise PreconditionError("theta must be nonnegative")
    lgv = np.atleast_1d(plant.LgV(x))
    return float(-plant.LfV(x) + theta * np.sum(np.abs(lgv)))


# ---------------------------------------------------------------------------
# sublevel-set sampling and sup refinement
# ---------------------------------------------------------------------------


def sample_sublevel(plant, v, samples: int = 10000, seed: int = 0):
    """Uniform rejection sample of Omega(V, v), plus exact boundary points
    for quadratic CLFs (ray scaling). Deterministic for a fixed seed."""
    if plant.quadratic_P is not None:
        half = np.sqrt(v * np.diag(np.linalg.inv(plant.quadratic_P)))
        box = np.column_stack([-half, half])
    elif plant.sample_box is not None:
        box = plant.sample_box
    else:
        raise SamplingError(f"plant {plant.name!r} provides no sampling box")
    rng = np.random.default_rng(seed)
    kept = []
    total = 0
    for _ in range(60):
        draw = rng.uniform(box[:, 0], box[:, 1], size=(samples, plant.n))
        ok = plant.V_batch(draw) <= v
        kept.append(draw[ok])
        total += int(np.sum(ok))
        if total >= samples:
            break
    X = np.concatenate(kept)[:samples]
    if len(X) < min(samples, 100):
        raise SamplingError(
            f"sublevel set at v={v:g} accepted only {len(X)} of the requested "
            f"{samples} samples")
    if plant.quadratic_P is not None:
        VX = plant.V_batch(X)
        pos = VX > 1e-300
        scale = np.sqrt(v / VX[pos])
        X = np.vstack([X, X[pos] * scale[:, None]])
    return X


def _refine_max(objective, feasible, X, steps: int = 50, top: int = 32):
    """Coordinate-wise hill climbing from the best candidates; shrinking steps."""
    vals = objective(X)
    order = np.argsort(vals)[::-1][:top]
    pts = X[order].copy()
    best = vals[order].copy()
    span = np.max(X, axis=0) - np.min(X, axis=0)
    hs = np.tile(np.maximum(span / 8.0, 1e-12), (len(pts), 1))
    for _ in range(steps):
        improved = np.zeros(len(pts), dtype=bool)
        for j in range(X.shape[1]):
            for sgn in (1.0, -1.0):
                cand = pts.copy()
                cand[:, j] += sgn * hs[:, j]
                good = feasible(cand)
                v2 = np.where(good, objective(cand), -INF)
                upd = v2 > best
                pts[upd] = cand[upd]
                best[upd] = v2[upd]
                improved |= upd
        hs[~improved] *= 0.5
    i = int(np.argmax(best))
    return float(best[i]), pts[i]


def _dmax_batch(plant, theta):
    def obj(X):
        lgv = plant.LgV_batch(X)
        return -plant.LfV_batch(X) + theta * np.sum(np.abs(lgv), axis=1)
    return obj


def level_cap(plant, theta, v, samples: int = 10000, seed: int = 0) -> float:
    """Estimate the level-wise cap sup over Omega(V, v) of D_max(x, theta)."""
    if plant.c_max is not None and v > plant.c_max * (1.0 + 1e-12):
        raise PreconditionError("level v exceeds the certified c_max")
    if plant.exact_level_cap is not None:
        return float(plant.exact_level_cap(theta, v))
    if samples < 1000:
        raise PreconditionError("need at least 1e3 samples")
    X = sample_sublevel(plant, v, samples, seed)
    obj = _dmax_batch(plant, theta)
    feas = lambda Y: plant.V_batch(Y) <= v
    best, _ = _refine_max(obj, feas, X)
    return best


def level_cap_sweep(plant, theta, levels, samples: int = 10000, seed: int = 0):
    """Caps over an increasing level sweep, with monotonicity enforced
    (running max; set inclusion makes the true cap nondecreasing)."""
    caps = []
    running = -INF
    for v in levels:
        running = max(running, level_cap(plant, theta, v, samples, seed))
        caps.append(running)
    return np.array(caps)


def required_actuation(plant, fn: ComparisonFn, v, samples: int = 10000,
                       seed: int = 0, refine: bool = True, points=None) -> float:
    """theta_min(alpha; v): sup over Omega(V, v) of [(alpha(V) + L_fV) / ||L_gV||_1]+.

    Returns 0 when the numerator is nonpositive everywhere and math.inf when
    some sampled state has a zero denominator with positive numerator. Pass
    `points` to evaluate the sup over a fixed state set (no resampling).
    """

    def ratio(X):
        num = np.asarray(fn.alpha(plant.V_batch(X))) + plant.LfV_batch(X)
        den = np.sum(np.abs(plant.LgV_batch(X)), axis=1)
        out = np.zeros(len(X))
        pos = den > 0.0
        out[pos] = np.maximum(num[pos] / den[pos], 0.0)
        out[~pos] = np.where(num[~pos] > 0.0, INF, 0.0)
        return out

    X = sample_sublevel(plant, v, samples, seed) if points is None else np.asarray(points)
    vals = ratio(X)
    best = float(np.max(vals))
    if math.isinf(best):
        return INF
    if not refine:
        return best
    feas = lambda Y: plant.V_batch(Y) <= v
    refined, _ = _refine_max(ratio, feas, X)
    return max(best, refined)


def actuation_lower_bound(fn: ComparisonFn, v, consts: RegularityConstants,
                          grid: int = 512) -> float:
    """Analytic lower bound sup over (0, v] of [(alpha(V) - k3 V)]+ / (k4 sqrt(V)).

    Endpoint-dominated closed form for linear comparisons; grid search with
    golden-section refinement otherwise.
    """
    if v <= 0.0:
        raise PreconditionError("level v must be positive")
    k3, k4 = consts.k3, consts.k4
    from .comparison import Linear

    if isinstance(fn, Linear):
        return max(fn.sigma - k3, 0.0) * v / (k4 * math.sqrt(v))

    def phi(V):
        return max(float(fn.alpha(V)) - k3 * V, 0.0) / (k4 * math.sqrt(V))

    levels = np.geomspace(v * 1e-12, v, grid)
    vals = np.maximum(np.asarray(fn.alpha(levels)) - k3 * levels, 0.0) \
        / (k4 * np.sqrt(levels))
    i = int(np.argmax(vals))
    lo = levels[max(i - 1, 0)]
    hi = levels[min(i + 1, grid - 1)]
    from scipy.optimize import minimize_scalar

    res = minimize_scalar(lambda V: -phi(V), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-14})
    return max(float(vals[i]), float(-res.fun))


# ---------------------------------------------------------------------------
# small-level asymptotics
# ---------------------------------------------------------------------------

VANISHING = "vanishing"
BOUNDED = "bounded"
BLOW_UP = "blow_up"


@dataclass(frozen=True)
class AsymptoticSpec:
    """Growth exponents near the origin: numerator q1, input channel q2."""

    q1: float
    q2: float
    c_g: float = 1.0
    rho: float = 1.0

    def __post_init__(self):
        if not 1.0 <= self.q1 <= 2.0:
            raise PreconditionError("q1 must lie in [1, 2]")
        if self.q2 < 1.0 or self.c_g <= 0.0 or self.rho <= 0.0:
            raise PreconditionError("need q2 >= 1, c_g > 0, rho > 0")


@dataclass(frozen=True)
class RegimeVerdict:
    kind: str
    note: str = ""


def asymptotic_regime(spec: AsymptoticSpec) -> RegimeVerdict:
    """Classify theta_min(alpha; v) as v -> 0 by the exponent gap q1 - q2."""
    if spec.q2 < spec.q1:
        return RegimeVerdict(VANISHING)
    if spec.q2 == spec.q1:
        return RegimeVerdict(BOUNDED, "limit set by leading coefficients")
    return RegimeVerdict(BLOW_UP, "assumes the numerator stays positive near 0; "
                                  "a nonpositive numerator yields 0 instead")


def cap_sweep_rows(plant, fn, theta, consts, levels, samples: int = 4000,
                   seed: int = 0):
    """(v, level cap, theta_min, theta_min lower bound) rows for cap plots."""
    rows = []
    running = -INF
    for v in levels:
        running = max(running, level_cap(plant, theta, v, max(samples, 1000), seed))
        rows.append((float(v), running,
                     required_actuation(plant, fn, v, samples, seed),
                     actuation_lower_bound(fn, v, consts)))
    return rows
