"""Class-K comparison functions, their dynamic factors, and shape tools.

A comparison function alpha is represented quasi-linearly as
``alpha(v) = s(v) * v`` where ``s`` is the dynamic (scaling) factor. The
constructive family used for control design is the rational factor

    s_rat(v) = (k_min*v + k_max*ell) / (v + ell),   0 <= k_min <= k_max, ell > 0,

which is strictly decreasing with s_rat(0) = k_max and s_rat(inf) = k_min,
and makes ``s_rat(v)*sigma*v`` strictly concave and Lipschitz with slope
bound ``sigma*k_max``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ClassificationError, PreconditionError


def _as_array(v):
    arr = np.asarray(v, dtype=float)
    if np.any(arr < 0.0):
        raise PreconditionError("comparison functions are defined for v >= 0")
    return arr


@dataclass(frozen=True)
class RationalFactorParams:
    """Parameters (k_min, k_max, ell) of the rational concave factor."""

    k_min: float
    k_max: float
    ell: float

    def __post_init__(self):
        if not (0.0 <= self.k_min <= self.k_max) or self.k_max <= 0.0:
            raise PreconditionError("need 0 <= k_min <= k_max and k_max > 0")
        if self.ell <= 0.0:
            raise PreconditionError("normalization level ell must be positive")


def rational_factor(params: RationalFactorParams, v):
    """Evaluate s_rat(v); strictly decreasing, bounded in (k_min, k_max]."""
    arr = _as_array(v)
    out = (params.k_min * arr + params.k_max * params.ell) / (arr + params.ell)
    return float(out) if np.isscalar(v) or arr.ndim == 0 else out


def power_composed_factor(params: RationalFactorParams, p: float, v):
    """Evaluate the composed factor s_rat(v**p) for p in (0, 1)."""
    if not 0.0 < p < 1.0:
        raise PreconditionError("composition exponent p must lie in (0, 1)")
    arr = _as_array(v)
    out = (params.k_min * arr ** p + params.k_max * params.ell) / (arr ** p + params.ell)
    return float(out) if np.isscalar(v) or arr.ndim == 0 else out


class ComparisonFn:
    """Base class: a class-K decay function with evaluation and shape metadata.

    Instances are immutable after construction and safe to share across
    threads. ``domain_hint`` is the positive level range the function is
    meant to be evaluated on (informational).
    """

    domain_hint = None

    def alpha(self, v):
        raise NotImplementedError

    def factor(self, v):
        """Dynamic factor s(v) = alpha(v)/v, with the analytic limit at v = 0."""
        arr = _as_array(v)
        scalar = np.isscalar(v) or arr.ndim == 0
        arr = np.atleast_1d(arr)
        out = np.empty_like(arr)
        pos = arr > 0.0
        out[pos] = np.atleast_1d(self.alpha(arr[pos])) / arr[pos]
        if np.any(~pos):
            out[~pos] = self.factor_at_zero()
        return float(out[0]) if scalar else out

    def factor_at_zero(self):
        """Analytic limit of alpha(v)/v at v = 0; math.inf when it diverges."""
        raise NotImplementedError

    def kernel_code(self):
        """(code, params) encoding for the simulation kernels, or None."""
        return None

    def to_dict(self):
        raise NotImplementedError

    def __call__(self, v):
        return self.alpha(v)


@dataclass(frozen=True)
class Linear(ComparisonFn):
    sigma: float
    domain_hint: tuple = None

    def __post_init__(self):
        if self.sigma <= 0.0:
            raise PreconditionError("linear rate sigma must be positive")

    def alpha(self, v):
        arr = _as_array(v)
        out = self.sigma * arr
        return float(out) if np.isscalar(v) or arr.ndim == 0 else out

    def factor_at_zero(self):
        return self.sigma

    def kernel_code(self):
        return _kernels.CMP_LINEAR, np.array([self.sigma])

    def to_dict(self):
        return {"kind": "linear", "sigma": self.sigma}


@dataclass(frozen=True)
class SqrtComparison(ComparisonFn):
    """alpha(v) = coeff * sqrt(v); the saturated single-integrator cap shape."""

    coeff: float
    domain_hint: tuple = None

    def __post_init__(self):
        if self.coeff <= 0.0:
            raise PreconditionError("sqrt coefficient must be positive")

    def alpha(self, v):
        arr = _as_array(v)
        out = self.coeff * np.sqrt(arr)
        return float(out) if np.isscalar(v) or arr.ndim == 0 else out

    def factor_at_zero(self):
        return math.inf

    def kernel_code(self):
        return _kernels.CMP_SQRT, np.array([self.coeff])

    def to_dict(self):
        return {"kind": "sqrt", "coeff": self.coeff}


@dataclass(frozen=True)
class PowerComparison(ComparisonFn):
    """alpha(v) = C * v**p with C > 0, p > 0."""

    C: float
    p: float
    domain_hint: tuple = None

    def __post_init__(self):
        if self.C <= 0.0 or self.p <= 0.0:
            raise PreconditionError("power comparison needs C > 0 and p > 0")

    def alpha(self, v):
        arr = _as_array(v)
        out = self.C * arr ** self.p
        return float(out) if np.isscalar(v) or arr.ndim == 0 else out

    def factor_at_zero(self):
        if self.p < 1.0:
            return math.inf
        if self.p == 1.0:
            return self.C
        return 0.0

    def kernel_code(self):
        return _kernels.CMP_POWER, np.array([self.C, self.p])

    def to_dict(self):
        return {"kind": "power", "C": self.C, "p": self.p}


@dataclass(frozen=True)
class RationalConcave(ComparisonFn):
    """alpha(v) = s_rat(v) * sigma * v; strictly concave, slope bound sigma*k_max."""

    sigma: float
    params: RationalFactorParams
    domain_hint: tuple = None

    def __post_init__(self):
        if self.sigma <= 0.0:
            raise PreconditionError("baseline rate sigma must be positive")

    def alpha(self, v):
        arr = _as_array(v)
        out = rational_factor(self.params, arr) * self.sigma * arr
        return float(out) if np.isscalar(v) or arr.ndim == 0 else out

    def factor_at_zero(self):
        return self.sigma * self.params.k_max

    def kernel_code(self):
        p = self.params
        return _kernels.CMP_RATIONAL, np.array([self.sigma, p.k_min, p.k_max, p.ell])

    def to_dict(self):
        p = self.params
        return {"kind": "rational_concave", "sigma": self.sigma,
                "k_min": p.k_min, "k_max": p.k_max, "ell": p.ell}


@dataclass(frozen=True)
class PowerComposedRational(ComparisonFn):
    """alpha(v) = s_rat(v**p) * sigma * v with p in (0, 1)."""

    sigma: float
    params: RationalFactorParams
    p: float
    domain_hint: tuple = None

    def __post_init__(self):
        if self.sigma <= 0.0:
            raise PreconditionError("baseline rate sigma must be positive")
        if not 0.0 < self.p < 1.0:
            raise PreconditionError("composition exponent p must lie in (0, 1)")

    def alpha(self, v):
        arr = _as_array(v)
        out = power_composed_factor(self.params, self.p, arr) * self.sigma * arr
        return float(out) if np.isscalar(v) or arr.ndim == 0 else out

    def factor_at_zero(self):
        return self.sigma * self.params.k_max

    def kernel_code(self):
        q = self.params
        return _kernels.CMP_POWERRAT, np.array(
            [self.sigma, q.k_min, q.k_max, q.ell, self.p])

    def to_dict(self):
        q = self.params
        return {"kind": "power_composed_rational", "sigma": self.sigma,
                "k_min": q.k_min, "k_max": q.k_max, "ell": q.ell, "p": self.p}


class Tabulated(ComparisonFn):
    """Monotone piecewise-linear interpolation of sampled (v, alpha(v)) pairs.

    An implicit (0, 0) anchor is prepended so the interpolant is class-K on
    [0, v_max]. The dynamic factor at v = 0 is undefined for this kind.
    """

    def __init__(self, points, domain_hint=None):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise PreconditionError("need at least two (v, alpha) pairs")
        if pts[0, 0] > 0.0:
            pts = np.vstack([[0.0, 0.0], pts])
        if np.any(np.diff(pts[:, 0]) <= 0.0) or np.any(np.diff(pts[:, 1]) <= 0.0):
            raise PreconditionError("tabulated points must be strictly increasing")
        if pts[0, 0] != 0.0 or pts[0, 1] != 0.0:
            raise PreconditionError("tabulated comparison must pass through (0, 0)")
        self._v = pts[:, 0]
        self._a = pts[:, 1]
        self.domain_hint = domain_hint or (float(self._v[1]), float(self._v[-1]))

    def alpha(self, v):
        arr = _as_array(v)
        out = np.interp(arr, self._v, self._a)
        return float(out) if np.isscalar(v) or arr.ndim == 0 else out

    def factor_at_zero(self):
        raise PreconditionError("dynamic factor limit at v=0 is unknown for tabulated data")

    def to_dict(self):
        return {"kind": "tabulated", "points": np.column_stack([self._v, self._a]).tolist()}

    def __repr__(self):
        return f"Tabulated({len(self._v)} points on [0, {self._v[-1]:g}])"


class NormalizedConcave(ComparisonFn):
    """Endpoint-normalized concave comparison (s(y)/s(c)) * r * sigma * y.

    Guarantees alpha(c) = r*sigma*c exactly, so the endpoint sits at fraction
    r of the linear baseline while the interior keeps the template's shape.
    """

    def __init__(self, template, c, r, sigma, domain_hint=None):
        if isinstance(template, ComparisonFn):
            self._template = template
            self._factor = template.factor
            self._factor0 = template.factor_at_zero
        elif callable(template):
            self._template = None
            self._factor = template
            self._factor0 = lambda: float(template(0.0))
        else:
            raise PreconditionError("template must be a ComparisonFn or a factor callable")
        if not 0.0 < r <= 1.0:
            raise PreconditionError("endpoint ratio r must lie in (0, 1]")
        if sigma <= 0.0 or c <= 0.0:
            raise PreconditionError("need sigma > 0 and c > 0")
        sc = float(self._factor(c))
        if sc <= 0.0:
            raise PreconditionError("template factor must be positive at c")
        self.c = float(c)
        self.r = float(r)
        self.sigma = float(sigma)
        self._sc = sc
        self.domain_hint = domain_hint or (0.0, float(c))

    def alpha(self, v):
        arr = _as_array(v)
        out = np.asarray(self._factor(arr)) / self._sc * (self.r * self.sigma) * arr
        return float(out) if np.isscalar(v) or arr.ndim == 0 else out

    def factor_at_zero(self):
        s0 = self._factor0()
        if math.isinf(s0):
            return math.inf
        return s0 / self._sc * self.r * self.sigma

    def kernel_code(self):
        # a rational template folds into a plain rational kind with rescaled sigma
        if isinstance(self._template, RationalConcave):
            p = self._template.params
            sig = self.r * self.sigma / rational_factor(p, self.c)
            return _kernels.CMP_RATIONAL, np.array([sig, p.k_min, p.k_max, p.ell])
        return None

    def to_dict(self):
        if self._template is None:
            raise PreconditionError("cannot serialize a raw-callable template")
        return {"kind": "normalized_concave", "template": self._template.to_dict(),
                "c": self.c, "r": self.r, "sigma": self.sigma}

    def __repr__(self):
        return (f"NormalizedConcave(c={self.c:g}, r={self.r:g}, sigma={self.sigma:g}, "
                f"template={self._template!r})")


def eval_alpha(fn: ComparisonFn, v):
    """alpha(v); 0 at v = 0, precondition error for negative levels."""
    return fn.alpha(v)


def dynamic_factor(fn: ComparisonFn, v):
    """s(v) = alpha(v)/v with the analytic limit at v = 0 (inf sentinel allowed)."""
    return fn.factor(v)


def make_concave_comparison(sigma, params: RationalFactorParams, p=None):
    """Build s_rat(v)*sigma*v, or s_rat(v**p)*sigma*v when p is given."""
    if p is None:
        return RationalConcave(sigma, params)
    return PowerComposedRational(sigma, params, p)


def normalized_concave(template, c, r, sigma):
    """Scale a decreasing template factor so alpha(c) = r*sigma*c exactly."""
    return NormalizedConcave(template, c, r, sigma)


# ---------------------------------------------------------------------------
# shape classification
# ---------------------------------------------------------------------------

LINEAR_SHAPE = "linear"
CONCAVE_SHAPE = "strictly_concave"
CONVEX_SHAPE = "strictly_convex"
MIXED_SHAPE = "mixed"

# second differences within this relative band of max|alpha| count as linear
SHAPE_TOL_REL = 1e-9


@dataclass(frozen=True)
class ShapeClass:
    kind: str
    segments: tuple = field(default_factory=tuple)  # (lo, hi, local kind), mixed only

    def __str__(self):
        if self.kind != MIXED_SHAPE:
            return self.kind
        parts = ", ".join(f"[{a:g},{b:g}]:{k}" for a, b, k in self.segments)
        return f"mixed({parts})"


def _window_bounds(window):
    if hasattr(window, "eps") and hasattr(window, "c"):
        return float(window.eps), float(window.c)
    lo, hi = window
    return float(lo), float(hi)


def classify_shape(fn: ComparisonFn, window, grid_size: int = 64) -> ShapeClass:
    """Classify alpha's shape on the window from second central differences.

    Dynamic-factor monotonicity is used as a cross-check (a strictly
    decreasing factor certifies a concave candidate, increasing certifies
    convex); hard disagreement raises ClassificationError with diagnostics.
    """
    if grid_size < 16:
        raise PreconditionError("grid_size must be at least 16")
    lo, hi = _window_bounds(window)
    grid = np.linspace(lo, hi, grid_size)
    av = np.asarray(fn.alpha(grid))
    tol = SHAPE_TOL_REL * np.max(np.abs(av))
    d2 = av[2:] - 2.0 * av[1:-1] + av[:-2]
    signs = np.where(d2 > tol, 1, np.where(d2 < -tol, -1, 0))

    if np.all(signs == 0):
        kind = LINEAR_SHAPE
    elif np.all(signs == -1):
        kind = CONCAVE_SHAPE
    elif np.all(signs == 1):
        kind = CONVEX_SHAPE
    else:
        kind = MIXED_SHAPE

    # factor-monotonicity cross-check on the same grid
    sv = np.asarray(fn.factor(grid))
    stol = SHAPE_TOL_REL * np.max(np.abs(sv))
    ds = np.diff(sv)
    s_dec = np.all(ds < stol) and np.any(ds < -stol)
    s_inc = np.all(ds > -stol) and np.any(ds > stol)
    s_const = np.all(np.abs(ds) <= stol)
    diag = {"kind": kind, "factor_decreasing": bool(s_dec),
            "factor_increasing": bool(s_inc), "factor_constant": bool(s_const),
            "max_d2": float(np.max(d2)), "min_d2": float(np.min(d2)), "tol": float(tol)}
    if kind == CONCAVE_SHAPE and s_inc:
        raise ClassificationError("curvature says concave but the factor increases", diag)
    if kind == CONVEX_SHAPE and s_dec:
        raise ClassificationError("curvature says convex but the factor decreases", diag)
    if kind == LINEAR_SHAPE and not s_const:
        raise ClassificationError("curvature says linear but the factor is not constant", diag)

    if kind != MIXED_SHAPE:
        return ShapeClass(kind)

    # maximal same-shape runs over the interior grid
    names = {-1: CONCAVE_SHAPE, 0: LINEAR_SHAPE, 1: CONVEX_SHAPE}
    segs = []
    start = 0
    for i in range(1, len(signs) + 1):
        if i == len(signs) or signs[i] != signs[start]:
            segs.append((float(grid[start]), float(grid[i]), names[int(signs[start])]))
            start = i
    return ShapeClass(MIXED_SHAPE, tuple(segs))


# ---------------------------------------------------------------------------
# JSON round trip
# ---------------------------------------------------------------------------


def from_dict(d) -> ComparisonFn:
    """Inverse of ComparisonFn.to_dict; used by the CLI config loader."""
    kind = d.get("kind")
    if kind == "linear":
        return Linear(d["sigma"])
    if kind == "sqrt":
        return SqrtComparison(d["coeff"])
    if kind == "power":
        return PowerComparison(d["C"], d["p"])
    if kind == "rational_concave":
        return RationalConcave(d["sigma"], RationalFactorParams(d["k_min"], d["k_max"], d["ell"]))
    if kind == "power_composed_rational":
        return PowerComposedRational(
            d["sigma"], RationalFactorParams(d["k_min"], d["k_max"], d["ell"]), d["p"])
    if kind == "tabulated":
        return Tabulated(d["points"])
    if kind == "normalized_concave":
        return NormalizedConcave(from_dict(d["template"]), d["c"], d["r"], d["sigma"])
    raise PreconditionError(f"unknown comparison kind {kind!r}")
