"""Independent reference solvers used by the test suite.

The QP oracle is projected gradient with an exact Euclidean projection
onto {box} intersect {a'z <= b} (the scalar dual multiplier of the
halfspace solves a piecewise-linear equation whose breakpoints are
enumerated directly), followed by an active-set identification polish
that solves the KKT equalities. It shares no code with the package's
active-set solver.
"""

import numpy as np


def project_box_halfspace(z, lo, hi, a, bub):
    """Exact projection of one point onto box intersect halfspace."""
    y = np.clip(z, lo, hi)
    if a @ y - bub <= 0.0:
        return y
    # mu >= 0 solves a @ clip(z - mu a, lo, hi) = bub (decreasing, PL in mu)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_lo = (z - lo) / a
        t_hi = (z - hi) / a
    cand = np.concatenate([t_lo, t_hi])
    cand = np.unique(cand[np.isfinite(cand) & (cand > 0.0)])

    def g(mu):
        return a @ np.clip(z - mu * a, lo, hi) - bub

    prev_mu, prev_g = 0.0, g(0.0)
    for mu in cand:
        cur = g(mu)
        if cur <= 0.0:
            lam = prev_mu + (mu - prev_mu) * prev_g / (prev_g - cur) \
                if cur != prev_g else mu
            return np.clip(z - lam * a, lo, hi)
        prev_mu, prev_g = mu, cur
    # beyond the last breakpoint only unclamped coordinates still move
    free = (z - prev_mu * a > lo) & (z - prev_mu * a < hi)
    slope = float(a[free] @ a[free])
    lam = prev_mu + prev_g / slope
    return np.clip(z - lam * a, lo, hi)


def _polish(H, g, a, bub, lo, hi, z, tol=1e-6):
    """Solve the KKT equalities for the active set identified at z.

    Returns the polished point when the KKT conditions verify, else None.
    """
    n = len(z)
    scale = 1.0 + float(np.max(np.abs(z)))
    at_lo = z <= lo + tol * scale
    at_hi = z >= hi - tol * scale
    ineq_on = a @ z >= bub - tol * scale
    free = ~(at_lo | at_hi)
    zp = np.where(at_lo, lo, np.where(at_hi, hi, z))
    lam = 0.0
    F = np.nonzero(free)[0]
    if ineq_on and len(F) > 0 and np.max(np.abs(a[F])) > 1e-12:
        K = np.zeros((len(F) + 1, len(F) + 1))
        K[:len(F), :len(F)] = H[np.ix_(F, F)]
        K[:len(F), -1] = a[F]
        K[-1, :len(F)] = a[F]
        rhs = np.concatenate([
            -(g[F] + H[np.ix_(F, ~free)] @ zp[~free]),
            [bub - a[~free] @ zp[~free]],
        ])
        try:
            sol = np.linalg.solve(K, rhs)
        except np.linalg.LinAlgError:
            return None
        zp[F] = sol[:-1]
        lam = sol[-1]
    elif len(F) > 0:
        try:
            zp[F] = np.linalg.solve(
                H[np.ix_(F, F)], -(g[F] + H[np.ix_(F, ~free)] @ zp[~free]))
        except np.linalg.LinAlgError:
            return None
    # verify KKT: primal feasibility, multiplier signs, stationarity off-bounds
    if np.any(zp < lo - 1e-9 * scale) or np.any(zp > hi + 1e-9 * scale):
        return None
    if a @ zp > bub + 1e-8 * scale:
        return None
    if lam < -1e-8:
        return None
    grad = H @ zp + g + lam * a
    for i in range(n):
        if lo[i] == hi[i]:
            continue
        gscale = scale * (1.0 + abs(H[i, i]))
        if free[i] and abs(grad[i]) > 1e-7 * gscale:
            return None
        if at_lo[i] and not free[i] and grad[i] < -1e-7 * gscale:
            return None
        if at_hi[i] and not free[i] and grad[i] > 1e-7 * gscale:
            return None
    if np.max(np.abs(zp - z)) > 1e-3 * scale:
        return None
    return zp


def pg_qp_oracle(H, g, a, bub, lo, hi, iters=400):
    """Reference solve of min 1/2 z'Hz + g'z s.t. a'z <= bub, box.

    Projected gradient with exact projections identifies the active set;
    the KKT polish then delivers the exact optimum. Falls back to a long
    PG run when the polish cannot be verified.
    """
    H = np.asarray(H, dtype=float)
    n = H.shape[0]
    step = 1.0 / np.linalg.eigvalsh(H).max()

    def run(z0, count):
        z = z0.copy()
        for _ in range(count):
            z = project_box_halfspace(z - step * (H @ z + g), lo, hi, a, bub)
        return z

    z = run(project_box_halfspace(np.zeros(n), lo, hi, a, bub), iters)
    polished = _polish(H, g, a, bub, lo, hi, z)
    if polished is None:
        z = run(z, 50 * iters)
        polished = _polish(H, g, a, bub, lo, hi, z)
    zstar = polished if polished is not None else z
    return zstar, float(0.5 * zstar @ H @ zstar + g @ zstar)
