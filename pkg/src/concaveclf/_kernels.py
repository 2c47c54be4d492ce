"""Hot numeric kernels, written once in njit-compatible style.

Everything here takes plain float64 arrays and scalars so the same source
runs compiled (numba backend) or interpreted (numpy backend). Comparison
functions and controllers are passed as integer codes plus parameter
vectors; the object layer does the encoding.
"""

import math

import numpy as np

from ._backend import compiled

# comparison-function codes
CMP_LINEAR = 0      # params: sigma
CMP_SQRT = 1        # params: coeff                      alpha = coeff*sqrt(v)
CMP_POWER = 2       # params: C, p                       alpha = C*v**p
CMP_RATIONAL = 3    # params: sigma, k_min, k_max, ell   alpha = s_rat(v)*sigma*v
CMP_POWERRAT = 4    # params: sigma, k_min, k_max, ell, p

# controller codes
CTRL_MININORM = 0
CTRL_HARDQP = 1
CTRL_SOFTQP = 2
CTRL_FLEXQP = 3
CTRL_BANGBANG = 4

# solver statuses
QP_OPTIMAL = 0
QP_INFEASIBLE = 1
QP_MAXITER = 2


@compiled
def alpha_eval(code, params, v):
    if v <= 0.0:
        return 0.0
    if code == CMP_LINEAR:
        return params[0] * v
    if code == CMP_SQRT:
        return params[0] * math.sqrt(v)
    if code == CMP_POWER:
        return params[0] * v ** params[1]
    if code == CMP_RATIONAL:
        s = (params[1] * v + params[2] * params[3]) / (v + params[3])
        return s * params[0] * v
    # CMP_POWERRAT
    w = v ** params[4]
    s = (params[1] * w + params[2] * params[3]) / (w + params[3])
    return s * params[0] * v


@compiled
def cross3(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


@compiled
def hat3(v):
    out = np.zeros((3, 3))
    out[0, 1] = -v[2]
    out[0, 2] = v[1]
    out[1, 0] = v[2]
    out[1, 2] = -v[0]
    out[2, 0] = -v[1]
    out[2, 1] = v[0]
    return out


@compiled
def rodrigues(w):
    """Closed-form exp of hat(w) on SO(3)."""
    th = math.sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2])
    K = hat3(w)
    if th < 1e-12:
        return np.eye(3) + K + 0.5 * (K @ K)
    K = K / th
    return np.eye(3) + math.sin(th) * K + (1.0 - math.cos(th)) * (K @ K)


@compiled
def polar_orthonormalize(R):
    U, s, Vt = np.linalg.svd(R)
    Q = U @ Vt
    if np.linalg.det(Q) < 0.0:
        U2 = U.copy()
        U2[:, 2] = -U2[:, 2]
        Q = U2 @ Vt
    return Q


@compiled
def qp_solve_box_ineq(H, g, a, bub, lo, hi, use_ineq):
    """Primal active-set solve of  min 1/2 z'Hz + g'z  s.t.  a'z <= bub, lo<=z<=hi.

    H must be symmetric positive definite. Returns (z, lam_ineq, status, iters)
    with lam_ineq the multiplier of the general inequality (0 when inactive).
    """
    n = H.shape[0]
    max_iter = 200
    z = np.zeros(n)
    for i in range(n):
        if z[i] < lo[i]:
            z[i] = lo[i]
        elif z[i] > hi[i]:
            z[i] = hi[i]
    ineq_active = False
    if use_ineq:
        s = 0.0
        for i in range(n):
            s += a[i] * z[i]
        if s > bub:
            for i in range(n):
                if a[i] > 0.0 and lo[i] > -np.inf:
                    z[i] = lo[i]
                elif a[i] < 0.0 and hi[i] < np.inf:
                    z[i] = hi[i]
            s = 0.0
            for i in range(n):
                s += a[i] * z[i]
            gap = s - bub
            if gap > 0.0:
                closed = False
                for i in range(n):
                    if a[i] < 0.0 and hi[i] == np.inf:
                        z[i] += gap / (-a[i])
                        closed = True
                        break
                    if a[i] > 0.0 and lo[i] == -np.inf:
                        z[i] -= gap / a[i]
                        closed = True
                        break
                if not closed:
                    return z, 0.0, QP_INFEASIBLE, 0
                ineq_active = True

    state = np.full(n, -1, np.int64)  # -1 free, 0 at lower, 1 at upper
    for i in range(n):
        if lo[i] > -np.inf and z[i] <= lo[i]:
            state[i] = 0
        elif hi[i] < np.inf and z[i] >= hi[i]:
            state[i] = 1

    lam = 0.0
    fidx = np.empty(n, np.int64)
    for it in range(max_iter):
        grad = H @ z + g
        nf = 0
        for i in range(n):
            if state[i] == -1:
                fidx[nf] = i
                nf += 1
        p = np.zeros(n)
        lam = 0.0
        if ineq_active and nf > 0:
            anorm = 0.0
            for k in range(nf):
                anorm = max(anorm, abs(a[fidx[k]]))
            if anorm < 1e-14:
                # inequality cannot constrain the free block; drop it
                ineq_active = False
                continue
            K = np.zeros((nf + 1, nf + 1))
            rhs = np.zeros(nf + 1)
            for r in range(nf):
                for cc in range(nf):
                    K[r, cc] = H[fidx[r], fidx[cc]]
                K[r, nf] = a[fidx[r]]
                K[nf, r] = a[fidx[r]]
                rhs[r] = -grad[fidx[r]]
            sol = np.linalg.solve(K, rhs)
            for k in range(nf):
                p[fidx[k]] = sol[k]
            lam = sol[nf]
        elif nf > 0:
            K = np.zeros((nf, nf))
            rhs = np.zeros(nf)
            for r in range(nf):
                for cc in range(nf):
                    K[r, cc] = H[fidx[r], fidx[cc]]
                rhs[r] = -grad[fidx[r]]
            sol = np.linalg.solve(K, rhs)
            for k in range(nf):
                p[fidx[k]] = sol[k]

        zmax = 1.0
        for i in range(n):
            zmax = max(zmax, abs(z[i]))
        pmax = 0.0
        for i in range(n):
            pmax = max(pmax, abs(p[i]))

        if pmax <= 1e-12 * zmax:
            # stationary on the working set: inspect multipliers
            worst = -1e-10
            drop = -1          # coordinate to release
            drop_ineq = False
            lam_eff = lam if ineq_active else 0.0
            for i in range(n):
                if lo[i] == hi[i]:
                    continue  # pinned variable, never released
                if state[i] == 0:
                    mu = grad[i] + lam_eff * a[i]
                    if mu < worst:
                        worst = mu
                        drop = i
                        drop_ineq = False
                elif state[i] == 1:
                    mu = -(grad[i] + lam_eff * a[i])
                    if mu < worst:
                        worst = mu
                        drop = i
                        drop_ineq = False
            if ineq_active and lam < worst:
                worst = lam
                drop = -1
                drop_ineq = True
            if drop == -1 and not drop_ineq:
                return z, lam_eff, QP_OPTIMAL, it
            if drop_ineq:
                ineq_active = False
            else:
                state[drop] = -1
            continue

        # ratio test toward the nearest blocking constraint
        alpha = 1.0
        block = -1
        block_side = -1
        block_ineq = False
        for k in range(nf):
            i = fidx[k]
            if p[i] > 1e-14 and hi[i] < np.inf:
                al = (hi[i] - z[i]) / p[i]
                if al < alpha:
                    alpha = al
                    block = i
                    block_side = 1
                    block_ineq = False
            elif p[i] < -1e-14 and lo[i] > -np.inf:
                al = (lo[i] - z[i]) / p[i]
                if al < alpha:
                    alpha = al
                    block = i
                    block_side = 0
                    block_ineq = False
        if use_ineq and not ineq_active:
            ap = 0.0
            az = 0.0
            for i in range(n):
                ap += a[i] * p[i]
                az += a[i] * z[i]
            if ap > 1e-14:
                al = (bub - az) / ap
                if al < alpha:
                    alpha = al
                    block = -1
                    block_ineq = True
        if alpha < 0.0:
            alpha = 0.0
        for i in range(n):
            z[i] += alpha * p[i]
        if block_ineq:
            ineq_active = True
        elif block >= 0:
            state[block] = block_side
            z[block] = hi[block] if block_side == 1 else lo[block]
    return z, lam, QP_MAXITER, max_iter


# ---------------------------------------------------------------------------
# pendulum closed loop
# ---------------------------------------------------------------------------


@compiled
def _pend_dyn(x, u, gcoef, bI, gin):
    out = np.empty(2)
    out[0] = x[1]
    out[1] = gcoef * math.sin(x[0]) - bI * x[1] + gin * u
    return out


@compiled
def pendulum_loop(P, gcoef, bI, gin, ccode, cparams, ctrl, theta, q, hcost,
                  smin, smax, kap0, kaprate, x0, dt, nsub, nsteps, vstop):
    """ZOH closed loop for the planar pendulum (state [psi, omega], one input).

    Returns (xs, us, Vs, deltas, sigmas, rates, statuses, used) where `used`
    is the number of completed control steps.
    """
    xs = np.zeros((nsteps + 1, 2))
    us = np.zeros(nsteps)
    Vs = np.zeros(nsteps + 1)
    deltas = np.zeros(nsteps)
    sigmas = np.zeros(nsteps)
    rates = np.zeros(nsteps)
    statuses = np.zeros(nsteps, np.int64)

    x = x0.copy()
    xs[0] = x
    Vs[0] = x[0] * (P[0, 0] * x[0] + P[0, 1] * x[1]) + x[1] * (P[1, 0] * x[0] + P[1, 1] * x[1])
    used = 0
    h = dt / nsub
    for k in range(nsteps):
        v = Vs[k]
        px0 = P[0, 0] * x[0] + P[0, 1] * x[1]
        px1 = P[1, 0] * x[0] + P[1, 1] * x[1]
        f = _pend_dyn(x, 0.0, gcoef, bI, 0.0)
        lfv = 2.0 * (px0 * f[0] + px1 * f[1])
        lgv = 2.0 * px1 * gin
        u = 0.0
        delta = 0.0
        sigstar = 0.0
        status = QP_OPTIMAL

        if ctrl == CTRL_BANGBANG:
            if lgv > 0.0:
                u = -theta
            elif lgv < 0.0:
                u = theta
        elif ctrl == CTRL_MININORM:
            b0 = lfv + alpha_eval(ccode, cparams, v)
            if b0 > 0.0:
                if lgv == 0.0:
                    status = QP_INFEASIBLE
                else:
                    u = -b0 / lgv
        elif ctrl == CTRL_HARDQP:
            b0 = lfv + alpha_eval(ccode, cparams, v)
            if b0 > theta * abs(lgv):
                status = QP_INFEASIBLE
                u = -theta if lgv > 0.0 else (theta if lgv < 0.0 else 0.0)
            elif b0 > 0.0:
                u = -b0 / lgv
        elif ctrl == CTRL_SOFTQP:
            b0 = lfv + alpha_eval(ccode, cparams, v)
            H = np.zeros((2, 2))
            H[0, 0] = 2.0 * hcost
            H[1, 1] = 2.0 * q
            g = np.zeros(2)
            a = np.empty(2)
            a[0] = lgv
            a[1] = -1.0
            lo = np.empty(2)
            hi = np.empty(2)
            lo[0] = -theta
            hi[0] = theta
            lo[1] = 0.0
            hi[1] = np.inf
            z, lam, status, _ = qp_solve_box_ineq(H, g, a, -b0, lo, hi, True)
            u = z[0]
            delta = z[1]
        else:  # CTRL_FLEXQP
            kap = kap0 if kaprate == np.inf else kap0 * (1.0 - math.exp(-kaprate * v))
            H = np.zeros((2, 2))
            H[0, 0] = 2.0 * (1.0 - kap)
            H[1, 1] = 2.0 * kap
            g = np.zeros(2)
            g[1] = -2.0 * kap * smax
            a = np.empty(2)
            a[0] = lgv
            a[1] = v
            lo = np.empty(2)
            hi = np.empty(2)
            lo[0] = -theta
            hi[0] = theta
            lo[1] = smin
            hi[1] = smax
            z, lam, status, _ = qp_solve_box_ineq(H, g, a, -lfv, lo, hi, True)
            u = z[0]
            sigstar = z[1]

        us[k] = u
        deltas[k] = delta
        sigmas[k] = sigstar
        statuses[k] = status
        rates[k] = -(lfv + lgv * u) / v if v > 0.0 else 0.0

        for _ in range(nsub):
            k1 = _pend_dyn(x, u, gcoef, bI, gin)
            k2 = _pend_dyn(x + 0.5 * h * k1, u, gcoef, bI, gin)
            k3 = _pend_dyn(x + 0.5 * h * k2, u, gcoef, bI, gin)
            k4 = _pend_dyn(x + h * k3, u, gcoef, bI, gin)
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        xs[k + 1] = x
        Vs[k + 1] = x[0] * (P[0, 0] * x[0] + P[0, 1] * x[1]) + x[1] * (P[1, 0] * x[0] + P[1, 1] * x[1])
        used = k + 1
        if Vs[k + 1] < vstop:
            break
    return xs, us, Vs, deltas, sigmas, rates, statuses, used


# ---------------------------------------------------------------------------
# quadrotor attitude closed loop
# ---------------------------------------------------------------------------


@compiled
def _att_lie(R, w, J, Jinv, kR, kc):
    """(V, LfV, LgV) for V = 1/2 w'Jw + kR*Psi + kc*eR'w with R_d = I, w_d = 0."""
    eR = np.empty(3)
    eR[0] = 0.5 * (R[2, 1] - R[1, 2])
    eR[1] = 0.5 * (R[0, 2] - R[2, 0])
    eR[2] = 0.5 * (R[1, 0] - R[0, 1])
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    psi = 0.5 * (3.0 - tr)
    Jw = J @ w
    v = 0.5 * (w[0] * Jw[0] + w[1] * Jw[1] + w[2] * Jw[2]) + kR * psi \
        + kc * (eR[0] * w[0] + eR[1] * w[1] + eR[2] * w[2])
    # eR-dot = C(R) w with C = (tr(R) I - R)^T / 2; only the quadratic form enters
    Cw = 0.5 * (tr * w - R.T @ w)
    wxJw = cross3(w, Jw)
    JinvWx = Jinv @ wxJw
    lfv = kR * (eR[0] * w[0] + eR[1] * w[1] + eR[2] * w[2]) \
        + kc * (w[0] * Cw[0] + w[1] * Cw[1] + w[2] * Cw[2]) \
        - kc * (eR[0] * JinvWx[0] + eR[1] * JinvWx[1] + eR[2] * JinvWx[2])
    lgv = w + kc * (Jinv @ eR)
    return v, lfv, lgv


@compiled
def quad_loop(J, Jinv, kR, kc, ccode, cparams, ctrl, theta, q, Hcost,
              smin, smax, kap0, kaprate, R0, w0, dt, nsub, nsteps, vstop):
    """ZOH closed loop for the attitude plant (state (R, omega), three inputs)."""
    xs = np.zeros((nsteps + 1, 12))
    us = np.zeros((nsteps, 3))
    Vs = np.zeros(nsteps + 1)
    deltas = np.zeros(nsteps)
    sigmas = np.zeros(nsteps)
    rates = np.zeros(nsteps)
    statuses = np.zeros(nsteps, np.int64)

    R = R0.copy()
    w = w0.copy()
    v, lfv, lgv = _att_lie(R, w, J, Jinv, kR, kc)
    for j in range(3):
        for i in range(3):
            xs[0, 3 * j + i] = R[j, i]
    xs[0, 9:12] = w
    Vs[0] = v
    used = 0
    h = dt / nsub
    for k in range(nsteps):
        v, lfv, lgv = _att_lie(R, w, J, Jinv, kR, kc)
        u = np.zeros(3)
        delta = 0.0
        sigstar = 0.0
        status = QP_OPTIMAL
        l1 = abs(lgv[0]) + abs(lgv[1]) + abs(lgv[2])

        if ctrl == CTRL_BANGBANG:
            for i in range(3):
                if lgv[i] > 0.0:
                    u[i] = -theta
                elif lgv[i] < 0.0:
                    u[i] = theta
        elif ctrl == CTRL_MININORM:
            b0 = lfv + alpha_eval(ccode, cparams, v)
            if b0 > 0.0:
                nrm2 = lgv[0] ** 2 + lgv[1] ** 2 + lgv[2] ** 2
                if nrm2 == 0.0:
                    status = QP_INFEASIBLE
                else:
                    u = -(b0 / nrm2) * lgv
        elif ctrl == CTRL_HARDQP:
            b0 = lfv + alpha_eval(ccode, cparams, v)
            if b0 > theta * l1:
                status = QP_INFEASIBLE
                for i in range(3):
                    if lgv[i] > 0.0:
                        u[i] = -theta
                    elif lgv[i] < 0.0:
                        u[i] = theta
            elif b0 > 0.0:
                H = 2.0 * Hcost
                g = np.zeros(3)
                lo = np.full(3, -theta)
                hi = np.full(3, theta)
                z, lam, status, _ = qp_solve_box_ineq(H, g, lgv, -b0, lo, hi, True)
                u = z
        elif ctrl == CTRL_SOFTQP:
            b0 = lfv + alpha_eval(ccode, cparams, v)
            H = np.zeros((4, 4))
            for r in range(3):
                for cc in range(3):
                    H[r, cc] = 2.0 * Hcost[r, cc]
            H[3, 3] = 2.0 * q
            g = np.zeros(4)
            a = np.empty(4)
            a[0] = lgv[0]
            a[1] = lgv[1]
            a[2] = lgv[2]
            a[3] = -1.0
            lo = np.empty(4)
            hi = np.empty(4)
            for i in range(3):
                lo[i] = -theta
                hi[i] = theta
            lo[3] = 0.0
            hi[3] = np.inf
            z, lam, status, _ = qp_solve_box_ineq(H, g, a, -b0, lo, hi, True)
            u[0] = z[0]
            u[1] = z[1]
            u[2] = z[2]
            delta = z[3]
        else:  # CTRL_FLEXQP
            kap = kap0 if kaprate == np.inf else kap0 * (1.0 - math.exp(-kaprate * v))
            H = np.zeros((4, 4))
            for i in range(3):
                H[i, i] = 2.0 * (1.0 - kap)
            H[3, 3] = 2.0 * kap
            g = np.zeros(4)
            g[3] = -2.0 * kap * smax
            a = np.empty(4)
            a[0] = lgv[0]
            a[1] = lgv[1]
            a[2] = lgv[2]
            a[3] = v
            lo = np.empty(4)
            hi = np.empty(4)
            for i in range(3):
                lo[i] = -theta
                hi[i] = theta
            lo[3] = smin
            hi[3] = smax
            z, lam, status, _ = qp_solve_box_ineq(H, g, a, -lfv, lo, hi, True)
            u[0] = z[0]
            u[1] = z[1]
            u[2] = z[2]
            sigstar = z[3]

        us[k] = u
        deltas[k] = delta
        sigmas[k] = sigstar
        statuses[k] = status
        rates[k] = -(lfv + lgv[0] * u[0] + lgv[1] * u[1] + lgv[2] * u[2]) / v if v > 0.0 else 0.0

        for _ in range(nsub):
            Jw = J @ w
            k1 = Jinv @ (u - cross3(w, Jw))
            w2 = w + 0.5 * h * k1
            k2 = Jinv @ (u - cross3(w2, J @ w2))
            w3 = w + 0.5 * h * k2
            k3 = Jinv @ (u - cross3(w3, J @ w3))
            w4 = w + h * k3
            k4 = Jinv @ (u - cross3(w4, J @ w4))
            wn = w + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            wmid = 0.5 * (w + wn)
            R = R @ rodrigues(wmid * h)
            w = wn
        R = polar_orthonormalize(R)
        for j in range(3):
            for i in range(3):
                xs[k + 1, 3 * j + i] = R[j, i]
        xs[k + 1, 9:12] = w
        vq, _, _ = _att_lie(R, w, J, Jinv, kR, kc)
        Vs[k + 1] = vq
        used = k + 1
        if vq < vstop:
            break
    return xs, us, Vs, deltas, sigmas, rates, statuses, used
