"""Compiled kernels for the per-step hot path.

These mirror :mod:`energy_suff.geometry` and :mod:`energy_suff.unicycle`
evaluated on plain arrays, so the simulator can afford a path rebuild and a
full reference evaluation at every millisecond step.  The pure Python
versions remain the reference; the tests hold the two to round-off.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

# indices into the array returned by path_eval
L_, LDOT, PX, PY, TFX, TFY, TSX, TSY, DTX, DTY = range(10)


@njit(cache=True)
def _logistic(z):
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


@njit(cache=True)
def min_segment(wps):
    n = wps.shape[0]
    best = np.inf
    for i in range(n - 1):
        ell = math.hypot(wps[i + 1, 0] - wps[i, 0], wps[i + 1, 1] - wps[i, 1])
        if ell < best:
            best = ell
    return best


@njit(cache=True)
def path_eval(wps, beta, eps, s, xix, xiy):
    """Length, reference point, tangents and explicit time derivative at ``s``.

    ``(xix, xiy)`` is the velocity of the head waypoint; only the head moves.
    """
    n = wps.shape[0]
    seg = np.empty(n - 1)
    for i in range(n - 1):
        seg[i] = math.hypot(wps[i + 1, 0] - wps[i, 0], wps[i + 1, 1] - wps[i, 1])
    cum = np.empty(n)
    cum[0] = 0.0
    for i in range(n - 1):
        cum[i + 1] = cum[i] + seg[i]
    total = cum[n - 1]
    rem = np.empty(n)
    rem[n - 1] = 0.0
    for i in range(n - 2, -1, -1):
        rem[i] = rem[i + 1] + seg[i]
    bp = np.empty(n)
    for i in range(n):
        bp[i] = cum[i] / total
    bp[n - 1] = 1.0

    moving = xix != 0.0 or xiy != 0.0
    l_dot = 0.0
    if moving:
        l_dot = -((wps[1, 0] - wps[0, 0]) * xix + (wps[1, 1] - wps[0, 1]) * xiy) / seg[0]
    k = l_dot / (total * total)
    sdot = np.zeros(n)
    for i in range(1, n - 1):
        sdot[i] = rem[i] * k

    ox = wps[0, 0]
    oy = wps[0, 1]
    last = n - 2
    px = 0.0
    py = 0.0
    tfx = 0.0
    tfy = 0.0
    tsx = 0.0
    tsy = 0.0
    vx = xix
    vy = xiy
    for i in range(n - 1):
        s0 = bp[i]
        s1 = bp[i + 1]
        lo = s0 - eps if i == 0 else s0
        hi = s1 + eps if i == last else s1
        r = _logistic(beta * (s - lo))
        f = _logistic(-beta * (s - hi))
        g = r * f
        dx = wps[i + 1, 0] - wps[i, 0]
        dy = wps[i + 1, 1] - wps[i, 1]
        ds = s1 - s0
        tau = (s - s0) / ds
        qx = wps[i, 0] - ox + tau * dx
        qy = wps[i, 1] - oy + tau * dy
        px += g * qx
        py += g * qy
        kk = beta * g * (f - r)
        tfx += kk * qx + g * dx / ds
        tfy += kk * qy + g * dy / ds
        tsx += g * dx / seg[i]
        tsy += g * dy / seg[i]
        if moving:
            g_dot = beta * g * ((1.0 - f) * sdot[i + 1] - (1.0 - r) * sdot[i])
            tau_dot = (-sdot[i] * (s1 - s) - sdot[i + 1] * (s - s0)) / (ds * ds)
            if i == 0:
                mx = xix * (1.0 - tau) + tau_dot * dx - xix
                my = xiy * (1.0 - tau) + tau_dot * dy - xiy
            else:
                mx = tau_dot * dx - xix
                my = tau_dot * dy - xiy
            vx += g_dot * qx + g * mx
            vy += g_dot * qy + g * my
    out = np.empty(10)
    out[L_] = total
    out[LDOT] = l_dot
    out[PX] = ox + px
    out[PY] = oy + py
    out[TFX] = tfx
    out[TFY] = tfy
    out[TSX] = total * tsx
    out[TSY] = total * tsy
    if moving:
        out[DTX] = vx
        out[DTY] = vy
    else:
        out[DTX] = 0.0
        out[DTY] = 0.0
    return out


@njit(cache=True)
def slowing_power(centers, amps, half_width, beta, floor, s):
    total = 0.0
    for i in range(centers.shape[0]):
        c = centers[i]
        w = _logistic(beta * (s - (c - half_width))) * _logistic(-beta * (s - (c + half_width)))
        total += (amps[i] + floor) * w
    return total


@njit(cache=True)
def _softplus(z):
    return max(z, 0.0) + math.log1p(math.exp(-abs(z)))


@njit(cache=True)
def window_integral(lo, hi, beta, s0, s1):
    """Exact integral of one window over ``[s0, s1]``; see ``unicycle.window_integral``."""
    p1 = (_softplus(beta * (s1 - lo)) - _softplus(beta * (hi - s1))) / beta - s1
    p0 = (_softplus(beta * (s0 - lo)) - _softplus(beta * (hi - s0))) / beta - s0
    return (p1 - p0) / -math.expm1(-beta * (hi - lo))


@njit(cache=True)
def slowing_integral(centers, amps, half_width, beta, floor, s):
    if s >= 1.0:
        return 0.0
    total = 0.0
    for i in range(centers.shape[0]):
        c = centers[i]
        total += (amps[i] + floor) * window_integral(c - half_width, c + half_width, beta, s, 1.0)
    return total


QP_TOL = 1e-9
RANK_EPS = 3.0 * 2.220446049250313e-16
GRAM_WELL = 1e-6  # relative Gram determinant below which a pair is solved by SVD


@njit(cache=True)
def _row_tol(a, i, z, b):
    rn = math.sqrt(a[i, 0] * a[i, 0] + a[i, 1] * a[i, 1] + a[i, 2] * a[i, 2])
    zn = math.sqrt(z[0] * z[0] + z[1] * z[1] + z[2] * z[2])
    return QP_TOL * max(1.0, rn * zn, abs(b[i]))


@njit(cache=True)
def _row_val(a, i, z):
    return a[i, 0] * z[0] + a[i, 1] * z[1] + a[i, 2] * z[2]


@njit(cache=True)
def _feasible(a, b, z):
    for i in range(3):
        if _row_val(a, i, z) < b[i] - _row_tol(a, i, z, b):
            return False
    return True


@njit(cache=True)
def _active_correction(a, idx, k, r):
    """Minimum-norm dz with a_S dz = r (least squares if inconsistent), and mu with dz = a_S^T mu.

    Well-conditioned sets use the Gram system in closed form.  Otherwise the
    SVD of the active rows is used directly, which avoids squaring their
    condition number.
    """
    rows = np.empty((k, 3))
    for p in range(k):
        for c in range(3):
            rows[p, c] = a[idx[p], c]
    g = rows @ rows.T
    mu = np.zeros(k)
    if k == 1:
        if g[0, 0] > 0.0:
            mu[0] = r[0] / g[0, 0]
        return rows.T @ mu, mu
    if k == 2:
        det = g[0, 0] * g[1, 1] - g[0, 1] * g[1, 0]
        if det > GRAM_WELL * g[0, 0] * g[1, 1]:
            mu[0] = (r[0] * g[1, 1] - g[0, 1] * r[1]) / det
            mu[1] = (g[0, 0] * r[1] - g[1, 0] * r[0]) / det
            return rows.T @ mu, mu
    u, sv, vt = np.linalg.svd(rows, full_matrices=False)
    cut = RANK_EPS * sv[0]  # numerical rank, as numpy.linalg.matrix_rank
    proj = u.T @ r
    dz = np.zeros(3)
    for j in range(sv.shape[0]):
        if sv[j] > cut:
            w = proj[j] / sv[j]
            for c in range(3):
                dz[c] += w * vt[j, c]
            for p in range(k):
                mu[p] += u[p, j] * w / sv[j]
    return dz, mu


@njit(cache=True)
def qp_solve(a, b, zn):
    """Active-set enumeration for min ||z - zn||^2 s.t. a z >= b (three rows).

    Returns (z, active mask bits, objective, multipliers, ok).
    """
    best_z = zn.copy()
    best_lam = np.zeros(3)
    if _feasible(a, b, zn):
        return best_z, 0, 0.0, best_lam, True
    best_obj = np.inf
    best_mask = -1
    idx = np.empty(3, dtype=np.int64)
    for mask in range(1, 8):
        k = 0
        for i in range(3):
            if mask >> i & 1:
                idx[k] = i
                k += 1
        r = np.empty(k)
        for p in range(k):
            r[p] = b[idx[p]] - _row_val(a, idx[p], zn)
        dz, mu = _active_correction(a, idx, k, r)
        ok = True
        for p in range(k):
            if mu[p] < -QP_TOL:
                ok = False
        if not ok:
            continue
        z = zn + dz
        # least-squares solutions of inconsistent systems miss the affine set
        for p in range(k):
            ip = idx[p]
            if abs(_row_val(a, ip, z) - b[ip]) > _row_tol(a, ip, z, b):
                ok = False
        if not ok or not _feasible(a, b, z):
            continue
        obj = (z[0] - zn[0]) ** 2 + (z[1] - zn[1]) ** 2 + (z[2] - zn[2]) ** 2
        if obj < best_obj:
            best_obj = obj
            best_mask = mask
            best_z = z
            best_lam = np.zeros(3)
            for p in range(k):
                best_lam[idx[p]] = 2.0 * mu[p]
    if best_mask < 0:
        return zn.copy(), -1, np.inf, np.zeros(3), False
    return best_z, best_mask, best_obj, best_lam, True


@njit(cache=True)
def barrier_rows(per_m, L, l_dot, s, h_e, h_d, x0, x1, r0, r1, t0, t1, dt0, dt1, ge, gb, gd, power, eta_extra):
    """Energy, bound and tracking rows; same layout as ``cbf.row_data``."""
    ex = x0 - r0
    ey = x1 - r1
    a = np.zeros((3, 3))
    b = np.empty(3)
    a[0, 0] = per_m * L + eta_extra
    a[1, 0] = 1.0
    a[2, 0] = ex * t0 + ey * t1
    a[2, 1] = -ex
    a[2, 2] = -ey
    b[0] = -ge * h_e + power + per_m * l_dot * (1.0 - s)
    b[1] = -gb * s
    b[2] = -gd * h_d - (ex * dt0 + ey * dt1)
    return a, b


@njit(cache=True)
def control_eval(wps, beta, eps, s, xix, xiy, x0, x1, consumed, budget, per_m, delta_m, d,
                 ge, gb, gd, power, slow, extra, un0, un1):
    """Reference evaluation, barrier values, rows and QP solve for one step.

    Returns an array: [eta, u1, u2, mask, ok, h_e, h_d, xr_x, xr_y, L].
    """
    ev = path_eval(wps, beta, eps, s, xix, xiy)
    L = ev[L_]
    h_e = budget - consumed - per_m * (L * (1.0 - s) - delta_m) - extra
    ex = x0 - ev[PX]
    ey = x1 - ev[PY]
    h_d = 0.5 * (d * d - (ex * ex + ey * ey))
    a, b = barrier_rows(per_m, L, ev[LDOT], s, h_e, h_d, x0, x1, ev[PX], ev[PY], ev[TFX], ev[TFY],
                        ev[DTX], ev[DTY], ge, gb, gd, power, slow)
    zn = np.empty(3)
    zn[0] = 0.0
    zn[1] = un0
    zn[2] = un1
    z, mask, obj, lam, ok = qp_solve(a, b, zn)
    out = np.empty(10)
    out[0] = z[0]
    out[1] = z[1]
    out[2] = z[2]
    out[3] = mask
    out[4] = 1.0 if ok else 0.0
    out[5] = h_e
    out[6] = h_d
    out[7] = ev[PX]
    out[8] = ev[PY]
    out[9] = L
    return out
