"""Compiled right-hand side and Dormand-Prince 5(4) integrator.

The single-excitation equations are tiny (at most four complex amplitudes),
so interpreter overhead dominates any Python-level integrator. Everything
on the hot path lives here under numba.

Coefficient layout
------------------
mode_coef : (n, 7) rows (d2, dv2, v2, kr, kv, weight, inv_radius) with
    |r(t) - R0|^2 = d2 + t*(dv2 + t*v2) and phase k.r(t) + Phi = kr + t*kv.
    Zero rows when no mode is present.
pair_coef : (m, 22) rows (j, l, r0_j[3], v_j[3], r0_l[3], v_l[3],
    dip_j[3], dip_l[3], prefactor, k) where prefactor = mu_j mu_l /
    (4 pi eps0 hbar) and k = omega / c.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

# Dormand-Prince 5(4) tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = -71 / 57600, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40

# continuous extension: y(t + x h) = y + h * sum_s K_s * sum_p P[s, p] x^(p+1)
DENSE_P = np.array(
    [
        [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
ERROR_EXPONENT = -1.0 / 5.0

STATUS_OK = 0
STATUS_UNDERFLOW = -1


@njit(cache=True)
def pair_coupling(row, t, box_half):
    """J(t) for one atom pair; zero if either atom is outside the box (box_half > 0)."""
    ra = np.empty(3)
    rb = np.empty(3)
    for i in range(3):
        ra[i] = row[2 + i] + row[5 + i] * t
        rb[i] = row[8 + i] + row[11 + i] * t
    if box_half > 0.0:
        for i in range(3):
            if abs(ra[i]) > box_half or abs(rb[i]) > box_half:
                return 0.0
    dx = rb[0] - ra[0]
    dy = rb[1] - ra[1]
    dz = rb[2] - ra[2]
    R = math.sqrt(dx * dx + dy * dy + dz * dz)
    if R == 0.0:
        return math.nan
    ux, uy, uz = dx / R, dy / R, dz / R
    da = row[14:17]
    db = row[17:20]
    parallel = da[0] * db[0] + da[1] * db[1] + da[2] * db[2]
    projected = (da[0] * ux + da[1] * uy + da[2] * uz) * (db[0] * ux + db[1] * uy + db[2] * uz)
    kR = row[21] * R
    c = math.cos(kR)
    near = (parallel - 3.0 * projected) * (c + kR * math.sin(kR))
    far = (parallel - projected) * kR * kR * c
    return row[20] / (R * R * R) * (near - far)


@njit(cache=True)
def rhs(t, y, dy, mode_coef, pair_coef, box_half, detuning):
    n = y.shape[0] - 1
    photon = 0.0 + 0.0j
    if detuning != 0.0:
        ph = complex(math.cos(detuning * t), math.sin(detuning * t))
    else:
        ph = 1.0 + 0.0j
    for j in range(n):
        dy[j] = 0.0
    for j in range(mode_coef.shape[0]):
        row = mode_coef[j]
        dist2 = row[0] + t * (row[1] + t * row[2])
        if dist2 < 0.0:
            dist2 = 0.0
        g = row[5] * math.exp(-math.sqrt(dist2) * row[6]) * math.sin(row[3] + t * row[4])
        dy[j] = g * ph * y[n]
        photon += g * y[j]
    for p in range(pair_coef.shape[0]):
        row = pair_coef[p]
        j = int(row[0])
        l = int(row[1])
        J = pair_coupling(row, t, box_half)
        dy[j] += J * y[l]
        dy[l] += J * y[j]
    dy[n] = photon * ph.conjugate()
    for j in range(n + 1):
        dy[j] = -1j * dy[j]


@njit(cache=True)
def _rms_scaled(v, scale):
    acc = 0.0
    for i in range(v.shape[0]):
        q = abs(v[i]) / scale[i]
        acc += q * q
    return math.sqrt(acc / v.shape[0])


@njit(cache=True)
def _initial_step(t0, y0, f0, direction, rtol, atol, mode_coef, pair_coef, box_half, detuning):
    n = y0.shape[0]
    scale = np.empty(n)
    for i in range(n):
        scale[i] = atol + abs(y0[i]) * rtol
    d0 = _rms_scaled(y0, scale)
    d1 = _rms_scaled(f0, scale)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    y1 = y0 + h0 * direction * f0
    f1 = np.empty(n, dtype=np.complex128)
    rhs(t0 + h0 * direction, y1, f1, mode_coef, pair_coef, box_half, detuning)
    d2 = _rms_scaled(f1 - f0, scale) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / 5.0)
    return min(100.0 * h0, h1)


@njit(cache=True)
def dopri5(t0, t1, y0, grid, rtol, atol, max_step, mode_coef, pair_coef, box_half, detuning):
    """Adaptive Dormand-Prince 5(4) from t0 to t1 (either direction).

    ``grid`` holds output times ordered in the integration direction and
    lying in [t0, t1]; they are filled by the continuous extension.
    Returns (grid states, final state, status, time reached, rhs evaluations).
    """
    n = y0.shape[0]
    direction = 1.0 if t1 >= t0 else -1.0
    out = np.empty((grid.shape[0], n), dtype=np.complex128)
    K = np.empty((7, n), dtype=np.complex128)
    y = y0.copy()
    y_new = np.empty(n, dtype=np.complex128)
    ytmp = np.empty(n, dtype=np.complex128)
    err = np.empty(n, dtype=np.complex128)
    scale = np.empty(n)

    gi = 0
    while gi < grid.shape[0] and grid[gi] == t0:
        out[gi] = y
        gi += 1

    t = t0
    rhs(t, y, K[0], mode_coef, pair_coef, box_half, detuning)
    nfev = 1
    if t0 == t1:
        return out, y, STATUS_OK, t, nfev

    h = _initial_step(t0, y, K[0], direction, rtol, atol, mode_coef, pair_coef, box_half, detuning)
    nfev += 1

    while direction * (t1 - t) > 0.0:
        min_step = 10.0 * abs(np.nextafter(t, direction * np.inf) - t)
        if h > max_step:
            h = max_step
        if h < min_step:
            h = min_step
        step_accepted = False
        step_rejected = False
        while not step_accepted:
            if h < min_step:
                return out[:gi], y, STATUS_UNDERFLOW, t, nfev
            hs = h * direction
            t_new = t + hs
            if direction * (t_new - t1) > 0.0:
                t_new = t1
            hs = t_new - t
            ah = abs(hs)

            for i in range(n):
                ytmp[i] = y[i] + hs * (A21 * K[0, i])
            rhs(t + C2 * hs, ytmp, K[1], mode_coef, pair_coef, box_half, detuning)
            for i in range(n):
                ytmp[i] = y[i] + hs * (A31 * K[0, i] + A32 * K[1, i])
            rhs(t + C3 * hs, ytmp, K[2], mode_coef, pair_coef, box_half, detuning)
            for i in range(n):
                ytmp[i] = y[i] + hs * (A41 * K[0, i] + A42 * K[1, i] + A43 * K[2, i])
            rhs(t + C4 * hs, ytmp, K[3], mode_coef, pair_coef, box_half, detuning)
            for i in range(n):
                ytmp[i] = y[i] + hs * (A51 * K[0, i] + A52 * K[1, i] + A53 * K[2, i] + A54 * K[3, i])
            rhs(t + C5 * hs, ytmp, K[4], mode_coef, pair_coef, box_half, detuning)
            for i in range(n):
                ytmp[i] = y[i] + hs * (
                    A61 * K[0, i] + A62 * K[1, i] + A63 * K[2, i] + A64 * K[3, i] + A65 * K[4, i]
                )
            rhs(t + hs, ytmp, K[5], mode_coef, pair_coef, box_half, detuning)
            for i in range(n):
                y_new[i] = y[i] + hs * (
                    B1 * K[0, i] + B3 * K[2, i] + B4 * K[3, i] + B5 * K[4, i] + B6 * K[5, i]
                )
            rhs(t_new, y_new, K[6], mode_coef, pair_coef, box_half, detuning)
            nfev += 6

            for i in range(n):
                err[i] = hs * (
                    E1 * K[0, i] + E3 * K[2, i] + E4 * K[3, i] + E5 * K[4, i] + E6 * K[5, i] + E7 * K[6, i]
                )
                scale[i] = atol + max(abs(y[i]), abs(y_new[i])) * rtol
            err_norm = _rms_scaled(err, scale)
            if not math.isfinite(err_norm):
                return out[:gi], y, STATUS_UNDERFLOW, t, nfev

            if err_norm < 1.0:
                if err_norm == 0.0:
                    factor = MAX_FACTOR
                else:
                    factor = min(MAX_FACTOR, SAFETY * err_norm**ERROR_EXPONENT)
                if step_rejected:
                    factor = min(1.0, factor)
                h = ah * factor
                step_accepted = True
            else:
                h = ah * max(MIN_FACTOR, SAFETY * err_norm**ERROR_EXPONENT)
                step_rejected = True

        # dense output for grid points inside (t, t_new]
        while gi < grid.shape[0] and direction * (grid[gi] - t_new) <= 0.0:
            if grid[gi] == t_new:
                out[gi] = y_new
                gi += 1
                continue
            x = (grid[gi] - t) / hs
            for i in range(n):
                acc = 0.0 + 0.0j
                for s in range(7):
                    q = 0.0
                    xp = 1.0
                    for p in range(4):
                        xp *= x
                        q += DENSE_P[s, p] * xp
                    acc += K[s, i] * q
                out[gi, i] = y[i] + hs * acc
            gi += 1

        t = t_new
        for i in range(n):
            y[i] = y_new[i]
            K[0, i] = K[6, i]

    return out[:gi], y, STATUS_OK, t, nfev
