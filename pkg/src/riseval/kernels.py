"""Hot loops: the interference Laplace exponent and the Monte Carlo geometry.

Each kernel exists as a numba loop and as a vectorised numpy routine with the
same signature; :data:`riseval._accel.USE_NUMBA` picks one at import time.

Laplace exponent
----------------
``J(a; d) = int_d^inf (1 - (1 + a x^-alpha)^-m) x p(x) dx`` with
``p(x) = e^{-beta x}`` (LoS) or ``1 - e^{-beta x}`` (NLoS).  The integral is
taken in ``t = ln x`` with fixed composite Gauss-Legendre panels, which
resolves both the saturation knee at ``x ~ a^(1/alpha)`` and the blockage
scale ``1/beta`` uniformly.  Small-x heads and the NLoS power-law tail are
added in closed form.
"""

from __future__ import annotations

import math

import numpy as np

from ._accel import USE_NUMBA, njit

_GL_X, _GL_W = np.polynomial.legendre.leggauss(12)
PANEL_WIDTH = 1.0
_SAT_FRAC = 1e-17
_TAIL_FRAC = 1e-6
_NLOS_FAR = 40.0
_LOS_SPAN = 60.0


@njit
def _mass(x, beta, los):
    """``int_0^x r p(r) dr`` for the LoS or NLoS thinning."""
    y = beta * x
    if y < 1e-3:
        g = y * y * (0.5 - y * (1.0 / 3.0 - y * (1.0 / 8.0 - y * (1.0 / 30.0 - y / 144.0))))
    else:
        g = -math.expm1(-y) - y * math.exp(-y)
    g /= beta * beta
    return g if los else 0.5 * x * x - g


def _mass_np(x, beta, los):
    y = beta * x
    small = y < 1e-3
    ys = np.where(small, y, 0.0)
    series = ys * ys * (0.5 - ys * (1.0 / 3.0 - ys * (1.0 / 8.0 - ys * (1.0 / 30.0 - ys / 144.0))))
    yb = np.where(small, 1.0, y)
    g = np.where(small, series, -np.expm1(-yb) - yb * np.exp(-yb)) / beta**2
    return g if los else 0.5 * x * x - g


@njit
def _nlos_tail(a, hi, alpha, m):
    """Two-term expansion of the tail beyond ``hi`` where ``p = 1``, ``a x^-alpha << 1``."""
    return m * a * hi ** (2.0 - alpha) / (alpha - 2.0) - 0.5 * m * (m + 1.0) * a * a * hi ** (2.0 - 2.0 * alpha) / (2.0 * alpha - 2.0)


# ------------------------------------------------------------ Laplace exponent


@njit
def _laplace_exponent_numba(log_a, d_min, alpha, m, beta, los, gl_x, gl_w, width):
    n = log_a.shape[0]
    out = np.empty(n)
    for i in range(n):
        la = log_a[i]
        if la == -np.inf:
            out[i] = 0.0
            continue
        scale_a = math.exp(la / alpha)
        d0 = d_min[i]
        # below x_sat the saturation factor is 1 to double precision
        x_sat = scale_a * _SAT_FRAC ** (1.0 / (m * alpha))
        lo = max(d0, x_sat)
        head = _mass(lo, beta, los) - _mass(d0, beta, los)
        if los:
            hi = lo + _LOS_SPAN / beta
        else:
            hi = max(lo * math.e, _NLOS_FAR / beta, scale_a * _TAIL_FRAC ** (-1.0 / alpha))
        t0 = math.log(lo)
        t1 = math.log(hi)
        npan = max(1, int(math.ceil((t1 - t0) / width)))
        h = (t1 - t0) / npan
        # nodes and y = a x^-alpha advance multiplicatively from panel to
        # panel; with integer m, 1 - (1+y)^-m = y/(1+y) sum_{k<m} (1+y)^-k
        # needs no transcendental call at all
        nq = gl_x.shape[0]
        mi = int(m)
        cx = np.empty(nq)
        cy = np.empty(nq)
        for j in range(nq):
            cx[j] = math.exp(0.5 * h * gl_x[j])
            cy[j] = cx[j] ** -alpha
        step_x = math.exp(h)
        step_y = math.exp(-alpha * h)
        xm = math.exp(t0 + 0.5 * h)
        lym = la - alpha * (t0 + 0.5 * h)
        acc = 0.0
        for k in range(npan):
            ym = math.exp(min(lym, 600.0))
            for j in range(nq):
                x = xm * cx[j]
                y = ym * cy[j]
                q = 1.0 / (1.0 + y)
                geo = 1.0
                qk = 1.0
                for _ in range(mi - 1):
                    qk *= q
                    geo += qk
                sat = y * q * geo
                bx = beta * x
                if los:
                    p = math.exp(-bx)
                elif bx > 40.0:
                    p = 1.0
                else:
                    p = -math.expm1(-bx)
                acc += gl_w[j] * sat * p * x * x
            xm *= step_x
            lym -= alpha * h
        acc *= 0.5 * h
        if not los:
            acc += _nlos_tail(math.exp(la), hi, alpha, m)
        out[i] = acc + head
    return out


def _laplace_exponent_numpy(log_a, d_min, alpha, m, beta, los, gl_x, gl_w, width):
    log_a = np.asarray(log_a, dtype=float)
    d_min = np.asarray(d_min, dtype=float)
    out = np.zeros_like(log_a)
    live = np.isfinite(log_a)
    if not live.any():
        return out
    la = log_a[live]
    lo = d_min[live].copy()
    scale_a = np.exp(la / alpha)
    x_sat = scale_a * _SAT_FRAC ** (1.0 / (m * alpha))
    d0 = lo
    lo = np.maximum(d0, x_sat)
    head = _mass_np(lo, beta, los) - _mass_np(d0, beta, los)
    if los:
        hi = lo + _LOS_SPAN / beta
    else:
        hi = np.maximum(np.maximum(lo * math.e, _NLOS_FAR / beta), scale_a * _TAIL_FRAC ** (-1.0 / alpha))
    t0, t1 = np.log(lo), np.log(hi)
    npan = np.maximum(1, np.ceil((t1 - t0) / width)).astype(int)
    acc = np.zeros_like(lo)
    # group lanes by panel count so every group is one dense array operation
    for count in np.unique(npan):
        sel = npan == count
        h = (t1[sel] - t0[sel]) / count
        mids = t0[sel, None] + (np.arange(count)[None, :] + 0.5) * h[:, None]
        t = mids[:, :, None] + 0.5 * h[:, None, None] * gl_x[None, None, :]
        x = np.exp(t)
        ly = la[sel, None, None] - alpha * t
        with np.errstate(over="ignore"):
            sat = -np.expm1(-m * np.log1p(np.exp(np.minimum(ly, 700.0))))
        sat = np.where(ly > 700.0, 1.0, sat)
        p = np.exp(-beta * x) if los else -np.expm1(-beta * x)
        acc[sel] = 0.5 * h * np.einsum("ikj,j->i", sat * p * x * x, gl_w)
    if not los:
        acc += _nlos_tail(np.exp(la), hi, alpha, m)
    out[live] = acc + head
    return out


def laplace_exponent(a, d_min, alpha, m, beta, los, backend=None):
    """Evaluate ``J(a; d_min)`` elementwise.

    Parameters
    ----------
    a : array_like
        ``s P C / m`` for each lane; zero gives ``J = 0``.
    d_min : array_like or float
        Lower integration limit (broadcast against ``a``).
    alpha, m, beta : float
        Path-loss exponent, Nakagami order and blockage constant.
    los : bool
        Use the LoS thinning ``e^{-beta x}`` when True, NLoS otherwise.
    backend : {"numba", "numpy", None}
        Force a code path; None follows the environment switch.
    """
    a_arr, d_arr = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(d_min, dtype=float))
    shape = a_arr.shape
    if np.any(a_arr < 0) or np.any(d_arr < 0):
        raise ValueError("a and d_min must be >= 0")
    with np.errstate(divide="ignore"):
        log_a = np.log(a_arr.ravel())
    d_flat = np.ascontiguousarray(d_arr.ravel(), dtype=float)
    use_numba = USE_NUMBA if backend is None else backend == "numba"
    fn = _laplace_exponent_numba if use_numba else _laplace_exponent_numpy
    out = fn(np.ascontiguousarray(log_a), d_flat, float(alpha), float(m), float(beta), bool(los),
             _GL_X, _GL_W, PANEL_WIDTH)
    out = np.asarray(out).reshape(shape)
    return float(out) if out.ndim == 0 else out


# ------------------------------------------------------- Monte Carlo geometry

SCHEME_RIS = 0
SCHEME_MACRO = 1
TIER_LOS = 0
TIER_RIS = 1
TIER_MACRO = 2
TIER_NONE = -1


@njit
def _system_numba(counts, offsets, bs_x, bs_y, los, active, h_dir, h_ris, ris_x, ris_y,
                  c_l, c_n, c_r_mean, alpha_l, alpha_n, alpha_r, eps0, half_len, d_c,
                  scheme, inst_cr, need_sinr):
    k_real = counts.shape[0]
    tier = np.full(k_real, TIER_NONE, dtype=np.int8)
    small = np.zeros(k_real, dtype=np.bool_)
    sig = np.zeros(k_real)
    intf = np.zeros(k_real)
    gain_c = c_l * d_c ** -alpha_l
    k_pref = half_len * half_len / (16.0 * math.pi * math.pi)
    for i in range(k_real):
        o = offsets[i]
        n = counts[i]
        j_l = -1
        d0 = np.inf
        j_r = -1
        dbr = np.inf
        j_m = -1
        g_m = 0.0
        for k in range(o, o + n):
            r = math.hypot(bs_x[k], bs_y[k])
            if scheme == SCHEME_MACRO:
                g = c_l * r ** -alpha_l if los[k] else c_n * r ** -alpha_n
                if g > g_m:
                    g_m = g
                    j_m = k
            else:
                if los[k] and r < d0:
                    d0 = r
                    j_l = k
                dr = math.hypot(bs_x[k] - ris_x[i], bs_y[k] - ris_y[i])
                if dr < dbr:
                    dbr = dr
                    j_r = k
        nx = 0.0
        ny = 0.0
        d_ru = 0.0
        theta_ru = 0.0
        g_serv = 0.0
        j = -1
        if scheme == SCHEME_MACRO:
            if j_m >= 0:
                j = j_m
                g_serv = g_m
                tier[i] = TIER_MACRO
        else:
            c_r = c_r_mean
            g_r = 0.0
            if j_r >= 0:
                d_ru = math.hypot(ris_x[i], ris_y[i])
                ub_x = (bs_x[j_r] - ris_x[i]) / dbr
                ub_y = (bs_y[j_r] - ris_y[i]) / dbr
                uu_x = -ris_x[i] / d_ru
                uu_y = -ris_y[i] / d_ru
                psi = math.acos(min(1.0, max(-1.0, ub_x * uu_x + ub_y * uu_y)))
                side = 1.0 if ub_x * uu_y - ub_y * uu_x >= 0.0 else -1.0
                ang = math.atan2(ub_y, ub_x) + side * eps0 * psi
                nx = math.cos(ang)
                ny = math.sin(ang)
                theta_ru = (1.0 - eps0) * psi
                if inst_cr:
                    c_r = k_pref * (math.cos(eps0 * psi) + math.cos(theta_ru)) ** 2
                g_r = c_r * (dbr * d_ru) ** -alpha_r
            g_l = c_l * d0 ** -alpha_l if j_l >= 0 else 0.0
            if j_l >= 0 and g_l >= g_r:
                j = j_l
                g_serv = g_l
                tier[i] = TIER_LOS
            elif j_r >= 0:
                j = j_r
                g_serv = g_r
                tier[i] = TIER_RIS
        if j < 0:
            continue
        small[i] = g_serv >= gain_c
        if not need_sinr:
            continue
        sig[i] = g_serv * (h_ris[j] if tier[i] == TIER_RIS else h_dir[j])
        acc = 0.0
        for k in range(o, o + n):
            if k == j or not active[k]:
                continue
            r = math.hypot(bs_x[k], bs_y[k])
            if los[k]:
                acc += c_l * r ** -alpha_l * h_dir[k]
            else:
                acc += c_n * r ** -alpha_n * h_dir[k]
            if tier[i] == TIER_RIS:
                vx = bs_x[k] - ris_x[i]
                vy = bs_y[k] - ris_y[i]
                proj = vx * nx + vy * ny
                if proj > 0.0:
                    drk = math.hypot(vx, vy)
                    c_rk = c_r_mean
                    if inst_cr:
                        c_rk = k_pref * (proj / drk + math.cos(theta_ru)) ** 2
                    acc += c_rk * (drk * d_ru) ** -alpha_r * h_ris[k]
        intf[i] = acc
    return tier, small, sig, intf


def _segment_argbest(values, seg, n_seg):
    """Index of the smallest value in each segment (-1 for empty or all-inf)."""
    out = np.full(n_seg, -1, dtype=np.int64)
    if values.size == 0:
        return out
    order = np.lexsort((values, seg))
    first = np.ones(order.size, dtype=bool)
    first[1:] = seg[order[1:]] != seg[order[:-1]]
    idx = order[first]
    ok = np.isfinite(values[idx])
    out[seg[idx[ok]]] = idx[ok]
    return out


def _system_numpy(counts, offsets, bs_x, bs_y, los, active, h_dir, h_ris, ris_x, ris_y,
                  c_l, c_n, c_r_mean, alpha_l, alpha_n, alpha_r, eps0, half_len, d_c,
                  scheme, inst_cr, need_sinr):
    k_real = counts.shape[0]
    seg = np.repeat(np.arange(k_real), counts)
    tier = np.full(k_real, TIER_NONE, dtype=np.int8)
    small = np.zeros(k_real, dtype=bool)
    sig = np.zeros(k_real)
    intf = np.zeros(k_real)
    gain_c = c_l * d_c ** -alpha_l
    k_pref = half_len * half_len / (16.0 * math.pi * math.pi)
    r = np.hypot(bs_x, bs_y)
    g_dir = np.where(los, c_l * r ** -alpha_l, c_n * r ** -alpha_n)
    has = np.zeros(k_real, dtype=bool)
    if scheme == SCHEME_MACRO:
        j = _segment_argbest(-g_dir, seg, k_real)
        has = j >= 0
        g_serv = np.where(has, g_dir[np.maximum(j, 0)], 0.0)
        tier[has] = TIER_MACRO
    else:
        j_l = _segment_argbest(np.where(los, r, np.inf), seg, k_real)
        dxr = bs_x - ris_x[seg]
        dyr = bs_y - ris_y[seg]
        dr = np.hypot(dxr, dyr)
        j_r = _segment_argbest(dr, seg, k_real)
        ok_r = j_r >= 0
        jr0 = np.maximum(j_r, 0)
        dbr = np.where(ok_r, dr[jr0], 1.0)
        d_ru = np.hypot(ris_x, ris_y)
        ub_x, ub_y = dxr[jr0] / dbr, dyr[jr0] / dbr
        uu_x, uu_y = -ris_x / d_ru, -ris_y / d_ru
        psi = np.arccos(np.clip(ub_x * uu_x + ub_y * uu_y, -1.0, 1.0))
        side = np.where(ub_x * uu_y - ub_y * uu_x >= 0.0, 1.0, -1.0)
        ang = np.arctan2(ub_y, ub_x) + side * eps0 * psi
        nx, ny = np.cos(ang), np.sin(ang)
        theta_ru = (1.0 - eps0) * psi
        c_r = k_pref * (np.cos(eps0 * psi) + np.cos(theta_ru)) ** 2 if inst_cr else np.full(k_real, c_r_mean)
        g_r = np.where(ok_r, c_r * (dbr * d_ru) ** -alpha_r, 0.0)
        ok_l = j_l >= 0
        jl0 = np.maximum(j_l, 0)
        g_l = np.where(ok_l, c_l * r[jl0] ** -alpha_l, 0.0)
        use_l = ok_l & (g_l >= g_r)
        use_r = ~use_l & ok_r
        tier[use_l] = TIER_LOS
        tier[use_r] = TIER_RIS
        j = np.where(use_l, j_l, np.where(use_r, j_r, -1))
        has = j >= 0
        g_serv = np.where(use_l, g_l, np.where(use_r, g_r, 0.0))
    small[has] = g_serv[has] >= gain_c
    if not need_sinr:
        return tier, small, sig, intf
    j0 = np.maximum(j, 0)
    fade = np.where(tier == TIER_RIS, h_ris[j0], h_dir[j0])
    sig[has] = (g_serv * fade)[has]
    is_serv = np.zeros(bs_x.shape[0], dtype=bool)
    is_serv[j[has]] = True
    live = active & ~is_serv
    contrib = np.where(live, g_dir * h_dir, 0.0)
    if scheme != SCHEME_MACRO:
        ris_tier = tier[seg] == TIER_RIS
        proj = dxr * nx[seg] + dyr * ny[seg]
        refl = live & ris_tier & (proj > 0.0)
        drs = np.where(refl, dr, 1.0)
        if inst_cr:
            c_rk = k_pref * (proj / drs + np.cos(theta_ru)[seg]) ** 2
        else:
            c_rk = c_r_mean
        contrib = contrib + np.where(refl, c_rk * (drs * d_ru[seg]) ** -alpha_r * h_ris, 0.0)
    intf[:] = np.bincount(seg, weights=contrib, minlength=k_real)
    intf[~has] = 0.0
    return tier, small, sig, intf


def system_kernel(counts, bs_x, bs_y, los, active, h_dir, h_ris, ris_x, ris_y, consts, scheme,
                  inst_cr, need_sinr, backend=None):
    """Associate and accumulate signal and interference for a batch of realizations.

    BS arrays are concatenated over realizations (``counts[i]`` entries each),
    with positions relative to the typical UE at the origin.  ``consts`` is
    ``(c_l, c_n, c_r_mean, alpha_l, alpha_n, alpha_r, eps0, half_len, d_c)``.
    Returns ``(tier, small, signal, interference)`` per realization, with the
    signal and interference at unit transmit power.
    """
    counts = np.ascontiguousarray(counts, dtype=np.int64)
    offsets = np.concatenate(([0], np.cumsum(counts)[:-1])).astype(np.int64)
    use_numba = USE_NUMBA if backend is None else backend == "numba"
    fn = _system_numba if use_numba else _system_numpy
    return fn(counts, offsets, bs_x, bs_y, los, active, h_dir, h_ris, ris_x, ris_y,
              *[float(c) for c in consts], int(scheme), bool(inst_cr), bool(need_sinr))
