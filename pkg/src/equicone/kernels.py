"""Numeric inner loops.

Every function here is plain Python over numpy arrays and scalars so that it
runs unchanged with numba disabled (see ``_jit``).  Callers in the public
modules do argument checking; kernels assume valid input.
"""

import math

import numpy as np

from ._jit import njit

# integration status codes
ST_MAX_ARCLENGTH = 0
ST_STOP_RADIUS = 1
ST_AXIS = 2
ST_ESCAPED = 3
ST_UNDERFLOW = 4
ST_MAX_STEPS = 5

# event kinds
EV_RAY_CROSSING = 0
EV_AXIS_APPROACH = 1
EV_SELF_SCALING_CONTACT = 2

# Dormand-Prince 5(4) tableau
_C2, _C3, _C4, _C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
)
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
_E1 = 71.0 / 57600.0
_E3 = -71.0 / 16695.0
_E4 = 71.0 / 1920.0
_E5 = -17253.0 / 339200.0
_E6 = 22.0 / 525.0
_E7 = -1.0 / 40.0


@njit
def geodesic_rhs_kernel(m, n, y, out):
    """Unit-speed geodesic of the conformal weight u^m v^n, plus running length.

    ``y = (u, v, theta, L)``.  Returns False if the state left the open quadrant.
    """
    u = y[0]
    v = y[1]
    th = y[2]
    if not (u > 0.0 and v > 0.0):
        return False
    c = math.cos(th)
    s = math.sin(th)
    out[0] = c
    out[1] = s
    out[2] = -(m / u) * s + (n / v) * c
    out[3] = u**m * v**n
    return True


@njit
def dp45_step(m, n, y, h, k1, ynew):
    """One Dormand-Prince step from ``y`` (with ``k1 = f(y)``).

    Writes the 5th-order solution into ``ynew`` and returns the unscaled
    error estimate.  A NaN in slot 0 means a stage left the open quadrant.
    """
    k2 = np.empty(4)
    k3 = np.empty(4)
    k4 = np.empty(4)
    k5 = np.empty(4)
    k6 = np.empty(4)
    k7 = np.empty(4)
    tmp = np.empty(4)
    err = np.empty(4)
    for i in range(4):
        tmp[i] = y[i] + h * _A21 * k1[i]
    if not geodesic_rhs_kernel(m, n, tmp, k2):
        err[0] = np.nan
        return err
    for i in range(4):
        tmp[i] = y[i] + h * (_A31 * k1[i] + _A32 * k2[i])
    if not geodesic_rhs_kernel(m, n, tmp, k3):
        err[0] = np.nan
        return err
    for i in range(4):
        tmp[i] = y[i] + h * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i])
    if not geodesic_rhs_kernel(m, n, tmp, k4):
        err[0] = np.nan
        return err
    for i in range(4):
        tmp[i] = y[i] + h * (_A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i] + _A54 * k4[i])
    if not geodesic_rhs_kernel(m, n, tmp, k5):
        err[0] = np.nan
        return err
    for i in range(4):
        tmp[i] = y[i] + h * (
            _A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i] + _A64 * k4[i] + _A65 * k5[i]
        )
    if not geodesic_rhs_kernel(m, n, tmp, k6):
        err[0] = np.nan
        return err
    for i in range(4):
        ynew[i] = y[i] + h * (
            _B1 * k1[i] + _B3 * k3[i] + _B4 * k4[i] + _B5 * k5[i] + _B6 * k6[i]
        )
    if not geodesic_rhs_kernel(m, n, ynew, k7):
        err[0] = np.nan
        return err
    for i in range(4):
        err[i] = h * (
            _E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i] + _E5 * k5[i] + _E6 * k6[i] + _E7 * k7[i]
        )
    return err


@njit
def _ray_gap(y, omega_star):
    return math.atan2(y[1], y[0]) - omega_star


@njit
def _contact(y):
    # sin(theta - omega): zero where the tangent is radial
    return math.sin(y[2] - math.atan2(y[1], y[0]))


@njit
def _radius(y):
    return math.hypot(y[0], y[1])


@njit
def _event_value(which, y, omega_star, r_stop, axis_eps):
    if which == 0:
        return _ray_gap(y, omega_star)
    if which == 1:
        return min(y[0], y[1]) - axis_eps
    if which == 2:
        return _contact(y)
    return _radius(y) - r_stop


@njit
def _locate(m, n, y, k1, h, which, omega_star, r_stop, axis_eps, event_tol, out):
    """Bisect on the sub-step length for a sign change of event ``which``.

    The sign change is known to lie in ``(0, h]``.  Returns the sub-step taken.
    """
    g0 = _event_value(which, y, omega_star, r_stop, axis_eps)
    lo = 0.0
    hi = h
    tmp = np.empty(4)
    for i in range(4):
        out[i] = y[i]
    for _ in range(200):
        if hi - lo <= event_tol:
            break
        mid = 0.5 * (lo + hi)
        e = dp45_step(m, n, y, mid, k1, tmp)
        if np.isnan(e[0]):
            hi = mid
            continue
        gm = _event_value(which, tmp, omega_star, r_stop, axis_eps)
        if (gm > 0.0) == (g0 > 0.0) and gm != 0.0:
            lo = mid
        else:
            hi = mid
    e = dp45_step(m, n, y, hi, k1, out)
    if np.isnan(e[0]):
        e = dp45_step(m, n, y, lo, k1, out)
        return lo
    return hi


@njit
def _sign(x, band):
    if x > band:
        return 1
    if x < -band:
        return -1
    return 0


@njit
def integrate_geodesic(
    m,
    n,
    y0,
    s0,
    rtol,
    atol,
    h0,
    hmax,
    smax,
    r_stop,
    escaped_at_stop,
    axis_eps,
    omega_star,
    dead_band,
    event_tol,
    want_ray,
    want_contact,
    max_steps,
    max_events,
):
    """Adaptive Dormand-Prince integration of the weighted geodesic ODE.

    Terminal conditions: arclength ``smax``, radius ``r_stop`` (reported as
    escape when ``escaped_at_stop``), approach to an axis below ``axis_eps``,
    step-size underflow, step budget.  Ray crossings and self-scaling
    contacts are recorded, not terminal.

    Returns ``(S, Y, count, status, ev_kind, ev_s, ev_y, ev_dir, ev_count)``.
    """
    S = np.empty(max_steps + 1)
    Y = np.empty((max_steps + 1, 4))
    ev_kind = np.empty(max_events, dtype=np.int64)
    ev_s = np.empty(max_events)
    ev_y = np.empty((max_events, 4))
    ev_dir = np.empty(max_events, dtype=np.int64)
    ev_count = 0

    y = np.empty(4)
    for i in range(4):
        y[i] = y0[i]
    s = s0
    S[0] = s
    Y[0, :] = y
    count = 1

    k1 = np.empty(4)
    ynew = np.empty(4)
    yev = np.empty(4)
    if not geodesic_rhs_kernel(m, n, y, k1):
        return S[:count], Y[:count], count, ST_AXIS, ev_kind[:0], ev_s[:0], ev_y[:0], ev_dir[:0], 0

    ray_sign = _sign(_ray_gap(y, omega_star), dead_band)
    contact_sign = _sign(_contact(y), dead_band)

    h = min(h0, hmax)
    status = ST_MAX_STEPS
    while count <= max_steps:
        if s >= smax:
            status = ST_MAX_ARCLENGTH
            break
        if s + h > smax:
            h = smax - s
        if h < 1e-14 * (1.0 + abs(s)):
            status = ST_UNDERFLOW
            break
        e = dp45_step(m, n, y, h, k1, ynew)
        if np.isnan(e[0]):
            h *= 0.25
            continue
        enorm = 0.0
        for i in range(4):
            sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
            q = e[i] / sc
            enorm += q * q
        enorm = math.sqrt(enorm / 4.0)
        if not (enorm <= 1.0):
            fac = 0.9 * enorm ** (-0.2) if enorm > 0.0 and enorm == enorm else 0.2
            h *= max(0.2, fac)
            continue

        # terminal events inside this accepted step
        terminal = -1
        if _radius(ynew) >= r_stop:
            terminal = 3
        elif min(ynew[0], ynew[1]) <= axis_eps:
            terminal = 1
        if terminal >= 0:
            hs = _locate(m, n, y, k1, h, terminal, omega_star, r_stop, axis_eps, event_tol, yev)
            hs_ray = hs
            if want_ray:
                g_end = _sign(_ray_gap(yev, omega_star), dead_band)
                if ray_sign != 0 and g_end != 0 and g_end != ray_sign and ev_count < max_events:
                    yc = np.empty(4)
                    hs_ray = _locate(m, n, y, k1, hs, 0, omega_star, r_stop, axis_eps, event_tol, yc)
                    ev_kind[ev_count] = EV_RAY_CROSSING
                    ev_s[ev_count] = s + hs_ray
                    ev_y[ev_count, :] = yc
                    ev_dir[ev_count] = g_end
                    ev_count += 1
            s += hs
            for i in range(4):
                y[i] = yev[i]
            S[count] = s
            Y[count, :] = y
            count += 1
            if terminal == 1:
                if ev_count < max_events:
                    ev_kind[ev_count] = EV_AXIS_APPROACH
                    ev_s[ev_count] = s
                    ev_y[ev_count, :] = y
                    ev_dir[ev_count] = 0
                    ev_count += 1
                status = ST_AXIS
            else:
                status = ST_ESCAPED if escaped_at_stop else ST_STOP_RADIUS
            break

        if want_ray:
            g1 = _ray_gap(ynew, omega_star)
            sg1 = _sign(g1, dead_band)
            if sg1 != 0:
                if ray_sign != 0 and sg1 != ray_sign and ev_count < max_events:
                    g0 = _ray_gap(y, omega_star)
                    if _sign(g0, 0.0) == -sg1:
                        hs = _locate(m, n, y, k1, h, 0, omega_star, r_stop, axis_eps, event_tol, yev)
                    else:
                        hs = 0.0
                        for i in range(4):
                            yev[i] = y[i]
                    ev_kind[ev_count] = EV_RAY_CROSSING
                    ev_s[ev_count] = s + hs
                    ev_y[ev_count, :] = yev
                    ev_dir[ev_count] = sg1
                    ev_count += 1
                ray_sign = sg1
        if want_contact:
            c1 = _sign(_contact(ynew), dead_band)
            if c1 != 0:
                if contact_sign != 0 and c1 != contact_sign and ev_count < max_events:
                    c0 = _contact(y)
                    if _sign(c0, 0.0) == -c1:
                        hs = _locate(m, n, y, k1, h, 2, omega_star, r_stop, axis_eps, event_tol, yev)
                    else:
                        hs = 0.0
                        for i in range(4):
                            yev[i] = y[i]
                    ev_kind[ev_count] = EV_SELF_SCALING_CONTACT
                    ev_s[ev_count] = s + hs
                    ev_y[ev_count, :] = yev
                    ev_dir[ev_count] = c1
                    ev_count += 1
                contact_sign = c1

        s += h
        for i in range(4):
            y[i] = ynew[i]
        S[count] = s
        Y[count, :] = y
        count += 1
        geodesic_rhs_kernel(m, n, y, k1)

        fac = 5.0 if enorm == 0.0 else min(5.0, 0.9 * enorm ** (-0.2))
        h = min(hmax, h * fac)

    return (
        S[:count],
        Y[:count],
        count,
        status,
        ev_kind[:ev_count],
        ev_s[:ev_count],
        ev_y[:ev_count],
        ev_dir[:ev_count],
        ev_count,
    )


@njit
def trapezoid_weighted_length(P, m, n):
    """Composite trapezoid of u^m v^n ds along the polyline ``P`` (N x 2)."""
    total = 0.0
    rho_prev = abs(P[0, 0]) ** m * abs(P[0, 1]) ** n
    for i in range(1, P.shape[0]):
        rho = abs(P[i, 0]) ** m * abs(P[i, 1]) ** n
        seg = math.hypot(P[i, 0] - P[i - 1, 0], P[i, 1] - P[i - 1, 1])
        total += 0.5 * (rho_prev + rho) * seg
        rho_prev = rho
    return total


@njit
def polyline_length_grad(P, m, n, gx, gw):
    """Weighted length of a polyline with per-segment Gauss-Legendre quadrature.

    ``gx``/``gw`` are nodes/weights on [0, 1].  Along a straight segment the
    weight is a polynomial of degree m+n in the parameter, so enough nodes make
    this exact.  Returns ``(length, gradient)`` with gradient shaped like ``P``.
    """
    N = P.shape[0]
    grad = np.zeros((N, 2))
    total = 0.0
    for i in range(N - 1):
        du = P[i + 1, 0] - P[i, 0]
        dv = P[i + 1, 1] - P[i, 1]
        ell = math.hypot(du, dv)
        acc = 0.0
        g0u = 0.0
        g0v = 0.0
        g1u = 0.0
        g1v = 0.0
        for q in range(gx.shape[0]):
            x = gx[q]
            u = abs(P[i, 0] + x * du)
            v = abs(P[i, 1] + x * dv)
            um1 = u ** (m - 1)
            vn1 = v ** (n - 1)
            rho = um1 * u * vn1 * v
            acc += gw[q] * rho
            dru = gw[q] * m * um1 * vn1 * v
            drv = gw[q] * n * um1 * u * vn1
            g0u += dru * (1.0 - x)
            g0v += drv * (1.0 - x)
            g1u += dru * x
            g1v += drv * x
        total += ell * acc
        grad[i, 0] += ell * g0u
        grad[i, 1] += ell * g0v
        grad[i + 1, 0] += ell * g1u
        grad[i + 1, 1] += ell * g1v
        if ell > 0.0:
            tu = du / ell
            tv = dv / ell
            grad[i, 0] -= acc * tu
            grad[i, 1] -= acc * tv
            grad[i + 1, 0] += acc * tu
            grad[i + 1, 1] += acc * tv
    return total, grad


@njit
def hermite_radius_lookup(omega_k, logr_k, dlogr_k, omega_q):
    """Evaluate log-radius of a radial-graph curve at query angles.

    The curve is given as samples ``logr_k(omega_k)`` with slopes ``dlogr_k``
    (``omega_k`` strictly increasing).  Cubic Hermite on each bracket; NaN
    outside the sampled range.
    """
    K = omega_k.shape[0]
    out = np.empty(omega_q.shape[0])
    for j in range(omega_q.shape[0]):
        w = omega_q[j]
        if not (w >= omega_k[0] and w <= omega_k[K - 1]):
            out[j] = np.nan
            continue
        lo = 0
        hi = K - 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if omega_k[mid] <= w:
                lo = mid
            else:
                hi = mid
        dw = omega_k[hi] - omega_k[lo]
        t = (w - omega_k[lo]) / dw
        t2 = t * t
        t3 = t2 * t
        h00 = 2.0 * t3 - 3.0 * t2 + 1.0
        h10 = t3 - 2.0 * t2 + t
        h01 = -2.0 * t3 + 3.0 * t2
        h11 = t3 - t2
        out[j] = (
            h00 * logr_k[lo]
            + h10 * dw * dlogr_k[lo]
            + h01 * logr_k[hi]
            + h11 * dw * dlogr_k[hi]
        )
    return out
