"""Pure-Python (numpy) implementations of the hot kernels.

Mirrors the compiled ``_kernels`` extension function-for-function; the
backend is chosen in :mod:`shuttlekit._backend`.

State vectors used by the ODE kernels are laid out as::

    (u, w, var_q, var_p, cov)

where ``u``/``w`` are the position/momentum deviation of the mean from a
reference path ``r(t)`` (``u = <q> - r``, ``w = <p> - m r'``) and the last
three entries are central second moments.  Drive arrays are sampled on the
half-step grid ``t_j = j h / 2`` (length ``2 N + 1``):

lag
    ``r(t) - q0(t)``
mis
    ``-omega**2 * lag - r''(t)``, zero for a path obeying Newton's equation
rdot
    ``r'(t)``
"""

import numpy as np

EULER_GAMMA = 0.57721566490153286061
_SERIES_TERMS = 40
_CF_MAX_ITER = 500
_CF_EPS = 1e-16
_FPMIN = 1e-300

SPRING = 0
POSITION = 1


def expint_ei_array(x):
    """Ei(x) for an array of strictly negative ``x`` (not validated here)."""
    x = np.asarray(x, dtype=float)
    z = -x
    out = np.empty_like(z)

    small = z <= 1.0
    if np.any(small):
        zs = z[small]
        term = np.ones_like(zs)
        acc = np.zeros_like(zs)
        for k in range(1, _SERIES_TERMS):
            term = term * (-zs) / k
            acc += term / k
        out[small] = EULER_GAMMA + np.log(zs) + acc

    big = ~small
    if np.any(big):
        zb = z[big]
        b = zb + 1.0
        c = np.full_like(zb, 1.0 / _FPMIN)
        d = 1.0 / b
        h = d.copy()
        active = np.ones(zb.shape, dtype=bool)
        for i in range(1, _CF_MAX_ITER):
            an = -float(i * i)
            b = b + 2.0
            d = 1.0 / (an * d + b)
            c = b + an / c
            delta = c * d
            h = np.where(active, h * delta, h)
            active &= np.abs(delta - 1.0) >= _CF_EPS
            if not active.any():
                break
        with np.errstate(under="ignore"):
            out[big] = -h * np.exp(-zb)
    return out


def _spring_rhs(s, lag, mis, rdot, g0, g1, m, w2, w4):
    u, w, vq, vp, c = s
    ybar = u + lag
    pbar = m * rdot + w
    return (
        w / m,
        -m * w2 * u + m * mis + m * w4 * g1 * ybar,
        2.0 * c / m,
        -2.0 * m * w2 * c - 2.0 * m * w4 * g1 * pbar * ybar
        + 2.0 * m * m * w4 * g0 * (vq + ybar * ybar),
        vp / m - m * w2 * vq + m * w4 * g1 * (2.0 * vq + ybar * ybar),
    )


def _position_rhs(s, mis, g0, g1, m, w2, k2):
    u, w, vq, vp, c = s
    return (
        w / m,
        -m * w2 * u + m * mis,
        2.0 * c / m,
        -2.0 * m * w2 * c + 2.0 * k2 * g0,
        vp / m - m * w2 * vq + k2 * g1 / m,
    )


def moments_rk4(coupling, state0, h, lag, mis, rdot, g0, g1, mass, omega, k2):
    """Fixed-step RK4 of the closed moment equations; returns the full history."""
    n_steps = (len(lag) - 1) // 2
    m = float(mass)
    w2 = float(omega) ** 2
    w4 = w2 * w2
    lag = lag.tolist()
    mis = mis.tolist()
    rdot = rdot.tolist()
    g0 = g0.tolist()
    g1 = g1.tolist()
    hist = np.empty((n_steps + 1, 5))
    s = tuple(float(v) for v in state0)
    hist[0] = s
    half = 0.5 * h

    if coupling == SPRING:
        def f(j, y):
            return _spring_rhs(y, lag[j], mis[j], rdot[j], g0[j], g1[j], m, w2, w4)
    else:
        def f(j, y):
            return _position_rhs(y, mis[j], g0[j], g1[j], m, w2, k2)

    for k in range(n_steps):
        j = 2 * k
        k1 = f(j, s)
        k2_ = f(j + 1, tuple(a + half * b for a, b in zip(s, k1)))
        k3 = f(j + 1, tuple(a + half * b for a, b in zip(s, k2_)))
        k4 = f(j + 2, tuple(a + h * b for a, b in zip(s, k3)))
        s = tuple(
            a + h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
            for a, b1, b2, b3, b4 in zip(s, k1, k2_, k3, k4)
        )
        hist[k + 1] = s
    return hist


def gaussian_members(coupling, state0, h, lag, mis, x_steps, mass, omega, coupling_k):
    """Propagate Gaussian states for a batch of noise realizations.

    ``x_steps`` has shape ``(members, N)``; the noise is held at its step
    value over each RK4 step.  Returns ``(members, 6)``: the final state and
    the minimum of ``var_q * var_p - cov**2`` along the path.
    """
    x_steps = np.ascontiguousarray(x_steps, dtype=float)
    n_mem, n_steps = x_steps.shape
    m = float(mass)
    w2 = float(omega) ** 2
    kc = float(coupling_k)
    u = np.full(n_mem, float(state0[0]))
    w = np.full(n_mem, float(state0[1]))
    vq = np.full(n_mem, float(state0[2]))
    vp = np.full(n_mem, float(state0[3]))
    c = np.full(n_mem, float(state0[4]))
    floor = vq * vp - c * c
    half = 0.5 * h
    spring = coupling == SPRING

    def rhs(u, w, vq, vp, c, x, stiff, lg, ms):
        if spring:
            dw = -stiff * u + m * ms - m * w2 * x * lg
        else:
            dw = -m * w2 * u + m * ms - kc * x
        return w / m, dw, 2.0 * c / m, -2.0 * stiff * c, vp / m - stiff * vq

    for k in range(n_steps):
        j = 2 * k
        x = x_steps[:, k]
        stiff = m * w2 * (1.0 + x) if spring else np.full(n_mem, m * w2)
        a = rhs(u, w, vq, vp, c, x, stiff, lag[j], mis[j])
        b = rhs(u + half * a[0], w + half * a[1], vq + half * a[2], vp + half * a[3],
                c + half * a[4], x, stiff, lag[j + 1], mis[j + 1])
        d = rhs(u + half * b[0], w + half * b[1], vq + half * b[2], vp + half * b[3],
                c + half * b[4], x, stiff, lag[j + 1], mis[j + 1])
        e = rhs(u + h * d[0], w + h * d[1], vq + h * d[2], vp + h * d[3],
                c + h * d[4], x, stiff, lag[j + 2], mis[j + 2])
        u = u + h / 6.0 * (a[0] + 2.0 * b[0] + 2.0 * d[0] + e[0])
        w = w + h / 6.0 * (a[1] + 2.0 * b[1] + 2.0 * d[1] + e[1])
        vq = vq + h / 6.0 * (a[2] + 2.0 * b[2] + 2.0 * d[2] + e[2])
        vp = vp + h / 6.0 * (a[3] + 2.0 * b[3] + 2.0 * d[3] + e[3])
        c = c + h / 6.0 * (a[4] + 2.0 * b[4] + 2.0 * d[4] + e[4])
        floor = np.minimum(floor, vq * vp - c * c)

    return np.column_stack([u, w, vq, vp, c, floor])
