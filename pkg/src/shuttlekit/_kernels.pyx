# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see ``_kernels_py`` for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, fabs

cnp.import_array()

cdef double EULER_GAMMA = 0.57721566490153286061
cdef int SERIES_TERMS = 40
cdef int CF_MAX_ITER = 500
cdef double CF_EPS = 1e-16
cdef double FPMIN = 1e-300

SPRING = 0
POSITION = 1


cdef double _ei_neg(double x) nogil:
    cdef double z = -x
    cdef double term, acc, b, c, d, h, an, delta
    cdef int k, i
    if z <= 1.0:
        term = 1.0
        acc = 0.0
        for k in range(1, SERIES_TERMS):
            term = term * (-z) / k
            acc += term / k
        return EULER_GAMMA + log(z) + acc
    b = z + 1.0
    c = 1.0 / FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, CF_MAX_ITER):
        an = -<double>(i * i)
        b += 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h *= delta
        if fabs(delta - 1.0) < CF_EPS:
            break
    return -h * exp(-z)


def expint_ei_array(x):
    cdef cnp.ndarray[double, ndim=1] xs = np.ascontiguousarray(x, dtype=np.float64).ravel()
    cdef Py_ssize_t n = xs.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n)
    cdef double[::1] xv = xs
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            ov[i] = _ei_neg(xv[i])
    return out.reshape(np.shape(x))


cdef inline void _spring_rhs(double* s, double lag, double mis, double rdot,
                             double g0, double g1, double m, double w2, double w4,
                             double* out) nogil:
    cdef double ybar = s[0] + lag
    cdef double pbar = m * rdot + s[1]
    out[0] = s[1] / m
    out[1] = -m * w2 * s[0] + m * mis + m * w4 * g1 * ybar
    out[2] = 2.0 * s[4] / m
    out[3] = (-2.0 * m * w2 * s[4] - 2.0 * m * w4 * g1 * pbar * ybar
              + 2.0 * m * m * w4 * g0 * (s[2] + ybar * ybar))
    out[4] = s[3] / m - m * w2 * s[2] + m * w4 * g1 * (2.0 * s[2] + ybar * ybar)


cdef inline void _position_rhs(double* s, double mis, double g0, double g1,
                               double m, double w2, double k2, double* out) nogil:
    out[0] = s[1] / m
    out[1] = -m * w2 * s[0] + m * mis
    out[2] = 2.0 * s[4] / m
    out[3] = -2.0 * m * w2 * s[4] + 2.0 * k2 * g0
    out[4] = s[3] / m - m * w2 * s[2] + k2 * g1 / m


cdef inline void _rhs(int coupling, double* s, Py_ssize_t j, double[::1] lag,
                      double[::1] mis, double[::1] rdot, double[::1] g0,
                      double[::1] g1, double m, double w2, double w4, double k2,
                      double* out) nogil:
    if coupling == 0:
        _spring_rhs(s, lag[j], mis[j], rdot[j], g0[j], g1[j], m, w2, w4, out)
    else:
        _position_rhs(s, mis[j], g0[j], g1[j], m, w2, k2, out)


def moments_rk4(int coupling, state0, double h, lag, mis, rdot, g0, g1,
                double mass, double omega, double k2):
    cdef double[::1] lv = np.ascontiguousarray(lag, dtype=np.float64)
    cdef double[::1] mv = np.ascontiguousarray(mis, dtype=np.float64)
    cdef double[::1] rv = np.ascontiguousarray(rdot, dtype=np.float64)
    cdef double[::1] g0v = np.ascontiguousarray(g0, dtype=np.float64)
    cdef double[::1] g1v = np.ascontiguousarray(g1, dtype=np.float64)
    cdef Py_ssize_t n_steps = (lv.shape[0] - 1) // 2
    hist_arr = np.empty((n_steps + 1, 5))
    cdef double[:, ::1] hist = hist_arr
    cdef double s[5]
    cdef double tmp[5]
    cdef double k1[5]
    cdef double k2_[5]
    cdef double k3[5]
    cdef double k4[5]
    cdef double m = mass, w2 = omega * omega
    cdef double w4 = w2 * w2, half = 0.5 * h
    cdef Py_ssize_t k, j
    cdef int i
    for i in range(5):
        s[i] = float(state0[i])
        hist[0, i] = s[i]
    with nogil:
        for k in range(n_steps):
            j = 2 * k
            _rhs(coupling, s, j, lv, mv, rv, g0v, g1v, m, w2, w4, k2, k1)
            for i in range(5):
                tmp[i] = s[i] + half * k1[i]
            _rhs(coupling, tmp, j + 1, lv, mv, rv, g0v, g1v, m, w2, w4, k2, k2_)
            for i in range(5):
                tmp[i] = s[i] + half * k2_[i]
            _rhs(coupling, tmp, j + 1, lv, mv, rv, g0v, g1v, m, w2, w4, k2, k3)
            for i in range(5):
                tmp[i] = s[i] + h * k3[i]
            _rhs(coupling, tmp, j + 2, lv, mv, rv, g0v, g1v, m, w2, w4, k2, k4)
            for i in range(5):
                s[i] = s[i] + h / 6.0 * (k1[i] + 2.0 * k2_[i] + 2.0 * k3[i] + k4[i])
                hist[k + 1, i] = s[i]
    return hist_arr


cdef inline void _member_rhs(bint spring, double* s, double x, double stiff,
                             double lg, double ms, double m, double w2, double kc,
                             double* out) nogil:
    out[0] = s[1] / m
    if spring:
        out[1] = -stiff * s[0] + m * ms - m * w2 * x * lg
    else:
        out[1] = -m * w2 * s[0] + m * ms - kc * x
    out[2] = 2.0 * s[4] / m
    out[3] = -2.0 * stiff * s[4]
    out[4] = s[3] / m - stiff * s[2]


def gaussian_members(int coupling, state0, double h, lag, mis, x_steps,
                     double mass, double omega, double coupling_k):
    cdef double[::1] lv = np.ascontiguousarray(lag, dtype=np.float64)
    cdef double[::1] mv = np.ascontiguousarray(mis, dtype=np.float64)
    cdef double[:, ::1] xv = np.ascontiguousarray(x_steps, dtype=np.float64)
    cdef Py_ssize_t n_mem = xv.shape[0], n_steps = xv.shape[1]
    out_arr = np.empty((n_mem, 6))
    cdef double[:, ::1] out = out_arr
    cdef double s0[5]
    cdef double s[5]
    cdef double tmp[5]
    cdef double a[5]
    cdef double b[5]
    cdef double c[5]
    cdef double d[5]
    cdef double m = mass, w2 = omega * omega, kc = coupling_k, half = 0.5 * h
    cdef double x, stiff, floor, prod
    cdef bint spring = coupling == 0
    cdef Py_ssize_t mem, k, j
    cdef int i
    for i in range(5):
        s0[i] = float(state0[i])
    with nogil:
        for mem in range(n_mem):
            for i in range(5):
                s[i] = s0[i]
            floor = s[2] * s[3] - s[4] * s[4]
            for k in range(n_steps):
                j = 2 * k
                x = xv[mem, k]
                if spring:
                    stiff = m * w2 * (1.0 + x)
                else:
                    stiff = m * w2
                _member_rhs(spring, s, x, stiff, lv[j], mv[j], m, w2, kc, a)
                for i in range(5):
                    tmp[i] = s[i] + half * a[i]
                _member_rhs(spring, tmp, x, stiff, lv[j + 1], mv[j + 1], m, w2, kc, b)
                for i in range(5):
                    tmp[i] = s[i] + half * b[i]
                _member_rhs(spring, tmp, x, stiff, lv[j + 1], mv[j + 1], m, w2, kc, c)
                for i in range(5):
                    tmp[i] = s[i] + h * c[i]
                _member_rhs(spring, tmp, x, stiff, lv[j + 2], mv[j + 2], m, w2, kc, d)
                for i in range(5):
                    s[i] = s[i] + h / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i])
                prod = s[2] * s[3] - s[4] * s[4]
                if prod < floor:
                    floor = prod
            for i in range(5):
                out[mem, i] = s[i]
            out[mem, 5] = floor
    return out_arr
