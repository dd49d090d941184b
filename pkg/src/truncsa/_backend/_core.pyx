# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: the hot inner loops of the package.

This file is the compiled twin of ``pure.py``.  Function names, signatures
and floating-point operation order are kept identical so that both backends
produce bit-identical output; edit the two files together.
"""

from libc.math cimport log, sqrt, isfinite

import numpy as np
cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "compiled"

cdef double _DG_C2 = 1.0 / 12.0
cdef double _DG_C4 = -1.0 / 120.0
cdef double _DG_C6 = 1.0 / 252.0
cdef double _DG_C8 = -1.0 / 240.0
cdef double _DG_C10 = 1.0 / 132.0
cdef double _DG_C12 = -691.0 / 32760.0

cdef double _TG_B2 = 1.0 / 6.0
cdef double _TG_B4 = -1.0 / 30.0
cdef double _TG_B6 = 1.0 / 42.0
cdef double _TG_B8 = -1.0 / 30.0
cdef double _TG_B10 = 5.0 / 66.0
cdef double _TG_B12 = -691.0 / 2730.0

cdef double _SHIFT_CUTOFF = 6.0


cdef inline double _digamma(double x) noexcept nogil:
    cdef double acc = 0.0
    cdef double w, tail
    while x < _SHIFT_CUTOFF:
        acc -= 1.0 / x
        x += 1.0
    w = 1.0 / (x * x)
    tail = w * (_DG_C2 + w * (_DG_C4 + w * (_DG_C6 + w * (_DG_C8 + w * (_DG_C10 + w * _DG_C12)))))
    return acc + log(x) - 0.5 / x - tail


cdef inline double _trigamma(double x) noexcept nogil:
    cdef double acc = 0.0
    cdef double w, tail
    while x < _SHIFT_CUTOFF:
        acc += 1.0 / (x * x)
        x += 1.0
    w = 1.0 / (x * x)
    tail = x * w * w * (_TG_B2 + w * (_TG_B4 + w * (_TG_B6 + w * (_TG_B8 + w * (_TG_B10 + w * _TG_B12)))))
    return acc + 1.0 / x + 0.5 * w + tail


def digamma(double x):
    return _digamma(x)


def trigamma(double x):
    return _trigamma(x)


def digamma_array(double[::1] x, double[::1] out):
    cdef Py_ssize_t i
    with nogil:
        for i in range(x.shape[0]):
            out[i] = _digamma(x[i])


def trigamma_array(double[::1] x, double[::1] out):
    cdef Py_ssize_t i
    with nogil:
        for i in range(x.shape[0]):
            out[i] = _trigamma(x[i])


def poly_path(double z_init, double z0, double[::1] coeffs, double a_scale,
              double u_scale, double[::1] eps, double[::1] out_z,
              double[::1] out_prop, cnp.uint8_t[::1] out_hit):
    cdef Py_ssize_t n = coeffs.shape[0]
    cdef Py_ssize_t T = eps.shape[0]
    cdef Py_ssize_t t, i
    cdef Py_ssize_t fail = 0
    cdef double z = z_init
    cdef double u, acc, r, gamma, prop, bound
    with nogil:
        for t in range(1, T + 1):
            u = z - z0
            acc = coeffs[n - 1]
            for i in range(n - 2, -1, -1):
                acc = acc * u + coeffs[i]
            r = -(acc * u)
            gamma = 1.0 / (a_scale * t)
            prop = z + gamma * (r + eps[t - 1])
            out_prop[t - 1] = prop
            if not isfinite(prop):
                fail = t
                break
            if u_scale > 0.0:
                bound = log(u_scale * t)
                if prop > bound:
                    z = bound
                elif prop < -bound:
                    z = -bound
                else:
                    z = prop
            else:
                z = prop
            out_z[t - 1] = z
            out_hit[t - 1] = 1 if z != prop else 0
    return fail


def gamma_shape_path(double theta_init, double[::1] logx, int moving, double c1,
                     double c2, double lo_fixed, double hi_fixed,
                     double[::1] out_theta, double[::1] out_prop,
                     cnp.uint8_t[::1] out_hit, double[::1] out_dig,
                     double[::1] out_trig):
    cdef Py_ssize_t T = logx.shape[0]
    cdef Py_ssize_t t
    cdef Py_ssize_t fail = 0
    cdef double th = theta_init
    cdef double dg, tg, prop, lo, hi
    with nogil:
        for t in range(1, T + 1):
            dg = _digamma(th)
            tg = _trigamma(th)
            out_dig[t - 1] = dg
            out_trig[t - 1] = tg
            prop = th + (logx[t - 1] - dg) / (t * tg)
            out_prop[t - 1] = prop
            if not isfinite(prop):
                fail = t
                break
            if moving:
                lo = c1 / sqrt(log(t + 2.0))
                hi = c2 * (t + 2.0)
            else:
                lo = lo_fixed
                hi = hi_fixed
            if prop < lo:
                th = lo
            elif prop > hi:
                th = hi
            else:
                th = prop
            out_theta[t - 1] = th
            out_hit[t - 1] = 1 if th != prop else 0
    return fail


def ar1_path(double x0, double theta, double[::1] xi, double[::1] out_x):
    cdef Py_ssize_t t
    cdef double x = x0
    with nogil:
        for t in range(xi.shape[0]):
            x = theta * x + xi[t]
            out_x[t] = x


def ar1_rls(double theta0, double info0, double[::1] x, double[::1] out_theta,
            double[::1] out_info):
    cdef Py_ssize_t t
    cdef double th = theta0
    cdef double info = info0
    cdef double xp
    with nogil:
        for t in range(1, x.shape[0]):
            xp = x[t - 1]
            info = info + xp * xp
            th = th + xp * (x[t] - th * xp) / info
            out_theta[t - 1] = th
            out_info[t - 1] = info
