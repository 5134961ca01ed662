# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see ``_kernels_py`` for the reference twin."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, log1p, expm1, exp, log, sqrt

cnp.import_array()

cdef double INV_PHI = (sqrt(5.0) - 1.0) / 2.0
cdef double INV_PHI_SQ = (3.0 - sqrt(5.0)) / 2.0
cdef double LN2 = log(2.0)

CASE1, CASE2, CASE3, AVAR, ENTROPIC = 1, 2, 3, 4, 5
IMPLEMENTATION = "cython"


def euler_affine(double r0, double[::1] dt, dW, double b0, double b1, double s0, double s1):
    cdef double[:, ::1] dw = np.ascontiguousarray(dW, dtype=np.float64)
    cdef Py_ssize_t n_paths = dw.shape[0]
    cdef Py_ssize_t n_steps = dw.shape[1]
    out = np.empty((n_paths, n_steps + 1), dtype=np.float64)
    cdef double[:, ::1] R = out
    cdef Py_ssize_t i, j
    cdef double r
    with nogil:
        for i in range(n_paths):
            r = r0
            R[i, 0] = r
            for j in range(n_steps):
                r = r + (b0 + b1 * r) * dt[j] + (s0 + s1 * r) * dw[i, j]
                R[i, j + 1] = r
    return out


cdef inline double _g(int code, double param, double z) nogil:
    cdef double h, az
    if code == 1:
        h = sqrt(1.0 + z * z)
        return param * ((z / (h + 1.0)) * z)
    if code == 2:
        return param * ((-z if -z > 0.0 else 0.0) + log1p(exp(-fabs(z))) - LN2)
    if code == 3:
        az = fabs(z)
        if az * param >= 1.0:
            return az - 0.5 / param
        return 0.5 * param * z * z
    if code == 4:
        return param * fabs(z)
    return 0.5 * param * z * z


cdef inline double _reduced(int code, double param, double theta, double u) nogil:
    return _g(code, param, -u) - theta * u


def g_scalar(int code, double param, double z):
    if code < 1 or code > 5:
        raise ValueError(f"unknown generator code {code}")
    return _g(code, param, z)


def reduced_objective(int code, double param, double theta, double u):
    return _reduced(code, param, theta, u)


cdef inline double _softplus(double u) nogil:
    return (u if u > 0.0 else 0.0) + log1p(exp(-fabs(u)))


cdef inline double _linear_clip_integral(double a, double b, double slope, double cap) nogil:
    cdef double knot = cap / slope
    cdef double total = 0.0
    cdef double lo = a if a > -knot else -knot
    cdef double hi = b if b < knot else knot
    if lo < hi:
        total += 0.5 * slope * (hi - lo) * (hi + lo)
    if a < -knot:
        total -= cap * ((b if b < -knot else -knot) - a)
    if b > knot:
        total += cap * (b - (a if a > knot else knot))
    return total


cdef inline double _sqrt_gap(double x, double sign) nogil:
    cdef double root = sqrt(1.0 + x * x)
    if sign * x > 0.0:
        return 1.0 / (root + sign * x)
    return root - sign * x


cdef inline double _softplus_diff(double a, double b) nogil:
    cdef double delta = b - a
    cdef double sig
    if delta > 30.0:
        return _softplus(b) - _softplus(a)
    if a >= 0.0:
        sig = 1.0 / (1.0 + exp(-a))
    else:
        sig = exp(a) / (1.0 + exp(a))
    return log1p(sig * expm1(delta))


cdef inline double _excess(int code, double param, double theta, double c, double d) nogil:
    cdef double delta = d - c
    cdef double total
    if code == 1:
        total = sqrt(1.0 + d * d) + sqrt(1.0 + c * c)
        if c + d >= 0.0:
            return (param - theta) - param * (_sqrt_gap(d, 1.0) + _sqrt_gap(c, 1.0)) / total
        return (-param - theta) + param * (_sqrt_gap(d, -1.0) + _sqrt_gap(c, -1.0)) / total
    if code == 2:
        if c + d >= 0.0:
            return (param - theta) - param * _softplus_diff(-d, -c) / delta
        return param * _softplus_diff(c, d) / delta - theta
    if code == 3:
        return _linear_clip_integral(c, d, param, 1.0) / delta - theta
    if code == 4:
        return param * ((d if d > 0.0 else 0.0) - (c if c > 0.0 else 0.0)
                        - ((d if d < 0.0 else 0.0) - (c if c < 0.0 else 0.0))) / delta - theta
    return 0.5 * param * (d + c) - theta


def slope_excess(int code, double param, double theta, double c, double d):
    if code < 1 or code > 5:
        raise ValueError(f"unknown generator code {code}")
    return _excess(code, param, theta, c, d)


def golden_min_gbar(int code, double param, double theta, double lo, double hi,
                    double tol, int maxiter):
    if code < 1 or code > 5:
        raise ValueError(f"unknown generator code {code}")
    cdef double a = lo, b = hi
    cdef double h = b - a
    cdef double c = a + INV_PHI_SQ * h
    cdef double d = a + INV_PHI * h
    cdef double u
    cdef int it = 0
    with nogil:
        while h > tol * (1.0 + fabs(c)) and it < maxiter:
            if _excess(code, param, theta, c, d) > 0.0:
                b = d
                d = c
                h = INV_PHI * h
                c = a + INV_PHI_SQ * h
            else:
                a = c
                c = d
                h = INV_PHI * h
                d = a + INV_PHI * h
            it += 1
        u = c if _excess(code, param, theta, c, d) > 0.0 else d
    return u, _reduced(code, param, theta, u), it
