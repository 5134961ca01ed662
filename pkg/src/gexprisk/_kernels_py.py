"""Pure-Python implementations of the hot kernels.

These mirror ``_kernels.pyx`` operation for operation so that the compiled
and fallback paths agree bit for bit on the same inputs.
"""
import math

import numpy as np

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
INV_PHI_SQ = (3.0 - math.sqrt(5.0)) / 2.0

CASE1, CASE2, CASE3, AVAR, ENTROPIC = 1, 2, 3, 4, 5
LN2 = math.log(2.0)

IMPLEMENTATION = "python"


def euler_affine(r0, dt, dW, b0, b1, s0, s1):
    """Euler-Maruyama for dR = (b0 + b1 R) ds + (s0 + s1 R) dW.

    ``dt`` has one entry per step, ``dW`` is (n_paths, n_steps).
    Returns the (n_paths, n_steps + 1) array of index values.
    """
    dW = np.asarray(dW, dtype=np.float64)
    n_paths, n_steps = dW.shape
    R = np.empty((n_paths, n_steps + 1))
    R[:, 0] = r0
    for j in range(n_steps):
        r = R[:, j]
        R[:, j + 1] = r + (b0 + b1 * r) * dt[j] + (s0 + s1 * r) * dW[:, j]
    return R


def g_scalar(code, param, z):
    if code == CASE1:
        h = math.sqrt(1.0 + z * z)
        return param * ((z / (h + 1.0)) * z)
    if code == CASE2:
        # l * (log(1 + exp(-z)) - log 2), stable for large |z|
        return param * (max(-z, 0.0) + math.log1p(math.exp(-abs(z))) - LN2)
    if code == CASE3:
        az = abs(z)
        if az * param >= 1.0:
            return az - 0.5 / param
        return 0.5 * param * z * z
    if code == AVAR:
        return param * abs(z)
    if code == ENTROPIC:
        return 0.5 * param * z * z
    raise ValueError(f"unknown generator code {code}")


def reduced_objective(code, param, theta, u):
    """Effective generator with the z-shift factored out: g(-u) - theta*u."""
    return g_scalar(code, param, -u) - theta * u


def _softplus(u):
    return max(u, 0.0) + math.log1p(math.exp(-abs(u)))


def _linear_clip_integral(a, b, slope, cap):
    """Integral over [a, b] of clip(slope*t, -cap, cap)."""
    knot = cap / slope
    total = 0.0
    lo, hi = max(a, -knot), min(b, knot)
    if lo < hi:
        total += 0.5 * slope * (hi - lo) * (hi + lo)
    if a < -knot:
        total -= cap * (min(b, -knot) - a)
    if b > knot:
        total += cap * (b - max(a, knot))
    return total


def _sqrt_gap(x, sign):
    """sqrt(1 + x^2) - sign*x without cancellation (sign = +1 or -1)."""
    root = math.sqrt(1.0 + x * x)
    if sign * x > 0.0:
        return 1.0 / (root + sign * x)
    return root - sign * x


def _softplus_diff(a, b):
    """softplus(b) - softplus(a) for a < b."""
    delta = b - a
    if delta > 30.0:
        return _softplus(b) - _softplus(a)
    sig = 1.0 / (1.0 + math.exp(-a)) if a >= 0.0 else math.exp(a) / (1.0 + math.exp(a))
    return math.log1p(sig * math.expm1(delta))


def slope_excess(code, param, theta, c, d):
    """(f(d) - f(c)) / (d - c) for f(u) = g(-u) - theta*u and c < d.

    Evaluated in closed form so that slopes approaching an asymptote keep
    their sign instead of rounding to zero.
    """
    delta = d - c
    if code == CASE1:
        total = math.sqrt(1.0 + d * d) + math.sqrt(1.0 + c * c)
        if c + d >= 0.0:
            return (param - theta) - param * (_sqrt_gap(d, 1.0) + _sqrt_gap(c, 1.0)) / total
        return (-param - theta) + param * (_sqrt_gap(d, -1.0) + _sqrt_gap(c, -1.0)) / total
    if code == CASE2:
        if c + d >= 0.0:
            return (param - theta) - param * _softplus_diff(-d, -c) / delta
        return param * _softplus_diff(c, d) / delta - theta
    if code == CASE3:
        return _linear_clip_integral(c, d, param, 1.0) / delta - theta
    if code == AVAR:
        return param * (max(d, 0.0) - max(c, 0.0) - (min(d, 0.0) - min(c, 0.0))) / delta - theta
    if code == ENTROPIC:
        return 0.5 * param * (d + c) - theta
    raise ValueError(f"unknown generator code {code}")


def golden_min_gbar(code, param, theta, lo, hi, tol, maxiter):
    """Golden-section minimum of u -> g(-u) - theta*u on [lo, hi].

    Each step compares f(c) and f(d) through the sign of the secant slope,
    computed in closed form so that flat minima are still resolved well
    below the square root of machine precision. Returns (u_min, f_min, iterations).
    """
    a, b = lo, hi
    h = b - a
    c = a + INV_PHI_SQ * h
    d = a + INV_PHI * h
    it = 0
    while h > tol * (1.0 + abs(c)) and it < maxiter:
        if slope_excess(code, param, theta, c, d) > 0.0:
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
    u = c if slope_excess(code, param, theta, c, d) > 0.0 else d
    return u, reduced_objective(code, param, theta, u), it
