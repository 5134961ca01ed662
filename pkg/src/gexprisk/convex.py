"""Legendre-Fenchel polars, bracketed golden-section search and projections.

The polar of g(s, x, .) is ``G(mu) = sup_r (-mu r - g(r))``. Infinite polars
are reported through ``PolarResult.finite``; they are a regime, not an error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels
from .generators import GeneratorSpec, evaluate_g

ANALYTIC_TOL = 1e-9
NUMERIC_TOL = 1e-7
BRACKET_CAP = 1e8
GOLDEN_XTOL = 1e-12
GOLDEN_MAXITER = 400


class UnboundedError(ArithmeticError):
    """The objective decreases without bound along an expanding bracket."""


class NoMinimizerError(ArithmeticError):
    """The infimum is finite but only approached at infinity."""


class NotApplicableError(ValueError):
    pass


@dataclass(frozen=True)
class PolarResult:
    value: float
    optimizer: float | None
    finite: bool
    boundary: bool = False

    @classmethod
    def infinite(cls) -> "PolarResult":
        return cls(math.inf, None, False, False)


# --- one-dimensional search ---------------------------------------------

def golden_section(f: Callable[[float], float], a: float, b: float, xtol: float = GOLDEN_XTOL,
                   maxiter: int = GOLDEN_MAXITER) -> tuple[float, float]:
    """Minimum of a unimodal f on [a, b]; returns (x_min, f_min)."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    inv_phi2 = 1.0 - inv_phi
    h = b - a
    c, d = a + inv_phi2 * h, a + inv_phi * h
    fc, fd = f(c), f(d)
    for _ in range(maxiter):
        if h <= xtol * (1.0 + abs(c)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            h *= inv_phi
            c = a + inv_phi2 * h
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            h *= inv_phi
            d = a + inv_phi * h
            fd = f(d)
    return (c, fc) if fc < fd else (d, fd)


def bracket_minimum(f: Callable[[float], float], x0: float = 0.0, step: float = 1.0,
                    cap: float = BRACKET_CAP) -> tuple[float, float]:
    """Walk downhill with doubling steps until f turns up.

    Raises UnboundedError if f keeps dropping at a non-vanishing rate beyond
    ``cap``, NoMinimizerError if it flattens out towards an asymptote.
    """
    f0 = f(x0)
    fl, fr = f(x0 - step), f(x0 + step)
    if fl >= f0 and fr >= f0:
        return x0 - step, x0 + step
    direction = 1.0 if fr < fl else -1.0
    prev, cur = x0, x0 + direction * step
    fcur = min(fl, fr)
    h = step
    while True:
        h *= 2.0
        nxt = cur + direction * h
        fn = f(nxt)
        if fn >= fcur:
            return (prev, nxt) if prev < nxt else (nxt, prev)
        if abs(nxt) > cap:
            slope = (fcur - fn) / h
            if not math.isfinite(fn) or slope > 1e-9:
                raise UnboundedError(f"objective still falling at rate {slope:.3g} near {nxt:.3g}")
            raise NoMinimizerError(f"objective flattens towards {fn!r} as the argument tends to {direction * math.inf}")
        prev, cur, fcur = cur, nxt, fn


def bracket_reduced(code: int, scale: float, lin: float, x0: float = 0.0, step: float = 1.0,
                    cap: float = BRACKET_CAP) -> tuple[float, float]:
    """bracket_minimum for u -> g(-u) - lin*u, deciding each move from the exact secant slope.

    Comparing function values loses the slow approach to an asymptote in
    rounding noise far out; the secant slope does not. For the strictly
    convex families a zero slope can only be underflow (or the minimum lies
    inside the step, which the next step still brackets), so the walk goes on.
    """
    slope = lambda a, b: kernels.slope_excess(code, scale, lin, a, b)
    strict = code in (kernels.CASE1, kernels.CASE2)
    if slope(x0, x0 + step) < 0.0:
        direction = 1.0
    elif slope(x0 - step, x0) > 0.0:
        direction = -1.0
    else:
        return x0 - step, x0 + step
    prev, cur, h = x0, x0 + direction * step, step
    while True:
        h *= 2.0
        nxt = cur + direction * h
        s = slope(min(cur, nxt), max(cur, nxt))
        if direction * s > 0.0 or (direction * s == 0.0 and not strict):
            return (prev, nxt) if prev < nxt else (nxt, prev)
        if abs(nxt) > cap:
            if abs(s) > 1e-9:
                raise UnboundedError(f"objective still falling at rate {abs(s):.3g} near {nxt:.3g}")
            raise NoMinimizerError(f"objective flattens out as the argument tends to {direction * math.inf}")
        prev, cur = cur, nxt


def minimize_reduced(code: int, scale: float, lin: float, step: float = 1.0) -> tuple[float, float]:
    """argmin and min of u -> g(-u) - lin*u for a kernel-coded family."""
    a, b = bracket_reduced(code, float(scale), float(lin), 0.0, step)
    u, fu, _ = kernels.golden_min_gbar(code, float(scale), float(lin), a, b, GOLDEN_XTOL, GOLDEN_MAXITER)
    return u, fu


# --- polar ---------------------------------------------------------------

def polar(spec: GeneratorSpec, s: float, x: float, mu: float, r: float = 0.0, numeric: bool = False) -> PolarResult:
    """Polar G(s, x, mu); analytic where available, golden-section otherwise."""
    scale = float(spec.scale(s, r, x))
    if numeric:
        return numeric_polar(spec, s, x, mu, r)
    return analytic_polar(spec.family, scale, float(mu))


def analytic_polar(family: str, scale: float, mu: float) -> PolarResult:
    amu = abs(mu)
    if family == "case1_sqrt":
        k = scale
        if amu < k:
            root = math.sqrt((k - amu) * (k + amu))
            return PolarResult(mu * mu / (k + root), -mu / root, True)
        if amu == k:
            return PolarResult(k, None, True, True)
        return PolarResult.infinite()
    if family == "case2_logistic":
        l = scale
        if 0.0 < mu < l:
            return PolarResult(mu * math.log(mu / (l - mu)) + l * math.log(2.0 * (l - mu) / l),
                               math.log((l - mu) / mu), True)
        if mu == 0.0 or mu == l:
            return PolarResult(l * math.log(2.0), None, True, True)
        return PolarResult.infinite()
    if family == "case3_huber":
        gamma = scale
        if amu <= 1.0:
            return PolarResult(mu * mu / (2.0 * gamma), -mu / gamma, True, amu == 1.0)
        return PolarResult.infinite()
    if family == "avar":
        c = scale
        if amu <= c:
            return PolarResult(0.0, 0.0, True, amu == c)
        return PolarResult.infinite()
    if family == "entropic_quadratic":
        gamma = scale
        return PolarResult(mu * mu / (2.0 * gamma), -mu / gamma, True)
    raise ValueError(f"no analytic polar for {family!r}")


def numeric_polar(spec: GeneratorSpec, s: float, x: float, mu: float, r: float = 0.0) -> PolarResult:
    """Golden-section maximization of r -> -mu r - g(r) over an adaptive bracket."""
    scale = float(spec.scale(s, r, x))
    bound = float(spec.lipschitz_bound(s, r, x))
    gap = bound - abs(mu)
    if math.isfinite(bound) and gap < -1e-12 * (1.0 + bound):
        # Lipschitz g: the objective is unbounded once |mu| exceeds the bound
        return PolarResult.infinite()
    B = 10.0 * (1.0 + abs(mu) / gap) if gap > 0 and math.isfinite(gap) else 10.0
    try:
        u, fu = minimize_reduced(spec.code, scale, mu, step=B)
    except UnboundedError:
        return PolarResult.infinite()
    except NoMinimizerError:
        # supremum approached at infinity: evaluate there
        far = BRACKET_CAP
        vals = [-kernels.reduced_objective(spec.code, scale, mu, v) for v in (far, -far)]
        return PolarResult(max(vals), None, True, True)
    return PolarResult(-fu, -u, True, abs(gap) <= 1e-12 * (1.0 + bound))


def subdifferential_test(spec: GeneratorSpec, s: float, x: float, mu: float, r_hat: float,
                         tol: float = ANALYTIC_TOL, r: float = 0.0) -> bool:
    """True iff g(r_hat) + mu r_hat <= -G(mu) + tol, i.e. r_hat attains the infimum."""
    res = polar(spec, s, x, mu, r)
    if not res.finite:
        raise NotApplicableError(f"polar is infinite at mu={mu!r}")
    return evaluate_g(spec, s, r, x, r_hat) + mu * r_hat <= -res.value + tol


def optimal_p_from_polar(z: float, r_bar: float) -> float:
    return z - r_bar


# --- constraint sets -----------------------------------------------------

@dataclass(frozen=True)
class ConstraintSet:
    lower: float = -math.inf
    upper: float = math.inf

    def __post_init__(self):
        if not self.lower <= self.upper:
            raise ValueError("empty constraint interval")

    @classmethod
    def whole_line(cls) -> "ConstraintSet":
        return cls()

    @classmethod
    def nonnegative(cls) -> "ConstraintSet":
        return cls(0.0, math.inf)

    @classmethod
    def interval(cls, a: float, b: float) -> "ConstraintSet":
        return cls(float(a), float(b))

    @property
    def kind(self) -> str:
        if self.lower == -math.inf and self.upper == math.inf:
            return "whole-line"
        if self.lower == 0.0 and self.upper == math.inf:
            return "half-line-nonnegative"
        return "interval"

    def contains(self, a) -> bool:
        return bool(np.all((self.lower <= np.asarray(a)) & (np.asarray(a) <= self.upper)))


def project(a, gamma_set: ConstraintSet):
    """Closest point of the set and the distance to it."""
    proj = np.clip(a, gamma_set.lower, gamma_set.upper)
    dist = np.abs(np.asarray(a) - proj)
    if np.ndim(proj) == 0:
        return float(proj), float(dist)
    return proj, dist
