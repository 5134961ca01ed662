"""Generator families g(s, x, z) of the dynamic g-expectation.

Each family is scaled by a positive risk-aversion function of (s, r, x):

``case1_sqrt``         k (sqrt(1 + z^2) - 1)
``case2_logistic``     l ln((1 + e^{-z}) / 2)
``case3_huber``        |z| - 1/(2 gamma) if |z| >= 1/gamma else gamma z^2 / 2
``avar``               |z| for level < 1/2, ((1 - level)/level) |z| otherwise
``entropic_quadratic`` gamma z^2 / 2   (not Lipschitz)
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import huber

from . import kernels
from .market import MarketModel

FAMILIES = ("case1_sqrt", "case2_logistic", "case3_huber", "avar", "entropic_quadratic")
FAMILY_CODES = {
    "case1_sqrt": kernels.CASE1,
    "case2_logistic": kernels.CASE2,
    "case3_huber": kernels.CASE3,
    "avar": kernels.AVAR,
    "entropic_quadratic": kernels.ENTROPIC,
}
# aversion non-increasing in wealth is a premise for these
MONOTONE_FAMILIES = ("case1_sqrt", "case2_logistic", "case3_huber", "entropic_quadratic")

Aversion = Callable[[float, float, float], float]


class GeneratorError(ValueError):
    pass


def decaying_aversion(level: float, decay: float = 0.0) -> Aversion:
    """level / (1 + max(x, 0) * decay): positive and non-increasing in wealth."""
    if level <= 0 or decay < 0:
        raise GeneratorError("need level > 0 and decay >= 0")

    def aversion(s, r, x):
        return level / (1.0 + np.maximum(x, 0.0) * decay)

    return aversion


@dataclass(frozen=True)
class GeneratorSpec:
    family: str
    aversion: Aversion
    name: str = ""

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise GeneratorError(f"unknown family {self.family!r}; choose from {FAMILIES}")

    @property
    def code(self) -> int:
        return FAMILY_CODES[self.family]

    @property
    def lipschitz(self) -> bool:
        return self.family != "entropic_quadratic"

    def aversion_at(self, s, r, x):
        a = self.aversion(s, r, x)
        if np.any(np.asarray(a) <= 0):
            raise GeneratorError(f"aversion must be positive, got {a!r} at (s={s!r}, r={r!r}, x={x!r})")
        if self.family == "avar" and np.any(np.asarray(a) > 1):
            raise GeneratorError(f"AVaR level must lie in (0, 1], got {a!r}")
        return a

    def scale(self, s, r, x):
        """The multiplier fed to the kernel formulas (|z| slope for avar)."""
        a = self.aversion_at(s, r, x)
        if self.family == "avar":
            return np.where(np.asarray(a) < 0.5, 1.0, (1.0 - np.asarray(a)) / a)
        return a

    def lipschitz_bound(self, s, r, x):
        if self.family == "case3_huber":
            return 1.0
        if self.family == "entropic_quadratic":
            return math.inf
        return self.scale(s, r, x)


def case1(k0: float, decay: float = 0.0) -> GeneratorSpec:
    return GeneratorSpec("case1_sqrt", decaying_aversion(k0, decay), f"case1(k0={k0}, c={decay})")


def case2(l0: float, decay: float = 0.0) -> GeneratorSpec:
    return GeneratorSpec("case2_logistic", decaying_aversion(l0, decay), f"case2(l0={l0}, c={decay})")


def case3(gamma0: float, decay: float = 0.0) -> GeneratorSpec:
    return GeneratorSpec("case3_huber", decaying_aversion(gamma0, decay), f"case3(gamma0={gamma0}, c={decay})")


def avar(level: float) -> GeneratorSpec:
    if not 0 < level <= 1:
        raise GeneratorError("AVaR level must lie in (0, 1]")
    return GeneratorSpec("avar", lambda s, r, x: level, f"avar(level={level})")


def entropic(gamma0: float, decay: float = 0.0) -> GeneratorSpec:
    return GeneratorSpec("entropic_quadratic", decaying_aversion(gamma0, decay), f"entropic(gamma0={gamma0}, c={decay})")


GENERATOR_FACTORIES = {
    "case1_sqrt": case1,
    "case2_logistic": case2,
    "case3_huber": case3,
    "entropic_quadratic": entropic,
}


def g_of(family: str, scale, z):
    """Vectorized family formula with the aversion scale already resolved."""
    z = np.asarray(z, dtype=float)
    if family == "case1_sqrt":
        return scale * ((z / (np.hypot(1.0, z) + 1.0)) * z)
    if family == "case2_logistic":
        return scale * (np.logaddexp(0.0, -z) - math.log(2.0))
    if family == "case3_huber":
        az = np.abs(z)
        return np.where(az * scale >= 1.0, az - 0.5 / scale, 0.5 * scale * z * z)
    if family == "avar":
        return scale * np.abs(z)
    if family == "entropic_quadratic":
        return 0.5 * scale * z * z
    raise GeneratorError(f"unknown family {family!r}")


def evaluate_g(spec: GeneratorSpec, s, r, x, z):
    val = g_of(spec.family, spec.scale(s, r, x), z)
    return float(val) if np.ndim(val) == 0 else val


def effective_generator(spec: GeneratorSpec, model: MarketModel, s, r, x, z, p):
    """g(s, x, z - p) - p * theta(s, r)."""
    z, p = np.asarray(z, dtype=float), np.asarray(p, dtype=float)
    val = g_of(spec.family, spec.scale(s, r, x), z - p) - p * model.theta(s, r)
    return float(val) if np.ndim(val) == 0 else val


@dataclass(frozen=True)
class HuberCheck:
    ok: bool
    max_error: float
    worst: tuple | None

    def __bool__(self):
        return self.ok


def huber_identity_check(spec: GeneratorSpec, sample, tol: float = 1e-12) -> HuberCheck:
    """gamma * g(z) must equal the Huber loss of gamma*z with unit threshold.

    ``sample`` is an iterable of (s, r, x, z). The reference is scipy's Huber
    function, so the check is independent of the generator formula.
    """
    if spec.family != "case3_huber":
        raise GeneratorError("identity check applies to case3_huber only")
    worst, max_err = None, 0.0
    for s, r, x, z in sample:
        gamma = float(spec.aversion_at(s, r, x))
        lhs = gamma * evaluate_g(spec, s, r, x, z)
        rhs = float(huber(1.0, gamma * z))
        err = abs(lhs - rhs)
        if err > max_err:
            max_err, worst = err, (s, r, x, z, lhs, rhs)
    return HuberCheck(max_err <= tol, max_err, worst)
