"""Risk-minimizing strategies: feasibility, closed forms and a numeric minimizer.

The optimal integrand minimizes the effective generator
``gbar(p) = g(z - p) - p * theta`` pointwise. For deterministic theta and
aversion the auxiliary process Z-bar vanishes and the minimal risk value is a
plain time integral of ``min_p gbar = -G(theta)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_simpson

from .convex import (
    ConstraintSet,
    NoMinimizerError,
    UnboundedError,
    golden_section,
    bracket_minimum,
    minimize_reduced,
    project,
)
from .generators import GeneratorSpec, effective_generator
from .market import MarketModel

REGIMES = ("interior", "boundary", "infeasible-no-minimizer", "infeasible-unbounded")
_SEVERITY = {name: i for i, name in enumerate(REGIMES)}


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    regime: str
    margin: float
    witness: tuple | None
    family: str = ""

    def to_dict(self) -> dict:
        return {"feasible": self.feasible, "regime": self.regime, "margin": self.margin,
                "witness": list(self.witness) if self.witness else None, "family": self.family}


class InfeasibleError(ArithmeticError):
    """No finite optimal strategy exists at some evaluation point."""

    def __init__(self, report: FeasibilityReport, message: str = ""):
        self.report = report
        super().__init__(message or f"{report.regime} (margin {report.margin:.6g} at {report.witness})")


def classify_point(family: str, theta: float, scale: float) -> tuple[str, float]:
    """Regime and margin for one (theta, aversion scale) pair."""
    at = abs(theta)
    if family == "case1_sqrt":
        margin = scale - at
        if margin > 0:
            return "interior", margin
        return ("infeasible-no-minimizer" if margin == 0 else "infeasible-unbounded"), margin
    if family == "case2_logistic":
        margin = min(theta, scale - theta)
        if margin > 0:
            return "interior", margin
        return ("infeasible-no-minimizer" if margin == 0 else "infeasible-unbounded"), margin
    if family in ("case3_huber", "avar"):
        bound = 1.0 if family == "case3_huber" else scale
        margin = bound - at
        if margin > 0:
            return "interior", margin
        return ("boundary" if margin == 0 else "infeasible-unbounded"), margin
    if family == "entropic_quadratic":
        return "interior", math.inf
    raise ValueError(f"unknown family {family!r}")


def feasibility(spec: GeneratorSpec, model: MarketModel, grid) -> FeasibilityReport:
    """Worst regime over (s, r, x) samples; the margin is min(bound - |theta|)."""
    grid = list(grid)
    if not grid:
        raise ValueError("feasibility grid is empty")
    worst_regime, worst_margin, witness = "interior", math.inf, None
    for s, r, x in grid:
        theta = float(model.theta(s, np.asarray(r, dtype=float)))
        regime, margin = classify_point(spec.family, theta, float(spec.scale(s, r, x)))
        if _SEVERITY[regime] > _SEVERITY[worst_regime] or (
            _SEVERITY[regime] == _SEVERITY[worst_regime] and margin < worst_margin
        ):
            worst_regime, worst_margin, witness = regime, margin, (float(s), float(r), float(x))
    return FeasibilityReport(worst_regime in ("interior", "boundary"), worst_regime, worst_margin, witness, spec.family)


def _require(spec, s, r, x, theta, scale, allowed=("interior", "boundary")):
    th, sc = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(scale, dtype=float))
    for t_i, sc_i in zip(th.flat, sc.flat):
        regime, margin = classify_point(spec.family, float(t_i), float(sc_i))
        if regime not in allowed:
            rep = FeasibilityReport(False, regime, margin, (float(np.min(s)), float(np.min(r)), float(np.min(x))), spec.family)
            raise InfeasibleError(rep, f"{spec.family}: theta={t_i:.6g} vs aversion {sc_i:.6g} is {regime}")


def _out(v):
    return float(v) if np.ndim(v) == 0 else v


def closed_form_case1(spec: GeneratorSpec, model: MarketModel, s, r, x, z_bar=0.0):
    """theta / sqrt(k^2 - theta^2) + z_bar on the open band |theta| < k."""
    theta, k = model.theta(s, r), spec.scale(s, r, x)
    _require(spec, s, r, x, theta, k, ("interior",))
    return _out(theta / np.sqrt((k - theta) * (k + theta)) + z_bar)


def closed_form_case2(spec: GeneratorSpec, model: MarketModel, s, r, x, z_bar=0.0):
    """ln(theta / (l - theta)) + z_bar for 0 < theta < l."""
    theta, l = model.theta(s, r), spec.scale(s, r, x)
    _require(spec, s, r, x, theta, l, ("interior",))
    return _out(np.log(theta / (l - theta)) + z_bar)


def closed_form_case3(spec: GeneratorSpec, model: MarketModel, s, r, x, z_bar=0.0):
    """z_bar + theta / gamma for |theta| <= 1 (canonical kink value at |theta| = 1)."""
    theta, gamma = model.theta(s, r), spec.scale(s, r, x)
    _require(spec, s, r, x, theta, gamma)
    return _out(z_bar + theta / gamma)


def entropic_constrained(spec: GeneratorSpec, model: MarketModel, s, r, x, z_bar=0.0,
                         gamma_set: ConstraintSet = ConstraintSet()):
    """Projection of z_bar + theta/gamma onto the constraint set."""
    if spec.family != "entropic_quadratic":
        raise ValueError("entropic_constrained needs the entropic_quadratic family")
    theta, gamma = model.theta(s, r), spec.scale(s, r, x)
    return project(z_bar + theta / gamma, gamma_set)[0]


def closed_form(spec: GeneratorSpec, model: MarketModel, s, r, x, z_bar=0.0,
                gamma_set: ConstraintSet | None = None):
    """Dispatch to the family's closed-form optimal integrand."""
    if spec.family == "case1_sqrt":
        return closed_form_case1(spec, model, s, r, x, z_bar)
    if spec.family == "case2_logistic":
        return closed_form_case2(spec, model, s, r, x, z_bar)
    if spec.family == "case3_huber":
        return closed_form_case3(spec, model, s, r, x, z_bar)
    if spec.family == "entropic_quadratic":
        return entropic_constrained(spec, model, s, r, x, z_bar, gamma_set or ConstraintSet())
    theta = model.theta(s, r)
    _require(spec, s, r, x, theta, spec.scale(s, r, x))
    return _out(np.broadcast_to(np.asarray(z_bar, dtype=float), np.shape(theta)) + 0.0)


def pi_from_p(model: MarketModel, s, r, p):
    return _out(np.asarray(p) / model.beta(s, r))


def pointwise_minimize(spec: GeneratorSpec, model: MarketModel, s, r, x, z) -> tuple[float, float]:
    """Numeric argmin/min of p -> gbar(s, x, z, p) by bracketing + golden section.

    The search runs in u = p - z, where ``gbar(z, z + u) = g(-u) - theta u - theta z``,
    so the z-dependent constant does not add rounding noise to the comparisons.
    """
    theta = float(model.theta(s, np.asarray(r, dtype=float)))
    scale = float(spec.scale(s, r, x))
    try:
        u, fu = minimize_reduced(spec.code, scale, theta)
    except (UnboundedError, NoMinimizerError) as exc:
        regime = "infeasible-unbounded" if isinstance(exc, UnboundedError) else "infeasible-no-minimizer"
        _, margin = classify_point(spec.family, theta, scale)
        raise InfeasibleError(FeasibilityReport(False, regime, margin, (float(s), float(r), float(x)), spec.family),
                              f"{spec.family}: {exc}") from exc
    return z + u, fu - theta * z


def constrained_minimize(spec: GeneratorSpec, model: MarketModel, s, r, x, z,
                         gamma_set: ConstraintSet) -> tuple[float, float]:
    """Golden-section minimum of gbar over p restricted to a closed interval."""
    f = lambda p: effective_generator(spec, model, s, r, x, z, p)
    lo, hi = gamma_set.lower, gamma_set.upper
    if math.isinf(lo) or math.isinf(hi):
        a, b = bracket_minimum(f, float(np.clip(z, lo, hi)), 1.0)
        lo, hi = max(a, lo), min(b, hi)
    return golden_section(f, lo, hi)


# --- minimal risk value --------------------------------------------------

def min_gbar_zero(family: str, theta, scale, gamma_set: ConstraintSet | None = None):
    """min_p gbar(z=0, p) = -G(theta), vectorized over theta/scale."""
    theta, scale = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(scale, dtype=float))
    if family == "entropic_quadratic" and gamma_set is not None:
        target = theta / scale
        _, dist = project(target, gamma_set)
        return 0.5 * scale * np.asarray(dist) ** 2 - theta**2 / (2.0 * scale)
    at = np.abs(theta)
    if family == "case1_sqrt":
        ok = at < scale
        out = np.sqrt(np.where(ok, (scale - at) * (scale + at), 0.0)) - scale
    elif family == "case2_logistic":
        ok = (theta > 0) & (theta < scale)
        th = np.where(ok, theta, 0.5 * scale)
        out = scale * np.log(scale / (2.0 * (scale - th))) - th * np.log(th / (scale - th))
    elif family == "case3_huber":
        ok = at <= 1.0
        out = -(theta**2) / (2.0 * scale)
    elif family == "avar":
        ok = at <= scale
        out = np.zeros(theta.shape)
    elif family == "entropic_quadratic":
        ok = np.ones(theta.shape, dtype=bool)
        out = -(theta**2) / (2.0 * scale)
    else:
        raise ValueError(f"unknown family {family!r}")
    if not np.all(ok):
        idx = np.unravel_index(int(np.argmin(ok)), ok.shape) if ok.ndim else ()
        regime, margin = classify_point(family, float(theta[idx]), float(scale[idx]))
        raise InfeasibleError(FeasibilityReport(False, regime, margin, None, family),
                              f"{family}: theta={float(theta[idx]):.6g} is {regime}")
    return out


@dataclass(frozen=True)
class YBarCurve:
    grid: np.ndarray
    values: np.ndarray

    @property
    def y_t(self) -> float:
        return float(self.values[0])


def _deterministic_inputs(spec, model, grid, r0, x):
    theta = np.array([float(model.theta(s, np.asarray(r0, dtype=float))) for s in grid])
    scale = np.array([float(spec.scale(s, r0, x)) for s in grid])
    for s in grid[:: max(1, len(grid) // 8)]:
        if not model.is_theta_deterministic(s, r0):
            raise ValueError("minimal_risk_value needs theta independent of the index level")
        a = [float(spec.scale(s, rr, x)) for rr in (r0 - 1.0, r0, r0 + 1.0)]
        if not (a[0] == a[1] == a[2]):
            raise ValueError("minimal_risk_value needs aversion independent of the index level")
    return theta, scale


def minimal_risk_value(spec: GeneratorSpec, model: MarketModel, t: float, T: float, x: float,
                       n_steps: int = 100, r0: float = 0.0,
                       gamma_set: ConstraintSet | None = None) -> YBarCurve:
    """Ybar(r) = -x + int_r^T min_p gbar ds by composite Simpson on a uniform grid."""
    grid = np.linspace(t, T, n_steps + 1)
    theta, scale = _deterministic_inputs(spec, model, grid, r0, x)
    allowed = ("interior", "boundary")
    if not (spec.family == "entropic_quadratic"):
        for s, th, sc in zip(grid, theta, scale):
            regime, margin = classify_point(spec.family, th, sc)
            if regime not in allowed:
                raise InfeasibleError(FeasibilityReport(False, regime, margin, (float(s), float(r0), float(x)), spec.family))
    integrand = min_gbar_zero(spec.family, theta, scale, gamma_set)
    cum = cumulative_simpson(integrand, x=grid, initial=0.0)
    values = -x + (cum[-1] - cum)
    return YBarCurve(grid, values)


# --- full strategy -------------------------------------------------------

@dataclass(frozen=True)
class StrategyResult:
    p_bar: Callable
    pi_bar: Callable
    z_bar: object
    y_bar_t: float
    y_bar_curve: YBarCurve | None
    mode: str = "deterministic"
    extras: dict = field(default_factory=dict, compare=False)


def optimal_strategy(spec: GeneratorSpec, model: MarketModel, t: float, T: float, x: float,
                     r0: float = 0.0, n_steps: int = 100, gamma_set: ConstraintSet | None = None,
                     bundle=None, basis_degree: int = 4) -> StrategyResult:
    """Closed-form strategy with its minimal risk value.

    Deterministic mode (theta and aversion free of the index level): Z-bar = 0
    and Ybar comes from quadrature. Otherwise ``bundle`` must be supplied and
    Z-bar, Ybar are estimated by the regression BSDE solver.
    """
    deterministic = model.is_theta_deterministic(t, r0) and all(
        float(spec.scale(t, rr, x)) == float(spec.scale(t, r0, x)) for rr in (r0 - 1.0, r0 + 1.0))
    if deterministic:
        curve = minimal_risk_value(spec, model, t, T, x, n_steps, r0, gamma_set)

        def p_bar(s, r, x_=x):
            return closed_form(spec, model, s, r, x_, 0.0, gamma_set)

        def pi_bar(s, r, x_=x):
            return pi_from_p(model, s, r, p_bar(s, r, x_))

        return StrategyResult(p_bar, pi_bar, 0.0, curve.y_t, curve, "deterministic")

    if bundle is None:
        raise ValueError("stochastic-coefficient mode needs a PathBundle")
    from .bsde import solve_optimal_pair

    sol = solve_optimal_pair(bundle, spec, model, x, basis_degree, gamma_set)
    z_bar = sol.z

    def p_bar_path(j, s, r, x_=x):
        return closed_form(spec, model, s, r, x_, z_bar[:, j], gamma_set)

    def pi_bar_path(j, s, r, x_=x):
        return pi_from_p(model, s, r, p_bar_path(j, s, r, x_))

    return StrategyResult(p_bar_path, pi_bar_path, z_bar, sol.y_t, None, "stochastic",
                          {"solution": sol})
