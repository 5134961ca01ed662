"""Risk-indifference price, Malliavin derivative of the index and the derivative hedge.

Everything here depends on market data only: no generator or risk-aversion
input enters the price or the hedge. Keep it that way (a test audits the
imports of this module).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np
from scipy.stats import kurtosis

from .market import (
    MarketModel,
    PathBundle,
    along_paths,
    girsanov_density,
    theta_paths,
)

HEAVY_TAIL_KURTOSIS = 10.0


class PayoffError(ValueError):
    pass


@dataclass(frozen=True)
class Derivative:
    """Payoff F of the terminal index and its derivative F_r.

    ``bound_F`` and ``bound_F_r`` are the declared sup-norms; infinite bounds
    mean the payoff does not claim boundedness.
    """

    F: Callable[[np.ndarray], np.ndarray]
    F_r: Callable[[np.ndarray], np.ndarray] | None
    bound_F: float = math.inf
    bound_F_r: float = math.inf
    name: str = "custom"

    def scaled(self, k: float) -> "Derivative":
        Fr = None if self.F_r is None else (lambda r: k * self.F_r(r))
        return Derivative(lambda r: k * self.F(r), Fr, abs(k) * self.bound_F, abs(k) * self.bound_F_r,
                          f"{k}*{self.name}")

    def shifted(self, c: float) -> "Derivative":
        return Derivative(lambda r: self.F(r) + c, self.F_r, self.bound_F + abs(c), self.bound_F_r,
                          f"{self.name}+{c}")


def constant_payoff(c: float) -> Derivative:
    return Derivative(lambda r: np.full(np.shape(r), float(c)), lambda r: np.zeros(np.shape(r)),
                      abs(c), 0.0, f"constant({c})")


def linear_payoff(slope: float = 1.0, intercept: float = 0.0) -> Derivative:
    return Derivative(lambda r: intercept + slope * np.asarray(r, dtype=float),
                      lambda r: np.full(np.shape(r), float(slope)),
                      math.inf, abs(slope), f"linear({slope}, {intercept})")


def clipped_linear_payoff(lower: float = 0.0, upper: float = 2.0) -> Derivative:
    """min(max(r, lower), upper); F_r is the indicator of (lower, upper)."""
    if not lower < upper:
        raise PayoffError("need lower < upper")
    return Derivative(lambda r: np.clip(r, lower, upper),
                      lambda r: ((np.asarray(r) > lower) & (np.asarray(r) < upper)).astype(float),
                      max(abs(lower), abs(upper)), 1.0, f"clipped({lower}, {upper})")


def smooth_bump_payoff(amplitude: float = 1.0, center: float = 0.0, width: float = 1.0) -> Derivative:
    """amplitude * exp(-(r - center)^2 / (2 width^2))."""
    if width <= 0:
        raise PayoffError("bump width must be positive")

    def F(r):
        return amplitude * np.exp(-0.5 * ((np.asarray(r, dtype=float) - center) / width) ** 2)

    def F_r(r):
        return -(np.asarray(r, dtype=float) - center) / width**2 * F(r)

    return Derivative(F, F_r, abs(amplitude), abs(amplitude) / (width * math.sqrt(math.e)),
                      f"bump({amplitude}, {center}, {width})")


PAYOFF_PRESETS = {
    "constant": constant_payoff,
    "linear": linear_payoff,
    "clipped_linear": clipped_linear_payoff,
    "smooth_bump": smooth_bump_payoff,
}


def make_payoff(preset: str, **params) -> Derivative:
    try:
        return PAYOFF_PRESETS[preset](**params)
    except KeyError:
        raise PayoffError(f"unknown payoff preset {preset!r}; known: {sorted(PAYOFF_PRESETS)}") from None


def _payoff_values(derivative: Derivative, r: np.ndarray) -> np.ndarray:
    v = np.broadcast_to(np.asarray(derivative.F(r), dtype=float), r.shape)
    if not np.all(np.isfinite(v)):
        raise PayoffError(f"payoff {derivative.name} is not finite on some path")
    if np.max(np.abs(v)) > derivative.bound_F:
        warnings.warn(f"|F| exceeds the declared bound {derivative.bound_F}", RuntimeWarning, stacklevel=3)
    return v


def _payoff_slopes(derivative: Derivative, r: np.ndarray) -> np.ndarray:
    if derivative.F_r is None:
        raise PayoffError(f"payoff {derivative.name} has no derivative F_r; the hedge needs one")
    v = np.broadcast_to(np.asarray(derivative.F_r(r), dtype=float), r.shape)
    if np.max(np.abs(v)) > derivative.bound_F_r:
        warnings.warn(f"|F_r| exceeds the declared bound {derivative.bound_F_r}", RuntimeWarning, stacklevel=3)
    return v


# --- price ---------------------------------------------------------------

@dataclass(frozen=True)
class PriceReport:
    q: float
    std_err: float
    n_paths: int
    density_mean: float
    density_second_moment: float

    def to_dict(self) -> dict:
        return asdict(self)


def indifference_price(model: MarketModel, derivative: Derivative, bundle: PathBundle) -> PriceReport:
    """q = E[A(T) F(R_T)] with A(t0) = 1."""
    A_T = girsanov_density(bundle, model)[:, -1]
    F = _payoff_values(derivative, bundle.R[:, -1])
    q, se = bundle.mean_se(A_T * F)
    return PriceReport(q, se, bundle.n_paths, float(np.mean(A_T)), float(np.mean(A_T**2)))


def marginal_price(report: PriceReport) -> float:
    """The price is linear in the payoff, so the per-unit price is q itself."""
    return report.q


# --- Malliavin derivative ------------------------------------------------

def variation_exponent(model: MarketModel, bundle: PathBundle) -> np.ndarray:
    """Cumulative sum C_j of (b_r - sigma_r^2/2) ds + sigma_r dW, C_0 = 0."""
    N = bundle.n_steps
    b_r = along_paths(model.b_r, bundle, N)
    s_r = along_paths(model.sigma_r, bundle, N)
    incr = (b_r - 0.5 * s_r**2) * bundle.ds[None, :] + s_r * bundle.dW
    C = np.zeros((bundle.n_paths, N + 1))
    np.cumsum(incr, axis=1, out=C[:, 1:])
    return C


def malliavin_index_derivative(model: MarketModel, bundle: PathBundle, r_idx: int, s_idx: int,
                               _C: np.ndarray | None = None) -> np.ndarray:
    """D_r R_s = sigma(r, R_r) exp(int_r^s b_r du + int_r^s sigma_r dW - 1/2 int_r^s sigma_r^2 du)."""
    if r_idx > s_idx:
        return np.zeros(bundle.n_paths)
    C = variation_exponent(model, bundle) if _C is None else _C
    sig = np.broadcast_to(model.sigma(bundle.grid[r_idx], bundle.R[:, r_idx]), (bundle.n_paths,))
    return sig * np.exp(C[:, s_idx] - C[:, r_idx])


def _euler_from(model: MarketModel, bundle: PathBundle, start_idx: int, r_start: np.ndarray, stop_idx: int):
    r = np.array(r_start, dtype=float)
    ds = bundle.ds
    for j in range(start_idx, stop_idx):
        s = bundle.grid[j]
        r = r + np.broadcast_to(model.b(s, r), r.shape) * ds[j] + np.broadcast_to(model.sigma(s, r), r.shape) * bundle.dW[:, j]
    return r


def bumped_index_derivative(model: MarketModel, bundle: PathBundle, r_idx: int, s_idx: int,
                            eta: float = 1e-4) -> np.ndarray:
    """Oracle for D_r R_s: sigma(r, R_r) times the pathwise response of R_s to a bump of R_r."""
    if r_idx > s_idx:
        return np.zeros(bundle.n_paths)
    R_r = bundle.R[:, r_idx]
    base = _euler_from(model, bundle, r_idx, R_r, s_idx)
    bumped = _euler_from(model, bundle, r_idx, R_r + eta, s_idx)
    sig = np.broadcast_to(model.sigma(bundle.grid[r_idx], R_r), (bundle.n_paths,))
    return sig * (bumped - base) / eta


# --- hedge ---------------------------------------------------------------

@dataclass(frozen=True)
class HedgeReport:
    delta: float
    std_err: float
    term1: float
    term2: float
    diagnostics: "IntegrabilityDiagnostics"

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in ("delta", "std_err", "term1", "term2")}
        d["diagnostics"] = self.diagnostics.to_dict()
        return d


def derivative_hedge(model: MarketModel, derivative: Derivative, bundle: PathBundle) -> HedgeReport:
    """Hedge adjustment at the initial time.

    term1 = -E[A(T) F_r(R_T) D_t R_T] / beta(t, r0)
    term2 =  E[A(T) F(R_T) sum_j theta_r(s_j, R_j) D_t R_j (dW_j + theta_j ds_j)] / beta(t, r0)
    """
    N = bundle.n_steps
    A_T = girsanov_density(bundle, model)[:, -1]
    R_T = bundle.R[:, -1]
    F = _payoff_values(derivative, R_T)
    F_r = _payoff_slopes(derivative, R_T)
    C = variation_exponent(model, bundle)
    sig0 = float(np.broadcast_to(model.sigma(bundle.t0, np.asarray(bundle.r0)), ()))
    D = sig0 * np.exp(C)
    beta0 = float(model.beta(bundle.t0, np.asarray(bundle.r0)))
    th = theta_paths(bundle, model, N)
    th_r = along_paths(model.theta_r, bundle, N)
    dW_hat = bundle.dW + th * bundle.ds[None, :]
    weight = np.sum(th_r * D[:, :N] * dW_hat, axis=1)
    v1 = -A_T * F_r * D[:, N] / beta0
    v2 = A_T * F * weight / beta0
    term1, term2 = float(np.mean(v1)), float(np.mean(v2))
    _, se = bundle.mean_se(v1 + v2)
    diag = integrability_diagnostics(model, derivative, bundle, _cache=(A_T, F, F_r, C, th, th_r))
    return HedgeReport(term1 + term2, se, term1, term2, diag)


@dataclass(frozen=True)
class IntegrabilityDiagnostics:
    """Monte Carlo estimates of the three Q-moment conditions.

    ``abs_payoff``: E_Q|F(R_T)|; ``malliavin_norm``: E_Q[(int |D_s F|^2 ds)^1/2];
    ``payoff_h``: E_Q[|F| (int h)^1/2]. Kurtosis is the excess kurtosis of
    each integrand under P.
    """

    abs_payoff: float
    abs_payoff_se: float
    malliavin_norm: float
    malliavin_norm_se: float
    payoff_h: float
    payoff_h_se: float
    h_max: float
    kurtosis: tuple[float, float, float]
    heavy_tails: tuple[bool, bool, bool]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kurtosis"] = list(self.kurtosis)
        d["heavy_tails"] = list(self.heavy_tails)
        return d


def _kurt(v):
    if np.ptp(v) == 0:
        return 0.0
    return float(kurtosis(v, fisher=True, bias=False))


def integrability_diagnostics(model: MarketModel, derivative: Derivative, bundle: PathBundle,
                              _cache=None) -> IntegrabilityDiagnostics:
    N = bundle.n_steps
    ds = bundle.ds
    if _cache is None:
        A_T = girsanov_density(bundle, model)[:, -1]
        F = _payoff_values(derivative, bundle.R[:, -1])
        F_r = _payoff_slopes(derivative, bundle.R[:, -1])
        C = variation_exponent(model, bundle)
        th = theta_paths(bundle, model, N)
        th_r = along_paths(model.theta_r, bundle, N)
    else:
        A_T, F, F_r, C, th, th_r = _cache
    sig = along_paths(model.sigma, bundle, N)
    # D_{s_k} R_T = sigma_k exp(C_N - C_k)
    D_T = sig * np.exp(C[:, N:N + 1] - C[:, :N])
    malliavin_sq = np.sum((F_r[:, None] * D_T) ** 2 * ds[None, :], axis=1)
    # h(s_k) = (sigma_k e^{-C_k} sum_{j>=k} theta_r(j) e^{C_j} dW_hat_j)^2
    dW_hat = bundle.dW + th * ds[None, :]
    tail = np.cumsum((th_r * np.exp(C[:, :N]) * dW_hat)[:, ::-1], axis=1)[:, ::-1]
    h = (sig * np.exp(-C[:, :N]) * tail) ** 2
    int_h = np.sum(h * ds[None, :], axis=1)
    integrands = (A_T * np.abs(F), A_T * np.sqrt(malliavin_sq), A_T * np.abs(F) * np.sqrt(int_h))
    est = [bundle.mean_se(v) for v in integrands]
    kurt = tuple(_kurt(v) for v in integrands)
    return IntegrabilityDiagnostics(
        est[0][0], est[0][1], est[1][0], est[1][1], est[2][0], est[2][1],
        float(np.max(h)) if h.size else 0.0, kurt, tuple(k > HEAVY_TAIL_KURTOSIS for k in kurt),
    )
