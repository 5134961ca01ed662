"""Least-squares Monte Carlo solver for one-dimensional backward equations.

Solves ``Y(s) = xi + int_s^T f(u, Z) du - int_s^T Z dW`` backwards on a path
bundle. Each path carries a target, initially ``xi``; at grid point j

    Z_j      = E[(target - E[target | F_j]) dW_j | F_j] / ds_j
    Y_j      = E[target | F_j] + f(j, Z_j) ds_j
    target  <- target + f(j, Z_j) ds_j - Z_j dW_j

Subtracting the estimated martingale increment from the pathwise target keeps
regression error from compounding through fitted values. Conditional
expectations are ridge regressions on Hermite polynomials of the standardized
state (the index, plus optional auxiliary state such as wealth).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.hermite_e import hermevander

from .convex import ConstraintSet, project
from .generators import GeneratorSpec, g_of
from .market import MarketModel, PathBundle, StrategyProcess, theta_paths, wealth_paths
from .strategy import min_gbar_zero

RIDGE = 1e-10
MIN_PATHS_PER_FEATURE = 50
ENTROPIC_Z_MAX = 10.0

Driver = Callable[[int, float, np.ndarray, np.ndarray], np.ndarray]


class BasisError(ValueError):
    """Regression basis is too rich for the path cloud."""


class SolverError(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class BsdeSolution:
    """Y and Z on the grid; ``y_t`` is the estimate of Y at the initial time.

    ``pathwise`` is the reconstruction ``xi + sum f ds - sum Z dW`` per path;
    ``std_err`` is the standard error of its mean and ``dispersion`` its
    cross-path standard deviation (both small when Z captures the martingale
    part).
    """

    y: np.ndarray
    z: np.ndarray
    y_t: float
    std_err: float
    dispersion: float
    pathwise: np.ndarray

    def paired_se(self, other: "BsdeSolution", bundle: PathBundle) -> float:
        """Standard error of y_t - other.y_t from the paired pathwise reconstructions."""
        return bundle.mean_se(self.pathwise - other.pathwise)[1]


def _features(states: Sequence[np.ndarray], degree: int) -> np.ndarray:
    cols = [np.ones((states[0].shape[0], 1))]
    for k, v in enumerate(states):
        sd = float(np.std(v))
        if sd <= 1e-14 * (1.0 + abs(float(np.mean(v)))):
            continue
        u = (v - np.mean(v)) / sd
        block = hermevander(u, degree)[:, 1:]
        if k == 0 and degree > 1:
            sv = np.linalg.svd(block / np.sqrt(block.shape[0]), compute_uv=False)
            if sv[-1] < 1e-12 * sv[0]:
                raise BasisError(f"index basis of degree {degree} is rank-deficient; lower basis_degree")
        cols.append(block)
    return np.hstack(cols)


def _regress(X: np.ndarray, targets: np.ndarray) -> np.ndarray:
    n, d = X.shape
    if d == 1:
        return np.broadcast_to(targets.mean(axis=0), targets.shape).copy()
    A = X.T @ X / n
    A[np.diag_indices(d)] += RIDGE
    coef = np.linalg.solve(A, X.T @ targets / n)
    return X @ coef


def solve(bundle: PathBundle, terminal, driver: Driver, basis_degree: int = 4,
          aux_states: Sequence[np.ndarray] = ()) -> BsdeSolution:
    """Backward Euler regression solver.

    ``driver(j, s_j, R_j, Z_j)`` returns f per path. ``aux_states`` are extra
    (n_paths, n_steps + 1) state arrays added to the regression basis.
    """
    n, N = bundle.n_paths, bundle.n_steps
    n_features = 1 + basis_degree * (1 + len(aux_states))
    if n < MIN_PATHS_PER_FEATURE * n_features:
        raise BasisError(f"{n} paths is below {MIN_PATHS_PER_FEATURE} x {n_features} basis functions")
    xi = np.broadcast_to(np.asarray(terminal, dtype=float), (n,)).copy()
    if not np.all(np.isfinite(xi)):
        raise SolverError("terminal value is not finite")
    ds = bundle.ds
    y = np.empty((n, N + 1))
    z = np.empty((n, N))
    y[:, N] = xi
    target = xi.copy()
    for j in range(N - 1, -1, -1):
        X = _features([bundle.R[:, j]] + [a[:, j] for a in aux_states], basis_degree)
        cond_mean = _regress(X, target[:, None])[:, 0]
        z[:, j] = _regress(X, ((target - cond_mean) * bundle.dW[:, j])[:, None])[:, 0] / ds[j]
        f = np.broadcast_to(driver(j, bundle.grid[j], bundle.R[:, j], z[:, j]), (n,))
        if not np.all(np.isfinite(f)):
            i = int(np.argmax(~np.isfinite(f)))
            raise SolverError(f"driver not finite at s={bundle.grid[j]!r}, path {i}, z={z[i, j]!r}")
        y[:, j] = cond_mean + f * ds[j]
        target += f * ds[j] - z[:, j] * bundle.dW[:, j]
    _, se = bundle.mean_se(target)
    return BsdeSolution(y, z, float(np.mean(y[:, 0])), se, float(np.std(target)), target)


def generator_driver(spec: GeneratorSpec, x: float, z_max: float | None = None) -> Driver:
    """Driver f(j, s, r, z) = g(s, x, z) with the aversion evaluated along the path."""
    if not spec.lipschitz:
        z_max = ENTROPIC_Z_MAX if z_max is None else z_max
        warnings.warn(f"{spec.family} is not Lipschitz; truncating |z| <= {z_max}", RuntimeWarning, stacklevel=2)

    def driver(j, s, r, z):
        if z_max is not None:
            z = np.clip(z, -z_max, z_max)
        return g_of(spec.family, spec.scale(s, r, x), z)

    return driver


def risk_of_strategy(bundle: PathBundle, strategy: StrategyProcess, spec: GeneratorSpec,
                     model: MarketModel, basis_degree: int = 4) -> BsdeSolution:
    """rho(t, X^p(T)): solve with terminal -X^p(T) and driver g; read ``.y_t``.

    The running wealth joins the index in the regression basis, since
    X^p is not a function of the index alone in general.
    """
    X = wealth_paths(bundle, strategy, model)
    aux = () if np.all(X[:, -1] == X[0, -1]) else (X,)
    return solve(bundle, -X[:, -1], generator_driver(spec, strategy.x), basis_degree, aux)


@dataclass(frozen=True)
class ComparisonReport:
    premise_ok: bool
    y1: float
    y2: float
    gap: float
    tolerance: float
    ordered: bool | None
    premise_violation: tuple | None = None

    def to_dict(self):
        return {k: getattr(self, k) for k in ("premise_ok", "y1", "y2", "gap", "tolerance", "ordered")}


def comparison_check(bundle: PathBundle, terminal, driver1: Driver, driver2: Driver,
                     basis_degree: int = 4, z_samples=None) -> ComparisonReport:
    """Check Y1(t0) <= Y2(t0) + tolerance when driver1 <= driver2 pointwise."""
    zs = np.linspace(-5.0, 5.0, 41) if z_samples is None else np.asarray(z_samples, dtype=float)
    for j in range(0, bundle.n_steps, max(1, bundle.n_steps // 10)):
        r = bundle.R[: min(64, bundle.n_paths), j]
        for zv in zs:
            zz = np.full(r.shape, zv)
            d1 = np.broadcast_to(driver1(j, bundle.grid[j], r, zz), r.shape)
            d2 = np.broadcast_to(driver2(j, bundle.grid[j], r, zz), r.shape)
            bad = d1 > d2 + 1e-12
            if bad.any():
                i = int(np.argmax(bad))
                return ComparisonReport(False, math.nan, math.nan, math.nan, math.nan, None,
                                        (float(bundle.grid[j]), float(r[i]), float(zv)))
    s1 = solve(bundle, terminal, driver1, basis_degree)
    s2 = solve(bundle, terminal, driver2, basis_degree)
    tol = 3.0 * s1.paired_se(s2, bundle) + 1e-12
    gap = s2.y_t - s1.y_t
    return ComparisonReport(True, s1.y_t, s2.y_t, gap, tol, s1.y_t <= s2.y_t + tol)


def solve_optimal_pair(bundle: PathBundle, spec: GeneratorSpec, model: MarketModel, x: float,
                       basis_degree: int = 4, gamma_set: ConstraintSet | None = None) -> BsdeSolution:
    """(Ybar, Zbar) with terminal -x and driver min_p gbar(s, x, zbar, p).

    Unconstrained the driver is ``-G(theta) - theta*zbar``; for the constrained
    entropic family it is ``gamma/2 dist^2(zbar + theta/gamma) - zbar theta - theta^2/(2 gamma)``.
    """
    th_all = theta_paths(bundle, model)
    constrained = spec.family == "entropic_quadratic" and gamma_set is not None

    def driver(j, s, r, zb):
        th = th_all[:, j]
        scale = np.broadcast_to(spec.scale(s, r, x), r.shape)
        if constrained:
            _, dist = project(zb + th / scale, gamma_set)
            return 0.5 * scale * dist**2 - zb * th - th**2 / (2.0 * scale)
        return min_gbar_zero(spec.family, th, scale) - th * zb

    return solve(bundle, np.full(bundle.n_paths, -float(x)), driver, basis_degree)
