"""Non-tradable index dynamics, tradable asset coefficients and path simulation.

The index follows ``dR = b(s, R) ds + sigma(s, R) dW`` and the tradable asset
has appreciation rate ``alpha(s, R)`` and volatility ``beta(s, R)`` driven by the
same Brownian motion. Only ``alpha`` and ``beta`` enter the wealth equation, so
the asset price itself is never simulated.

Coefficient functions take a scalar time and an array of index levels and
return an array (or a scalar broadcastable to it).
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels

Coefficient = Callable[[float, np.ndarray], np.ndarray]

#: paths per independent RNG stream; fixed so results never depend on n_jobs
BLOCK_PATHS = 4096
#: largest |log A| accepted before exponentiation
MAX_LOG_DENSITY = 700.0


class SimulationError(RuntimeError):
    """A coefficient evaluated to a non-finite value during simulation."""


class DegenerateVolatilityError(ValueError):
    """|beta| fell below the model's lower bound epsilon_beta."""


class DensityError(FloatingPointError):
    """The Girsanov exponent left the representable range."""


def constant(c: float) -> Coefficient:
    c = float(c)

    def coef(s, r):
        return np.full(np.shape(r), c)

    return coef


def affine(c0: float, c1: float) -> Coefficient:
    c0, c1 = float(c0), float(c1)

    def coef(s, r):
        return c0 + c1 * np.asarray(r, dtype=float)

    return coef


def central_difference(f: Coefficient, rel_step: float = 1e-5) -> Coefficient:
    """Central finite difference in the index level, step ``rel_step*(1+|r|)``."""

    def deriv(s, r):
        r = np.asarray(r, dtype=float)
        h = rel_step * (1.0 + np.abs(r))
        return (f(s, r + h) - f(s, r - h)) / (2.0 * h)

    return deriv


@dataclass(frozen=True)
class MarketModel:
    """Coefficients of the index/asset pair.

    Derivatives in the index level (``b_r`` ...) default to central finite
    differences when not supplied. ``affine_index`` = (b0, b1, s0, s1) marks
    time-homogeneous affine index coefficients, which unlocks the compiled
    Euler kernel.
    """

    b: Coefficient
    sigma: Coefficient
    alpha: Coefficient
    beta: Coefficient
    b_r: Coefficient | None = None
    sigma_r: Coefficient | None = None
    alpha_r: Coefficient | None = None
    beta_r: Coefficient | None = None
    epsilon_beta: float = 1e-8
    K_beta: float = math.inf
    theta_bound: float = math.inf
    name: str = "custom"
    affine_index: tuple[float, float, float, float] | None = None
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not (self.epsilon_beta > 0 and self.K_beta >= self.epsilon_beta):
            raise ValueError("need 0 < epsilon_beta <= K_beta")
        for name in ("b", "sigma", "alpha", "beta"):
            if getattr(self, name + "_r") is None:
                object.__setattr__(self, name + "_r", central_difference(getattr(self, name)))

    def _beta_checked(self, s, r):
        beta = np.asarray(self.beta(s, r), dtype=float)
        small = np.abs(beta) < self.epsilon_beta
        if np.any(small):
            rr = np.broadcast_to(r, beta.shape)[small].flat[0] if beta.ndim else r
            raise DegenerateVolatilityError(
                f"|beta(s={s!r}, r={float(rr)!r})| below epsilon_beta={self.epsilon_beta}"
            )
        if np.any(np.abs(beta) > self.K_beta):
            warnings.warn(f"|beta| exceeds K_beta={self.K_beta} at s={s!r}", RuntimeWarning, stacklevel=3)
        return beta

    def theta(self, s, r):
        """Market price of risk alpha/beta."""
        beta = self._beta_checked(s, r)
        return np.asarray(self.alpha(s, r), dtype=float) / beta

    def theta_r(self, s, r):
        """d theta / d r = alpha_r/beta - alpha*beta_r/beta**2."""
        beta = self._beta_checked(s, r)
        alpha = np.asarray(self.alpha(s, r), dtype=float)
        return np.asarray(self.alpha_r(s, r)) / beta - alpha * np.asarray(self.beta_r(s, r)) / beta**2

    def is_theta_deterministic(self, s, r0, spread=(-1.0, 1.0)) -> bool:
        """Spot check that theta does not depend on the index level."""
        r = np.array([r0, r0 + spread[0], r0 + spread[1]], dtype=float)
        th = np.broadcast_to(self.theta(s, r), r.shape)
        return bool(np.all(th == th[0]))


def market_price_of_risk(model: MarketModel, s: float, r: float) -> float:
    return float(model.theta(s, np.asarray(r, dtype=float)))


# --- presets -------------------------------------------------------------

def gaussian_model(drift=0.0, vol=1.0, alpha=0.06, beta=0.2, alpha_slope=0.0, beta_slope=0.0) -> MarketModel:
    """Constant-coefficient (arithmetic Brownian) index."""
    return _preset("gaussian", (drift, 0.0, vol, 0.0), alpha, beta, alpha_slope, beta_slope,
                   dict(drift=drift, vol=vol))


def ou_model(kappa=1.0, mean=0.0, vol=0.2, alpha=0.06, beta=0.2, alpha_slope=0.0, beta_slope=0.0) -> MarketModel:
    """Ornstein-Uhlenbeck index dR = kappa (mean - R) ds + vol dW."""
    return _preset("ou", (kappa * mean, -kappa, vol, 0.0), alpha, beta, alpha_slope, beta_slope,
                   dict(kappa=kappa, mean=mean, vol=vol))


def geometric_model(mu=0.05, vol=0.2, alpha=0.06, beta=0.2, alpha_slope=0.0, beta_slope=0.0) -> MarketModel:
    """Geometric index dR = mu R ds + vol R dW."""
    return _preset("geometric", (0.0, mu, 0.0, vol), alpha, beta, alpha_slope, beta_slope,
                   dict(mu=mu, vol=vol))


def _preset(name, aff, alpha, beta, alpha_slope, beta_slope, index_params):
    b0, b1, s0, s1 = map(float, aff)
    deterministic_theta = alpha_slope == 0.0 and beta_slope == 0.0
    params = dict(index_params, alpha=alpha, beta=beta, alpha_slope=alpha_slope, beta_slope=beta_slope)
    return MarketModel(
        b=affine(b0, b1),
        sigma=affine(s0, s1),
        alpha=affine(alpha, alpha_slope),
        beta=affine(beta, beta_slope),
        b_r=constant(b1),
        sigma_r=constant(s1),
        alpha_r=constant(alpha_slope),
        beta_r=constant(beta_slope),
        epsilon_beta=min(1e-8, abs(beta) / 2) if beta else 1e-8,
        theta_bound=abs(alpha / beta) if deterministic_theta and beta else math.inf,
        name=name,
        affine_index=(b0, b1, s0, s1),
        params=params,
    )


MODEL_PRESETS: dict[str, Callable[..., MarketModel]] = {
    "gaussian": gaussian_model,
    "constant": gaussian_model,
    "ou": ou_model,
    "geometric": geometric_model,
}


def register_model(name: str, factory: Callable[..., MarketModel]) -> None:
    """Add a custom model factory selectable by name in scenario files."""
    MODEL_PRESETS[name] = factory


def make_model(preset: str, **params) -> MarketModel:
    try:
        factory = MODEL_PRESETS[preset]
    except KeyError:
        raise ValueError(f"unknown model preset {preset!r}; known: {sorted(MODEL_PRESETS)}") from None
    return factory(**params)


# --- paths ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PathBundle:
    """Seeded index paths with their Brownian increments.

    ``R`` is (n_paths, n_steps + 1), ``dW`` is (n_paths, n_steps). With
    ``antithetic`` the second half of the paths uses the negated increments of
    the first half.
    """

    t0: float
    T: float
    r0: float
    n_steps: int
    n_paths: int
    seed: int
    grid: np.ndarray
    dW: np.ndarray
    R: np.ndarray
    antithetic: bool = False

    @property
    def ds(self) -> np.ndarray:
        return np.diff(self.grid)

    def mean_se(self, values) -> tuple[float, float]:
        """Sample mean and its standard error, pairing antithetic paths."""
        v = np.asarray(values, dtype=float)
        if self.antithetic:
            h = v.shape[0] // 2
            v = 0.5 * (v[:h] + v[h:])
        n = v.shape[0]
        mean = float(np.mean(v))
        se = float(np.std(v, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
        return mean, se


def _normal_block(child, rows, n_steps):
    return np.random.Generator(np.random.PCG64(child)).standard_normal((rows, n_steps))


def brownian_increments(seed: int, n_paths: int, n_steps: int, ds, antithetic=False, n_jobs=1) -> np.ndarray:
    """Standard normal increments scaled by sqrt(ds), one RNG stream per path block."""
    base = n_paths // 2 if antithetic else n_paths
    n_blocks = max(1, -(-base // BLOCK_PATHS))
    children = np.random.SeedSequence(seed).spawn(n_blocks)
    rows = [min(BLOCK_PATHS, base - k * BLOCK_PATHS) for k in range(n_blocks)]
    if n_jobs > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            blocks = list(pool.map(_normal_block, children, rows, [n_steps] * n_blocks))
    else:
        blocks = [_normal_block(c, m, n_steps) for c, m in zip(children, rows)]
    xi = np.vstack(blocks)
    if antithetic:
        xi = np.vstack([xi, -xi])
    return xi * np.sqrt(np.asarray(ds, dtype=float))[None, :]


def simulate_index(model: MarketModel, t0: float, r0: float, T: float, n_steps: int, n_paths: int,
                   seed: int, antithetic: bool = False, n_jobs: int = 1) -> PathBundle:
    """Euler-Maruyama paths of the index on a uniform grid."""
    if not T > t0:
        raise ValueError("need T > t0")
    if n_steps < 1 or n_paths < 1:
        raise ValueError("need n_steps >= 1 and n_paths >= 1")
    if antithetic and n_paths % 2:
        raise ValueError("antithetic sampling needs an even n_paths")
    grid = np.linspace(t0, T, n_steps + 1)
    ds = np.diff(grid)
    dW = brownian_increments(seed, n_paths, n_steps, ds, antithetic, n_jobs)
    if model.affine_index is not None:
        R = kernels.euler_affine(float(r0), np.ascontiguousarray(ds), dW, *model.affine_index)
        bad = ~np.isfinite(R)
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise SimulationError(
                f"non-finite index on path {i} at s={grid[j]!r} (previous r={R[i, j - 1]!r})"
            )
    else:
        R = np.empty((n_paths, n_steps + 1))
        R[:, 0] = r0
        for j in range(n_steps):
            s, r = grid[j], R[:, j]
            drift = np.broadcast_to(model.b(s, r), r.shape)
            vol = np.broadcast_to(model.sigma(s, r), r.shape)
            bad = ~(np.isfinite(drift) & np.isfinite(vol))
            if bad.any():
                i = int(np.argmax(bad))
                raise SimulationError(f"non-finite coefficient at (s={s!r}, r={r[i]!r}) on path {i}")
            R[:, j + 1] = r + drift * ds[j] + vol * dW[:, j]
    dW.setflags(write=False)
    R.setflags(write=False)
    grid.setflags(write=False)
    return PathBundle(float(t0), float(T), float(r0), int(n_steps), int(n_paths), int(seed),
                      grid, dW, R, bool(antithetic))


def along_paths(f: Coefficient, bundle: PathBundle, upto: int | None = None) -> np.ndarray:
    """Evaluate a coefficient at every (grid point, path); shape (n_paths, k)."""
    k = bundle.n_steps + 1 if upto is None else upto
    out = np.empty((bundle.n_paths, k))
    for j in range(k):
        out[:, j] = np.broadcast_to(f(bundle.grid[j], bundle.R[:, j]), (bundle.n_paths,))
    return out


def theta_paths(bundle: PathBundle, model: MarketModel, upto: int | None = None) -> np.ndarray:
    th = along_paths(model.theta, bundle, upto)
    if not np.all(np.isfinite(th)):
        raise SimulationError("market price of risk is not finite along the paths")
    if np.max(np.abs(th)) > model.theta_bound:
        warnings.warn(
            f"sampled |theta| up to {np.max(np.abs(th)):.6g} exceeds the declared bound {model.theta_bound}",
            RuntimeWarning,
            stacklevel=2,
        )
    return th


# --- strategies and wealth ----------------------------------------------

@dataclass(frozen=True)
class StrategyProcess:
    """Adapted strategy p(s, R_s, x) and the initial wealth x.

    ``p`` is called as ``p(j, s_j, R_j)`` with the (n_paths,) array of index
    values at grid point ``j`` and must only use that information.
    """

    p: Callable[[int, float, np.ndarray], np.ndarray]
    x: float

    @classmethod
    def constant(cls, value: float, x: float) -> "StrategyProcess":
        value = float(value)
        return cls(lambda j, s, r: np.full(np.shape(r), value), x)

    @classmethod
    def feedback(cls, fn: Callable[[float, np.ndarray, float], np.ndarray], x: float) -> "StrategyProcess":
        """Wrap a Markov feedback rule p = fn(s, r, x)."""
        return cls(lambda j, s, r: fn(s, r, x), x)


def wealth_paths(bundle: PathBundle, strategy: StrategyProcess, model: MarketModel) -> np.ndarray:
    """X^p on the grid: x + sum theta p ds + sum p dW, shape (n_paths, n_steps + 1)."""
    ds = bundle.ds
    X = np.empty((bundle.n_paths, bundle.n_steps + 1))
    X[:, 0] = strategy.x
    for j in range(bundle.n_steps):
        s, r = bundle.grid[j], bundle.R[:, j]
        p = np.broadcast_to(strategy.p(j, s, r), r.shape)
        th = np.broadcast_to(model.theta(s, r), r.shape)
        X[:, j + 1] = X[:, j] + th * p * ds[j] + p * bundle.dW[:, j]
    return X


def terminal_wealth(bundle: PathBundle, strategy: StrategyProcess, model: MarketModel) -> np.ndarray:
    return wealth_paths(bundle, strategy, model)[:, -1]


def log_girsanov_density(bundle: PathBundle, model: MarketModel) -> np.ndarray:
    th = theta_paths(bundle, model, upto=bundle.n_steps)
    incr = -th * bundle.dW - 0.5 * th**2 * bundle.ds[None, :]
    out = np.zeros((bundle.n_paths, bundle.n_steps + 1))
    np.cumsum(incr, axis=1, out=out[:, 1:])
    return out


def girsanov_density(bundle: PathBundle, model: MarketModel) -> np.ndarray:
    """A(s_j) = exp(-sum_{k<j} theta_k dW_k - 1/2 sum_{k<j} theta_k^2 ds_k), A(t0) = 1."""
    logA = log_girsanov_density(bundle, model)
    worst = np.max(np.abs(logA), axis=1)
    if np.any(worst > MAX_LOG_DENSITY):
        i = int(np.argmax(worst))
        raise DensityError(f"density exponent {worst[i]:.6g} on path {i} exceeds {MAX_LOG_DENSITY}")
    return np.exp(logA)
