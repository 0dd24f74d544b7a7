"""Stationary intensity under symmetry and its near-critical Gamma limit.

For the exchangeable family the stationary multivariate Laplace transform
collapses to a one-dimensional integral in the summed argument.  As the
criticality index theta rises to one, the rescaled intensity (1-theta)
lambda converges to a Gamma law whose transform is available in closed
form; the sweep utilities quantify that convergence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError
from .model import ExponentialMark, SymmetricModel, symmetric_theta_sigma
from .numerics import quad_adaptive

# Below this point the integrand is replaced by its analytic limit; the
# singularity at zero is removable but stalls adaptive quadrature.
_SMALL_U = 1e-8


def symmetric_stationary_laplace(
    model: SymmetricModel, s: Sequence[float], tol: float = 1e-10
) -> float:
    """E[exp(-s . lambda)] for the stationary symmetric intensity.

    Equals exp(-alpha lambda_bar I(s_bar)) where I integrates
    u / (alpha u + sum_i beta_i(u) - d) from 0 to the summed argument.
    """
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("s must be elementwise >= 0")
    theta = sum(law.moment(1) for law in model.marks) / model.alpha
    if theta >= 1.0:
        raise ConfigError(f"stationary transform needs theta < 1, got {theta:.4f}")
    s_bar = float(s.sum())
    if s_bar == 0.0:
        return 1.0
    alpha, d = model.alpha, model.d
    limit0 = 1.0 / (alpha * (1.0 - theta))

    def integrand(u: float) -> float:
        if u < _SMALL_U:
            return limit0
        den = alpha * u + sum(law.laplace(u) for law in model.marks) - d
        return u / den

    integral = quad_adaptive(integrand, 0.0, s_bar, tol)
    return math.exp(-alpha * model.lambda_bar * integral)


@dataclass(frozen=True)
class GammaLimit:
    """Limiting marginal Gamma law of the rescaled intensity (rate form)."""

    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise ConfigError("shape and rate must be positive")

    @property
    def mean(self) -> float:
        return self.shape / self.rate

    @property
    def variance(self) -> float:
        return self.shape / self.rate**2

    def laplace(self, s_bar: float) -> float:
        return (self.rate / (self.rate + s_bar)) ** self.shape


def gamma_limit(model: SymmetricModel) -> GammaLimit:
    """Gamma(sigma * lambda_bar, sigma) limit of (1 - theta) lambda."""
    _, sigma = symmetric_theta_sigma(model)
    return GammaLimit(shape=sigma * model.lambda_bar, rate=sigma)


def gamma_limit_laplace(model: SymmetricModel, s: Sequence[float]) -> float:
    """Closed-form limiting transform evaluated at the summed argument."""
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("s must be elementwise >= 0")
    return gamma_limit(model).laplace(float(s.sum()))


def exponential_symmetric_family(
    d: int, mark_mean: float, lambda_bar: float
) -> Callable[[float], SymmetricModel]:
    """Family theta -> model with fixed exponential marks of the given
    mean, criticality dialed through the decay rate alpha = d*mean/theta.

    Holding the mark law fixed keeps the third-and-higher mark moments
    from growing with theta; the Gamma-limit distance then shrinks like
    theta*(1-theta), monotonically on [1/2, 1).  (Scaling mark means at
    fixed alpha reaches the same limit but not monotonically.)
    """

    def make(theta: float) -> SymmetricModel:
        if not 0 < theta < 1:
            raise ConfigError("theta must lie in (0, 1)")
        return SymmetricModel(
            d=d, alpha=d * mark_mean / theta, lambda_bar=lambda_bar,
            marks=tuple(ExponentialMark(mark_mean) for _ in range(d)),
        )

    return make


def convergence_sweep(
    family: Callable[[float], SymmetricModel],
    thetas: Sequence[float],
    s_bar_grid: Sequence[float],
    tol: float = 1e-10,
) -> list[tuple[float, float]]:
    """Sup distance between the rescaled exact transform and its Gamma
    limit over the grid of summed arguments, per theta.

    The exact transform is evaluated at s(1 - theta) so both sides live on
    the scale of the limit variable.
    """
    out = []
    for theta in thetas:
        model = family(theta)
        worst = 0.0
        for s_bar in s_bar_grid:
            exact = symmetric_stationary_laplace(
                model, [s_bar * (1.0 - theta)] + [0.0] * (model.d - 1), tol
            )
            limit = gamma_limit(model).laplace(s_bar)
            worst = max(worst, abs(exact - limit))
        out.append((float(theta), worst))
    return out
