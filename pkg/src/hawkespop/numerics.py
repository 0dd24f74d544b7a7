"""Dense linear-algebra and integration kernel.

Thin, validated wrappers around numpy/scipy routines.  Everything here is
pure and reentrant; all matrices in this package are small (a few hundred
rows at most), so dense storage is used throughout.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.integrate
import scipy.linalg

from .errors import (
    EigenvalueOverlapError,
    NumericsError,
    OdeFailure,
    SingularMatrixError,
)

# Condition-number gate for linear solves: beyond this, error out rather
# than return garbage.
COND_GATE = 1e12


@dataclass(frozen=True)
class OdeConfig:
    """Tolerances for every adaptive ODE solve in the package."""

    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_steps: int = 10**6
    initial_step: float | None = None

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise NumericsError("tolerances must be positive")
        if self.max_steps < 1:
            raise NumericsError("max_steps must be >= 1")


DEFAULT_ODE = OdeConfig()


def as_square_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NumericsError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericsError("matrix has non-finite entries")
    return a


def mat_exp(a, t: float = 1.0) -> np.ndarray:
    """exp(t*a) via Pade approximation with scaling and squaring."""
    a = as_square_matrix(a)
    if not np.isfinite(t):
        raise NumericsError("time argument must be finite")
    if t == 0.0:
        return np.eye(a.shape[0])
    return scipy.linalg.expm(t * a)


def solve_linear(a, b) -> np.ndarray:
    """Solve a @ x = b, rejecting near-singular systems.

    The 1-norm condition estimate is gated at 1e12 so an ill-posed system
    fails loudly instead of silently returning noise.
    """
    a = as_square_matrix(a)
    b = np.asarray(b, dtype=float)
    cond = np.linalg.cond(a, 1)
    if not np.isfinite(cond) or cond > COND_GATE:
        raise SingularMatrixError(cond)
    return scipy.linalg.solve(a, b)


def solve_sylvester(a, b, c) -> np.ndarray:
    """Solve a @ x + x @ b = c.

    A unique solution exists iff a and -b share no eigenvalue; that
    separation is checked explicitly before delegating to the
    Bartels-Stewart solver.
    """
    a = as_square_matrix(a)
    b = as_square_matrix(b)
    c = np.asarray(c, dtype=float)
    eig_a = np.linalg.eigvals(a)
    eig_b = np.linalg.eigvals(b)
    sep = np.abs(eig_a[:, None] + eig_b[None, :]).min()
    scale = max(np.abs(eig_a).max(), np.abs(eig_b).max(), 1.0)
    if sep < 1e-12 * scale:
        raise EigenvalueOverlapError(
            f"spectra of A and -B overlap (separation {sep:.3e})"
        )
    x = scipy.linalg.solve_sylvester(a, b, c)
    resid = np.linalg.norm(a @ x + x @ b - c)
    if resid > 1e-6 * max(1.0, np.linalg.norm(c)):
        raise NumericsError(f"sylvester residual {resid:.3e} too large")
    return x


def spectral_radius(a) -> float:
    """Largest eigenvalue magnitude.

    Triangular input short-circuits to max |diagonal| so that the result
    is exact for that case.
    """
    a = as_square_matrix(a)
    lower = np.tril(a, -1)
    upper = np.triu(a, 1)
    if not lower.any() or not upper.any():
        return float(np.abs(np.diag(a)).max()) if a.size else 0.0
    return float(np.abs(np.linalg.eigvals(a)).max())


def integrate_ode(
    f: Callable[[float, np.ndarray], np.ndarray],
    x0,
    t0: float,
    t1: float,
    cfg: OdeConfig = DEFAULT_ODE,
    dense: bool = False,
):
    """Adaptive embedded Runge-Kutta solve of x' = f(t, x) from t0 to t1.

    Returns x(t1), or (x(t1), interpolant) when dense=True.  Deterministic
    for a fixed config.  Raises OdeFailure on step exhaustion or a
    non-finite derivative.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if t1 < t0:
        raise NumericsError("t1 must be >= t0")
    if t1 == t0:
        return (x0.copy(), None) if dense else x0.copy()

    # RK45 uses ~6 derivative evaluations per step.
    budget = 6 * cfg.max_steps
    n_evals = 0

    def guarded(t, x):
        nonlocal n_evals
        n_evals += 1
        if n_evals > budget:
            raise OdeFailure(f"step budget exhausted ({cfg.max_steps} steps)")
        dx = np.asarray(f(t, x), dtype=float)
        if not np.all(np.isfinite(dx)):
            raise OdeFailure(f"non-finite derivative at t={t}")
        return dx

    kwargs = {}
    if cfg.initial_step is not None:
        kwargs["first_step"] = cfg.initial_step
    sol = scipy.integrate.solve_ivp(
        guarded,
        (t0, t1),
        x0,
        method="RK45",
        rtol=cfg.rel_tol,
        atol=cfg.abs_tol,
        dense_output=dense,
        **kwargs,
    )
    if not sol.success:
        raise OdeFailure(sol.message)
    end = sol.y[:, -1]
    return (end, sol.sol) if dense else end


def quad_adaptive(g: Callable[[float], float], a: float, b: float, tol: float = 1e-10) -> float:
    """Integral of g over [a, b] to absolute/relative tolerance tol."""

    def guarded(u):
        v = g(u)
        if not np.isfinite(v):
            raise NumericsError(f"non-finite integrand at u={u}")
        return v

    with warnings.catch_warnings():
        # the roundoff warning fires at tight tolerances; the explicit
        # error-estimate check below is the real gate
        warnings.simplefilter("ignore", scipy.integrate.IntegrationWarning)
        value, est = scipy.integrate.quad(
            guarded, a, b, epsabs=tol, epsrel=tol, limit=200
        )
    if est > 100 * tol * max(1.0, abs(value)):
        raise NumericsError(f"quadrature error estimate {est:.3e} above tolerance")
    return value
