"""Finite-difference moment approximation from the joint transform.

Moments are mixed partial derivatives of the transform at s = 0, z = 1
(with a sign flip per intensity derivative).  Central second-order
stencils are tensored across the differentiated directions; repeated
derivatives in one variable use the standard higher-order central
stencils.  This is the baseline the exact engine is benchmarked against,
and the only route to two-time quantities.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from .model import HawkesModel
from .moments import MomentIndex, MomentTable, assemble_system, indices_of_order, transient_moments
from .numerics import OdeConfig
from .transform import Z_EXTENSION, joint_transform, joint_transform_two_time

_EPS = np.finfo(float).eps

# Default solver precision for transform evaluations inside stencils.
# Differencing cancels most of the (smooth) solver error, and the optimal
# step's truncation error sits far above 1e-5 anyway; chasing 1e-8 here
# buys nothing but run time.
FD_ODE = OdeConfig(rel_tol=1e-5, abs_tol=1e-8)


@dataclass(frozen=True)
class FdSpec:
    """Central-difference step width and the supported derivative depth."""

    h: float = 1e-3
    max_total_order: int = 3

    def __post_init__(self):
        if not 0 < self.h <= 0.1:
            raise ValueError("h must lie in (0, 0.1]")


# offset -> coefficient, to be divided by h^order; all second-order accurate
_STENCILS = {
    0: {0: 1.0},
    1: {-1: -0.5, 1: 0.5},
    2: {-1: 1.0, 0: -2.0, 1: 1.0},
    3: {-2: -0.5, -1: 1.0, 1: -1.0, 2: 0.5},
}


def _stencil(order: int) -> dict[int, float]:
    if order not in _STENCILS:
        raise ValueError(f"derivative order {order} not supported")
    return _STENCILS[order]


def _z_step(h: float, max_offset: int) -> float:
    # keep z = 1 + offset*h inside the analytic extension window
    if max_offset * h > Z_EXTENSION:
        return Z_EXTENSION / max_offset
    return h


def fd_moment(
    model: HawkesModel,
    t: float,
    idx: MomentIndex,
    spec: FdSpec = FdSpec(),
    cfg: OdeConfig = FD_ODE,
    cache: dict | None = None,
) -> float:
    """Reduced moment psi(idx) at time t by numerical differentiation.

    A cache dict may be shared across calls at the same (t, cfg) to reuse
    transform evaluations between overlapping stencils.
    """
    total = idx.order
    if total > spec.max_total_order:
        raise ValueError(
            f"total derivative order {total} beyond max {spec.max_total_order}; "
            "accuracy collapses for deep finite differences"
        )
    d = model.d
    if len(idx.n_lambda) != d:
        raise ValueError("index dimension mismatch")
    if cache is None:
        cache = {}

    stencils = []
    steps = []
    for i, p in enumerate(idx.n_lambda):
        st = _stencil(p)
        stencils.append(st)
        steps.append(spec.h)
    for i, p in enumerate(idx.n_q):
        st = _stencil(p)
        stencils.append(st)
        steps.append(_z_step(spec.h, max(abs(o) for o in st) if p else 1))

    value = 0.0
    abs_coeff = 0.0
    for offsets in itertools.product(*(st.keys() for st in stencils)):
        coeff = 1.0
        for st, off, h_var, p in zip(
            stencils, offsets, steps, tuple(idx.n_lambda) + tuple(idx.n_q)
        ):
            coeff *= st[off] / h_var**p if p else st[off]
        s = np.array([offsets[i] * steps[i] for i in range(d)])
        z = np.array([1.0 + offsets[d + i] * steps[d + i] for i in range(d)])
        key = (tuple(s), tuple(z))
        if key not in cache:
            cache[key] = joint_transform(model, t, s, z, cfg)
        value += coeff * cache[key]
        abs_coeff += abs(coeff)

    roundoff = _EPS * abs_coeff  # |transform| <= 1 near the expansion point
    result = (-1.0) ** sum(idx.n_lambda) * value
    if roundoff > 0.01 * abs(result):
        warnings.warn(
            f"step h={spec.h:g} likely too small for {idx}: estimated roundoff "
            f"{roundoff:.2e} vs value {result:.2e}",
            stacklevel=2,
        )
    return result


def fd_moments_of_order(
    model: HawkesModel,
    t: float,
    order: int,
    spec: FdSpec = FdSpec(),
    cfg: OdeConfig = FD_ODE,
) -> MomentTable:
    """All reduced moments of exactly the given total order, sharing one
    transform-evaluation cache across the stencils."""
    cache: dict = {}
    values = {
        idx: fd_moment(model, t, idx, spec, cfg, cache)
        for idx in indices_of_order(model.d, order)
    }
    return MomentTable(t, values)


def fd_cross_moment(
    model: HawkesModel,
    t: float,
    tau: float,
    i: int,
    j: int,
    which: str,
    spec: FdSpec = FdSpec(),
    cfg: OdeConfig = FD_ODE,
) -> float:
    """Two-time product moment by differencing the two-time transform.

    which: 'QQ' gives E[Q_i(t) Q_j(t+tau)], 'LL' gives
    E[lambda_i(t) lambda_j(t+tau)], 'QL' gives E[Q_i(t) lambda_j(t+tau)].
    """
    if which not in ("QQ", "LL", "QL"):
        raise ValueError("which must be one of 'QQ', 'LL', 'QL'")
    d = model.d
    h = spec.h
    hz = _z_step(h, 1)

    def evaluate(off_early, off_late):
        r = np.zeros(d)
        y = np.ones(d)
        s = np.zeros(d)
        z = np.ones(d)
        if which[0] == "Q":
            y[i] += off_early * hz
        else:
            r[i] += off_early * h
        if which[1] == "Q":
            z[j] += off_late * hz
        else:
            s[j] += off_late * h
        return joint_transform_two_time(model, t, tau, r, y, s, z, cfg)

    h_early = hz if which[0] == "Q" else h
    h_late = hz if which[1] == "Q" else h
    diff = (
        evaluate(1, 1) - evaluate(1, -1) - evaluate(-1, 1) + evaluate(-1, -1)
    ) / (4.0 * h_early * h_late)
    sign = (-1.0) ** (which.count("L"))
    return sign * diff


def autocovariance(
    model: HawkesModel,
    t: float,
    tau: float,
    which: str,
    spec: FdSpec = FdSpec(),
    cfg: OdeConfig = FD_ODE,
) -> np.ndarray:
    """Covariance matrix between times t and t + tau.

    The product moments come from finite differences (no exact route
    exists), while the means are taken from the exact engine to keep the
    subtraction error small.
    """
    if which not in ("QQ", "LL"):
        raise ValueError("which must be 'QQ' or 'LL'")
    d = model.d
    system = assemble_system(model, 1)
    mean_t = transient_moments(system, t, "closed_form")
    mean_tau = transient_moments(system, t + tau, "closed_form")
    if which == "QQ":
        m1, m2 = mean_t.mean_population(), mean_tau.mean_population()
    else:
        m1, m2 = mean_t.mean_intensity(), mean_tau.mean_intensity()
    out = np.empty((d, d))
    for i in range(d):
        for j in range(d):
            out[i, j] = fd_cross_moment(model, t, tau, i, j, which, spec, cfg)
    return out - np.outer(m1, m2)
