"""Exact joint moments of intensity and population, any dimension.

The time derivative of a reduced joint moment
psi(n_lambda, n_q) = E[prod_i lambda_i(t)^{n_lambda_i} Q_i(t)^{[n_q_i]}]
is a linear combination of reduced moments of total order at most
|n_lambda| + |n_q|, with a constant appearing only in the first-order
intensity rows.  Stacking every index of total order 1..n therefore gives
one linear ODE  x' = F x + b  with constant forcing, solvable in closed
form through a matrix exponential, and the stationary moments solve
F x = -b.  `relation_terms` below is the single source of truth for those
coefficients; the bivariate block builders reuse it.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .errors import StabilityError
from .model import HawkesModel, check_stability
from .numerics import DEFAULT_ODE, OdeConfig, integrate_ode, mat_exp, solve_linear, solve_sylvester

MAX_ORDER = 6  # combinatorial growth makes higher orders impractical


class MomentIndex(NamedTuple):
    """Exponent pair identifying psi(n_lambda, n_q); n_q powers are factorial."""

    n_lambda: tuple[int, ...]
    n_q: tuple[int, ...]

    @property
    def order(self) -> int:
        return sum(self.n_lambda) + sum(self.n_q)

    @property
    def q_order(self) -> int:
        return sum(self.n_q)


def index_label(idx: MomentIndex) -> str:
    """Readable name, e.g. 'L1^2 Q2^[1]' for E[lambda_1^2 Q_2]."""
    parts = [f"L{i + 1}^{e}" for i, e in enumerate(idx.n_lambda) if e]
    parts += [f"Q{i + 1}^[{e}]" for i, e in enumerate(idx.n_q) if e]
    return " ".join(parts) if parts else "1"


def dimension(d: int, n: int) -> int:
    """Number of distinct joint moments of total order exactly n."""
    if d < 1 or n < 1:
        raise ValueError("need d >= 1 and n >= 1")
    return sum(math.comb(2 * d, k) * math.comb(n - 1, k - 1) for k in range(1, n + 1))


def _compositions_desc(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """Compositions of `total` into `parts` slots, descending lexicographic."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions_desc(total - first, parts - 1):
            yield (first,) + rest


@lru_cache(maxsize=None)
def indices_of_order(d: int, n: int) -> tuple[MomentIndex, ...]:
    """All indices of total order exactly n, in canonical block order.

    Blocks ascend in total Q-order k; inside a block, the Q exponents vary
    slowest and both exponent vectors are in descending lexicographic
    order, so e.g. for d=2, n=2 the pure-intensity block reads
    (L1^2, L1 L2, L2^2).
    """
    out = []
    for k in range(n + 1):
        for nq in _compositions_desc(k, d):
            for nl in _compositions_desc(n - k, d):
                out.append(MomentIndex(nl, nq))
    return tuple(out)


@lru_cache(maxsize=None)
def enumerate_indices(d: int, n: int) -> tuple[MomentIndex, ...]:
    """Canonical stacked ordering of every index of total order 1..n."""
    out: list[MomentIndex] = []
    for order in range(1, n + 1):
        out.extend(indices_of_order(d, order))
    return tuple(out)


def relation_terms(
    model: HawkesModel, idx: MomentIndex
) -> tuple[dict[MomentIndex, float], float]:
    """Coefficients of d/dt psi(idx) over lower-or-equal-order moments.

    Returns (terms, constant) with d/dt psi = sum coeff * psi(target)
    + constant.  The constant absorbs targets with empty exponents, where
    psi is identically one.
    """
    d = model.d
    nl, nq = idx.n_lambda, idx.n_q
    means = model.mark_mean
    alpha, lam, mu = model.alpha, model.lambda_bar, model.mu
    terms: dict[MomentIndex, float] = {}
    constant = 0.0

    def add(nl_t, nq_t, coeff):
        nonlocal constant
        if coeff == 0.0:
            return
        if not any(nl_t) and not any(nq_t):
            constant += coeff
            return
        key = MomentIndex(tuple(nl_t), tuple(nq_t))
        terms[key] = terms.get(key, 0.0) + coeff

    # Decay / departure of the moment itself; diagonal excitation offsets
    # the decay rate.
    diag = -sum(
        nl[j] * (alpha[j] - means[j][j]) + nq[j] * mu[j] for j in range(d)
    )
    add(nl, nq, diag)

    for i in range(d):
        if not nl[i]:
            continue
        # Cross-excitation: one intensity power moves from i to j != i.
        for j in range(d):
            if j != i:
                nl_t = list(nl)
                nl_t[i] -= 1
                nl_t[j] += 1
                add(nl_t, nq, nl[i] * means[i][j])
        # Mean reversion toward the base rate.
        nl_t = list(nl)
        nl_t[i] -= 1
        add(nl_t, nq, alpha[i] * lam[i] * nl[i])

    for j in range(d):
        if not nq[j]:
            continue
        # An arrival in j trades one factorial Q power for an intensity power.
        nl_t = list(nl)
        nl_t[j] += 1
        nq_t = list(nq)
        nq_t[j] -= 1
        add(nl_t, nq_t, nq[j])
        # First-order jump carried by that arrival.
        for i in range(d):
            if nl[i]:
                nl_t = list(nl)
                nl_t[i] -= 1
                nl_t[j] += 1
                nq_t = list(nq)
                nq_t[j] -= 1
                add(nl_t, nq_t, nl[i] * nq[j] * means[i][j])

    # Jumps contributing two or more mark powers in total.
    total_l = sum(nl)
    if total_l >= 2:
        ranges = [range(k + 1) for k in nl]
        for m_vec in itertools.product(*ranges):
            if sum(m_vec) > total_l - 2:
                continue
            binom = 1
            for k, m_k in zip(nl, m_vec):
                binom *= math.comb(k, m_k)
            expo = tuple(nl[i] - m_vec[i] for i in range(d))
            for j in range(d):
                w = binom * model.joint_mark_moment(j, expo)
                if w == 0.0:
                    continue
                nl_t = list(m_vec)
                nl_t[j] += 1
                add(nl_t, nq, w)
                if nq[j]:
                    nq_t = list(nq)
                    nq_t[j] -= 1
                    add(nl_t, nq_t, w * nq[j])

    return terms, constant


@dataclass(frozen=True)
class MomentSystem:
    """Stacked linear system x' = F x + b over all orders 1..order."""

    model: HawkesModel
    order: int
    indices: tuple[MomentIndex, ...]
    F: np.ndarray
    b: np.ndarray
    x0: np.ndarray
    position: dict[MomentIndex, int] = field(repr=False, default_factory=dict)

    def row(self, idx: MomentIndex) -> int:
        return self.position[idx]


def assemble_system(model: HawkesModel, n: int) -> MomentSystem:
    """Build the full moment system of all total orders 1..n."""
    if n < 1:
        raise ValueError("order must be >= 1")
    if n > MAX_ORDER:
        raise ValueError(f"order {n} not supported (max {MAX_ORDER})")
    report = check_stability(model)
    if not report.stable:
        warnings.warn(
            f"unstable model (rho = {report.rho:.4f}): transient systems stay "
            "well-posed but stationary moments do not exist",
            stacklevel=2,
        )
    indices = enumerate_indices(model.d, n)
    pos = {idx: r for r, idx in enumerate(indices)}
    size = len(indices)
    F = np.zeros((size, size))
    b = np.zeros(size)
    for idx, r in pos.items():
        terms, constant = relation_terms(model, idx)
        b[r] = constant
        for target, coeff in terms.items():
            F[r, pos[target]] += coeff
    x0 = np.array([_initial_value(model, idx) for idx in indices])
    return MomentSystem(model, n, indices, F, b, x0, pos)


def _initial_value(model: HawkesModel, idx: MomentIndex) -> float:
    # Deterministic start: lambda(0) = lambda_bar and Q(0) = 0, so any
    # factorial Q power kills the moment.
    if any(idx.n_q):
        return 0.0
    out = 1.0
    for i, e in enumerate(idx.n_lambda):
        out *= model.lambda_bar[i] ** e
    return out


@dataclass(frozen=True)
class MomentTable:
    """Joint reduced moments keyed by index, at one time (inf = stationary)."""

    time: float
    values: dict[MomentIndex, float]

    def __getitem__(self, idx: MomentIndex) -> float:
        return self.values[idx]

    def vector(self, indices: Sequence[MomentIndex]) -> np.ndarray:
        return np.array([self.values[i] for i in indices])

    def mean_intensity(self) -> np.ndarray:
        d = len(next(iter(self.values)).n_lambda)
        zero = (0,) * d
        return np.array(
            [self.values[MomentIndex(_unit(d, i), zero)] for i in range(d)]
        )

    def mean_population(self) -> np.ndarray:
        d = len(next(iter(self.values)).n_lambda)
        zero = (0,) * d
        return np.array(
            [self.values[MomentIndex(zero, _unit(d, i))] for i in range(d)]
        )


def _unit(d: int, i: int) -> tuple[int, ...]:
    e = [0] * d
    e[i] = 1
    return tuple(e)


def transient_moments(
    system: MomentSystem,
    t: float,
    method: str = "closed_form",
    cfg: OdeConfig = DEFAULT_ODE,
) -> MomentTable:
    """Moments at time t, by matrix-exponential closed form or ODE solve.

    The closed form x(t) = e^{Ft} x0 - F^{-1}(I - e^{Ft}) b needs no time
    stepping, so its cost does not grow with t; it requires F nonsingular,
    and falls back is left to the caller (use method='ode').
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        x = system.x0.copy()
    elif method == "closed_form":
        expFt = mat_exp(system.F, t)
        x = expFt @ system.x0 - solve_linear(
            system.F, (np.eye(len(system.b)) - expFt) @ system.b
        )
    elif method == "ode":
        F, b = system.F, system.b
        x = integrate_ode(lambda _, y: F @ y + b, system.x0, 0.0, t, cfg)
    else:
        raise ValueError(f"unknown method {method!r}")
    return MomentTable(t, dict(zip(system.indices, x)))


def stationary_moments(system: MomentSystem) -> MomentTable:
    """Solve 0 = F x + b for the stationary reduced moments."""
    report = check_stability(system.model)
    if not report.stable:
        raise StabilityError(
            f"stationary moments need rho(H) < 1, got {report.rho:.4f}"
        )
    if np.any(system.model.mu == 0.0):
        raise StabilityError(
            "stationary population moments diverge when some mu_i = 0"
        )
    x = solve_linear(system.F, -system.b)
    return MomentTable(math.inf, dict(zip(system.indices, x)))


def stationary_second_order(model: HawkesModel):
    """Stationary moments up to order 2 via Sylvester equations.

    Independent cross-check of the stacked-system route: the stationary
    second-order relations, written in matrix form, are Sylvester systems
    A X + X B = C.  Returns (mean_intensity, mean_population,
    intensity_sq, intensity_pop, pop_fact2) where intensity_sq is
    E[lambda lambda^T], intensity_pop is E[lambda Q^T] and pop_fact2 has
    E[Q_i Q_j] off-diagonal and E[Q_i(Q_i - 1)] on the diagonal.
    """
    if np.any(model.mu == 0.0):
        raise StabilityError("needs mu > 0 in every component")
    A = model.mark_mean - np.diag(model.alpha)
    forcing = model.alpha * model.lambda_bar
    mean_l = solve_linear(A, -forcing)
    mean_q = mean_l / model.mu

    d = model.d
    # E[B diag(w) B^T]: independent grid entries, so off-diagonal factors.
    second = np.zeros((d, d))
    for i in range(d):
        for l in range(d):
            for k in range(d):
                if i == l:
                    second[i, l] += model.mark_moment(i, k, 2) * mean_l[k]
                else:
                    second[i, l] += (
                        model.mark_mean[i, k] * model.mark_mean[l, k] * mean_l[k]
                    )
    D_alpha = np.diag(model.alpha)
    c_ll = second + D_alpha @ np.outer(model.lambda_bar, mean_l) + np.outer(
        mean_l, model.lambda_bar
    ) @ D_alpha
    ll = solve_sylvester(A, A.T, -c_ll)

    c_lq = ll + np.outer(forcing, mean_q) + model.mark_mean @ np.diag(mean_l)
    lq = solve_sylvester(A, -np.diag(model.mu), -c_lq)

    c_qq = lq + lq.T
    qq = solve_sylvester(-np.diag(model.mu), -np.diag(model.mu), -c_qq)
    return mean_l, mean_q, ll, lq, qq


@lru_cache(maxsize=None)
def _stirling2(n: int, k: int) -> int:
    if n == k:
        return 1
    if k == 0 or k > n:
        return 0
    return k * _stirling2(n - 1, k) + _stirling2(n - 1, k - 1)


def factorial_to_raw(table: MomentTable) -> MomentTable:
    """Convert factorial population powers to raw powers.

    Q^n = sum_k S(n, k) Q^{[k]} with Stirling numbers of the second kind,
    applied per coordinate; intensity powers pass through unchanged.
    """
    out: dict[MomentIndex, float] = {}
    for idx in table.values:
        nl, nq = idx.n_lambda, idx.n_q
        total = 0.0
        ranges = [range(q + 1) for q in nq]
        for k_vec in itertools.product(*ranges):
            w = 1
            for q_i, k_i in zip(nq, k_vec):
                w *= _stirling2(q_i, k_i)
            if w == 0:
                continue
            if not any(nl) and not any(k_vec):
                total += w
            else:
                total += w * table.values[MomentIndex(nl, tuple(k_vec))]
        out[idx] = total
    return MomentTable(table.time, out)


def hawkes_count_moments(model: HawkesModel, t: float) -> np.ndarray:
    """E[N(t)]: expected event counts of the bare Hawkes process.

    Closed form obtained by integrating the mean intensity, valid whenever
    E[B] - D_alpha is invertible (guaranteed under stability).
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        return np.zeros(model.d)
    A = model.mark_mean - np.diag(model.alpha)
    forcing = model.alpha * model.lambda_bar
    expAt = mat_exp(A, t)
    shift = expAt - np.eye(model.d)
    term1 = solve_linear(A, shift @ model.lambda_bar)
    term2 = solve_linear(A, solve_linear(A, shift @ forcing))
    term3 = -t * solve_linear(A, forcing)
    return term1 + term2 + term3
