"""Explicit two-component constructions: tridiagonal diagonal blocks,
order-by-order recursive solvers, and eigenvalue-based closed forms.

For d = 2 the moment system of total order n splits into blocks indexed
by the population order k.  Each diagonal block is a direct sum of
tridiagonal matrices, the only within-order coupling is from block k to
block k-1, and everything else couples to strictly lower total orders.
That structure yields a recursion: solve block after block, feeding
previously computed trajectories (or stationary values) into the forcing.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from .errors import NumericsError, StabilityError
from .model import HawkesModel, check_stability
from .moments import (
    MomentIndex,
    MomentTable,
    _initial_value,
    dimension,
    enumerate_indices,
    indices_of_order,
    relation_terms,
)
from .numerics import DEFAULT_ODE, OdeConfig, integrate_ode, mat_exp, solve_linear

GAUSS_NODES = 16      # Gauss-Legendre nodes per panel
PANELS_PER_UNIT = 2.0  # so ~32 quadrature nodes per unit of time


def _require_bivariate(model: HawkesModel):
    if model.d != 2:
        raise ValueError("this module only handles two-component models")


def tridiagonal(sub, diag, sup) -> np.ndarray:
    """Square matrix with the given sub-, main and super-diagonals."""
    sub, diag, sup = map(np.atleast_1d, (sub, diag, sup))
    n = diag.size
    if sub.size != n - 1 or sup.size != n - 1:
        raise ValueError("off-diagonals must have length len(diag) - 1")
    return np.diag(diag) + np.diag(sub, -1) + np.diag(sup, 1)


def block_indices(k: int, n: int) -> tuple[MomentIndex, ...]:
    """Canonical index slice with |n_q| = k inside total order n."""
    return tuple(i for i in indices_of_order(2, n) if i.q_order == k)


def diagonal_block(model: HawkesModel, k: int, n: int) -> np.ndarray:
    """Within-block generator for the (k, n-k) moments.

    Direct sum over the k+1 population exponent patterns of a tridiagonal
    matrix: decay/departure totals on the diagonal, cross-excitation
    with binomial weights off it.
    """
    _require_bivariate(model)
    if not 0 <= k <= n:
        raise ValueError("need 0 <= k <= n")
    means = model.mark_mean
    abar = model.alpha - np.diag(means)
    size = n - k + 1
    pieces = []
    for m in range(k + 1):
        nq = (k - m, m)
        diag = [
            -((n - k - j) * abar[0] + j * abar[1])
            - nq[0] * model.mu[0]
            - nq[1] * model.mu[1]
            for j in range(size)
        ]
        sub = [(j + 1) * means[1][0] for j in range(size - 1)]
        sup = [(size - 1 - j) * means[0][1] for j in range(size - 1)]
        pieces.append(tridiagonal(sub, diag, sup) if size > 1 else np.array([[diag[0]]]))
    out = np.zeros(((k + 1) * size, (k + 1) * size))
    for m, piece in enumerate(pieces):
        sl = slice(m * size, (m + 1) * size)
        out[sl, sl] = piece
    return out


def _coupling_matrices(model: HawkesModel, k: int, n: int):
    """Arrival coupling to block k-1, lower-order coupling, and constants,
    all extracted from the shared moment-relation coefficients."""
    rows = block_indices(k, n)
    prev = block_indices(k - 1, n) if k >= 1 else ()
    lower = enumerate_indices(2, n - 1) if n >= 2 else ()
    prev_pos = {idx: c for c, idx in enumerate(prev)}
    lower_pos = {idx: c for c, idx in enumerate(lower)}
    own_pos = {idx: c for c, idx in enumerate(rows)}

    K = np.zeros((len(rows), len(prev)))
    L = np.zeros((len(rows), len(lower)))
    const = np.zeros(len(rows))
    M_check = np.zeros((len(rows), len(rows)))
    for r, idx in enumerate(rows):
        terms, constant = relation_terms(model, idx)
        const[r] = constant
        for target, coeff in terms.items():
            if target in own_pos:
                M_check[r, own_pos[target]] += coeff
            elif target in prev_pos:
                K[r, prev_pos[target]] += coeff
            elif target in lower_pos:
                L[r, lower_pos[target]] += coeff
            else:  # pragma: no cover - would indicate a broken recursion
                raise NumericsError(f"unexpected coupling {idx} -> {target}")
    return M_check, K, L, const


def arrival_coupling(model: HawkesModel, k: int, n: int) -> np.ndarray:
    """Coupling of block (k, n-k) to block (k-1, n-k+1); zero when k = 0."""
    _require_bivariate(model)
    _, K, _, _ = _coupling_matrices(model, k, n)
    return K


def lower_order_coupling(model: HawkesModel, k: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Coupling of block (k, n-k) to the stacked orders 1..n-1, plus the
    constant column picked up by first-order intensity rows."""
    _require_bivariate(model)
    _, _, L, const = _coupling_matrices(model, k, n)
    return L, const


def nested_full_matrix(model: HawkesModel, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Assemble the full stacked (F, b) of orders 1..n from the blocks.

    Cross-checks the block builders against the general-d assembly: the
    result must equal the matrix from `assemble_system` entry for entry.
    """
    _require_bivariate(model)
    sizes = [dimension(2, m) for m in range(1, n + 1)]
    offsets = np.concatenate(([0], np.cumsum(sizes)))
    total = offsets[-1]
    F = np.zeros((total, total))
    b = np.zeros(total)
    for order in range(1, n + 1):
        base = offsets[order - 1]
        row = base
        for k in range(order + 1):
            blk = diagonal_block(model, k, order)
            sz = blk.shape[0]
            F[row : row + sz, row : row + sz] = blk
            if k >= 1:
                K = arrival_coupling(model, k, order)
                F[row : row + sz, row - K.shape[1] : row] = K
            L, const = lower_order_coupling(model, k, order)
            if L.shape[1]:
                F[row : row + sz, : L.shape[1]] = L
            b[row : row + sz] = const
            row += sz
    return F, b


def _gauss_panels(t: float, refine: int = 0):
    """Composite Gauss-Legendre nodes and weights on [0, t]."""
    n_panels = max(1, math.ceil(t * PANELS_PER_UNIT)) * (2**refine)
    x, w = np.polynomial.legendre.leggauss(GAUSS_NODES)
    edges = np.linspace(0.0, t, n_panels + 1)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        half = 0.5 * (b - a)
        nodes.append(0.5 * (a + b) + half * x)
        weights.append(half * w)
    return np.concatenate(nodes), np.concatenate(weights)


def _block_data(model: HawkesModel, n: int):
    """Per-block matrices for orders 1..n in recursion order."""
    data = []
    for order in range(1, n + 1):
        for k in range(order + 1):
            M = diagonal_block(model, k, order)
            K = arrival_coupling(model, k, order) if k >= 1 else None
            L, const = lower_order_coupling(model, k, order)
            data.append((order, k, M, K, L, const))
    return data


def recursive_transient(
    model: HawkesModel,
    n: int,
    t: float,
    cfg: OdeConfig = DEFAULT_ODE,
    quad_tol: float = 1e-9,
) -> MomentTable:
    """Transient moments of orders 1..n by the order-by-order recursion.

    Each block value at t comes from variation of constants,
    e^{tM} x0 + integral of e^{(t-s)M} forcing(s), with the integral done
    by composite Gauss-Legendre quadrature over the dense (error
    controlled) ODE trajectories of the already-computed blocks.  The
    quadrature grid is refined until the result stabilizes.
    """
    _require_bivariate(model)
    if t < 0:
        raise ValueError("t must be >= 0")
    values: dict[MomentIndex, float] = {}
    if t == 0:
        for idx in enumerate_indices(2, n):
            values[idx] = _initial_value(model, idx)
        return MomentTable(0.0, values)

    dense: dict[tuple[int, int], object] = {}

    def lower_stack(order):
        idxs = enumerate_indices(2, order - 1) if order >= 2 else ()
        blocks = []
        for o in range(1, order):
            for k in range(o + 1):
                blocks.append((o, k))
        def fn(s):
            if not idxs:
                return np.zeros(0)
            return np.concatenate([np.atleast_1d(dense[b](s)) for b in blocks])
        return fn

    for order, k, M, K, L, const in _block_data(model, n):
        rows = block_indices(k, order)
        x0 = np.array([_initial_value(model, i) for i in rows])
        lower = lower_stack(order)
        prev_key = (order, k - 1)

        def forcing(s, K=K, L=L, const=const, lower=lower, prev_key=prev_key):
            out = const.copy()
            if K is not None:
                out = out + K @ np.atleast_1d(dense[prev_key](s))
            if L.shape[1]:
                out = out + L @ lower(s)
            return out

        # Dense trajectory of this block, consumed by later blocks.
        _, sol = integrate_ode(
            lambda s, y, M=M, forcing=forcing: M @ y + forcing(s),
            x0, 0.0, t, cfg, dense=True,
        )
        dense[(order, k)] = sol

        value = None
        for refine in range(4):
            nodes, wts = _gauss_panels(t, refine)
            acc = mat_exp(M, t) @ x0
            for s, w in zip(nodes, wts):
                acc = acc + w * (mat_exp(M, t - s) @ forcing(s))
            if value is not None and np.max(np.abs(acc - value)) <= quad_tol * (
                1.0 + np.max(np.abs(acc))
            ):
                value = acc
                break
            value = acc
        for idx, v in zip(rows, value):
            values[idx] = v
    return MomentTable(t, values)


def recursive_stationary(model: HawkesModel, n: int) -> MomentTable:
    """Stationary moments of orders 1..n, solved block by block."""
    _require_bivariate(model)
    report = check_stability(model)
    if not report.stable:
        raise StabilityError(f"needs rho(H) < 1, got {report.rho:.4f}")
    if np.any(model.mu == 0.0):
        raise StabilityError("stationary population moments need mu > 0")
    values: dict[MomentIndex, float] = {}
    block_vals: dict[tuple[int, int], np.ndarray] = {}
    for order, k, M, K, L, const in _block_data(model, n):
        rhs = const.copy()
        if K is not None:
            rhs = rhs + K @ block_vals[(order, k - 1)]
        if L.shape[1]:
            lower = np.concatenate(
                [block_vals[(o, kk)] for o in range(1, order) for kk in range(o + 1)]
            )
            rhs = rhs + L @ lower
        x = solve_linear(-M, rhs)
        block_vals[(order, k)] = x
        for idx, v in zip(block_indices(k, order), x):
            values[idx] = v
    return MomentTable(math.inf, values)


# ---------------------------------------------------------------------------
# Eigenvalue-based closed forms (independent oracles, no Pade, no ODE solve).


def intensity_eigenvalues(model: HawkesModel) -> tuple[float, float, float]:
    """Eigenvalues (eta1, eta2) of the first-order intensity block and the
    discriminant under the root."""
    _require_bivariate(model)
    means = model.mark_mean
    a1 = model.alpha[0] - means[0][0]
    a2 = model.alpha[1] - means[1][1]
    disc = (a1 - a2) ** 2 + 4.0 * means[0][1] * means[1][0]
    root = math.sqrt(disc)
    return 0.5 * (-a1 - a2 + root), 0.5 * (-a1 - a2 - root), disc


def second_order_eigenvalues(model: HawkesModel) -> tuple[float, float, float]:
    """Eigenvalues of the second-order intensity block.

    These are the pairwise sums of the first-order pair: eta1+eta2 and
    2*eta1, 2*eta2.  (Solving the characteristic cubic directly gives the
    same numbers; its three real roots sit symmetrically around
    -(abar1 + abar2).)
    """
    e1, e2, _ = intensity_eigenvalues(model)
    return e1 + e2, 2.0 * e1, 2.0 * e2


def _expm_two_by_two(model: HawkesModel, t: float, shift: float = 0.0) -> np.ndarray:
    """Closed-form exp(t*(M + shift*I)) for the first-order-type blocks."""
    means = model.mark_mean
    a1 = model.alpha[0] - means[0][0]
    a2 = model.alpha[1] - means[1][1]
    e1, e2, disc = intensity_eigenvalues(model)
    if disc == 0.0:
        warnings.warn("repeated eigenvalues; falling back to numeric mat_exp")
        M = np.array([[-a1, means[0][1]], [means[1][0], -a2]]) + shift * np.eye(2)
        return mat_exp(M, t)
    g1, g2 = e1 + shift, e2 + shift
    sym = np.array([[0.5 * (a2 - a1), means[0][1]], [means[1][0], 0.5 * (a1 - a2)]])
    return 0.5 * (math.exp(t * g1) + math.exp(t * g2)) * np.eye(2) + (
        math.exp(t * g1) - math.exp(t * g2)
    ) / math.sqrt(disc) * sym


def closed_form_expm_order1(model: HawkesModel, t: float) -> np.ndarray:
    """Two-term eigenvalue form of the first-order intensity propagator."""
    _require_bivariate(model)
    return _expm_two_by_two(model, t)


def closed_form_expm_order2(model: HawkesModel, t: float) -> np.ndarray:
    """Three-term Lagrange eigenvalue form of the order-2 propagator."""
    _require_bivariate(model)
    means = model.mark_mean
    a1 = model.alpha[0] - means[0][0]
    a2 = model.alpha[1] - means[1][1]
    M = np.array(
        [
            [-2 * a1, 2 * means[0][1], 0.0],
            [means[1][0], -(a1 + a2), means[0][1]],
            [0.0, 2 * means[1][0], -2 * a2],
        ]
    )
    k1, k2, k3 = second_order_eigenvalues(model)
    if min(abs(k1 - k2), abs(k1 - k3), abs(k2 - k3)) == 0.0:
        warnings.warn("repeated eigenvalues; falling back to numeric mat_exp")
        return mat_exp(M, t)
    I = np.eye(3)
    out = np.zeros((3, 3))
    for ka, kb, kc in ((k1, k2, k3), (k2, k1, k3), (k3, k1, k2)):
        out = out + math.exp(ka * t) * (M - kb * I) @ (M - kc * I) / (
            (ka - kb) * (ka - kc)
        )
    return out


def _stationary_vectors(model: HawkesModel):
    means = model.mark_mean
    a1 = model.alpha[0] - means[0][0]
    a2 = model.alpha[1] - means[1][1]
    det = a1 * a2 - means[0][1] * means[1][0]
    f1 = model.alpha[0] * model.lambda_bar[0]
    f2 = model.alpha[1] * model.lambda_bar[1]
    lam_inf = np.array([f1 * a2 + f2 * means[0][1], f2 * a1 + f1 * means[1][0]]) / det
    return a1, a2, det, f1, f2, lam_inf


def closed_form_mean_intensity(model: HawkesModel, t: float) -> np.ndarray:
    """Transient E[lambda(t)]: stationary level plus eigenmode terms."""
    _require_bivariate(model)
    e1, e2, disc = intensity_eigenvalues(model)
    if disc == 0.0:
        warnings.warn("repeated eigenvalues; falling back to numeric path")
        means = model.mark_mean
        M = np.array(
            [[-(model.alpha[0] - means[0][0]), means[0][1]],
             [means[1][0], -(model.alpha[1] - means[1][1])]]
        )
        f = model.alpha * model.lambda_bar
        expMt = mat_exp(M, t)
        return expMt @ model.lambda_bar + solve_linear(M, (expMt - np.eye(2)) @ f)
    a1, a2, det, f1, f2, lam_inf = _stationary_vectors(model)
    lb = model.lambda_bar
    means = model.mark_mean
    root = math.sqrt(disc)
    v1 = lb.copy()
    v2 = np.array(
        [0.5 * lb[0] * (a2 - a1) + lb[1] * means[0][1],
         0.5 * lb[1] * (a1 - a2) + lb[0] * means[1][0]]
    )
    v3 = np.array([f1, f2])
    v4 = np.array(
        [0.5 * f1 * (a2 - a1) + f2 * means[0][1],
         0.5 * f2 * (a1 - a2) + f1 * means[1][0]]
    )
    g1, g2 = math.exp(t * e1), math.exp(t * e2)
    return (
        lam_inf
        + 0.5 * (g1 + g2) * v1
        + (g1 - g2) / root * v2
        + 0.5 * (g1 / e1 + g2 / e2) * v3
        + (g1 / e1 - g2 / e2) / root * v4
    )


def closed_form_mean_population(model: HawkesModel, t: float) -> np.ndarray:
    """Transient E[Q(t)]: exponential-lifetime filter of the mean intensity."""
    _require_bivariate(model)
    e1, e2, disc = intensity_eigenvalues(model)
    if disc == 0.0:
        raise NumericsError("repeated eigenvalues; use the moment engine instead")
    if np.any(model.mu == 0.0):
        raise NumericsError("closed form needs mu > 0; use hawkes_count_moments")
    a1, a2, det, f1, f2, lam_inf = _stationary_vectors(model)
    lb = model.lambda_bar
    means = model.mark_mean
    mu = model.mu
    root = math.sqrt(disc)
    v1 = lb.copy()
    v2 = np.array(
        [0.5 * lb[0] * (a2 - a1) + lb[1] * means[0][1],
         0.5 * lb[1] * (a1 - a2) + lb[0] * means[1][0]]
    )
    v3 = np.array([f1, f2])
    v4 = np.array(
        [0.5 * f1 * (a2 - a1) + f2 * means[0][1],
         0.5 * f2 * (a1 - a2) + f1 * means[1][0]]
    )

    def filt(weight1, weight2):
        # integral of e^{-mu_i (t-s)} (w1 e^{s eta1} + w2 e^{s eta2}) ds
        return np.array(
            [
                weight1 * (math.exp(t * e1) - math.exp(-t * mu_i)) / (mu_i + e1)
                + weight2 * (math.exp(t * e2) - math.exp(-t * mu_i)) / (mu_i + e2)
                for mu_i in mu
            ]
        )

    base = (1.0 - np.exp(-t * mu)) / mu * lam_inf
    return (
        base
        + 0.5 * filt(1.0, 1.0) * v1
        + filt(1.0, -1.0) / root * v2
        + 0.5 * filt(1.0 / e1, 1.0 / e2) * v3
        + filt(1.0 / e1, -1.0 / e2) / root * v4
    )


def closed_form_stationary(model: HawkesModel) -> dict[str, np.ndarray]:
    """Stationary moments up to order 2 from the explicit small systems."""
    _require_bivariate(model)
    if np.any(model.mu == 0.0):
        raise StabilityError("stationary population moments need mu > 0")
    a1, a2, det, f1, f2, lam_inf = _stationary_vectors(model)
    if det <= 0:
        raise StabilityError("explicit stability condition violated")
    means = model.mark_mean
    mu = model.mu
    q_inf = lam_inf / mu

    b11, b12 = means[0][0], means[0][1]
    b21, b22 = means[1][0], means[1][1]
    m2 = [[model.mark_moment(i, j, 2) for j in range(2)] for i in range(2)]
    lhs2 = np.array(
        [
            [2 * a1, -2 * b12, 0.0],
            [-b21, a1 + a2, -b12],
            [0.0, -2 * b21, 2 * a2],
        ]
    )
    rhs2 = np.array(
        [
            lam_inf[0] * (2 * f1 + m2[0][0]) + lam_inf[1] * m2[0][1],
            lam_inf[0] * (b11 * b21 + f2) + lam_inf[1] * (b22 * b12 + f1),
            lam_inf[0] * m2[1][0] + lam_inf[1] * (2 * f2 + m2[1][1]),
        ]
    )
    lam_sq = solve_linear(lhs2, rhs2)

    lhs11 = np.zeros((4, 4))
    lhs11[:2, :2] = [[a1 + mu[0], -b12], [-b21, a2 + mu[0]]]
    lhs11[2:, 2:] = [[a1 + mu[1], -b12], [-b21, a2 + mu[1]]]
    rhs11 = np.array(
        [
            lam_sq[0] + f1 * q_inf[0] + b11 * lam_inf[0],
            lam_sq[1] + f2 * q_inf[0] + b21 * lam_inf[0],
            lam_sq[1] + f1 * q_inf[1] + b12 * lam_inf[1],
            lam_sq[2] + f2 * q_inf[1] + b22 * lam_inf[1],
        ]
    )
    pop_lam = solve_linear(lhs11, rhs11)

    pop_sq = np.array(
        [
            2 * pop_lam[0] / (2 * mu[0]),
            (pop_lam[1] + pop_lam[2]) / (mu[0] + mu[1]),
            2 * pop_lam[3] / (2 * mu[1]),
        ]
    )
    return {
        "mean_intensity": lam_inf,
        "mean_population": q_inf,
        "intensity_sq": lam_sq,
        "population_intensity": pop_lam,
        "population_fact2": pop_sq,
    }


def closed_form_oracles(model: HawkesModel, t: float) -> dict[str, object]:
    """Bundle of every explicit eigenvalue-based formula, for cross-checks."""
    e1, e2, disc = intensity_eigenvalues(model)
    return {
        "intensity_eigenvalues": (e1, e2),
        "intensity_discriminant": disc,
        "order2_eigenvalues": second_order_eigenvalues(model),
        "expm_order1": closed_form_expm_order1(model, t),
        "expm_order2": closed_form_expm_order2(model, t),
        "mean_intensity": closed_form_mean_intensity(model, t),
        "mean_population": closed_form_mean_population(model, t),
        "stationary": closed_form_stationary(model),
    }
