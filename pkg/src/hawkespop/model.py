"""Model parameterization: mark laws, the Hawkes population model, and the
symmetric sub-family used for near-criticality analysis.

A d-dimensional model consists of base rates, exponential decay rates,
departure rates, and a d x d grid of jump-size laws: entry (i, j) is the
law of the jump applied to intensity i when an event fires in component j.
Grid entries are mutually independent.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, StabilityError
from .numerics import spectral_radius


class MarkLaw:
    """Law of a single nonnegative jump size.

    Subclasses expose raw moments of any requested order, the scalar
    Laplace transform E[exp(-u B)], and exact sampling.
    """

    kind = "abstract"

    @property
    def mean(self) -> float:
        return self.moment(1)

    def moment(self, k: int) -> float:
        raise NotImplementedError

    def laplace(self, u: float) -> float:
        raise NotImplementedError

    def sample(self, rng) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class ExponentialMark(MarkLaw):
    """Exponentially distributed jump with the given mean."""

    mean_value: float
    kind = "exponential"

    def __post_init__(self):
        if not (self.mean_value > 0 and math.isfinite(self.mean_value)):
            raise ConfigError("exponential mark needs a positive finite mean")

    @property
    def mean(self) -> float:
        return self.mean_value

    def moment(self, k: int) -> float:
        return math.factorial(k) * self.mean_value**k

    def laplace(self, u: float) -> float:
        # E[e^{-uB}] = 1/(1 + mean*u), valid for u > -1/mean.
        den = 1.0 + self.mean_value * u
        if den <= 0:
            raise ValueError(f"laplace argument {u} at or past the pole")
        return 1.0 / den

    def sample(self, rng) -> float:
        return rng.exponential(self.mean_value)


@dataclass(frozen=True)
class DeterministicMark(MarkLaw):
    """Jump of a fixed nonnegative size."""

    value: float
    kind = "deterministic"

    def __post_init__(self):
        if not (self.value >= 0 and math.isfinite(self.value)):
            raise ConfigError("deterministic mark needs a nonnegative value")

    @property
    def mean(self) -> float:
        return self.value

    def moment(self, k: int) -> float:
        return self.value**k

    def laplace(self, u: float) -> float:
        return math.exp(-u * self.value)

    def sample(self, rng) -> float:
        return self.value


@dataclass(frozen=True)
class ZeroMark(MarkLaw):
    """No excitation: the jump is identically zero."""

    kind = "zero"

    @property
    def mean(self) -> float:
        return 0.0

    def moment(self, k: int) -> float:
        return 1.0 if k == 0 else 0.0

    def laplace(self, u: float) -> float:
        return 1.0

    def sample(self, rng) -> float:
        return 0.0


def _law_from_spec(entry: dict, where: str) -> MarkLaw:
    if not isinstance(entry, dict):
        raise ConfigError(f"{where}: expected an object with a 'kind' field")
    unknown = set(entry) - {"kind", "param"}
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    kind = entry.get("kind")
    if kind == "zero":
        if "param" in entry:
            raise ConfigError(f"{where}: 'zero' takes no param")
        return ZeroMark()
    if "param" not in entry:
        raise ConfigError(f"{where}: '{kind}' needs a numeric param")
    param = entry["param"]
    if not isinstance(param, (int, float)):
        raise ConfigError(f"{where}: param must be a number")
    if kind == "exponential":
        return ExponentialMark(float(param))
    if kind == "deterministic":
        return DeterministicMark(float(param))
    raise ConfigError(f"{where}: unknown mark kind {kind!r}")


class HawkesModel:
    """Markovian multivariate Hawkes population process parameters.

    Immutable after construction.  Construction enforces the stability
    condition rho(H) < 1 on the branching matrix H, unless allow_unstable
    is set (used when probing the near-critical regime or forcing
    explosions on purpose).
    """

    def __init__(
        self,
        lambda_bar: Sequence[float],
        alpha: Sequence[float],
        mu: Sequence[float],
        marks: Sequence[Sequence[MarkLaw]],
        allow_unstable: bool = False,
    ):
        lb = np.asarray(lambda_bar, dtype=float)
        al = np.asarray(alpha, dtype=float)
        m = np.asarray(mu, dtype=float)
        d = lb.size
        if d < 1:
            raise ConfigError("dimension must be >= 1")
        if al.shape != (d,) or m.shape != (d,):
            raise ConfigError("lambda_bar, alpha, mu must share one length")
        for name, v in (("lambda_bar", lb), ("alpha", al), ("mu", m)):
            if not np.all(np.isfinite(v)) or np.any(v < 0):
                raise ConfigError(f"{name} must be finite and nonnegative")
        rows = tuple(tuple(row) for row in marks)
        if len(rows) != d or any(len(r) != d for r in rows):
            raise ConfigError("marks must be a d x d grid")
        for r in rows:
            for law in r:
                if not isinstance(law, MarkLaw):
                    raise ConfigError("marks entries must be MarkLaw instances")
        lb.setflags(write=False)
        al.setflags(write=False)
        m.setflags(write=False)
        self.lambda_bar = lb
        self.alpha = al
        self.mu = m
        self.marks = rows
        self.d = d
        self._mark_mean = np.array([[law.mean for law in r] for r in rows])
        self._mark_mean.setflags(write=False)

        rho = check_stability(self).rho
        if rho >= 1.0 and not allow_unstable:
            raise StabilityError(
                f"branching matrix spectral radius {rho:.4f} >= 1; "
                "pass allow_unstable=True to construct anyway"
            )

    @property
    def mark_mean(self) -> np.ndarray:
        """Matrix of E[B_ij]."""
        return self._mark_mean

    def mark_moment(self, i: int, j: int, k: int) -> float:
        return self.marks[i][j].moment(k)

    def joint_mark_moment(self, j: int, exponents: Sequence[int]) -> float:
        """E[prod_i B_ij^{k_i}] for column j.

        Grid entries are independent, so this is the product of marginal
        moments; the hook exists so dependent columns could override it.
        """
        out = 1.0
        for i, k in enumerate(exponents):
            if k:
                out *= self.marks[i][j].moment(k)
        return out

    def beta(self, j: int, s: Sequence[float]) -> float:
        """Column Laplace transform E[exp(-sum_i s_i B_ij)]."""
        out = 1.0
        for i in range(self.d):
            si = s[i]
            if si != 0.0:
                out *= self.marks[i][j].laplace(si)
        return out

    def __repr__(self):  # pragma: no cover - debugging aid
        return (
            f"HawkesModel(d={self.d}, lambda_bar={self.lambda_bar.tolist()}, "
            f"alpha={self.alpha.tolist()}, mu={self.mu.tolist()})"
        )


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    rho: float


def branching_matrix(model: HawkesModel) -> np.ndarray:
    """H with h_ij = E[B_ij] / alpha_i.

    A zero decay rate with a positively-excited row means the intensity
    never reverts, which is instability regardless of eigenvalues.
    """
    means = model.mark_mean
    h = np.zeros_like(means)
    for i in range(model.d):
        if model.alpha[i] == 0.0:
            if means[i].any():
                raise StabilityError(
                    f"alpha[{i}] = 0 with positive mark mean: unstable"
                )
            continue
        h[i] = means[i] / model.alpha[i]
    return h


def check_stability(model: HawkesModel) -> StabilityReport:
    rho = spectral_radius(branching_matrix(model))
    return StabilityReport(stable=rho < 1.0, rho=rho)


@dataclass(frozen=True)
class SymmetricModel:
    """Exchangeable sub-family: one decay rate, one base rate, and marks
    that depend only on the firing component (column-constant grid)."""

    d: int
    alpha: float
    lambda_bar: float
    marks: tuple[MarkLaw, ...]

    def __post_init__(self):
        if self.d < 1 or len(self.marks) != self.d:
            raise ConfigError("need one mark law per component")
        if not (self.alpha > 0 and self.lambda_bar > 0):
            raise ConfigError("alpha and lambda_bar must be positive")

    def to_hawkes(self, mu: float = 1.0, allow_unstable: bool = False) -> HawkesModel:
        grid = [[self.marks[j] for j in range(self.d)] for _ in range(self.d)]
        return HawkesModel(
            lambda_bar=[self.lambda_bar] * self.d,
            alpha=[self.alpha] * self.d,
            mu=[mu] * self.d,
            marks=grid,
            allow_unstable=allow_unstable,
        )


def symmetric_theta_sigma(model: SymmetricModel) -> tuple[float, float]:
    """Criticality index theta and the limit scale sigma.

    theta = (1/alpha) sum_i E[B_i] (stability iff theta < 1) and
    sigma = 2 alpha / sum_i E[B_i^2].
    """
    first = sum(law.moment(1) for law in model.marks)
    second = sum(law.moment(2) for law in model.marks)
    if second == 0.0:
        raise ConfigError("sigma undefined: all second mark moments vanish")
    return first / model.alpha, 2.0 * model.alpha / second


_TOP_KEYS = {"d", "lambda_bar", "alpha", "mu", "marks", "allow_unstable", "run"}
_RUN_KEYS = {"t", "order", "method", "h", "mc_runs", "seed", "horizon", "tau_max", "tau_steps"}


def parse_model_config(doc: dict, source: str = "<config>") -> tuple[HawkesModel, dict]:
    """Validate a parsed config tree and build the model.

    Returns (model, run_defaults).  Unknown keys are rejected at every
    level so typos fail fast instead of being silently ignored.
    """
    if not isinstance(doc, dict):
        raise ConfigError(f"{source}: top level must be an object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"{source}: unknown top-level keys {sorted(unknown)}")
    for key in ("d", "lambda_bar", "alpha", "mu", "marks"):
        if key not in doc:
            raise ConfigError(f"{source}: missing required key '{key}'")
    d = doc["d"]
    if not isinstance(d, int) or d < 1:
        raise ConfigError(f"{source}: 'd' must be a positive integer")

    def _vector(name):
        v = doc[name]
        if not isinstance(v, list) or len(v) != d:
            raise ConfigError(f"{source}: '{name}' must be a list of length {d}")
        if not all(isinstance(x, (int, float)) for x in v):
            raise ConfigError(f"{source}: '{name}' entries must be numbers")
        return [float(x) for x in v]

    lb, al, mu = _vector("lambda_bar"), _vector("alpha"), _vector("mu")
    marks_doc = doc["marks"]
    if not isinstance(marks_doc, list) or len(marks_doc) != d:
        raise ConfigError(f"{source}: 'marks' must be a {d}x{d} grid")
    grid = []
    for i, row in enumerate(marks_doc):
        if not isinstance(row, list) or len(row) != d:
            raise ConfigError(f"{source}: marks[{i}] must be a list of length {d}")
        grid.append([_law_from_spec(e, f"{source}: marks[{i}][{j}]") for j, e in enumerate(row)])

    allow_unstable = doc.get("allow_unstable", False)
    if not isinstance(allow_unstable, bool):
        raise ConfigError(f"{source}: 'allow_unstable' must be a boolean")

    run = doc.get("run", {})
    if not isinstance(run, dict):
        raise ConfigError(f"{source}: 'run' must be an object")
    unknown = set(run) - _RUN_KEYS
    if unknown:
        raise ConfigError(f"{source}: unknown run keys {sorted(unknown)}")

    model = HawkesModel(lb, al, mu, grid, allow_unstable=allow_unstable)
    return model, dict(run)


def load_model(path) -> tuple[HawkesModel, dict]:
    """Read a JSON model config from disk. See docs/config schema in README."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from exc
    return parse_model_config(doc, source=str(path))


def as_symmetric(model: HawkesModel) -> SymmetricModel:
    """View a full model as a SymmetricModel, or fail if it is not one."""
    d = model.d
    if np.ptp(model.alpha) != 0.0 or np.ptp(model.lambda_bar) != 0.0:
        raise ConfigError("symmetric model needs equal alphas and base rates")
    for j in range(d):
        col = [model.marks[i][j] for i in range(d)]
        if any(law != col[0] for law in col[1:]):
            raise ConfigError("symmetric model needs column-constant marks")
    return SymmetricModel(
        d=d,
        alpha=float(model.alpha[0]),
        lambda_bar=float(model.lambda_bar[0]),
        marks=tuple(model.marks[0][j] for j in range(d)),
    )
