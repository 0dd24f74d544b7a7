import numpy as np
import pytest

from hawkespop.model import ExponentialMark, HawkesModel, ZeroMark


def make_bivariate() -> HawkesModel:
    """Two-component benchmark model with exponential marks."""
    means = [[1.5, 0.5], [0.75, 1.25]]
    return HawkesModel(
        lambda_bar=[0.5, 0.5],
        alpha=[3.0, 2.0],
        mu=[1.0, 2.0],
        marks=[[ExponentialMark(v) for v in row] for row in means],
    )


def make_trivariate() -> HawkesModel:
    """Three-component benchmark model with exponential marks."""
    means = [[0.5, 0.3, 0.4], [0.7, 0.5, 0.5], [0.4, 0.2, 0.5]]
    return HawkesModel(
        lambda_bar=[0.3, 1.0, 0.5],
        alpha=[2.0, 1.5, 2.5],
        mu=[1.5, 0.5, 1.0],
        marks=[[ExponentialMark(v) for v in row] for row in means],
    )


def make_poisson(d: int = 2) -> HawkesModel:
    """No excitation: independent Poisson inflows, exponential departures."""
    return HawkesModel(
        lambda_bar=[0.7, 1.2][:d],
        alpha=[1.0, 2.0][:d],
        mu=[0.5, 1.0][:d],
        marks=[[ZeroMark() for _ in range(d)] for _ in range(d)],
    )


@pytest.fixture
def bivariate():
    return make_bivariate()


@pytest.fixture
def trivariate():
    return make_trivariate()


@pytest.fixture
def poisson():
    return make_poisson()


def random_stable_bivariate(rng: np.random.Generator) -> HawkesModel:
    """Draw a stable random two-component model with exponential marks."""
    while True:
        alpha = rng.uniform(0.5, 4.0, size=2)
        means = rng.uniform(0.05, 1.5, size=(2, 2))
        a1 = alpha[0] - means[0, 0]
        a2 = alpha[1] - means[1, 1]
        if a1 > 0.05 and a2 > 0.05 and a1 * a2 > means[0, 1] * means[1, 0] * 1.05:
            break
    return HawkesModel(
        lambda_bar=rng.uniform(0.1, 2.0, size=2),
        alpha=alpha,
        mu=rng.uniform(0.3, 3.0, size=2),
        marks=[[ExponentialMark(float(v)) for v in row] for row in means],
    )
