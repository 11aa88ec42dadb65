import numpy as np
import pytest

from saddlepoint import DiscreteMeasure, Equality, FeatureMap, IntegrandFamily, MomentProblem

BUILTINS = ("RelativeEntropy", "Quadratic", "Burg", "Fermi")


def bernoulli(xhat=(1.0, 0.75), family="RelativeEntropy", constraint=None):
    """R = (1/2, 1/2) on {0, 1} with features (1, z)."""
    R = DiscreteMeasure(["0", "1"], [0.5, 0.5])
    T = FeatureMap([[1.0, 0.0], [1.0, 1.0]])
    fam = family if isinstance(family, IntegrandFamily) else IntegrandFamily(family)
    return MomentProblem(R, fam, T, constraint if constraint is not None else Equality(xhat))


def random_entropy_problem(rng, n, k, family="RelativeEntropy"):
    """Polynomial features, positive reference, targets from a random positive measure."""
    z = np.sort(rng.uniform(-1.0, 1.0, n))
    R = rng.uniform(0.5, 1.5, n)
    R /= R.sum()
    T = np.vander(z, k, increasing=True)
    if family == "Fermi":
        P = R * rng.uniform(0.2, 0.8, n)
    else:
        P = rng.uniform(0.2, 1.0, n)
        P /= P.sum()
    return MomentProblem(DiscreteMeasure(None, R), IntegrandFamily(family), FeatureMap(T),
                         Equality(T.T @ P))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
