import numpy as np
import pytest

from gwflab.branching import OffspringDistribution, binomial_law, uniform_law
from gwflab.similarity import IFS, Box, SimilarityMap, cantor_ifs, grid_ifs


@pytest.fixture(scope="session")
def cantor():
    return cantor_ifs()


@pytest.fixture(scope="session")
def dyadic():
    """Unit-interval system {x/2, x/2 + 1/2}; touching cylinders."""
    return IFS(
        [SimilarityMap.homothety(0.5, [0.0]), SimilarityMap.homothety(0.5, [0.5])],
        osc_box=Box([0.0], [1.0]),
    )


@pytest.fixture(scope="session")
def overlapping():
    """Two copies of the same map; full overlap."""
    return IFS([SimilarityMap.homothety(0.5, [0.0]), SimilarityMap.homothety(0.5, [0.0])])


@pytest.fixture(scope="session")
def mixed_ratio():
    """Ratios {1/2, 1/4} on a two-letter alphabet."""
    return IFS([SimilarityMap.homothety(0.5, [0.0]), SimilarityMap.homothety(0.25, [0.5])])


@pytest.fixture(scope="session")
def percolation_ifs():
    return grid_ifs(2, 2)


@pytest.fixture(scope="session")
def percolation_law():
    return binomial_law(4, 0.7)


@pytest.fixture(scope="session")
def quadratic_law():
    """P[empty] = 1/4, P[{0,1}] = 3/4; extinction probability 1/3."""
    return OffspringDistribution(2, [(frozenset(), 0.25), (frozenset({0, 1}), 0.75)])


@pytest.fixture(scope="session")
def cantor_mix_law():
    """Uniform on {{0}, {0,1}} over the middle-thirds system."""
    return uniform_law(2, [frozenset({0}), frozenset({0, 1})])


def random_supercritical_laws(rng: np.random.Generator, alphabet_size: int, count: int):
    """Random supercritical offspring laws over a given alphabet."""
    laws = []
    subsets = [frozenset(s) for s in _all_subsets(alphabet_size)]
    while len(laws) < count:
        k = int(rng.integers(2, min(len(subsets), 6) + 1))
        chosen = rng.choice(len(subsets), size=k, replace=False)
        weights = rng.random(k)
        weights /= weights.sum()
        law = OffspringDistribution(
            alphabet_size, [(subsets[i], float(w)) for i, w in zip(chosen, weights)]
        )
        if law.is_supercritical:
            laws.append(law)
    return laws


def _all_subsets(n):
    for mask in range(1 << n):
        yield [i for i in range(n) if mask >> i & 1]
