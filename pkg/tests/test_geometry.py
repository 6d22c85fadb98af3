import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gwflab.errors import DomainError, EmptySetError
from gwflab.geometry import (
    EMPTY_SET,
    PointCloud,
    distance_to_unit_cube,
    hausdorff_distance,
    miniset,
    require_cloud,
)
from gwflab.rng import philox_generator
from gwflab.similarity import SimilarityMap, attractor_cloud


def random_cloud(gen, n, d, scale=1.0):
    return PointCloud(scale * gen.standard_normal((n, d)), 0.0)


finite_points = st.lists(
    st.tuples(
        st.floats(-10, 10, allow_nan=False, allow_infinity=False),
        st.floats(-10, 10, allow_nan=False, allow_infinity=False),
    ),
    min_size=1,
    max_size=12,
)


class TestPointCloud:
    def test_rejects_empty(self):
        with pytest.raises(DomainError):
            PointCloud(np.empty((0, 2)), 0.0)

    def test_rejects_nonfinite(self):
        with pytest.raises(DomainError):
            PointCloud([[np.nan, 0.0]], 0.0)
        with pytest.raises(DomainError):
            PointCloud([[0.0]], -1.0)

    def test_points_are_frozen(self):
        cloud = PointCloud([[0.0, 1.0]], 0.5)
        with pytest.raises(ValueError):
            cloud.points[0, 0] = 3.0


class TestHausdorffDistance:
    def test_identical_clouds(self):
        a = PointCloud([[0.0, 0.0], [1.0, 2.0]], 0.0)
        assert hausdorff_distance(a, a) == 0.0

    def test_single_pair(self):
        a = PointCloud([[0.0, 0.0]], 0.0)
        b = PointCloud([[3.0, 4.0]], 0.0)
        assert hausdorff_distance(a, b) == 5.0

    def test_dimension_mismatch(self):
        with pytest.raises(DomainError):
            hausdorff_distance(PointCloud([[0.0]], 0.0), PointCloud([[0.0, 0.0]], 0.0))

    def test_accelerated_equals_bruteforce_bitwise(self):
        gen = philox_generator(42)
        for trial in range(150):
            n, m = int(gen.integers(1, 60)), int(gen.integers(1, 60))
            d = int(gen.integers(1, 4))
            a = random_cloud(gen, n, d, scale=float(gen.uniform(0.1, 5.0)))
            b = random_cloud(gen, m, d, scale=float(gen.uniform(0.1, 5.0)))
            grid = hausdorff_distance(a, b, method="grid")
            brute = hausdorff_distance(a, b, method="brute")
            assert grid == brute  # bit-for-bit

    @given(finite_points, finite_points)
    @settings(max_examples=80, deadline=None)
    def test_symmetry_and_identity(self, pa, pb):
        a = PointCloud(np.asarray(pa), 0.0)
        b = PointCloud(np.asarray(pb), 0.0)
        d_ab = hausdorff_distance(a, b)
        d_ba = hausdorff_distance(b, a)
        assert d_ab == d_ba
        if set(map(tuple, a.points.tolist())) == set(map(tuple, b.points.tolist())):
            assert d_ab == 0.0
        elif d_ab == 0.0:
            assert set(map(tuple, a.points.tolist())) == set(map(tuple, b.points.tolist()))

    def test_triangle_inequality(self):
        gen = philox_generator(3)
        for _ in range(300):
            a = random_cloud(gen, int(gen.integers(1, 20)), 2)
            b = random_cloud(gen, int(gen.integers(1, 20)), 2)
            c = random_cloud(gen, int(gen.integers(1, 20)), 2)
            assert hausdorff_distance(a, c) <= (
                hausdorff_distance(a, b) + hausdorff_distance(b, c) + 1e-12
            )

    def test_similarity_equivariance(self):
        gen = philox_generator(8)
        theta = 1.1
        rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
        g = SimilarityMap(2.5, rot, np.array([0.3, -0.7]))
        for _ in range(50):
            a = random_cloud(gen, 15, 2)
            b = random_cloud(gen, 11, 2)
            lhs = hausdorff_distance(a.transform(g), b.transform(g))
            rhs = g.ratio * hausdorff_distance(a, b)
            assert lhs == pytest.approx(rhs, rel=1e-9)


class TestDistanceToUnitCube:
    def test_inside_is_zero(self):
        assert distance_to_unit_cube(np.array([[0.5, 0.5]]))[0] == 0.0
        assert distance_to_unit_cube(np.array([[0.0, 1.0]]))[0] == 0.0

    def test_outside_corner(self):
        assert distance_to_unit_cube(np.array([[2.0, 2.0]]))[0] == pytest.approx(np.sqrt(2))


class TestMiniset:
    def test_subset_of_cube_unchanged_by_identity_ratio(self):
        cloud = PointCloud([[0.2, 0.3], [0.9, 0.1]], 0.01)
        windowed = miniset(cloud, SimilarityMap.identity(2))
        assert np.array_equal(windowed.points, cloud.points)

    def test_cantor_self_similarity(self, cantor):
        cloud = attractor_cloud(cantor, 3.0**-7)
        tripled = miniset(cloud, SimilarityMap.homothety(3.0, [0.0]))
        assert not isinstance(tripled, type(EMPTY_SET))
        assert hausdorff_distance(tripled, cloud) <= 2 * tripled.epsilon

    def test_translated_outside_cube(self):
        cloud = PointCloud([[0.5]], 0.0)
        out = miniset(cloud, SimilarityMap.homothety(1.0, [10.0]), band=0.1)
        assert out is EMPTY_SET
        with pytest.raises(EmptySetError):
            require_cloud(out, "test window")

    def test_contracting_map_rejected(self):
        with pytest.raises(DomainError):
            miniset(PointCloud([[0.5]], 0.0), SimilarityMap.homothety(0.5, [0.0]))

    def test_band_monotonicity(self, cantor):
        cloud = attractor_cloud(cantor, 3.0**-6)
        psi = SimilarityMap.homothety(1.5, [-0.2])
        wide = miniset(cloud, psi, band=0.05)
        narrow = miniset(cloud, psi, band=0.005)
        assert len(narrow) <= len(wide)
        narrow_set = set(map(tuple, narrow.points.tolist()))
        wide_set = set(map(tuple, wide.points.tolist()))
        assert narrow_set <= wide_set

    def test_epsilon_accounting(self):
        cloud = PointCloud([[0.1, 0.1]], 0.01)
        psi = SimilarityMap.homothety(3.0, [0.0])
        windowed = miniset(cloud, psi, band=0.02)
        assert windowed.epsilon == pytest.approx(3.0 * 0.01 + 0.02)
