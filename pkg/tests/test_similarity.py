import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gwflab.errors import DomainError, InvalidWordError, ResourceLimitError
from gwflab.geometry import PointCloud, hausdorff_distance
from gwflab.rng import philox_generator
from gwflab.similarity import (
    IFS,
    Box,
    SimilarityMap,
    attractor_cloud,
    build_section,
    check_declared_osc,
    check_ssc,
    compose_word,
    ifs_from_json,
    ifs_to_json,
    restricted_attractor_cloud,
    wsc_profile,
)
from gwflab.dimensions import moran_dimension

LOG23 = math.log(2) / math.log(3)


class TestSimilarityMap:
    def test_identity_and_apply(self):
        ident = SimilarityMap.identity(2)
        pts = np.array([[1.0, 2.0], [0.5, -1.0]])
        assert np.array_equal(ident.apply(pts), pts)

    def test_compose_ratio_multiplies(self):
        f = SimilarityMap.homothety(0.5, [1.0])
        g = SimilarityMap.homothety(0.25, [0.3])
        assert f.compose(g).ratio == pytest.approx(0.125, abs=0)

    def test_inverse_roundtrip(self):
        theta = 0.7
        rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
        f = SimilarityMap(0.6, rot, np.array([0.2, -0.4]))
        pts = np.array([[0.1, 0.9], [2.0, 3.0]])
        back = f.inverse().apply(f.apply(pts))
        assert np.max(np.abs(back - pts)) < 1e-12

    def test_fixed_point(self):
        f = SimilarityMap.homothety(1.0 / 3.0, [2.0 / 3.0])
        assert f.fixed_point()[0] == pytest.approx(1.0)
        assert np.allclose(f.apply_one(f.fixed_point()), f.fixed_point())

    def test_rejects_non_orthogonal(self):
        with pytest.raises(DomainError):
            SimilarityMap(0.5, np.array([[1.0, 0.5], [0.0, 1.0]]), np.zeros(2))

    def test_rejects_nonpositive_ratio(self):
        with pytest.raises(DomainError):
            SimilarityMap.homothety(0.0, [0.0])


class TestComposeWord:
    def test_empty_word_is_identity(self, cantor):
        f = compose_word(cantor, ())
        assert f.ratio == 1.0
        assert np.all(f.translation == 0.0)

    def test_cantor_word_01(self, cantor):
        f = compose_word(cantor, (0, 1))
        assert f.ratio == pytest.approx(1.0 / 9.0, abs=1e-15)
        assert f.translation[0] == pytest.approx(2.0 / 9.0, abs=1e-15)

    @given(
        st.lists(st.integers(0, 1), max_size=8),
        st.lists(st.integers(0, 1), max_size=8),
    )
    @settings(max_examples=50, deadline=None)
    def test_ratio_multiplicative(self, word_a, word_b):
        ifs = IFS(
            [SimilarityMap.homothety(0.5, [0.0]), SimilarityMap.homothety(0.25, [0.5])]
        )
        ra = compose_word(ifs, word_a).ratio
        rb = compose_word(ifs, word_b).ratio
        rab = compose_word(ifs, tuple(word_a) + tuple(word_b)).ratio
        assert rab == pytest.approx(ra * rb, rel=1e-12)

    def test_invalid_symbol(self, cantor):
        with pytest.raises(InvalidWordError):
            compose_word(cantor, (0, 2))


class TestBuildSection:
    def test_equal_ratios_full_level(self, cantor):
        rho = 1.0 / 27.0
        section = build_section(cantor, rho)
        n = math.ceil(math.log(rho) / math.log(1.0 / 3.0))
        assert len(section) == 2**n == 8
        assert all(len(w) == 3 for w in section.words)

    def test_mixed_ratio_example(self, mixed_ratio):
        section = build_section(mixed_ratio, 0.25)
        assert section.words == ((0, 0), (0, 1), (1,))

    def test_ratio_bounds(self, mixed_ratio):
        for rho in (0.3, 0.1, 0.01):
            section = build_section(mixed_ratio, rho)
            for r in section.ratios:
                assert rho * mixed_ratio.r_min < r <= rho

    def test_words_lexicographic_and_incomparable(self, mixed_ratio):
        section = build_section(mixed_ratio, 0.05)
        assert list(section.words) == sorted(section.words)
        words = set(section.words)
        for w in words:
            for k in range(len(w)):
                assert w[:k] not in words

    def test_partition_of_random_rays(self, mixed_ratio):
        section = build_section(mixed_ratio, 0.02)
        words = set(section.words)
        max_len = max(len(w) for w in words)
        gen = philox_generator(13)
        for _ in range(1000):
            ray = tuple(gen.integers(0, 2, size=max_len + 2).tolist())
            hits = sum(1 for k in range(len(ray) + 1) if ray[:k] in words)
            assert hits == 1

    def test_moran_telescoping(self, mixed_ratio, cantor):
        for ifs in (mixed_ratio, cantor):
            s = moran_dimension([phi.ratio for phi in ifs.maps])
            for rho in (0.2, 0.03):
                section = build_section(ifs, rho)
                assert abs(np.sum(section.ratios**s) - 1.0) < 1e-8

    def test_domain_errors(self, cantor):
        with pytest.raises(DomainError):
            build_section(cantor, 0.0)
        with pytest.raises(DomainError):
            build_section(cantor, 1.0)

    def test_cap(self, cantor):
        with pytest.raises(ResourceLimitError):
            build_section(cantor, 1e-9, cap=100)


class TestAttractorCloud:
    def test_cantor_endpoints(self, cantor):
        cloud = attractor_cloud(cantor, 1.0 / 27.0)
        assert len(cloud) == 8
        assert np.min(np.abs(cloud.points - 0.0)) <= cloud.epsilon
        assert np.min(np.abs(cloud.points - 1.0)) <= cloud.epsilon

    def test_size_matches_section(self, mixed_ratio):
        rho = 0.05
        assert len(attractor_cloud(mixed_ratio, rho)) == len(build_section(mixed_ratio, rho))

    def test_refinement(self, cantor, mixed_ratio):
        for ifs in (cantor, mixed_ratio):
            rho = 0.06
            coarse = attractor_cloud(ifs, rho)
            fine = attractor_cloud(ifs, rho * rho)
            assert hausdorff_distance(coarse, fine) <= coarse.epsilon

    def test_hutchinson_identity_at_cloud_scale(self, cantor):
        cloud = attractor_cloud(cantor, 0.02)
        union = PointCloud(
            np.vstack([phi.apply(cloud.points) for phi in cantor.maps]), cloud.epsilon
        )
        assert hausdorff_distance(cloud, union) <= 2 * cloud.epsilon

    def test_inside_bounding_ball(self, percolation_ifs):
        cloud = attractor_cloud(percolation_ifs, 0.03)
        norms = np.linalg.norm(cloud.points, axis=1)
        assert norms.max() <= percolation_ifs.bounding_radius + 1e-12


class TestRestrictedCloud:
    def test_full_subset_identical(self, cantor):
        a = attractor_cloud(cantor, 0.02)
        b = restricted_attractor_cloud(cantor, [0, 1], 0.02)
        assert np.array_equal(a.points, b.points)

    def test_singleton_collapses_exactly(self, mixed_ratio):
        cloud = restricted_attractor_cloud(mixed_ratio, [1], 0.05)
        fp = mixed_ratio.maps[1].fixed_point()
        assert np.max(np.abs(cloud.points - fp)) == 0.0

    def test_cantor_first_map_gives_origin(self, cantor):
        cloud = restricted_attractor_cloud(cantor, [0], 0.05)
        assert np.max(np.abs(cloud.points)) == 0.0

    def test_empty_subset_rejected(self, cantor):
        with pytest.raises(DomainError):
            restricted_attractor_cloud(cantor, [], 0.05)


class TestCheckSsc:
    def test_cantor_certified_with_gap(self, cantor):
        verdict = check_ssc(cantor, 8)
        assert verdict.kind == "certified_separated"
        assert abs(verdict.gap - 1.0 / 3.0) < 0.01
        assert verdict.tau == pytest.approx(
            math.sqrt(1) / (verdict.gap * cantor.r_min), rel=1e-12
        )

    def test_gap_approaches_true_separation(self, cantor):
        gaps = [check_ssc(cantor, d).gap for d in (3, 6, 9)]
        assert all(abs(g - 1.0 / 3.0) < 0.2 for g in gaps)
        assert abs(gaps[-1] - 1.0 / 3.0) < abs(gaps[0] - 1.0 / 3.0)

    def test_identical_maps_overlap(self, overlapping):
        assert check_ssc(overlapping, 4).kind == "certified_overlap"

    def test_touching_cylinders_undecided(self, dyadic):
        for depth in (2, 5, 8):
            assert check_ssc(dyadic, depth).kind == "undecided"

    def test_monotone_in_depth(self, cantor):
        kinds = [check_ssc(cantor, d).kind for d in range(2, 10)]
        first = kinds.index("certified_separated")
        assert all(k == "certified_separated" for k in kinds[first:])

    def test_resource_cap(self, percolation_ifs):
        with pytest.raises(ResourceLimitError):
            check_ssc(percolation_ifs, 30)


class TestCheckDeclaredOsc:
    def test_dyadic_passes(self, dyadic):
        report = check_declared_osc(dyadic, Box([0.0], [1.0]))
        assert report.passed and not report.heuristic

    def test_cantor_passes(self, cantor):
        report = check_declared_osc(cantor)
        assert report.passed and not report.heuristic

    def test_overlapping_fails(self, overlapping):
        report = check_declared_osc(overlapping, Box([0.0], [1.0]))
        assert not report.passed
        assert (0, 1) in report.overlapping_pairs

    def test_rotation_flagged_heuristic(self):
        rot = np.array([[0.0, -1.0], [1.0, 0.0]])
        ifs = IFS(
            [
                SimilarityMap(0.4, rot, np.array([0.1, 0.1])),
                SimilarityMap(0.4, rot, np.array([0.55, 0.55])),
            ]
        )
        report = check_declared_osc(ifs, Box([0.0, 0.0], [1.0, 1.0]))
        assert report.heuristic

    def test_escaping_image_fails_containment(self):
        ifs = IFS([SimilarityMap.homothety(0.5, [0.9])])
        report = check_declared_osc(ifs, Box([0.0], [1.0]))
        assert not report.passed and 0 in report.containment_failures


class TestWscProfile:
    def test_full_overlap_counts_once(self, overlapping):
        profile = wsc_profile(overlapping, [0.25, 0.0625], ball_samples=16, seed=0)
        assert set(profile.values()) == {1}

    def test_cantor_bounded_constant(self, cantor):
        profile = wsc_profile(cantor, [3.0**-k for k in (3, 5, 7)], ball_samples=40, seed=2)
        counts = list(profile.values())
        assert max(counts) <= 2
        assert len(set(counts)) == 1

    def test_dyadic_bounded_by_three(self, dyadic):
        profile = wsc_profile(dyadic, [2.0**-k for k in (3, 5, 8)], ball_samples=64, seed=3)
        assert max(profile.values()) <= 3
        # brute-force oracle at one scale: enumerate cylinders meeting each open ball
        rho = 2.0**-5
        section = build_section(dyadic, rho)
        cloud = attractor_cloud(dyadic, rho)
        worst = 0
        for center in cloud.points[:, 0]:
            count = 0
            for w, r in zip(section.words, section.ratios):
                left = compose_word(dyadic, w).translation[0]
                if left < center + rho and left + r > center - rho:
                    count += 1
            worst = max(worst, count)
        assert worst <= 3


class TestIfsJson:
    def test_roundtrip(self, cantor):
        again = ifs_from_json(ifs_to_json(cantor))
        assert again.alphabet_size == 2
        assert again.r_min == cantor.r_min
        assert again.osc_box is not None

    def test_error_paths_name_field(self):
        from gwflab.errors import ConfigError

        with pytest.raises(ConfigError, match=r"ifs\.maps\[1\]\.ratio"):
            ifs_from_json(
                {"dim": 1, "maps": [{"ratio": 0.5, "translation": [0.0]}, {"translation": [0.1]}]}
            )
        with pytest.raises(ConfigError, match=r"ifs\.maps\[0\]\.translation"):
            ifs_from_json({"dim": 2, "maps": [{"ratio": 0.5, "translation": [0.0]}]})
