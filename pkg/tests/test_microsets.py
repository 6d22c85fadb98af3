import numpy as np
import pytest

from gwflab.branching import sample_surviving
from gwflab.errors import NodeNotFoundError
from gwflab.geometry import hausdorff_distance
from gwflab.microsets import check_zoom_identity_ssc, descendant_cloud, zoom_sequence
from gwflab.similarity import IFS, SimilarityMap, attractor_cloud, check_ssc
from gwflab.trees import (
    EXTINCT,
    descendant_tree,
    full_tree,
    project_tree,
    reduce_to_horizon,
)


def surviving_reduced(law, horizon, seed):
    tree, _ = sample_surviving(law, horizon, seed)
    reduced = reduce_to_horizon(tree, horizon)
    assert reduced is not EXTINCT
    return reduced


class TestDescendantCloud:
    def test_full_tree_gives_attractor_everywhere(self, cantor):
        t = full_tree(2, 9)
        reference = attractor_cloud(cantor, 3.0**-4)
        for word in [(), (0,), (1, 0), (0, 1, 1)]:
            cloud = descendant_cloud(t, cantor, word, 3.0**-4)
            assert hausdorff_distance(cloud, reference) == 0.0

    def test_root_equals_project_tree(self, cantor, quadratic_law):
        reduced = surviving_reduced(quadratic_law, 10, 2)
        a = descendant_cloud(reduced, cantor, (), 3.0**-4)
        b = project_tree(reduced, cantor, 3.0**-4)
        assert np.array_equal(a.points, b.points)

    def test_pruned_node_not_found(self, cantor, quadratic_law):
        reduced = surviving_reduced(quadratic_law, 10, 2)
        missing = next(
            w
            for w in [(0,), (1,)]
            if w not in reduced
        ) if any(w not in reduced for w in [(0,), (1,)]) else None
        if missing is None:
            pytest.skip("both children survived for this seed")
        with pytest.raises(NodeNotFoundError):
            descendant_cloud(reduced, cantor, missing, 3.0**-4)

    def test_descendant_trees_stay_in_reduced_support(self, cantor, quadratic_law):
        # finite-horizon form of: descendant sets of a surviving tree lie in
        # the support of the law of the reduced tree
        from gwflab.branching import reduced_offspring
        from gwflab.trees import is_family_tree

        family = [set(fs) for fs in reduced_offspring(quadratic_law).support()]
        for seed in range(25):
            reduced = surviving_reduced(quadratic_law, 8, seed)
            for word in list(reduced.nodes())[:20]:
                sub = descendant_tree(reduced, word)
                assert is_family_tree(sub, family, max_depth=8 - len(word))


class TestZoomSequence:
    def test_cantor_fixed_ray_is_stationary(self, cantor):
        t = full_tree(2, 12)
        result = zoom_sequence(t, cantor, (0, 0, 0, 0), 3.0**-4)
        reference = attractor_cloud(cantor, 3.0**-4)
        for step in result.steps:
            assert hausdorff_distance(step.miniset_cloud, reference) <= 2 * reference.epsilon
            assert step.map.ratio >= 1.0
        tails = [s.d_h_to_prev for s in result.steps[1:]]
        assert all(d <= 2 * reference.epsilon for d in tails)
        assert result.approximant

    def test_dyadic_full_tree_every_step_is_interval(self, dyadic):
        t = full_tree(2, 12)
        result = zoom_sequence(t, dyadic, (1, 0, 1), 2.0**-4)
        reference = attractor_cloud(dyadic, 2.0**-4)
        for step in result.steps:
            assert hausdorff_distance(step.miniset_cloud, reference) <= 2 * reference.epsilon
        assert result.approximant

    def test_refinement_stability_on_gw_sample(self, cantor, quadratic_law):
        # the step at a fixed node moves by at most the summed resolutions
        # when the scale is halved
        reduced = surviving_reduced(quadratic_law, 12, 6)
        node = next(w for w in reduced.nodes() if len(w) == 2)
        rho = 3.0**-3
        coarse = zoom_sequence(reduced, cantor, node, rho).steps[-1].miniset_cloud
        fine = zoom_sequence(reduced, cantor, node, rho / 2).steps[-1].miniset_cloud
        assert hausdorff_distance(coarse, fine) <= coarse.epsilon + fine.epsilon

    def test_path_leaving_tree_rejected(self, cantor, quadratic_law):
        reduced = surviving_reduced(quadratic_law, 10, 2)
        bad = None
        for w in reduced.nodes():
            for c in (0, 1):
                if len(w) < 9 and w + (c,) not in reduced:
                    bad = w + (c,)
                    break
            if bad:
                break
        if bad is None:
            pytest.skip("sample happens to be full")
        with pytest.raises(NodeNotFoundError):
            zoom_sequence(reduced, cantor, bad, 3.0**-3)


class TestZoomIdentity:
    def test_full_tree_passes_everywhere(self, cantor):
        t = full_tree(2, 10)
        verdict = check_ssc(cantor, 8)
        for word in [(0,), (1, 0), (0, 1, 1)]:
            result = check_zoom_identity_ssc(t, cantor, word, 3.0**-4, verdict=verdict)
            assert result.status == "pass"
            assert result.d_h <= 2 * 3.0**-4 * cantor.diameter_bound()

    def test_gw_sample_nodes_pass(self, cantor, quadratic_law):
        verdict = check_ssc(cantor, 8)
        reduced = surviving_reduced(quadratic_law, 12, 17)
        nodes = [w for w in reduced.nodes() if 0 < len(w) <= 3][:10]
        for word in nodes:
            result = check_zoom_identity_ssc(reduced, cantor, word, 3.0**-4, verdict=verdict)
            assert result.status == "pass", (word, result.detail)

    def test_corrupted_reference_fails(self, cantor, quadratic_law):
        verdict = check_ssc(cantor, 8)
        reduced = surviving_reduced(quadratic_law, 12, 17)
        nodes = [w for w in reduced.nodes() if len(w) == 2]
        pair = None
        for a in nodes:
            for b in nodes:
                if a != b and descendant_tree(reduced, a) != descendant_tree(reduced, b):
                    pair = (a, b)
                    break
            if pair:
                break
        assert pair is not None
        result = check_zoom_identity_ssc(
            reduced, cantor, pair[0], 3.0**-4, compare_with=pair[1], verdict=verdict
        )
        assert result.status == "fail"
        assert result.d_h > result.threshold

    def test_uncertified_separation_reported_distinctly(self, dyadic):
        t = full_tree(2, 10)
        result = check_zoom_identity_ssc(t, dyadic, (0,), 2.0**-4)
        assert result.status == "precondition_failed"
        assert "separation" in result.detail

    def test_missing_node_is_an_error(self, cantor, quadratic_law):
        reduced = surviving_reduced(quadratic_law, 10, 2)
        with pytest.raises(NodeNotFoundError):
            check_zoom_identity_ssc(reduced, cantor, (0,) * 9 + (1,), 3.0**-3)
