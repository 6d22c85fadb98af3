"""Descendant-set clouds and miniset zooms along coding-tree nodes.

Zooming means blowing a node's cylinder up to unit scale with the
inverse cylinder map and windowing to the unit cube.  Under certified
strong separation, the windowed blow-up of the whole projection agrees
with the projection of the node's descendant tree, up to cloud
resolution; sequences of such windows whose tail stabilizes in the
Hausdorff metric are flagged as empirical microset approximants, never
claimed as true limit objects.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from gwflab.errors import EmptySetError, NodeNotFoundError
from gwflab.geometry import (
    EMPTY_SET,
    EmptySet,
    PointCloud,
    distance_to_unit_cube,
    hausdorff_distance,
    miniset,
)
from gwflab.similarity import SimilarityMap, check_ssc, compose_word
from gwflab.trees import Tree, _tree_scan, descendant_tree, project_tree


def descendant_cloud(tree: Tree, ifs, word, rho: float) -> PointCloud:
    """Projection of the tree rooted at a node, at resolution scale rho.

    The tree should already be reduced; nodes pruned by reduction are
    reported as missing.
    """
    word = tuple(word)
    if word not in tree:
        raise NodeNotFoundError(f"node {word} is not in the (reduced) tree")
    return project_tree(descendant_tree(tree, word), ifs, rho)


def _projected_words_and_points(tree: Tree, ifs, scale: float):
    base = ifs.base_point()
    words = []
    points = []
    for word, ratio, orth, trans in _tree_scan(tree, ifs, scale):
        words.append(word)
        if orth is None:
            points.append(trans + ratio * base)
        else:
            points.append(trans + ratio * (orth @ base))
    return words, np.asarray(points)


@dataclass(frozen=True)
class ZoomStep:
    """One magnification stage: an expanding map and its cube window."""

    node: tuple
    map: SimilarityMap
    miniset_cloud: PointCloud
    d_h_to_prev: float | None


@dataclass(frozen=True)
class ZoomSequenceResult:
    steps: tuple
    approximant: bool
    threshold: float


def zoom_sequence(
    tree: Tree,
    ifs,
    path,
    rho: float,
    band: float | None = None,
    approx_threshold: float | None = None,
) -> ZoomSequenceResult:
    """Windowed blow-ups along every prefix of a path.

    Each stage projects the tree at scale rho * r_prefix and applies the
    inverse cylinder map, so all stages share the same normalized
    resolution and their Hausdorff distances are comparable.  A tail
    distance below the threshold (default 4x the stage resolution)
    flags the sequence as an empirical microset approximant.
    """
    path = tuple(path)
    base_eps = rho * ifs.diameter_bound()
    if band is None:
        band = base_eps
    if approx_threshold is None:
        approx_threshold = 4.0 * base_eps
    steps = []
    prev_cloud = None
    for k in range(len(path) + 1):
        node = path[:k]
        if node not in tree:
            raise NodeNotFoundError(f"path prefix {node} left the (reduced) tree")
        cylinder = compose_word(ifs, node)
        psi = cylinder.inverse()
        projected = project_tree(tree, ifs, rho * cylinder.ratio)
        window = miniset(projected, psi, band=band)
        if isinstance(window, EmptySet):
            raise EmptySetError(f"zoom window at {node} misses the unit cube")
        d_h = hausdorff_distance(window, prev_cloud) if prev_cloud is not None else None
        steps.append(ZoomStep(node, psi, window, d_h))
        prev_cloud = window
    approximant = len(steps) >= 2 and steps[-1].d_h_to_prev is not None and (
        steps[-1].d_h_to_prev <= approx_threshold
    )
    return ZoomSequenceResult(tuple(steps), bool(approximant), float(approx_threshold))


@dataclass(frozen=True)
class ZoomIdentityResult:
    """Outcome of comparing a zoom window against a descendant cloud.

    status is "pass" or "fail" for the geometric comparison, or
    "precondition_failed" when separation evidence was insufficient to
    run it (reported distinctly from geometric failure).
    """

    status: str
    d_h: float | None
    threshold: float
    band: float
    detail: str


def check_zoom_identity_ssc(
    tree: Tree,
    ifs,
    word,
    rho: float,
    band: float | None = None,
    compare_with=None,
    verdict=None,
    ssc_depth: int = 8,
) -> ZoomIdentityResult:
    """Under certified strong separation, a single window suffices.

    Compares the cube window of the blown-up full projection at a node
    against the window of that node's own descendant cloud.  Both
    describe the same compact set when the cylinders are separated, so
    the clouds must agree within 2x resolution plus the band; a
    corrupted reference (some other node's descendants) must not.
    """
    word = tuple(word)
    if word not in tree:
        raise NodeNotFoundError(f"node {word} is not in the (reduced) tree")
    reference = tuple(compare_with) if compare_with is not None else word
    if reference not in tree:
        raise NodeNotFoundError(f"reference node {reference} is not in the tree")
    base_eps = rho * ifs.diameter_bound()
    if band is None:
        band = base_eps
    threshold = 2.0 * base_eps + band
    if verdict is None:
        verdict = check_ssc(ifs, ssc_depth)
    if not verdict.separated:
        return ZoomIdentityResult(
            "precondition_failed", None, threshold, band,
            f"separation not certified (verdict {verdict.kind})",
        )
    cylinder = compose_word(ifs, word)
    psi = cylinder.inverse()
    words, points = _projected_words_and_points(tree, ifs, rho * cylinder.ratio)
    mapped = psi.apply(points)
    on_path = np.array([w[: len(word)] == word for w in words])
    if not np.any(on_path):
        return ZoomIdentityResult(
            "precondition_failed", None, threshold, band,
            f"no section words continue {word}",
        )
    off_dist = distance_to_unit_cube(mapped[~on_path]) if np.any(~on_path) else np.array([np.inf])
    if off_dist.size and off_dist.min() <= band + base_eps:
        return ZoomIdentityResult(
            "precondition_failed", None, threshold, band,
            "zoom window is not separated from other cylinders at this band",
        )
    window = miniset(PointCloud(points, rho * cylinder.ratio * ifs.diameter_bound()), psi, band=band)
    if isinstance(window, EmptySet):
        return ZoomIdentityResult(
            "precondition_failed", None, threshold, band,
            f"zoom window at {word} misses the unit cube",
        )
    reference_window = miniset(
        descendant_cloud(tree, ifs, reference, rho),
        SimilarityMap.identity(ifs.ambient_dim),
        band=band,
    )
    if isinstance(reference_window, EmptySet):
        return ZoomIdentityResult(
            "precondition_failed", None, threshold, band,
            f"descendant cloud at {reference} misses the unit cube",
        )
    d_h = hausdorff_distance(window, reference_window)
    status = "pass" if d_h <= threshold else "fail"
    return ZoomIdentityResult(status, float(d_h), threshold, band, "")
