"""Exact dimension solvers and empirical covering-count estimators.

Solvers find the unique root of strictly decreasing scale-sum maps by
bisection (no derivatives, robustness over speed).  Estimators work on
resolution-certified clouds with grid-anchored counting: the grid is a
constant-factor surrogate for ball covers, which leaves log-log slopes
untouched, and windows touching the resolution floor are refused.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from gwflab.branching import OffspringDistribution, delta_law, extinction_probability
from gwflab.errors import (
    DegenerateFamilyError,
    DomainError,
    PreconditionError,
    ResolutionError,
)
from gwflab.geometry import PointCloud
from gwflab.rng import philox_generator
from gwflab.trees import Tree, is_family_tree, tree_section

SOLVER_TOL = 1e-12
ROUNDTRIP_TOL = 1e-9
RESOLUTION_GUARD = 4.0
MIN_SCALE_RATIO = 8.0


def _bisect_decreasing(g, hi_start: float = 1.0) -> float:
    """Root of a strictly decreasing g with g(0) >= 0."""
    lo = 0.0
    hi = hi_start
    for _ in range(80):
        if g(hi) < 0:
            break
        lo = hi
        hi *= 2.0
    else:
        raise DomainError("no sign change found; the scale sum never drops below 1")
    while hi - lo > 1e-15 * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if g(mid) >= 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def moran_dimension(ratios) -> float:
    """The unique s with sum(r_i^s) = 1 for contraction ratios r_i."""
    ratios = np.asarray(list(ratios), dtype=np.float64)
    if ratios.size == 0:
        raise DomainError("the empty system has no scale equation; callers treat it as dimension 0")
    if np.any((ratios <= 0.0) | (ratios >= 1.0)):
        raise DomainError("all ratios must lie in (0, 1)")
    if ratios.size == 1:
        return 0.0
    root = _bisect_decreasing(lambda s: np.power(ratios, s).sum() - 1.0)
    residual = abs(np.power(ratios, root).sum() - 1.0)
    if residual > SOLVER_TOL:
        raise DomainError(f"scale-sum residual {residual} above {SOLVER_TOL}")
    return float(root)


def galton_watson_dimension(ifs, law: OffspringDistribution) -> float:
    """Almost-sure dimension: the root of E[sum over the child set of r_i^s] = 1.

    Needs mean offspring >= 1 (strictly subcritical laws have no root);
    mean exactly 1 gives 0.  The almost-sure identity itself is an
    open-set-condition statement; without it the root is only an upper
    bound heuristic.
    """
    if law.alphabet_size != ifs.alphabet_size:
        raise DomainError(
            f"offspring alphabet {law.alphabet_size} != IFS alphabet {ifs.alphabet_size}"
        )
    weights = []
    ratios = []
    for subset, prob in law.atoms:
        for i in subset:
            weights.append(prob)
            ratios.append(ifs.maps[i].ratio)
    weights = np.asarray(weights)
    ratios = np.asarray(ratios)
    at_zero = weights.sum() - 1.0  # = mean offspring - 1
    if at_zero < -SOLVER_TOL:
        raise DomainError(
            f"subcritical offspring (mean {law.mean_offspring}); no dimension root"
        )
    if at_zero <= SOLVER_TOL:
        return 0.0
    root = _bisect_decreasing(lambda s: (weights * np.power(ratios, s)).sum() - 1.0)
    return float(root)


def _subset_dimension(ifs, subset: frozenset) -> float:
    if not subset:
        return 0.0
    return moran_dimension([ifs.maps[i].ratio for i in subset])


def _bitmask(subset) -> int:
    return sum(1 << i for i in subset)


@dataclass(frozen=True)
class FamilyInterval:
    """Dimension extremes over a family of alphabet subsets, ties in full."""

    min_dim: float
    max_dim: float
    argmin_sets: tuple
    argmax_sets: tuple


def _extremes_over(ifs, subsets) -> FamilyInterval:
    dims = {fs: _subset_dimension(ifs, fs) for fs in subsets}
    lo = min(dims.values())
    hi = max(dims.values())
    argmin = tuple(sorted((fs for fs, d in dims.items() if abs(d - lo) <= 1e-12), key=_bitmask))
    argmax = tuple(sorted((fs for fs, d in dims.items() if abs(d - hi) <= 1e-12), key=_bitmask))
    return FamilyInterval(float(lo), float(hi), argmin, argmax)


def offspring_extremes(ifs, law: OffspringDistribution) -> FamilyInterval:
    """Min/max sub-attractor dimension over the offspring support (empty set -> 0)."""
    return _extremes_over(ifs, law.support())


def family_interval(ifs, family) -> FamilyInterval:
    """Dimension interval attainable by trees with child sets in the family.

    When the empty set belongs to the family, pruning finite branches
    replaces the family by the non-empty down-closure of its members;
    the closure contains singletons, so the lower endpoint is 0.
    """
    family = [frozenset(a) for a in family]
    if not family:
        raise DomainError("the family must be non-empty")
    if all(not a for a in family):
        raise DegenerateFamilyError(
            "a family containing only the empty set admits no infinite tree"
        )
    if any(not a for a in family):
        closure = set()
        for b in family:
            members = sorted(b)
            for mask in range(1, 1 << len(members)):
                closure.add(frozenset(members[i] for i in range(len(members)) if mask >> i & 1))
        family = sorted(closure, key=_bitmask)
    return _extremes_over(ifs, family)


def _mixture_law(alphabet_size: int, a_min: frozenset, a_max: frozenset, t: float) -> OffspringDistribution:
    if t <= 0.0:
        return delta_law(alphabet_size, a_max)
    if t >= 1.0:
        return delta_law(alphabet_size, a_min)
    return OffspringDistribution(alphabet_size, [(a_min, t), (a_max, 1.0 - t)])


def offspring_for_target(ifs, family, target: float) -> OffspringDistribution:
    """Two-atom offspring law whose almost-sure dimension hits the target.

    Mixes the family's extreme subsets (canonical first on ties); the
    mixture dimension is continuous and monotone in the weight, so
    bisection lands within 1e-9 of any target in the interval.
    """
    interval = family_interval(ifs, family)
    if not interval.min_dim - 1e-12 <= target <= interval.max_dim + 1e-12:
        raise DomainError(
            f"target {target} outside [{interval.min_dim}, {interval.max_dim}]"
        )
    a_min = interval.argmin_sets[0]
    a_max = interval.argmax_sets[0]
    if interval.max_dim - interval.min_dim <= 1e-14:
        return delta_law(ifs.alphabet_size, a_max)

    def dim_at(t: float) -> float:
        return galton_watson_dimension(ifs, _mixture_law(ifs.alphabet_size, a_min, a_max, t))

    lo, hi = 0.0, 1.0  # dimension decreases from max_dim at 0 to min_dim at 1
    best_t, best_err = 0.0, abs(interval.max_dim - target)
    if abs(interval.min_dim - target) < best_err:
        best_t, best_err = 1.0, abs(interval.min_dim - target)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        val = dim_at(mid)
        err = abs(val - target)
        if err < best_err:
            best_t, best_err = mid, err
        if err <= ROUNDTRIP_TOL / 4:
            break
        if val > target:
            lo = mid
        else:
            hi = mid
    return _mixture_law(ifs.alphabet_size, a_min, a_max, best_t)


@dataclass(frozen=True)
class DimensionReport:
    """Theoretical dimension values for one (IFS, offspring) pair."""

    almost_sure_dim: float
    min_support_dim: float
    max_support_dim: float
    argmin_sets: tuple
    argmax_sets: tuple
    extinction: float
    survival: float
    solver_residual: float

    def as_dict(self) -> dict:
        return {
            "almost_sure_dim": self.almost_sure_dim,
            "min_support_dim": self.min_support_dim,
            "max_support_dim": self.max_support_dim,
            "argmin_sets": [sorted(fs) for fs in self.argmin_sets],
            "argmax_sets": [sorted(fs) for fs in self.argmax_sets],
            "extinction": self.extinction,
            "survival": self.survival,
            "solver_residual": self.solver_residual,
        }


def dimension_report(ifs, law: OffspringDistribution) -> DimensionReport:
    delta = galton_watson_dimension(ifs, law)
    extremes = offspring_extremes(ifs, law)
    ext = extinction_probability(law)
    residual = abs(
        sum(
            p * sum(ifs.maps[i].ratio**delta for i in subset)
            for subset, p in law.atoms
        )
        - 1.0
    )
    return DimensionReport(
        almost_sure_dim=delta,
        min_support_dim=extremes.min_dim,
        max_support_dim=extremes.max_dim,
        argmin_sets=extremes.argmin_sets,
        argmax_sets=extremes.argmax_sets,
        extinction=ext.extinction,
        survival=ext.survival,
        solver_residual=float(residual),
    )


# -- covering-count estimators -----------------------------------------------


def _guard_scale(cloud: PointCloud, r: float, guard_factor: float) -> None:
    if r <= 0:
        raise DomainError(f"counting scale must be positive, got {r}")
    if r < guard_factor * cloud.epsilon:
        raise ResolutionError(
            f"scale {r} is below {guard_factor} x cloud resolution {cloud.epsilon}"
        )


def box_counts(cloud: PointCloud, r: float, guard_factor: float = RESOLUTION_GUARD) -> int:
    """Occupied cells of the origin-anchored grid of side r."""
    _guard_scale(cloud, r, guard_factor)
    cells = np.floor(cloud.points / r).astype(np.int64)
    return int(np.unique(cells, axis=0).shape[0])


def box_dim_estimate(cloud: PointCloud, rs, guard_factor: float = RESOLUTION_GUARD) -> float:
    """Least-squares slope of log N_r against log(1/r)."""
    rs = sorted(set(float(r) for r in rs))
    if len(rs) < 2:
        raise DomainError("need at least two distinct scales for a slope")
    logs = []
    counts = []
    for r in rs:
        logs.append(math.log(1.0 / r))
        counts.append(math.log(box_counts(cloud, r, guard_factor)))
    slope = np.polyfit(logs, counts, 1)[0]
    return float(slope)


def _resolve_centers(cloud: PointCloud, centers, seed: int) -> np.ndarray:
    if isinstance(centers, (int, np.integer)):
        gen = philox_generator(seed, 11)
        take = min(int(centers), len(cloud))
        idx = gen.choice(len(cloud), size=take, replace=False)
        return cloud.points[np.sort(idx)]
    return np.atleast_2d(np.asarray(centers, dtype=np.float64))


def _window_counts(tree_index: cKDTree, points: np.ndarray, centers: np.ndarray, R: float, r: float) -> np.ndarray:
    """Occupied r-cells among the points within the closed R-ball of each center."""
    counts = np.empty(len(centers), dtype=np.int64)
    neighborhoods = tree_index.query_ball_point(centers, R)
    for k, idx in enumerate(neighborhoods):
        if not idx:
            counts[k] = 0
            continue
        cells = np.floor(points[idx] / r).astype(np.int64)
        counts[k] = np.unique(cells, axis=0).shape[0]
    return counts


def _admissible_pairs(cloud, scale_pairs, guard_factor, max_R=None):
    pairs = []
    for R, r in scale_pairs:
        if r < guard_factor * cloud.epsilon:
            continue
        if R / r < MIN_SCALE_RATIO:
            continue
        if max_R is not None and R > max_R:
            continue
        pairs.append((float(R), float(r)))
    if not pairs:
        raise ResolutionError(
            "no admissible (R, r) pair: need r above the resolution guard and R/r >= 8"
        )
    return pairs


@dataclass(frozen=True)
class WindowSample:
    """One covering count: occupied r-cells within the closed R-ball at x."""

    center: tuple
    R: float
    r: float
    count: int

    @property
    def ratio(self) -> float:
        return 0.0 if self.count <= 1 else math.log(self.count) / math.log(self.R / self.r)


def window_samples(
    cloud: PointCloud,
    scale_pairs,
    centers,
    seed: int = 0,
    guard_factor: float = RESOLUTION_GUARD,
    cap_R_to_extent: bool = False,
) -> list:
    """Covering counts over sampled (center, R, r) windows.

    Scale pairs below the resolution guard or with R/r < 8 are refused;
    centers are cloud points (an integer asks for that many, drawn
    reproducibly from the cloud).
    """
    max_R = cloud.extent() if cap_R_to_extent else None
    pairs = _admissible_pairs(cloud, scale_pairs, guard_factor, max_R=max_R)
    pts = _resolve_centers(cloud, centers, seed)
    index = cKDTree(cloud.points)
    samples = []
    for R, r in pairs:
        counts = _window_counts(index, cloud.points, pts, R, r)
        for center, count in zip(pts, counts):
            samples.append(WindowSample(tuple(float(c) for c in center), R, r, int(count)))
    return samples


def assouad_estimate(
    cloud: PointCloud,
    scale_pairs,
    centers,
    seed: int = 0,
    guard_factor: float = RESOLUTION_GUARD,
) -> float:
    """Max over sampled windows of log N_r(B_R(x)) / log(R/r).

    Tracks the densest part of the cloud; single-occupancy windows
    carry no density signal and contribute nothing to the max.
    """
    samples = window_samples(cloud, scale_pairs, centers, seed, guard_factor)
    return max((s.ratio for s in samples if s.count >= 2), default=0.0)


def lower_estimate(
    cloud: PointCloud,
    scale_pairs,
    centers,
    seed: int = 0,
    guard_factor: float = RESOLUTION_GUARD,
) -> float:
    """Min over sampled windows of log N_r(B_R(x)) / log(R/r).

    Tracks the sparsest part; windows reduced to a single occupied cell
    contribute 0, and R is capped by the cloud extent so windows stay
    inside the set's own scale range.
    """
    samples = window_samples(
        cloud, scale_pairs, centers, seed, guard_factor, cap_R_to_extent=True
    )
    occupied = [s for s in samples if s.count >= 1]
    if not occupied:
        raise ResolutionError("no window produced a count")
    return min(s.ratio for s in occupied)


@dataclass(frozen=True)
class SectionCountViolation:
    rho: float
    count: int
    lower: float
    upper: float
    side: str


def section_count_check(
    tree: Tree,
    ifs,
    family,
    rhos,
    validate_family: bool = True,
    family_depth: int | None = None,
) -> list:
    """Exact generation-count bounds on tree sections.

    For a tree whose child sets stay in the family, the number of tree
    words on the section at scale rho lies in
    [rho^-min_dim, rho^-max_dim * r_min^-max_dim].  Returns the list of
    violated bounds (empty = all hold).  Validation can be bypassed to
    demonstrate that out-of-family trees do get flagged.
    """
    if validate_family and not is_family_tree(tree, family, max_depth=family_depth):
        raise PreconditionError("tree child sets leave the declared family")
    interval = family_interval(ifs, family)
    violations = []
    for rho in rhos:
        rho = float(rho)
        if not 0.0 < rho < ifs.r_min:
            raise DomainError(f"section scale {rho} outside (0, r_min={ifs.r_min})")
        count = len(tree_section(tree, ifs, rho, 1))
        lower = rho**-interval.min_dim
        upper = rho**-interval.max_dim * ifs.r_min**-interval.max_dim
        tol_lo = 1e-9 * max(1.0, lower)
        tol_hi = 1e-9 * max(1.0, upper)
        if count < lower - tol_lo:
            violations.append(SectionCountViolation(rho, count, lower, upper, "lower"))
        if count > upper + tol_hi:
            violations.append(SectionCountViolation(rho, count, lower, upper, "upper"))
    return violations
