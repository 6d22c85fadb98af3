"""Resolution-certified point clouds and the Hausdorff metric.

A PointCloud stands for a non-empty compact set at a certified
resolution: the true set is within Hausdorff distance ``epsilon`` of
the stored points.  The empty compact set is deliberately not a cloud;
operations that can produce it return the EMPTY_SET marker instead.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from gwflab.errors import DomainError, EmptySetError


class EmptySet:
    """Typed marker for the empty compact set (not representable as a cloud)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "EMPTY_SET"


EMPTY_SET = EmptySet()


@dataclass(frozen=True)
class PointCloud:
    """Finite point set in R^d with certified resolution epsilon.

    The represented compact set lies within Hausdorff distance
    ``epsilon`` of ``points``.
    """

    points: np.ndarray
    epsilon: float
    ambient_dim: int = field(init=False)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise DomainError("a point cloud needs at least one point")
        if not np.all(np.isfinite(pts)):
            raise DomainError("point cloud coordinates must be finite")
        if not np.isfinite(self.epsilon) or self.epsilon < 0:
            raise DomainError(f"epsilon must be a finite non-negative real, got {self.epsilon}")
        pts = np.ascontiguousarray(pts)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "ambient_dim", pts.shape[1])

    def __len__(self):
        return self.points.shape[0]

    def transform(self, similarity) -> "PointCloud":
        """Image cloud under a similarity map; resolution scales with the ratio."""
        return PointCloud(similarity.apply(self.points), similarity.ratio * self.epsilon)

    def extent(self) -> float:
        """Largest per-axis spread; a lower bound on the diameter."""
        return float(np.max(self.points.max(axis=0) - self.points.min(axis=0)))


def _directed_sq_min_brute(a_pts: np.ndarray, b_pts: np.ndarray) -> np.ndarray:
    """min_b ||a-b||^2 for every a, by the full |A| x |B| scan."""
    out = np.empty(a_pts.shape[0])
    for i in range(a_pts.shape[0]):
        out[i] = np.sum((b_pts - a_pts[i]) ** 2, axis=1).min()
    return out


class _GridIndex:
    """Uniform spatial hash over one point set, for exact nearest lookups."""

    def __init__(self, pts: np.ndarray):
        self.pts = pts
        span = float(np.max(pts.max(axis=0) - pts.min(axis=0))) if len(pts) > 1 else 0.0
        d = pts.shape[1]
        target = max(1, round(len(pts) ** (1.0 / d)))
        self.h = span / target if span > 0 else 1.0
        cells = np.floor(pts / self.h).astype(np.int64)
        grouped: dict[tuple, list] = {}
        for idx, cell in enumerate(map(tuple, cells.tolist())):
            grouped.setdefault(cell, []).append(idx)
        self.buckets = {cell: np.asarray(ix) for cell, ix in grouped.items()}

    def _ring(self, center: tuple, radius: int):
        d = len(center)
        if radius == 0:
            yield center
            return
        for offset in itertools.product(range(-radius, radius + 1), repeat=d):
            if max(abs(o) for o in offset) == radius:
                yield tuple(c + o for c, o in zip(center, offset))

    def sq_min_to(self, a: np.ndarray) -> float:
        """Exact min squared distance from a to the indexed set."""
        center = tuple(np.floor(a / self.h).astype(np.int64).tolist())
        best = float(np.sum((self.pts[0] - a) ** 2))
        radius = 0
        while True:
            # any unvisited cell is at Chebyshev ring >= radius, hence at
            # coordinate distance > (radius - 1) * h from a
            if radius >= 1 and ((radius - 1) * self.h) ** 2 > best:
                break
            for cell in self._ring(center, radius):
                ix = self.buckets.get(cell)
                if ix is None:
                    continue
                d2 = np.sum((self.pts[ix] - a) ** 2, axis=1).min()
                if d2 < best:
                    best = float(d2)
            radius += 1
        return best


def _directed_sq_min_grid(a_pts: np.ndarray, b_pts: np.ndarray) -> np.ndarray:
    index = _GridIndex(b_pts)
    return np.asarray([index.sq_min_to(a) for a in a_pts])


def hausdorff_distance(a: PointCloud, b: PointCloud, method: str = "auto") -> float:
    """Exact two-sided Hausdorff distance between two finite clouds.

    The grid-bucketed path prunes candidates but evaluates the same
    squared-distance expression as the brute-force scan, so the two
    methods agree bit for bit.
    """
    if a.ambient_dim != b.ambient_dim:
        raise DomainError(
            f"ambient dimension mismatch: {a.ambient_dim} vs {b.ambient_dim}"
        )
    if method == "auto":
        method = "grid" if len(a) * len(b) > 16384 else "brute"
    if method == "brute":
        directed = _directed_sq_min_brute
    elif method == "grid":
        directed = _directed_sq_min_grid
    else:
        raise DomainError(f"unknown method {method!r}")
    forward = directed(a.points, b.points).max()
    backward = directed(b.points, a.points).max()
    return float(np.sqrt(max(forward, backward)))


def distance_to_unit_cube(points: np.ndarray) -> np.ndarray:
    """Euclidean distance from each point to the closed cube [0, 1]^d."""
    pts = np.atleast_2d(points)
    outside = np.maximum(np.maximum(-pts, pts - 1.0), 0.0)
    return np.sqrt(np.sum(outside**2, axis=1))


def miniset(cloud: PointCloud, expanding_map, band: float | None = None):
    """Window a blown-up cloud to the unit cube.

    Keeps the points of ``expanding_map(cloud)`` lying within ``band``
    of Q = [0,1]^d.  The band (default: the transformed resolution)
    absorbs open/closed boundary ambiguity: at cloud scale a point on
    the boundary of Q cannot be told apart from one just outside.
    Returns EMPTY_SET when nothing lands near the cube.
    """
    if expanding_map.ratio < 1.0:
        raise DomainError(
            f"miniset windows use expanding maps; got ratio {expanding_map.ratio}"
        )
    mapped = expanding_map.apply(cloud.points)
    mapped_eps = expanding_map.ratio * cloud.epsilon
    if band is None:
        band = mapped_eps
    if band < 0:
        raise DomainError("band must be non-negative")
    keep = distance_to_unit_cube(mapped) <= band
    if not np.any(keep):
        return EMPTY_SET
    return PointCloud(mapped[keep], mapped_eps + band)


def require_cloud(value, context: str) -> PointCloud:
    """Unwrap a cloud-or-EMPTY_SET value, raising on the empty set."""
    if isinstance(value, EmptySet):
        raise EmptySetError(f"{context} produced the empty set")
    return value
