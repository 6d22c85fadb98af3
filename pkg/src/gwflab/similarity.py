"""Similarity maps, iterated function systems, sections, and separation checks.

A similarity map is x -> ratio * O x + translation with O orthogonal.
An IFS here is a finite list of contracting similarities; its attractor
is approximated by resolution-certified point clouds built over scale
sections of the symbolic space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from gwflab.errors import (
    ConfigError,
    DomainError,
    InvalidWordError,
    ResourceLimitError,
)
from gwflab.geometry import PointCloud
from gwflab.rng import philox_generator

# Tolerance for deciding that two similarity maps are the same map.
# Double-precision composition noise stays far below this at the word
# depths reachable within the section cap.
MAP_IDENTITY_TOL = 1e-9

DEFAULT_SECTION_CAP = 10**7


@dataclass(frozen=True)
class SimilarityMap:
    """x -> ratio * orthogonal @ x + translation, with ratio > 0."""

    ratio: float
    orthogonal: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        o = np.atleast_2d(np.asarray(self.orthogonal, dtype=np.float64))
        t = np.atleast_1d(np.asarray(self.translation, dtype=np.float64))
        if self.ratio <= 0 or not np.isfinite(self.ratio):
            raise DomainError(f"similarity ratio must be positive, got {self.ratio}")
        d = t.shape[0]
        if o.shape != (d, d):
            raise DomainError(f"orthogonal part has shape {o.shape}, expected ({d}, {d})")
        if np.max(np.abs(o @ o.T - np.eye(d))) > 1e-9:
            raise DomainError("orthogonal part is not orthogonal within 1e-9")
        o.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "ratio", float(self.ratio))
        object.__setattr__(self, "orthogonal", o)
        object.__setattr__(self, "translation", t)

    @property
    def dim(self) -> int:
        return self.translation.shape[0]

    @property
    def is_homothety(self) -> bool:
        return bool(np.max(np.abs(self.orthogonal - np.eye(self.dim))) <= 1e-15)

    @classmethod
    def identity(cls, dim: int) -> "SimilarityMap":
        return cls(1.0, np.eye(dim), np.zeros(dim))

    @classmethod
    def homothety(cls, ratio: float, translation) -> "SimilarityMap":
        t = np.atleast_1d(np.asarray(translation, dtype=np.float64))
        return cls(ratio, np.eye(t.shape[0]), t)

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if self.is_homothety:
            return self.ratio * pts + self.translation
        return self.ratio * (pts @ self.orthogonal.T) + self.translation

    def apply_one(self, point: np.ndarray) -> np.ndarray:
        return self.apply(point)[0]

    def compose(self, other: "SimilarityMap") -> "SimilarityMap":
        """self after other: (self o other)(x) = self(other(x))."""
        ratio = self.ratio * other.ratio
        orthogonal = self.orthogonal @ other.orthogonal
        translation = self.ratio * (self.orthogonal @ other.translation) + self.translation
        return SimilarityMap(ratio, orthogonal, translation)

    def inverse(self) -> "SimilarityMap":
        o_inv = self.orthogonal.T
        return SimilarityMap(
            1.0 / self.ratio, o_inv, -(o_inv @ self.translation) / self.ratio
        )

    def fixed_point(self) -> np.ndarray:
        """Unique fixed point; exists whenever ratio != 1."""
        if self.ratio == 1.0:
            raise DomainError("a ratio-1 similarity map has no unique fixed point")
        d = self.dim
        return np.linalg.solve(np.eye(d) - self.ratio * self.orthogonal, self.translation)

    def is_close(self, other: "SimilarityMap", tol: float = MAP_IDENTITY_TOL) -> bool:
        return (
            abs(self.ratio - other.ratio) <= tol
            and np.max(np.abs(self.orthogonal - other.orthogonal)) <= tol
            and np.max(np.abs(self.translation - other.translation)) <= tol
        )

    def rounded_key(self, decimals: int = 9) -> tuple:
        """Hashable key identifying the map up to 10^-decimals noise."""
        return (
            round(self.ratio, decimals),
            tuple(np.round(self.orthogonal, decimals).ravel().tolist()),
            tuple(np.round(self.translation, decimals).tolist()),
        )


@dataclass(frozen=True)
class Box:
    """Open axis-aligned box (lo_k, hi_k) per axis."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=np.float64))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=np.float64))
        if lo.shape != hi.shape or not np.all(lo < hi):
            raise DomainError("box needs lo < hi on every axis")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.shape[0]


class IFS:
    """Finite system of contracting similarity maps on R^d."""

    def __init__(self, maps, osc_box: Box | None = None):
        maps = list(maps)
        if not maps:
            raise DomainError("an IFS needs at least one map")
        dim = maps[0].dim
        for k, phi in enumerate(maps):
            if phi.dim != dim:
                raise DomainError(f"map {k} acts on R^{phi.dim}, expected R^{dim}")
            if not phi.ratio < 1.0:
                raise DomainError(f"map {k} has ratio {phi.ratio}; IFS maps must contract")
        if osc_box is not None and osc_box.dim != dim:
            raise DomainError("osc_box dimension does not match the maps")
        self.maps = tuple(maps)
        self.ambient_dim = dim
        self.osc_box = osc_box
        self.ratios = np.array([phi.ratio for phi in maps])
        self.r_min = float(self.ratios.min())
        self.r_max = float(self.ratios.max())
        self.is_homothety = all(phi.is_homothety for phi in maps)
        self._diam_upper = None

    @property
    def alphabet_size(self) -> int:
        return len(self.maps)

    @property
    def bounding_radius(self) -> float:
        """Radius R with attractor inside the closed ball B(0, R).

        Standard contraction bound: ||phi_i(x)|| <= r_max R + max||t||
        <= R once R = max||t|| / (1 - r_max), so the ball is invariant
        and contains the attractor.
        """
        top = max(float(np.linalg.norm(phi.translation)) for phi in self.maps)
        return top / (1.0 - self.r_max)

    def base_point(self) -> np.ndarray:
        """Coding base point: the fixed point of the first map.

        Any base point yields the same coding in the limit; the fixed
        point of map 0 makes single-map sub-system clouds exact.
        """
        return self.maps[0].fixed_point()

    def diameter_bound(self) -> float:
        """Certified upper bound on the attractor diameter (cached).

        Starts from the crude ball bound 2 * bounding_radius and
        refines it through a coarse cloud: the true diameter is at most
        the cloud diameter plus twice the cloud's certified resolution.
        Every cylinder at scale rho then has diameter at most
        rho * diameter_bound, which is what cloud epsilons record.
        """
        if self._diam_upper is None:
            crude = 2.0 * self.bounding_radius
            if crude == 0.0:
                self._diam_upper = 0.0
            else:
                k = 1
                while self.alphabet_size ** (k + 1) <= 4096 and self.r_max ** (k + 1) > 1e-12:
                    k += 1
                sigma = self.r_max**k
                pts = _cloud_from_scan(self, sigma, 10**6)
                coarse = _max_pairwise_distance(pts)
                self._diam_upper = float(min(crude, coarse + 2.0 * sigma * crude))
        return self._diam_upper

    def sub_system(self, subset) -> "IFS":
        subset = sorted(set(subset))
        if not subset:
            raise DomainError("cannot form the sub-IFS of the empty subset")
        bad = [i for i in subset if not 0 <= i < self.alphabet_size]
        if bad:
            raise InvalidWordError(f"subset indices {bad} outside alphabet of size {self.alphabet_size}")
        return IFS([self.maps[i] for i in subset])


def compose_word(ifs: IFS, word) -> SimilarityMap:
    """Left-to-right composition of the maps named by a word."""
    composed = SimilarityMap.identity(ifs.ambient_dim)
    for symbol in word:
        if not 0 <= symbol < ifs.alphabet_size:
            raise InvalidWordError(
                f"symbol {symbol} outside alphabet of size {ifs.alphabet_size}"
            )
        composed = composed.compose(ifs.maps[symbol])
    return composed


@dataclass(frozen=True)
class Section:
    """Antichain of words whose composed ratio first drops to <= scale."""

    scale: float
    words: tuple
    ratios: np.ndarray

    def __len__(self):
        return len(self.words)


def _scan_section(ifs: IFS, scale: float, cap: int, want_maps: bool):
    """Depth-first scan emitting (word, ratio[, orthogonal, translation]).

    Children are pushed in reverse alphabet order so words are emitted
    in lexicographic order regardless of worker layout.
    """
    if not 0.0 < scale < 1.0:
        raise DomainError(f"section scale must lie in (0, 1), got {scale}")
    dim = ifs.ambient_dim
    eye = np.eye(dim)
    homothety = ifs.is_homothety
    root_t = np.zeros(dim)
    stack = [((), 1.0, None if homothety else eye, root_t)]
    emitted = 0
    while stack:
        word, ratio, orth, trans = stack.pop()
        if ratio <= scale:
            emitted += 1
            if emitted > cap:
                raise ResourceLimitError(
                    f"section at scale {scale} exceeds the cap of {cap} words"
                )
            if want_maps:
                yield word, ratio, orth, trans
            else:
                yield word, ratio
            continue
        for symbol in range(ifs.alphabet_size - 1, -1, -1):
            phi = ifs.maps[symbol]
            child_ratio = ratio * phi.ratio
            if homothety:
                child_orth = None
                child_trans = trans + ratio * phi.translation
            else:
                child_orth = orth @ phi.orthogonal
                child_trans = trans + ratio * (orth @ phi.translation)
            stack.append((word + (symbol,), child_ratio, child_orth, child_trans))


def build_section(ifs: IFS, rho: float, cap: int = DEFAULT_SECTION_CAP) -> Section:
    """Words whose ratio first drops to <= rho; cylinders tile the symbol space.

    Every emitted word w satisfies rho * r_min < r_w <= rho.  The scale
    may be any value in (0, 1); continuation sections at scales above
    r_min arise when splitting a section across tree generations.
    """
    words = []
    ratios = []
    for word, ratio in _scan_section(ifs, rho, cap, want_maps=False):
        words.append(word)
        ratios.append(ratio)
    return Section(float(rho), tuple(words), np.asarray(ratios))


def _cloud_from_scan(ifs: IFS, scale: float, cap: int) -> np.ndarray:
    base = ifs.base_point()
    points = []
    for _, ratio, orth, trans in _scan_section(ifs, scale, cap, want_maps=True):
        if orth is None:
            points.append(trans + ratio * base)
        else:
            points.append(trans + ratio * (orth @ base))
    return np.asarray(points)


def _max_pairwise_distance(pts: np.ndarray) -> float:
    best = 0.0
    for i in range(0, pts.shape[0], 512):
        block = pts[i : i + 512]
        d2 = np.sum((block[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
        best = max(best, float(d2.max()))
    return float(np.sqrt(best))


def attractor_cloud(ifs: IFS, rho: float, cap: int = DEFAULT_SECTION_CAP) -> PointCloud:
    """One representative point per section word.

    Each point lies inside its cylinder, and every cylinder at scale
    rho has diameter at most rho * diameter_bound, which certifies the
    cloud resolution.
    """
    epsilon = rho * ifs.diameter_bound()
    return PointCloud(_cloud_from_scan(ifs, rho, cap), epsilon)


def restricted_attractor_cloud(
    ifs: IFS, subset, rho: float, cap: int = DEFAULT_SECTION_CAP
) -> PointCloud:
    """Cloud of the sub-system attractor spanned by a subset of the alphabet."""
    sub = ifs.sub_system(subset)
    return attractor_cloud(sub, rho, cap)


@dataclass(frozen=True)
class SeparationVerdict:
    """Three-valued separation verdict with the evidence that produced it.

    kind is one of "certified_separated", "certified_overlap",
    "undecided".  gap is the smallest distance observed between two
    distinct level-1 cylinder clouds; epsilon is the resolution of
    those clouds at the evidence depth.  Numerical geometry cannot
    certify a zero gap, hence the undecided case.
    """

    kind: str
    gap: float
    depth: int
    epsilon: float
    tau: float | None = None

    @property
    def separated(self) -> bool:
        return self.kind == "certified_separated"


def _min_gap_between(a: np.ndarray, b: np.ndarray) -> float:
    best = np.inf
    for i in range(a.shape[0]):
        d2 = np.sum((b - a[i]) ** 2, axis=1).min()
        if d2 < best:
            best = d2
    return float(np.sqrt(best))


def check_ssc(ifs: IFS, depth: int, cap: int = 2 * 10**6) -> SeparationVerdict:
    """Certify pairwise-disjoint level-1 cylinders at a finite depth.

    Separation is certified when the observed inter-cylinder gap
    exceeds twice the cloud resolution at the evidence depth; overlap
    is certified only through identical cylinder maps.  On certified
    separation, tau = sqrt(d) / (gap * r_min) is attached: a cube of
    side s small enough meets at most one cylinder on the section at
    scale s / tau.
    """
    if depth < 1:
        raise DomainError("depth must be at least 1")
    if ifs.alphabet_size == 1:
        return SeparationVerdict("certified_separated", np.inf, depth, 0.0, tau=None)
    for i in range(ifs.alphabet_size):
        for j in range(i + 1, ifs.alphabet_size):
            if ifs.maps[i].is_close(ifs.maps[j]):
                return SeparationVerdict("certified_overlap", 0.0, 1, 0.0)
    total = ifs.alphabet_size**depth
    if total > cap:
        raise ResourceLimitError(
            f"depth {depth} needs {total} cylinder points, above the cap of {cap}"
        )
    if depth > 1:
        inner = _cloud_from_scan(ifs, ifs.r_max ** (depth - 1), cap)
    else:
        inner = ifs.base_point()[None, :]
    clouds = [ifs.maps[i].apply(inner) for i in range(ifs.alphabet_size)]
    epsilon = ifs.r_max**depth * ifs.diameter_bound()
    gap = np.inf
    for i in range(len(clouds)):
        for j in range(i + 1, len(clouds)):
            gap = min(gap, _min_gap_between(clouds[i], clouds[j]))
    if gap > 2.0 * epsilon:
        tau = np.sqrt(ifs.ambient_dim) / (gap * ifs.r_min)
        return SeparationVerdict("certified_separated", gap, depth, epsilon, tau=tau)
    return SeparationVerdict("undecided", gap, depth, epsilon)


@dataclass(frozen=True)
class OscReport:
    """Outcome of checking a declared open-set box."""

    passed: bool
    heuristic: bool
    containment_failures: tuple
    overlapping_pairs: tuple


def _sample_box_points(box: Box, per_axis: int) -> np.ndarray:
    axes = [
        np.linspace(lo, hi, per_axis + 2)[1:-1]
        for lo, hi in zip(box.lo, box.hi)
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def check_declared_osc(ifs: IFS, box: Box | None = None) -> OscReport:
    """Check that the declared open box is invariant with disjoint images.

    Homothety systems get an exact endpoint check (images of an
    axis-aligned box are axis-aligned boxes).  Systems with nontrivial
    orthogonal parts fall back to a sampled check and are flagged
    heuristic.
    """
    if box is None:
        box = ifs.osc_box
    if box is None:
        raise DomainError("no open-set box declared or supplied")
    tol = 1e-12 * float(np.max(box.hi - box.lo))
    containment_failures = []
    overlapping_pairs = []
    if ifs.is_homothety:
        los = np.array([phi.ratio * box.lo + phi.translation for phi in ifs.maps])
        his = np.array([phi.ratio * box.hi + phi.translation for phi in ifs.maps])
        for k in range(ifs.alphabet_size):
            if np.any(los[k] < box.lo - tol) or np.any(his[k] > box.hi + tol):
                containment_failures.append(k)
        for i in range(ifs.alphabet_size):
            for j in range(i + 1, ifs.alphabet_size):
                # open boxes overlap iff they overlap with positive width on every axis
                if np.all(np.minimum(his[i], his[j]) > np.maximum(los[i], los[j]) + tol):
                    overlapping_pairs.append((i, j))
        heuristic = False
    else:
        per_axis = max(2, int(round(400 ** (1.0 / box.dim))))
        samples = _sample_box_points(box, per_axis)
        images = [phi.apply(samples) for phi in ifs.maps]
        for k, img in enumerate(images):
            inside = np.all((img >= box.lo - tol) & (img <= box.hi + tol), axis=1)
            if not np.all(inside):
                containment_failures.append(k)
        inv_maps = [phi.inverse() for phi in ifs.maps]
        for i in range(ifs.alphabet_size):
            for j in range(i + 1, ifs.alphabet_size):
                back = inv_maps[j].apply(images[i])
                strictly_inside = np.all(
                    (back > box.lo + tol) & (back < box.hi - tol), axis=1
                )
                if np.any(strictly_inside):
                    overlapping_pairs.append((i, j))
        heuristic = True
    passed = not containment_failures and not overlapping_pairs
    return OscReport(passed, heuristic, tuple(containment_failures), tuple(overlapping_pairs))


def wsc_profile(
    ifs: IFS,
    rho_list,
    ball_samples: int = 64,
    seed: int = 0,
    base_scale: float | None = None,
    cap: int = DEFAULT_SECTION_CAP,
) -> dict:
    """Max distinct-cylinder count met by sampled balls, per scale.

    For each rho, sample ball centers on the attractor and count the
    cylinder maps on the section at scale rho whose sampled cylinder
    points enter the open ball of radius rho; identical maps are
    counted once.  Counts are certified lower bounds per ball (cylinder
    points lie inside their cylinders), and the max over balls is the
    empirical profile value.  Bounded profiles are evidence for, never
    proof of, weak separation.
    """
    if base_scale is None:
        base_scale = ifs.r_min**2
    base = attractor_cloud(ifs, base_scale, cap)
    profile = {}
    for index, rho in enumerate(rho_list):
        if not 0.0 < rho < 1.0:
            raise DomainError(f"profile scale must lie in (0, 1), got {rho}")
        by_map: dict[tuple, np.ndarray] = {}
        for word, ratio, orth, trans in _scan_section(ifs, rho, cap, want_maps=True):
            phi = SimilarityMap(
                ratio,
                np.eye(ifs.ambient_dim) if orth is None else orth,
                trans,
            )
            key = phi.rounded_key()
            if key not in by_map:
                by_map[key] = phi.apply(base.points)
        centers_cloud = attractor_cloud(ifs, max(rho, base_scale), cap)
        gen = philox_generator(seed, index)
        take = min(ball_samples, len(centers_cloud))
        chosen = gen.choice(len(centers_cloud), size=take, replace=False)
        centers = centers_cloud.points[chosen]
        best = 0
        for center in centers:
            count = 0
            for pts in by_map.values():
                if np.sum((pts - center) ** 2, axis=1).min() < rho * rho:
                    count += 1
            best = max(best, count)
        profile[float(rho)] = best
    return profile


def ifs_from_json(obj, path: str = "ifs") -> IFS:
    """Parse the IFS JSON schema, reporting the offending path on errors."""
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected an object")
    if "dim" not in obj or "maps" not in obj:
        raise ConfigError(f"{path}: needs 'dim' and 'maps'")
    dim = obj["dim"]
    if not isinstance(dim, int) or dim < 1:
        raise ConfigError(f"{path}.dim: expected a positive integer, got {dim!r}")
    raw_maps = obj["maps"]
    if not isinstance(raw_maps, list) or not raw_maps:
        raise ConfigError(f"{path}.maps: expected a non-empty list")
    maps = []
    for k, raw in enumerate(raw_maps):
        where = f"{path}.maps[{k}]"
        if not isinstance(raw, dict):
            raise ConfigError(f"{where}: expected an object")
        try:
            ratio = float(raw["ratio"])
        except (KeyError, TypeError, ValueError):
            raise ConfigError(f"{where}.ratio: expected a real number") from None
        translation = raw.get("translation")
        if not isinstance(translation, list) or len(translation) != dim:
            raise ConfigError(f"{where}.translation: expected a list of {dim} reals")
        orth = raw.get("orthogonal", "identity")
        if orth == "identity":
            orthogonal = np.eye(dim)
        else:
            orthogonal = np.asarray(orth, dtype=np.float64)
            if orthogonal.shape != (dim, dim):
                raise ConfigError(f"{where}.orthogonal: expected 'identity' or a {dim}x{dim} matrix")
        try:
            maps.append(SimilarityMap(ratio, orthogonal, np.asarray(translation, dtype=np.float64)))
        except DomainError as err:
            raise ConfigError(f"{where}: {err}") from None
        if not ratio < 1.0:
            raise ConfigError(f"{where}.ratio: IFS maps must have ratio in (0, 1), got {ratio}")
    osc_box = None
    if obj.get("osc_box") is not None:
        raw_box = obj["osc_box"]
        where = f"{path}.osc_box"
        if not isinstance(raw_box, dict) or "lo" not in raw_box or "hi" not in raw_box:
            raise ConfigError(f"{where}: expected an object with 'lo' and 'hi'")
        try:
            osc_box = Box(np.asarray(raw_box["lo"], dtype=np.float64), np.asarray(raw_box["hi"], dtype=np.float64))
        except (DomainError, TypeError, ValueError) as err:
            raise ConfigError(f"{where}: {err}") from None
        if osc_box.dim != dim:
            raise ConfigError(f"{where}: box dimension {osc_box.dim} does not match dim {dim}")
    try:
        return IFS(maps, osc_box=osc_box)
    except DomainError as err:
        raise ConfigError(f"{path}: {err}") from None


def ifs_to_json(ifs: IFS) -> dict:
    obj = {
        "dim": ifs.ambient_dim,
        "maps": [
            {
                "ratio": phi.ratio,
                "orthogonal": "identity" if phi.is_homothety else phi.orthogonal.tolist(),
                "translation": phi.translation.tolist(),
            }
            for phi in ifs.maps
        ],
    }
    if ifs.osc_box is not None:
        obj["osc_box"] = {"lo": ifs.osc_box.lo.tolist(), "hi": ifs.osc_box.hi.tolist()}
    return obj


def cantor_ifs() -> IFS:
    """Middle-thirds system {x/3, x/3 + 2/3} with the unit-interval box."""
    return IFS(
        [SimilarityMap.homothety(1.0 / 3.0, [0.0]), SimilarityMap.homothety(1.0 / 3.0, [2.0 / 3.0])],
        osc_box=Box([0.0], [1.0]),
    )


def grid_ifs(base: int, dim: int) -> IFS:
    """The base^dim subdivision of the unit cube into equal subcubes."""
    if base < 2 or dim < 1:
        raise DomainError("grid systems need base >= 2 and dim >= 1")
    offsets = np.stack(
        np.meshgrid(*[np.arange(base)] * dim, indexing="ij"), axis=-1
    ).reshape(-1, dim)
    maps = [SimilarityMap.homothety(1.0 / base, off / base) for off in offsets]
    return IFS(maps, osc_box=Box(np.zeros(dim), np.ones(dim)))
