"""Subset-valued offspring laws and Galton-Watson tree sampling.

Offspring distributions assign probabilities to subsets of the
alphabet.  Trees are grown by drawing each node's child set
independently; every draw is a pure function of (seed, node word), so
samples are bit-identical across platforms and worker schedules.
Population-level statistics (generation sizes, survival) are simulated
through the induced integer branching process, which has the same law
as counting nodes of the sampled trees and stays tractable at depths
where whole trees would not.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from gwflab.errors import (
    ConfigError,
    DomainError,
    ResourceLimitError,
    SamplingError,
)
from gwflab.rng import child_state, derive_key, philox_generator, root_state, uniform_from_state
from gwflab.trees import Tree
from gwflab.util import worker_count

DEFAULT_TREE_NODE_CAP = 10**7
DEFAULT_MAX_ATTEMPTS = 10**6


def _bitmask(subset) -> int:
    return sum(1 << i for i in subset)


class OffspringDistribution:
    """Probability atoms over subsets of the alphabet {0, ..., n-1}."""

    def __init__(self, alphabet_size: int, atoms):
        if alphabet_size < 1:
            raise DomainError("alphabet_size must be at least 1")
        seen = {}
        for subset, prob in atoms:
            fs = frozenset(subset)
            if any(not 0 <= i < alphabet_size for i in fs):
                raise DomainError(f"subset {sorted(fs)} outside alphabet of size {alphabet_size}")
            if fs in seen:
                raise DomainError(f"duplicate atom for subset {sorted(fs)}")
            prob = float(prob)
            if prob < 0 or not np.isfinite(prob):
                raise DomainError(f"atom probability {prob} is not in [0, 1]")
            seen[fs] = prob
        total = math.fsum(seen.values())
        if abs(total - 1.0) > 1e-12:
            raise DomainError(f"atom probabilities sum to {total!r}, not 1 within 1e-12")
        self.alphabet_size = alphabet_size
        # canonical order: ascending bitmask
        self.atoms = tuple(sorted(seen.items(), key=lambda kv: _bitmask(kv[0])))
        self._subsets = tuple(fs for fs, _ in self.atoms)
        self._probs = np.array([p for _, p in self.atoms])
        self._members = tuple(tuple(sorted(fs)) for fs in self._subsets)
        self._cum = np.cumsum(self._probs).tolist()
        self.mean_offspring = float(sum(p * len(fs) for fs, p in self.atoms))

    @property
    def is_supercritical(self) -> bool:
        return self.mean_offspring > 1.0

    @property
    def p_empty(self) -> float:
        for fs, p in self.atoms:
            if not fs:
                return p
        return 0.0

    def support(self) -> tuple:
        return tuple(fs for fs, p in self.atoms if p > 0)

    def prob_of(self, subset) -> float:
        fs = frozenset(subset)
        for s, p in self.atoms:
            if s == fs:
                return p
        return 0.0

    def size_distribution(self) -> dict:
        sizes: dict[int, float] = {}
        for fs, p in self.atoms:
            sizes[len(fs)] = sizes.get(len(fs), 0.0) + p
        return sizes

    def generating_function(self, s: float) -> float:
        return float(sum(p * s ** len(fs) for fs, p in self.atoms))

    def gf_derivative(self, s: float) -> float:
        return float(sum(p * len(fs) * s ** (len(fs) - 1) for fs, p in self.atoms if fs))

    def draw_subset(self, u: float) -> frozenset:
        """Inverse-CDF draw from a single uniform; atoms in canonical order."""
        idx = bisect_right(self._cum, u)
        if idx >= len(self._subsets):
            idx = len(self._subsets) - 1
        return self._subsets[idx]

    def __eq__(self, other):
        if not isinstance(other, OffspringDistribution):
            return NotImplemented
        return self.alphabet_size == other.alphabet_size and self.atoms == other.atoms

    def __repr__(self):
        parts = ", ".join(f"{sorted(fs)}: {p:.6g}" for fs, p in self.atoms)
        return f"OffspringDistribution({{{parts}}})"


def delta_law(alphabet_size: int, subset) -> OffspringDistribution:
    """Deterministic offspring: always the given subset."""
    return OffspringDistribution(alphabet_size, [(frozenset(subset), 1.0)])


def uniform_law(alphabet_size: int, subsets) -> OffspringDistribution:
    subsets = list(subsets)
    return OffspringDistribution(
        alphabet_size, [(fs, 1.0 / len(subsets)) for fs in subsets]
    )


def binomial_law(alphabet_size: int, p: float) -> OffspringDistribution:
    """Fractal-percolation offspring: each symbol joins independently with probability p."""
    if not 0.0 < p < 1.0:
        raise DomainError(f"inclusion probability must be in (0, 1), got {p}")
    if alphabet_size > 20:
        raise ResourceLimitError(
            f"expanding the percolation law over 2^{alphabet_size} subsets is above the cap"
        )
    atoms = []
    for mask in range(1 << alphabet_size):
        subset = frozenset(i for i in range(alphabet_size) if mask >> i & 1)
        atoms.append((subset, p ** len(subset) * (1 - p) ** (alphabet_size - len(subset))))
    return OffspringDistribution(alphabet_size, atoms)


def offspring_from_json(obj, alphabet_size: int, path: str = "offspring") -> OffspringDistribution:
    """Parse the offspring JSON schema ('atoms' list or 'binomial_p' shorthand)."""
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected an object")
    if "binomial_p" in obj:
        try:
            return binomial_law(alphabet_size, float(obj["binomial_p"]))
        except (DomainError, TypeError, ValueError) as err:
            raise ConfigError(f"{path}.binomial_p: {err}") from None
    if "atoms" not in obj or not isinstance(obj["atoms"], list):
        raise ConfigError(f"{path}: needs 'atoms' (list) or 'binomial_p'")
    atoms = []
    for k, raw in enumerate(obj["atoms"]):
        where = f"{path}.atoms[{k}]"
        if not isinstance(raw, dict) or "subset" not in raw or "prob" not in raw:
            raise ConfigError(f"{where}: expected an object with 'subset' and 'prob'")
        if not isinstance(raw["subset"], list):
            raise ConfigError(f"{where}.subset: expected a list of symbol indices")
        atoms.append((frozenset(raw["subset"]), raw["prob"]))
    try:
        return OffspringDistribution(alphabet_size, atoms)
    except DomainError as err:
        raise ConfigError(f"{path}: {err}") from None


def offspring_to_json(law: OffspringDistribution) -> dict:
    return {
        "atoms": [
            {"subset": sorted(fs), "prob": p} for fs, p in law.atoms
        ]
    }


@dataclass(frozen=True)
class ExtinctionReport:
    """Smallest fixed point of the offspring generating function on [0, 1]."""

    extinction: float
    survival: float
    iterations: int
    residual: float


def extinction_probability(law: OffspringDistribution) -> ExtinctionReport:
    """Monotone fixed-point iteration from 0, polished by Newton steps.

    The generating function is increasing and convex on [0, 1], so the
    iterates climb monotonically to the smallest fixed point.
    """
    sizes = law.size_distribution()
    if sizes.get(1, 0.0) == 1.0:
        # single-line trees never die
        return ExtinctionReport(0.0, 1.0, 0, 0.0)
    if law.mean_offspring <= 1.0:
        return ExtinctionReport(1.0, 0.0, 0, abs(law.generating_function(1.0) - 1.0))
    q = 0.0
    iterations = 0
    while iterations < 10**6:
        nxt = law.generating_function(q)
        iterations += 1
        if abs(nxt - q) < 1e-14:
            q = nxt
            break
        q = nxt
    for _ in range(4):
        slope = law.gf_derivative(q) - 1.0
        if slope == 0.0:
            break
        q = q - (law.generating_function(q) - q) / slope
    q = min(max(q, 0.0), 1.0)
    residual = abs(law.generating_function(q) - q)
    return ExtinctionReport(float(q), float(1.0 - q), iterations, float(residual))


def extinction_by_generation(law: OffspringDistribution, n: int) -> np.ndarray:
    """q_k = P[tree dies by generation k]; q_0 = 0, q_{k+1} = f(q_k)."""
    out = np.empty(n + 1)
    out[0] = 0.0
    for k in range(n):
        out[k + 1] = law.generating_function(out[k])
    return out


def sample_tree(
    law: OffspringDistribution,
    horizon: int,
    seed: int,
    cap: int = DEFAULT_TREE_NODE_CAP,
) -> Tree:
    """Grow one tree to the horizon; child sets keyed by (seed, node word)."""
    if horizon < 1:
        raise DomainError("horizon must be at least 1")
    children: dict[tuple, tuple] = {}
    frontier = [((), root_state(seed))]
    count = 0
    for depth in range(horizon):
        nxt = []
        for word, state in frontier:
            subset = law.draw_subset(uniform_from_state(state))
            kids = tuple(sorted(subset))
            children[word] = kids
            count += 1
            if count > cap:
                raise ResourceLimitError(f"tree exceeds the node cap of {cap}")
            for symbol in kids:
                nxt.append((word + (symbol,), child_state(state, symbol)))
        frontier = nxt
    for word, _ in frontier:
        children[word] = ()
    if not children:
        children[()] = ()
    return Tree(law.alphabet_size, horizon, children)


def sample_surviving(
    law: OffspringDistribution,
    horizon: int,
    seed: int,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
    cap: int = DEFAULT_TREE_NODE_CAP,
):
    """Rejection-sample until a tree reaches the horizon.

    Survival to the horizon is the finite surrogate for conditioning on
    non-extinction; the bias is the gap between the extinction
    probability and its depth-limited recursion value.  Returns
    (tree, attempts).
    """
    if not law.is_supercritical:
        raise DomainError("survival sampling needs a supercritical offspring law")
    for attempt in range(1, max_attempts + 1):
        tree = sample_tree(law, horizon, derive_key(seed, attempt), cap=cap)
        if tree.height == horizon:
            return tree, attempt
    raise SamplingError(f"no surviving tree in {max_attempts} attempts")


def reduced_offspring(law: OffspringDistribution) -> OffspringDistribution:
    """Offspring law of the leafless reduction of a surviving tree.

    Conditioned on survival, pruning all finite lines of descent leaves
    a tree whose child sets are again i.i.d., with each original child
    retained independently with the survival probability and the result
    conditioned on being non-empty.  When no atom is empty the tree
    already has no leaves and the law is returned unchanged.
    """
    if not law.is_supercritical:
        raise DomainError("the reduced law is defined for supercritical offspring only")
    if law.p_empty == 0.0:
        return law
    report = extinction_probability(law)
    p, q = report.survival, report.extinction
    acc: dict[frozenset, float] = {}
    for subset, prob in law.atoms:
        if prob == 0.0 or not subset:
            continue
        members = sorted(subset)
        b = len(members)
        for mask in range(1, 1 << b):
            kept = frozenset(members[i] for i in range(b) if mask >> i & 1)
            k = len(kept)
            weight = prob * p**k * q ** (b - k)
            acc[kept] = acc.get(kept, 0.0) + weight
    atoms = [(fs, w / p) for fs, w in acc.items()]
    return OffspringDistribution(law.alphabet_size, atoms)


def _descending_size_classes(law: OffspringDistribution) -> list:
    sizes = law.size_distribution()
    return sorted(((s, pr) for s, pr in sizes.items() if s > 0), reverse=True)


def _step_population(z: int, classes: list, gen: np.random.Generator) -> int:
    """One branching-process generation on an integer population."""
    remaining = z
    rem_prob = 1.0
    total = 0
    for size, prob in classes:
        if remaining == 0:
            break
        cond = min(max(prob / rem_prob, 0.0), 1.0)
        c = int(gen.binomial(remaining, cond)) if cond < 1.0 else remaining
        total += size * c
        remaining -= c
        rem_prob -= prob
    return total


def _step_population_vec(z: np.ndarray, classes: list, gen: np.random.Generator) -> np.ndarray:
    remaining = z.astype(np.int64)
    rem_prob = 1.0
    total = np.zeros_like(remaining)
    for size, prob in classes:
        cond = min(max(prob / rem_prob, 0.0), 1.0)
        if cond >= 1.0:
            c = remaining.copy()
        else:
            c = gen.binomial(remaining, cond)
        total += size * c
        remaining = remaining - c
        rem_prob -= prob
    return total


@dataclass(frozen=True)
class KestenStigumStats:
    """Monte-Carlo summary of generation sizes normalized by mean^k."""

    mean: float
    variance: float
    survival_fraction: float
    k: int
    trials: int

    @property
    def standard_error(self) -> float:
        return math.sqrt(self.variance / self.trials)


def kesten_stigum_stats(
    law: OffspringDistribution, k: int, trials: int, seed: int
) -> KestenStigumStats:
    """Sample |T_k| / E[|W|]^k over independent trees.

    The unconditioned mean targets 1; the trial streams are keyed by
    (seed, trial index), so the result is independent of how trials are
    spread over workers.
    """
    if not law.is_supercritical:
        raise DomainError("normalized generation sizes need a supercritical law")
    if k < 1 or trials < 1:
        raise DomainError("need k >= 1 and trials >= 1")
    if law.alphabet_size**k > 2**62 and law.mean_offspring**k > 2**62:
        raise ResourceLimitError(f"generation {k} cannot be represented")
    classes = _descending_size_classes(law)
    normalizer = law.mean_offspring**k

    def run(trial: int) -> int:
        gen = philox_generator(seed, trial)
        z = 1
        for _ in range(k):
            if z == 0:
                break
            z = _step_population(z, classes, gen)
        return z

    workers = worker_count()
    finals = np.empty(trials, dtype=np.float64)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for trial, z in enumerate(pool.map(run, range(trials))):
                finals[trial] = z
    else:
        for trial in range(trials):
            finals[trial] = run(trial)
    normalized = finals / normalizer
    return KestenStigumStats(
        mean=float(normalized.mean()),
        variance=float(normalized.var(ddof=1)) if trials > 1 else 0.0,
        survival_fraction=float(np.mean(finals > 0)),
        k=k,
        trials=trials,
    )


@dataclass(frozen=True)
class EmpiricalReducedLaw:
    """Tabulated first-generation child sets of reduced surviving trees."""

    frequencies: dict
    accepted: int
    samples: int
    horizon: int

    def total_variation(self, law: OffspringDistribution) -> float:
        keys = set(self.frequencies) | {fs for fs, p in law.atoms}
        return 0.5 * sum(
            abs(self.frequencies.get(fs, 0.0) - law.prob_of(fs)) for fs in keys
        )


def empirical_reduced_law(
    law: OffspringDistribution, horizon: int, samples: int, seed: int
) -> EmpiricalReducedLaw:
    """Empirical law of the root's child set after reduction at the horizon.

    Draws the root child set per sample, then simulates each child's
    subtree generation sizes for horizon-1 steps; a child survives iff
    its final generation is non-empty, and a sample is accepted iff any
    child survives (the tree reaches the horizon).  This matches
    sampling whole surviving trees and reducing them, at population
    cost instead of tree cost.
    """
    if not law.is_supercritical:
        raise DomainError("reduced-law sampling needs a supercritical offspring law")
    if horizon < 1 or samples < 1:
        raise DomainError("need horizon >= 1 and samples >= 1")
    gen = philox_generator(seed, 1)
    u = gen.random(samples)
    cum = np.cumsum([p for _, p in law.atoms])
    atom_idx = np.minimum(np.searchsorted(cum, u, side="right"), len(law.atoms) - 1)
    members = [np.array(m, dtype=np.int64) for m in law._members]
    counts = np.array([len(m) for m in members], dtype=np.int64)[atom_idx]
    sample_ids = np.repeat(np.arange(samples, dtype=np.int64), counts)
    if sample_ids.size:
        symbols = np.concatenate([members[i] for i in atom_idx if len(members[i])])
    else:
        symbols = np.empty(0, dtype=np.int64)
    classes = _descending_size_classes(law)
    z = np.ones(sample_ids.size, dtype=np.int64)
    for _ in range(horizon - 1):
        z = _step_population_vec(z, classes, gen)
    survived = z > 0
    bits = np.zeros(samples, dtype=np.int64)
    np.bitwise_or.at(bits, sample_ids[survived], np.int64(1) << symbols[survived])
    accepted_mask = bits != 0
    accepted = int(accepted_mask.sum())
    frequencies: dict[frozenset, float] = {}
    if accepted:
        values, value_counts = np.unique(bits[accepted_mask], return_counts=True)
        for mask, c in zip(values.tolist(), value_counts.tolist()):
            subset = frozenset(i for i in range(law.alphabet_size) if mask >> i & 1)
            frequencies[subset] = c / accepted
    return EmpiricalReducedLaw(frequencies, accepted, samples, horizon)
