"""Truncated symbolic trees over a finite alphabet.

A tree is a prefix-closed set of words stored as per-node child lists,
truncated at a horizon.  All quantities downstream (sections, clouds,
counts) depend only on a finite prefix of the infinite object, so the
horizon plus, where needed, a deeper resample stand in for infinite
trees.  Trees are immutable after construction.
"""

from __future__ import annotations

import string

import numpy as np

from gwflab.errors import (
    DomainError,
    EmptySetError,
    HorizonError,
    InvalidWordError,
    NodeNotFoundError,
    ResourceLimitError,
)
from gwflab.geometry import PointCloud

_DIGITS = string.digits + string.ascii_lowercase


class Extinct:
    """Marker for a reduction that left no surviving node."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "EXTINCT"


EXTINCT = Extinct()


class Tree:
    """Prefix-closed word set with ordered child lists and a horizon."""

    __slots__ = ("alphabet_size", "horizon", "_children", "_hash")

    def __init__(self, alphabet_size: int, horizon: int, children: dict):
        # internal constructor; use the builders below for validated input
        self.alphabet_size = alphabet_size
        self.horizon = horizon
        self._children = children
        self._hash = None

    # -- queries ---------------------------------------------------------

    def __contains__(self, word) -> bool:
        return tuple(word) in self._children

    def children(self, word) -> tuple:
        try:
            return self._children[tuple(word)]
        except KeyError:
            raise NodeNotFoundError(f"word {tuple(word)} is not a node") from None

    def child_set(self, word) -> frozenset:
        return frozenset(self.children(word))

    def nodes(self) -> list:
        """All nodes in lexicographic (depth-first preorder) order."""
        return sorted(self._children)

    def nodes_at_depth(self, depth: int) -> list:
        return sorted(w for w in self._children if len(w) == depth)

    @property
    def num_nodes(self) -> int:
        return len(self._children)

    @property
    def height(self) -> int:
        return max(len(w) for w in self._children)

    def node_set(self) -> frozenset:
        return frozenset(self._children)

    def __eq__(self, other):
        if not isinstance(other, Tree):
            return NotImplemented
        return (
            self.alphabet_size == other.alphabet_size
            and self.horizon == other.horizon
            and self._children == other._children
        )

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(
                (self.alphabet_size, self.horizon, frozenset(self._children.items()))
            )
        return self._hash

    def __repr__(self):
        return (
            f"Tree(alphabet={self.alphabet_size}, horizon={self.horizon}, "
            f"nodes={self.num_nodes})"
        )


def _validate_children(alphabet_size: int, horizon: int, children: dict) -> None:
    if () not in children:
        raise DomainError("the root must be present")
    for word, kids in children.items():
        if len(word) > horizon:
            raise DomainError(f"node {word} lies below the horizon {horizon}")
        if word and word[:-1] not in children:
            raise DomainError(f"node {word} has no stored parent; trees are prefix-closed")
        if word and word[-1] not in children[word[:-1]]:
            raise DomainError(f"node {word} is not listed among its parent's children")
        if list(kids) != sorted(set(kids)):
            raise DomainError(f"children of {word} must be strictly increasing")
        for c in kids:
            if not 0 <= c < alphabet_size:
                raise InvalidWordError(f"child symbol {c} at {word} outside alphabet")
            if word + (c,) not in children:
                raise DomainError(f"listed child {word + (c,)} is not stored")


def from_child_lists(alphabet_size: int, horizon: int, child_lists: dict) -> Tree:
    """Build a tree from explicit word -> child-list entries (validated)."""
    children = {tuple(w): tuple(kids) for w, kids in child_lists.items()}
    _validate_children(alphabet_size, horizon, children)
    return Tree(alphabet_size, horizon, children)


def from_words(words, alphabet_size: int | None = None, horizon: int | None = None) -> Tree:
    """Build a tree from a prefix-closed collection of words (validated)."""
    word_set = {tuple(w) for w in words}
    word_set.add(())
    if alphabet_size is None:
        alphabet_size = 1 + max((max(w) for w in word_set if w), default=0)
    if horizon is None:
        horizon = max((len(w) for w in word_set), default=0)
    children: dict[tuple, list] = {w: [] for w in word_set}
    for w in word_set:
        if w and w[:-1] not in word_set:
            raise DomainError(f"word {w} has no parent; input is not prefix-closed")
        if w:
            children[w[:-1]].append(w[-1])
    packed = {w: tuple(sorted(kids)) for w, kids in children.items()}
    _validate_children(alphabet_size, horizon, packed)
    return Tree(alphabet_size, horizon, packed)


def full_tree(alphabet_size: int, horizon: int, cap: int = 4 * 10**6) -> Tree:
    """Every word up to the horizon."""
    if alphabet_size < 1 or horizon < 0:
        raise DomainError("need alphabet_size >= 1 and horizon >= 0")
    total = sum(alphabet_size**k for k in range(horizon + 1))
    if total > cap:
        raise ResourceLimitError(f"full tree would hold {total} nodes, above cap {cap}")
    all_children = tuple(range(alphabet_size))
    children = {(): all_children if horizon > 0 else ()}
    frontier = [()]
    for depth in range(horizon):
        kids = all_children if depth + 1 < horizon else ()
        nxt = []
        for w in frontier:
            for c in all_children:
                children[w + (c,)] = kids
                nxt.append(w + (c,))
        frontier = nxt
    return Tree(alphabet_size, horizon, children)


def ray_tree(word, alphabet_size: int | None = None) -> Tree:
    """The single branch spelled by a word (one node per prefix)."""
    word = tuple(word)
    if alphabet_size is None:
        alphabet_size = 1 + max(word, default=0)
    children = {}
    for k in range(len(word)):
        children[word[:k]] = (word[k],)
    children[word] = ()
    _validate_children(alphabet_size, len(word), children)
    return Tree(alphabet_size, len(word), children)


def descendant_tree(tree: Tree, word) -> Tree:
    """The tree growing from a node, re-rooted at that node."""
    word = tuple(word)
    if word not in tree:
        raise NodeNotFoundError(f"word {word} is not a node of the tree")
    children = {}
    stack = [()]
    while stack:
        suffix = stack.pop()
        kids = tree.children(word + suffix)
        children[suffix] = kids
        for c in kids:
            stack.append(suffix + (c,))
    return Tree(tree.alphabet_size, tree.horizon - len(word), children)


def reduce_to_horizon(tree: Tree, n: int):
    """Keep the nodes lying on some branch that reaches depth n.

    The result has no leaves above depth n; it is the finite-horizon
    surrogate for pruning all finite lines of descent, and converges to
    that pruning as n grows.  Returns EXTINCT when no branch reaches
    depth n.
    """
    if n < 0:
        raise DomainError("reduction depth must be non-negative")
    if n > tree.horizon:
        raise HorizonError(f"reduction depth {n} exceeds the horizon {tree.horizon}")
    deepest: dict[tuple, int] = {}
    for word in sorted(tree._children, key=len, reverse=True):
        kids = tree._children[word]
        best = len(word)
        for c in kids:
            best = max(best, deepest[word + (c,)])
        deepest[word] = best
    if deepest[()] < n:
        return EXTINCT
    children = {}
    stack = [()]
    while stack:
        word = stack.pop()
        kept = tuple(c for c in tree._children[word] if deepest[word + (c,)] >= n)
        children[word] = kept
        for c in kept:
            stack.append(word + (c,))
    return Tree(tree.alphabet_size, tree.horizon, children)


class TreeSectionEntry:
    """A tree word on a scale section, with its leftover scale fraction."""

    __slots__ = ("word", "ratio", "scale_ratio")

    def __init__(self, word: tuple, ratio: float, scale_ratio: float):
        self.word = word
        self.ratio = ratio
        # ratio / scale^n, always in (r_min, 1]
        self.scale_ratio = scale_ratio

    def __repr__(self):
        return f"TreeSectionEntry({self.word}, r={self.ratio:.6g}, a={self.scale_ratio:.6g})"


def _tree_scan(tree: Tree, ifs, scale: float):
    """DFS over tree words, yielding (word, ratio, orthogonal, translation)
    for the words of the tree on the section at the given scale.

    Branches that die before reaching the scale are dropped (they have
    no infinite continuation); branches cut by the tree horizon while
    still above the scale are an error, because the truncation hides
    section words.
    """
    if tree.alphabet_size != ifs.alphabet_size:
        raise DomainError(
            f"tree alphabet {tree.alphabet_size} != IFS alphabet {ifs.alphabet_size}"
        )
    if not 0.0 < scale < 1.0:
        raise DomainError(f"section scale must lie in (0, 1), got {scale}")
    dim = ifs.ambient_dim
    homothety = ifs.is_homothety
    eye = np.eye(dim)
    stack = [((), 1.0, None if homothety else eye, np.zeros(dim))]
    while stack:
        word, ratio, orth, trans = stack.pop()
        if ratio <= scale:
            yield word, ratio, orth, trans
            continue
        kids = tree._children[word]
        if not kids:
            if len(word) >= tree.horizon:
                raise HorizonError(
                    f"tree horizon {tree.horizon} truncates the section at scale {scale}"
                )
            continue  # genuine dead branch: no influence on the projection
        for symbol in reversed(kids):
            phi = ifs.maps[symbol]
            if homothety:
                stack.append(
                    (word + (symbol,), ratio * phi.ratio, None, trans + ratio * phi.translation)
                )
            else:
                stack.append(
                    (
                        word + (symbol,),
                        ratio * phi.ratio,
                        orth @ phi.orthogonal,
                        trans + ratio * (orth @ phi.translation),
                    )
                )


def tree_section(tree: Tree, ifs, rho: float, n: int = 1) -> list:
    """Intersect the tree with the section at scale rho^n.

    Each entry carries scale_ratio = ratio / rho^n in (r_min, 1]; the
    words continuing an entry to the next section at rho^(n+1) are
    exactly the section at scale rho / scale_ratio, which is the
    bridging identity used by the generation-count bounds.
    """
    if n < 1:
        raise DomainError("section power must be at least 1")
    scale = float(rho) ** n
    return [
        TreeSectionEntry(word, ratio, ratio / scale)
        for word, ratio, _, _ in _tree_scan(tree, ifs, scale)
    ]


def project_tree(tree, ifs, rho: float) -> PointCloud:
    """One point per tree word on the section at scale rho.

    The tree should be reduced first so that finite lines of descent do
    not contribute spurious points; continuity of the projection on
    leafless trees is what certifies the resolution.
    """
    if isinstance(tree, Extinct):
        raise EmptySetError("cannot project an extinct tree")
    base = ifs.base_point()
    points = []
    for _, ratio, orth, trans in _tree_scan(tree, ifs, rho):
        if orth is None:
            points.append(trans + ratio * base)
        else:
            points.append(trans + ratio * (orth @ base))
    if not points:
        raise EmptySetError(f"tree has no words on the section at scale {rho}")
    return PointCloud(np.asarray(points), rho * ifs.diameter_bound())


def is_family_tree(tree: Tree, family, max_depth: int | None = None) -> bool:
    """True iff every node's child set above max_depth lies in the family.

    Nodes at max_depth (default: the horizon) are truncated, so their
    empty child lists are not judged.
    """
    if max_depth is None:
        max_depth = tree.horizon
    allowed = {frozenset(a) for a in family}
    for word, kids in tree._children.items():
        if len(word) >= max_depth:
            continue
        if frozenset(kids) not in allowed:
            return False
    return True


def serialize_tree(tree: Tree) -> str:
    """Canonical text form: one word per line, lexicographic order.

    Symbols are base-|alphabet| digits (0-9 then a-z); the root is the
    empty first line.
    """
    if tree.alphabet_size > len(_DIGITS):
        raise DomainError(f"serialization supports alphabets up to {len(_DIGITS)} symbols")
    lines = ["".join(_DIGITS[s] for s in w) for w in tree.nodes()]
    return "\n".join(lines) + "\n"


def parse_tree(text: str, alphabet_size: int, horizon: int | None = None) -> Tree:
    """Inverse of serialize_tree."""
    words = []
    for line in text.splitlines():
        line = line.strip()
        try:
            words.append(tuple(_DIGITS.index(ch) for ch in line))
        except ValueError:
            raise DomainError(f"bad symbol in serialized word {line!r}") from None
    return from_words(words, alphabet_size=alphabet_size, horizon=horizon)
