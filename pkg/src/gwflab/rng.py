"""Counter-based random streams.

Tree sampling must be reproducible bit-for-bit across platforms and
worker counts, so every random decision is a pure function of
(seed, node word) rather than of any shared generator state.  The
mixing function is the SplitMix64 finalizer (Steele, Lea & Flood;
constants below), applied to a per-word state that is folded one
symbol at a time, so extending a word by one symbol costs O(1).

Vectorized Monte-Carlo paths use numpy's Philox counter-based bit
generator, keyed by a value derived here, which gives the same
schedule-independence guarantee for whole-array draws.
"""

import numpy as np

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15  # golden-ratio increment
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_ROOT_SALT = 0x5851F42D4C957F2D


def mix64(z: int) -> int:
    """SplitMix64 finalizer: a 64-bit bijection with full avalanche."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def root_state(seed: int) -> int:
    """State attached to the tree root for a given 64-bit seed."""
    return mix64((seed & _MASK64) ^ _ROOT_SALT)


def child_state(state: int, symbol: int) -> int:
    """Fold one alphabet symbol into a word state."""
    return mix64((state + (symbol + 1) * _GAMMA) & _MASK64)


def word_state(seed: int, word) -> int:
    """State for a full word; equals repeated child_state folding."""
    state = root_state(seed)
    for symbol in word:
        state = child_state(state, symbol)
    return state


def uniform_from_state(state: int) -> float:
    """Map a word state to a uniform double in [0, 1)."""
    return (mix64(state ^ _GAMMA) >> 11) * 2.0**-53


def derive_key(seed: int, *indices: int) -> int:
    """Derive an independent 64-bit subkey from a seed and indices."""
    state = mix64((seed & _MASK64) ^ _GAMMA)
    for index in indices:
        state = mix64((state + (index + 1) * _MIX1) & _MASK64)
    return state


def philox_generator(seed: int, *indices: int) -> np.random.Generator:
    """Counter-based numpy generator on an independent substream."""
    return np.random.Generator(np.random.Philox(key=derive_key(seed, *indices)))
