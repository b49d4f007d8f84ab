"""Keyed random streams addressed by recursion multi-indices.

Every node of the MLP recursion tree is identified by a :class:`MultiIndexKey`
(an experiment-level ``root`` plus a path of ``(level, copy)`` steps).  A node
owns two independent streams, one tagged ``uniform`` and one tagged
``gaussian``, derived from the master seed and the key.  Nothing depends on the
order in which nodes are visited, so results do not change with chunking or
worker count.

Construction
------------
State is 128 bits, held as two 64-bit lanes ``(a, b)``.  ``mix`` is the
SplitMix64 finalizer (a bijection on 64-bit words).  Absorbing a word ``w``::

    a' = mix(a ^ w) + b
    b' = mix(b ^ a' ^ (w * K))

For a fixed parent, ``w -> a'`` is a bijection, so siblings never collide;
unrelated nodes collide only with probability ~2**-128.

* seed  -> ``(mix(seed ^ C0), mix(seed + C1))``
* root  -> absorb the root as a two's-complement word
* step  -> absorb ``(level << 48) | (copy mod 2**48)``
* tag   -> absorb a reserved word whose level field is ``0xFFFF``

Word ``i`` of a stream keyed ``(a, b)`` is ``mix(mix(a + (i + 1) * G) ^ b)``.
Uniforms take the top 53 bits (``[0, 1)``); Gaussians use the inverse normal
CDF of the midpoint ``(top53 + 0.5) / 2**53``, which lies in ``(0, 1)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

__all__ = [
    "Tag",
    "MultiIndexKey",
    "StreamKey",
    "StreamState",
    "derive_key",
    "next_uniform",
    "next_gaussian_vector",
    "root_states",
    "child_states",
    "stream_keys",
    "stream_words",
    "words_to_uniform",
    "words_to_gaussian",
    "KeyedSource",
    "ConstantSource",
]

_MASK64 = (1 << 64) - 1
_C0 = np.uint64(0x6A09E667F3BCC908)
_C1 = np.uint64(0xBB67AE8584CAA73B)
_K = np.uint64(0x9FB21C651E98DF25)
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = (np.uint64(s) for s in (30, 27, 31, 11))
_TWO_M53 = 2.0**-53

MAX_LEVEL = 0xFFFE
MAX_COPY = (1 << 47) - 1


class Tag(enum.Enum):
    UNIFORM = "uniform"
    GAUSSIAN = "gaussian"


_TAG_WORDS = {
    Tag.UNIFORM: np.array([(0xFFFF << 48) | 1], dtype=np.uint64),
    Tag.GAUSSIAN: np.array([(0xFFFF << 48) | 2], dtype=np.uint64),
}


@dataclass(frozen=True)
class MultiIndexKey:
    """Path of a node in the recursion tree.

    ``copy`` is positive for the primary family and negative for the
    independent companion family; it is never zero.
    """

    root: int
    path: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "path", tuple((int(l), int(m)) for l, m in self.path))
        for level, copy in self.path:
            _check_step(level, copy)

    def child(self, level: int, copy: int) -> MultiIndexKey:
        return MultiIndexKey(self.root, self.path + ((level, copy),))

    def __str__(self):
        steps = "".join(f",({l},{m})" for l, m in self.path)
        return f"({self.root}{steps})"


def _check_step(level, copy):
    if not 0 <= level <= MAX_LEVEL:
        raise ValueError(f"level must lie in [0, {MAX_LEVEL}], got {level}")
    if copy == 0 or abs(copy) > MAX_COPY:
        raise ValueError(f"copy must be nonzero with |copy| <= {MAX_COPY}, got {copy}")


@dataclass(frozen=True)
class StreamKey:
    """128-bit stream identity, as two 64-bit lanes."""

    a: int
    b: int

    def as_int(self) -> int:
        return (self.a << 64) | self.b

    def as_array(self) -> np.ndarray:
        return np.array([[self.a, self.b]], dtype=np.uint64)

    def __str__(self):
        return f"{self.as_int():032x}"


# ---------------------------------------------------------------------------
# vectorized primitives (uint64 arithmetic wraps modulo 2**64)


def _mix(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def _absorb(states: np.ndarray, words) -> np.ndarray:
    a, b = states[..., 0], states[..., 1]
    a2 = _mix(a ^ words) + b
    b2 = _mix(b ^ a2 ^ (words * _K))
    return np.stack([a2, b2], axis=-1)


def _as_words(values) -> np.ndarray:
    return (np.asarray(values, dtype=np.int64)).astype(np.uint64)


def root_states(master_seed: int, roots) -> np.ndarray:
    """Node states for a batch of integer roots, shape ``(len(roots), 2)``."""
    seed = np.array([int(master_seed) & _MASK64], dtype=np.uint64)
    base = np.concatenate([_mix(seed ^ _C0), _mix(seed + _C1)])
    roots = _as_words(np.atleast_1d(roots))
    return _absorb(np.broadcast_to(base, (roots.size, 2)), roots)


def child_states(states: np.ndarray, level: int, copies) -> np.ndarray:
    """States of children ``(level, copy)`` for each parent row.

    Returns shape ``(len(states) * len(copies), 2)``, parent-major: row
    ``i * len(copies) + j`` is the child of parent ``i`` with ``copies[j]``.
    """
    copies = np.asarray(copies, dtype=np.int64)
    if copies.size and (np.any(copies == 0) or np.abs(copies).max() > MAX_COPY):
        raise ValueError("copies must be nonzero and fit in 48 bits")
    if not 0 <= level <= MAX_LEVEL:
        raise ValueError(f"level must lie in [0, {MAX_LEVEL}], got {level}")
    words = (np.uint64(level) << np.uint64(48)) | (copies.astype(np.uint64) & np.uint64((1 << 48) - 1))
    out = _absorb(states[:, None, :], words[None, :])
    return out.reshape(-1, 2)


def stream_keys(states: np.ndarray, tag: Tag) -> np.ndarray:
    return _absorb(states, _TAG_WORDS[tag])


def stream_words(streams: np.ndarray, offset: int, count: int) -> np.ndarray:
    """Words ``offset .. offset+count-1`` of each stream, shape ``(N, count)``."""
    idx = np.arange(offset + 1, offset + count + 1, dtype=np.uint64)
    z = _mix(streams[:, 0:1] + idx[None, :] * _GAMMA)
    return _mix(z ^ streams[:, 1:2])


def words_to_uniform(words: np.ndarray) -> np.ndarray:
    return (words >> _S11).astype(np.float64) * _TWO_M53


def words_to_gaussian(words: np.ndarray) -> np.ndarray:
    return ndtri(((words >> _S11).astype(np.float64) + 0.5) * _TWO_M53)


# ---------------------------------------------------------------------------
# scalar API


def _node_state(master_seed: int, idx: MultiIndexKey) -> np.ndarray:
    state = root_states(master_seed, [idx.root])
    for level, copy in idx.path:
        state = child_states(state, level, [copy])
    return state


def derive_key(master_seed: int, idx: MultiIndexKey, tag: Tag | str) -> StreamKey:
    """Stream identity for node ``idx`` under ``tag``; pure and deterministic."""
    tag = Tag(tag)
    a, b = stream_keys(_node_state(master_seed, idx), tag)[0]
    return StreamKey(int(a), int(b))


@dataclass
class StreamState:
    """Single-owner cursor over one keyed stream, with draw counters."""

    key: StreamKey
    position: int = 0
    uniform_draws: int = 0
    gaussian_draws: int = 0
    _arr: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self._arr = self.key.as_array()

    def _take(self, count):
        words = stream_words(self._arr, self.position, count)[0]
        self.position += count
        return words

    def next_uniform(self) -> float:
        self.uniform_draws += 1
        return float(words_to_uniform(self._take(1))[0])

    def next_gaussian_vector(self, d: int) -> np.ndarray:
        if d < 1:
            raise ValueError("d must be positive")
        self.gaussian_draws += d
        return words_to_gaussian(self._take(d))


def next_uniform(stream: StreamState) -> float:
    return stream.next_uniform()


def next_gaussian_vector(stream: StreamState, d: int) -> np.ndarray:
    return stream.next_gaussian_vector(d)


# ---------------------------------------------------------------------------
# batch sources used by the estimator


class KeyedSource:
    """Draws from the keyed streams themselves."""

    def uniform(self, streams: np.ndarray) -> np.ndarray:
        return words_to_uniform(stream_words(streams, 0, 1)[:, 0])

    def gaussian(self, streams: np.ndarray, offset: int, d: int) -> np.ndarray:
        return words_to_gaussian(stream_words(streams, offset, d))


@dataclass(frozen=True)
class ConstantSource:
    """Stub source returning fixed values, for hand-checkable evaluations."""

    uniform_value: float = 0.5
    gaussian_value: float = 0.0

    def uniform(self, streams):
        return np.full(len(streams), self.uniform_value)

    def gaussian(self, streams, offset, d):
        return np.full((len(streams), d), self.gaussian_value)
