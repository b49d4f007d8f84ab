"""Full-history recursive multilevel Picard estimator.

``V_{n,M,r}(t, x)`` for a node ``theta`` is

    mean_{m=1..M^n} g(X^{(theta,0,-m)}_{t,T})
    + sum_{l=0}^{n-1} (T-t)/M^{n-l} sum_{m=1}^{M^{n-l}} [
          f(X, trunc_r V^{(theta,l,m)}_{l,M,r}(R, X))
        - 1{l>=1} f(X, trunc_r V^{(theta,l,-m)}_{l-1,M,r}(R, X)) ]

with ``R = t + (T-t) U^{(theta,l,m)}`` and ``X = X^{(theta,l,m)}_{t,R}``, and
``V_0 = V_{-1} = 0``.  Both f-terms of a level difference share the sample
point ``(R, X)``; the nested estimators use the disjoint keys ``(theta,l,m)``
and ``(theta,l,-m)``.

The recursion is evaluated depth-first but batched across rows: one call
handles many nodes at once, each row carrying its own key, time and point.
Sums over ``m`` are taken in fixed blocks of :data:`M_BLOCK` copies, so a
node's value never depends on how rows were grouped.  That makes the result
a pure function of (problem, query, root, seed).
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .flows import sample_flow_many
from .model import INFINITE, MlpQuery, NonFiniteError, SemilinearProblem, sample_time, truncate
from .rng import KeyedSource, MultiIndexKey, Tag, child_states, root_states, stream_keys

M_BLOCK = 1024
# soft cap on floats per working array (rows * d)
ELEMENT_BUDGET = 1 << 21
_I128_MAX = (1 << 127) - 1


@dataclass
class CostCounters:
    gaussian_scalars: int = 0
    uniforms: int = 0
    f_evals: int = 0
    g_evals: int = 0
    flow_samples: int = 0
    clamp_hits: int = 0

    def __add__(self, other: CostCounters) -> CostCounters:
        return CostCounters(*(getattr(self, f.name) + getattr(other, f.name) for f in fields(self)))

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class Estimate:
    value: np.ndarray
    counters: CostCounters


def _checked_pow(M, n):
    p = M**n
    if p > _I128_MAX:
        raise OverflowError(f"M**n = {M}**{n} exceeds 128-bit range")
    return p


@lru_cache(maxsize=None)
def _fs(n, M):
    if n <= 0:
        return 0
    total = _checked_pow(M, n)
    for l in range(n):
        total += _checked_pow(M, n - l) * (1 + _fs(l, M) + (_fs(l - 1, M) if l >= 1 else 0))
    if total > _I128_MAX:
        raise OverflowError(f"flow-sample count for n={n}, M={M} exceeds 128-bit range")
    return total


@lru_cache(maxsize=None)
def _uc(n, M):
    if n <= 0:
        return 0
    total = 0
    for l in range(n):
        total += _checked_pow(M, n - l) * (1 + _uc(l, M) + (_uc(l - 1, M) if l >= 1 else 0))
    if total > _I128_MAX:
        raise OverflowError(f"uniform count for n={n}, M={M} exceeds 128-bit range")
    return total


def predicted_flow_samples(n: int, M: int) -> int:
    """Flow samples drawn by one realization of ``V_{n,M,r}`` at ``t < T``."""
    if M < 1:
        raise ValueError("M must be positive")
    return _fs(n, M)


def predicted_uniforms(n: int, M: int) -> int:
    """Uniform draws (one per level node) for one realization of ``V_{n,M,r}``."""
    if M < 1:
        raise ValueError("M must be positive")
    return _uc(n, M)


Trail = Callable[[int], MultiIndexKey]


class _Run:
    def __init__(self, problem, M, r, source, include_level_zero):
        self.problem = problem
        self.M = M
        self.r = r
        self.source = KeyedSource() if source is None else source
        self.include_level_zero = include_level_zero
        self.counters = CostCounters()

    # -- helpers -------------------------------------------------------------

    def _check(self, arr, what, trail):
        if np.all(np.isfinite(arr)):
            return
        bad = int(np.flatnonzero(~np.all(np.isfinite(arr.reshape(len(arr), -1)), axis=1))[0])
        raise NonFiniteError(f"non-finite {what} at multi-index {trail(bad)}")

    def _truncate(self, v):
        if self.r != INFINITE:
            self.counters.clamp_hits += int(np.count_nonzero(np.abs(v) > self.r))
        return truncate(self.r, v)

    def _flow(self, x, t, s, states, trail):
        p = self.problem
        X, gauss, nflow = sample_flow_many(p.flow, x, t, s, stream_keys(states, Tag.GAUSSIAN), p.T, self.source)
        self.counters.gaussian_scalars += gauss
        self.counters.flow_samples += nflow
        self._check(X, "flow sample", trail)
        return X

    def _blocks(self, B, count):
        """Yield ``(row_start, row_stop, m_start, m_stop)`` with fixed m-blocks."""
        blk = min(count, M_BLOCK)
        rows = max(1, ELEMENT_BUDGET // (blk * max(self.problem.d, self.problem.k)))
        for r0 in range(0, B, rows):
            r1 = min(B, r0 + rows)
            for m0 in range(0, count, M_BLOCK):
                yield r0, r1, m0, min(count, m0 + M_BLOCK)

    @staticmethod
    def _row_sums(vals, nrows, blk):
        k = vals.shape[1]
        # contiguous last-axis reduction: per-row result independent of nrows
        return np.ascontiguousarray(vals.reshape(nrows, blk, k).transpose(0, 2, 1)).sum(axis=-1)

    @staticmethod
    def _child_trail(trail, r0, blk, m0, level, sign):
        return lambda j: trail(r0 + j // blk).child(level, sign * (m0 + 1 + j % blk))

    # -- recursion -----------------------------------------------------------

    def estimate(self, n, t, x, states, trail: Trail):
        p = self.problem
        B = len(t)
        out = np.zeros((B, p.k))
        if n <= 0:
            return out
        M, T = self.M, p.T

        # g-term, accumulated relative to each row's first sample so that
        # identical samples (t = T) average to exactly g(x)
        count = _checked_pow(M, n)
        acc = np.zeros((B, p.k))
        shift = np.zeros((B, p.k))
        for r0, r1, m0, m1 in self._blocks(B, count):
            nr, blk = r1 - r0, m1 - m0
            ck = child_states(states[r0:r1], 0, -np.arange(m0 + 1, m1 + 1))
            tr = self._child_trail(trail, r0, blk, m0, 0, -1)
            X = self._flow(np.repeat(x[r0:r1], blk, axis=0), np.repeat(t[r0:r1], blk), T, ck, tr)
            gv = np.asarray(p.g(X), dtype=np.float64).reshape(len(X), p.k)
            self.counters.g_evals += len(X)
            self._check(gv, "terminal value g", tr)
            if m0 == 0:
                shift[r0:r1] = gv[::blk]
            acc[r0:r1] += self._row_sums(gv - np.repeat(shift[r0:r1], blk, axis=0), nr, blk)
        out = shift + acc / count

        for l in range(n):
            count = _checked_pow(M, n - l)
            acc = np.zeros((B, p.k))
            for r0, r1, m0, m1 in self._blocks(B, count):
                nr, blk = r1 - r0, m1 - m0
                copies = np.arange(m0 + 1, m1 + 1)
                ck = child_states(states[r0:r1], l, copies)
                tr = self._child_trail(trail, r0, blk, m0, l, 1)
                ts = np.repeat(t[r0:r1], blk)
                u = self.source.uniform(stream_keys(ck, Tag.UNIFORM))
                self.counters.uniforms += len(u)
                R = sample_time(ts, T, u)
                X = self._flow(np.repeat(x[r0:r1], blk, axis=0), ts, R, ck, tr)

                V = self.estimate(l, R, X, ck, tr)
                a = np.asarray(p.f(X, self._truncate(V)), dtype=np.float64).reshape(len(X), p.k)
                self.counters.f_evals += len(X)
                self._check(a, "nonlinearity f", tr)
                if l >= 1:
                    ck2 = child_states(states[r0:r1], l, -copies)
                    tr2 = self._child_trail(trail, r0, blk, m0, l, -1)
                    W = self.estimate(l - 1, R, X, ck2, tr2)
                    b = np.asarray(p.f(X, self._truncate(W)), dtype=np.float64).reshape(len(X), p.k)
                    self.counters.f_evals += len(X)
                    self._check(b, "nonlinearity f", tr)
                    a = a - b
                elif not self.include_level_zero:
                    continue
                acc[r0:r1] += self._row_sums(a, nr, blk)
            out = out + ((T - t) / count)[:, None] * acc
        return out


def _root_key(root) -> MultiIndexKey:
    return root if isinstance(root, MultiIndexKey) else MultiIndexKey(int(root))


def _root_batch(master_seed, roots: Sequence[MultiIndexKey]):
    if all(not k.path for k in roots):
        return root_states(master_seed, [k.root for k in roots])
    rows = []
    for k in roots:
        st = root_states(master_seed, [k.root])
        for level, copy in k.path:
            st = child_states(st, level, [copy])
        rows.append(st)
    return np.concatenate(rows)


def mlp_estimate_many(
    problem: SemilinearProblem,
    query: MlpQuery,
    roots,
    master_seed: int = 0,
    *,
    source=None,
    include_level_zero: bool = True,
) -> tuple[np.ndarray, CostCounters]:
    """Independent realizations of ``V_{n,M,r}(t, x)``, one per root.

    Returns the values, shape ``(len(roots), k)``, and the counters summed
    over all realizations.  Row ``i`` equals ``mlp_estimate(..., roots[i])``
    bit for bit.
    """
    query.validate_for(problem)
    keys = [_root_key(r) for r in roots]
    B = len(keys)
    run = _Run(problem, query.M, query.r, source, include_level_zero)
    t = np.full(B, float(query.t))
    x = np.broadcast_to(query.x, (B, problem.d)).copy()
    states = _root_batch(master_seed, keys)
    values = run.estimate(query.n, t, x, states, keys.__getitem__)
    return values, run.counters


def mlp_estimate(
    problem: SemilinearProblem,
    query: MlpQuery,
    root=0,
    master_seed: int = 0,
    *,
    source=None,
    include_level_zero: bool = True,
) -> Estimate:
    """One realization of ``V^{root}_{n,M,r}(t, x)`` with exact draw counters.

    ``source`` replaces the keyed random streams (e.g. with a
    :class:`~mlpicard.rng.ConstantSource` stub).  ``include_level_zero=False``
    drops the value of the ``l = 0`` f-terms while still drawing and
    evaluating them; it exists to check that they vanish when ``f(x, 0) = 0``.
    """
    values, counters = mlp_estimate_many(
        problem, query, [root], master_seed, source=source, include_level_zero=include_level_zero
    )
    return Estimate(values[0], counters)
