"""Samplers for the diffusion ``X_{t,s}`` started at ``x``.

The closed-form samplers take an explicit standard normal vector ``z`` and
broadcast over leading batch axes.  :func:`sample_flow_many` is the batched
entry point the estimator uses: each row has its own start point, interval
and Gaussian stream.  Zero-length intervals return the start point and
consume no randomness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import FlowSpec, GenericSde, NonFiniteError, ScaledBrownian, UnitDriftGbm
from .rng import KeyedSource, StreamState

DEFAULT_EM_STEPS_PER_HORIZON = 20


@dataclass
class FlowSample:
    state: np.ndarray
    gaussian_scalars: int
    uniforms: int = 0


def _check_interval(t, s):
    if np.any(np.asarray(s) < np.asarray(t)):
        raise ValueError("flow end time s must not precede start time t")


def _col(a):
    a = np.asarray(a, dtype=np.float64)
    return a[..., None] if a.ndim else a


def sample_scaled_brownian(x, t, s, scale, z):
    _check_interval(t, s)
    return np.asarray(x) + scale * np.sqrt(_col(s) - _col(t)) * np.asarray(z)


def sample_gbm(x, t, s, z):
    """Exact GBM step: ``x_i * exp((s-t)/2 + sqrt(s-t) z_i)``."""
    _check_interval(t, s)
    h = _col(s) - _col(t)
    return np.asarray(x) * np.exp(h / 2 + np.sqrt(h) * np.asarray(z))


def em_steps(spec: GenericSde, T: float, length):
    """Euler-Maruyama step counts for intervals of the given length (0 if empty)."""
    rate = spec.em_steps_per_unit_time
    if rate is None:
        rate = DEFAULT_EM_STEPS_PER_HORIZON / T
    length = np.asarray(length, dtype=np.float64)
    steps = np.maximum(1, np.ceil(rate * length)).astype(np.int64)
    return np.where(length > 0, steps, 0)


def _em_step(mu, sigma, X, h, sq, z):
    return X + mu(X) * h + np.einsum("nij,nj->ni", sigma(X), z) * sq


def sample_euler_maruyama(mu, sigma, x, t, s, steps: int, stream: StreamState) -> FlowSample:
    """Euler-Maruyama on a uniform grid of ``steps`` steps over ``[t, s]``."""
    _check_interval(t, s)
    if steps < 1:
        raise ValueError("steps must be positive")
    X = np.array(x, dtype=np.float64).reshape(1, -1)
    if s == t:
        return FlowSample(X[0], 0)
    d = X.shape[1]
    h = (s - t) / steps
    sq = math.sqrt(h)
    for _ in range(steps):
        z = stream.next_gaussian_vector(d)
        X = _em_step(mu, sigma, X, h, sq, z[None, :])
        if not np.all(np.isfinite(X)):
            raise NonFiniteError("Euler-Maruyama produced a non-finite state")
    return FlowSample(X[0], steps * d)


def sample_flow(spec: FlowSpec, x, t, s, stream: StreamState, T: float | None = None) -> FlowSample:
    """Dispatch one sample of ``X_{t,s}`` over the flow kinds."""
    _check_interval(t, s)
    x = np.asarray(x, dtype=np.float64)
    if s == t:
        return FlowSample(x.copy(), 0)
    if isinstance(spec, ScaledBrownian):
        return FlowSample(sample_scaled_brownian(x, t, s, spec.scale, stream.next_gaussian_vector(x.size)), x.size)
    if isinstance(spec, UnitDriftGbm):
        return FlowSample(sample_gbm(x, t, s, stream.next_gaussian_vector(x.size)), x.size)
    if isinstance(spec, GenericSde):
        steps = int(em_steps(spec, (s - t) if T is None else T, s - t))
        return sample_euler_maruyama(spec.mu, spec.sigma, x, t, s, steps, stream)
    raise TypeError(f"unknown flow spec {spec!r}")


def sample_flow_many(spec: FlowSpec, x, t, s, streams, T: float, source=None):
    """Batched flow samples, one per row.

    ``x`` is ``(N, d)``; ``t`` and ``s`` are ``(N,)``; ``streams`` holds the
    ``(N, 2)`` Gaussian stream keys.  Returns ``(X, gaussian_scalars,
    flow_samples)`` where the counts cover non-degenerate rows only.
    """
    source = KeyedSource() if source is None else source
    x = np.asarray(x, dtype=np.float64)
    t = np.broadcast_to(np.asarray(t, dtype=np.float64), x.shape[:1])
    s = np.broadcast_to(np.asarray(s, dtype=np.float64), x.shape[:1])
    _check_interval(t, s)
    N, d = x.shape
    live = s > t
    n_live = int(np.count_nonzero(live))
    if n_live == 0:
        return x.copy(), 0, 0

    if isinstance(spec, (ScaledBrownian, UnitDriftGbm)):
        if n_live == N:
            z = source.gaussian(streams, 0, d)
        else:
            z = np.zeros((N, d))
            z[live] = source.gaussian(streams[live], 0, d)
        if isinstance(spec, ScaledBrownian):
            X = sample_scaled_brownian(x, t, s, spec.scale, z)
        else:
            X = sample_gbm(x, t, s, z)
        return X, n_live * d, n_live

    if isinstance(spec, GenericSde):
        steps = em_steps(spec, T, s - t)
        h = np.where(live, (s - t) / np.maximum(steps, 1), 0.0)
        sq = np.sqrt(h)[:, None]
        X = x.copy()
        drawn = 0
        for j in range(int(steps.max())):
            act = steps > j
            rows = np.flatnonzero(act)
            z = source.gaussian(streams[rows], j * d, d)
            drawn += z.size
            Xa = X[rows]
            X[rows] = _em_step(spec.mu, spec.sigma, Xa, h[rows, None], sq[rows], z)
            if not np.all(np.isfinite(X[rows])):
                raise NonFiniteError("Euler-Maruyama produced a non-finite state")
        return X, drawn, n_live

    raise TypeError(f"unknown flow spec {spec!r}")
