"""Problem description types and the elementary scalar maps.

Callables on a :class:`SemilinearProblem` are batched over rows:

* ``f(x, y)`` takes ``x`` of shape ``(N, d)`` and ``y`` of shape ``(N, k)``
  and returns ``(N, k)``;
* ``g(x)`` takes ``(N, d)`` and returns ``(N, k)``;
* ``GenericSde.mu(x)`` returns ``(N, d)`` and ``GenericSde.sigma(x)`` returns
  ``(N, d, d)``.

All of them must be pure.  Drift and diffusion of a ``GenericSde`` are assumed
globally Lipschitz; that is the caller's responsibility and is not checked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

INFINITE = math.inf


class NonFiniteError(ArithmeticError):
    """Raised when f, g or a flow sample produced NaN or infinity."""


@dataclass(frozen=True)
class ScaledBrownian:
    """``X_s = x + scale * (W_s - W_t)``."""

    scale: float

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("scale must be positive")


@dataclass(frozen=True)
class UnitDriftGbm:
    """Geometric Brownian motion with ``mu(x) = x`` and ``sigma(x) = diag(x)``."""


@dataclass(frozen=True)
class GenericSde:
    mu: Callable[[np.ndarray], np.ndarray]
    sigma: Callable[[np.ndarray], np.ndarray]
    # None -> 20 steps per horizon T
    em_steps_per_unit_time: Optional[float] = None

    def __post_init__(self):
        if self.em_steps_per_unit_time is not None and not self.em_steps_per_unit_time > 0:
            raise ValueError("em_steps_per_unit_time must be positive")


FlowSpec = Union[ScaledBrownian, UnitDriftGbm, GenericSde]


@dataclass(frozen=True)
class SemilinearProblem:
    d: int
    k: int
    T: float
    f: Callable[[np.ndarray, np.ndarray], np.ndarray]
    g: Callable[[np.ndarray], np.ndarray]
    flow: FlowSpec
    name: str = ""

    def __post_init__(self):
        if self.d < 1 or self.k < 1:
            raise ValueError("d and k must be positive")
        if not self.T > 0:
            raise ValueError("T must be positive")


def check_radius(r: float) -> float:
    r = float(r)
    if math.isnan(r) or r < 0:
        raise ValueError(f"truncation radius must be in [0, inf], got {r}")
    return r


@dataclass(frozen=True)
class MlpQuery:
    """One estimator request ``V_{n,M,r}(t, x)``; ``r = inf`` disables truncation."""

    t: float
    x: np.ndarray
    n: int
    M: int
    r: float = INFINITE

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=np.float64).reshape(-1))
        object.__setattr__(self, "r", check_radius(self.r))
        if self.n < 0:
            raise ValueError("n must be nonnegative")
        if self.M < 1:
            raise ValueError("M must be positive")
        if self.t < 0:
            raise ValueError("t must be nonnegative")

    def validate_for(self, problem: SemilinearProblem) -> None:
        if self.t > problem.T:
            raise ValueError(f"t={self.t} exceeds the horizon T={problem.T}")
        if self.x.shape != (problem.d,):
            raise ValueError(f"x has shape {self.x.shape}, expected ({problem.d},)")


def truncate(r: float, y):
    """Componentwise clamp of ``y`` to ``[-r, r]``; identity for ``r = inf``."""
    y = np.asarray(y, dtype=np.float64)
    if r == INFINITE:
        return y
    return np.clip(y, -r, r)


def sample_time(t, T, u):
    """Map a uniform draw ``u`` in ``[0, 1]`` onto ``[t, T]``."""
    return t + (T - t) * u
