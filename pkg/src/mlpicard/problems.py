"""Built-in example problems and their published reference values."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .model import INFINITE, GenericSde, MlpQuery, ScaledBrownian, SemilinearProblem, UnitDriftGbm

NAMES = ("allen_cahn", "sine_gordon", "heat_system", "semilinear_bs")
SQRT2 = math.sqrt(2.0)

# sup |u| <= sqrt(5) e / 2 <= 4 for the Allen-Cahn example
ALLEN_CAHN_RADIUS = 4.0


class Provenance(enum.Enum):
    PAPER_DS = "paper_ds"
    PAPER_MLP = "paper_mlp"
    SELF_COMPUTED = "self_computed"


@dataclass(frozen=True)
class ReferenceSolution:
    example: str
    d: int
    provenance: Provenance
    value: tuple[float, ...]


def canonical_name(name: str) -> str:
    key = name.strip().lower().replace("-", "_")
    if key not in NAMES:
        raise ValueError(f"unknown example {name!r}; choose from {', '.join(NAMES)}")
    return key


def _sq_norm(x):
    return (x * x).sum(axis=1)


def _g_inverse_quadratic(x):
    return (1.0 / (2.0 + 0.4 * _sq_norm(x)))[:, None]


def _g_log(x):
    return np.log(0.5 * (1.0 + _sq_norm(x)))[:, None]


def _g_heat(x):
    s = _sq_norm(x)
    return np.stack([1.0 / (2.0 + 0.4 * s), np.log(0.5 * (1.0 + s))], axis=1)


def _f_allen_cahn(x, y):
    return y - y**3


def _f_sine_gordon(x, y):
    return np.sin(y)


def _f_heat(x, y):
    y1, y2 = y[:, 0], y[:, 1]
    return np.stack([y2 / (1.0 + y2 * y2), 2.0 * y1 / 3.0], axis=1)


def _f_bs(x, y):
    return y / (1.0 + y * y)


def builtin_problem(name: str, d: int) -> SemilinearProblem:
    """One of the four example PDEs in dimension ``d`` (horizon ``T = 1``)."""
    name = canonical_name(name)
    if d < 1:
        raise ValueError("d must be positive")
    bm = ScaledBrownian(SQRT2)
    if name == "allen_cahn":
        return SemilinearProblem(d, 1, 1.0, _f_allen_cahn, _g_inverse_quadratic, bm, name)
    if name == "sine_gordon":
        return SemilinearProblem(d, 1, 1.0, _f_sine_gordon, _g_inverse_quadratic, bm, name)
    if name == "heat_system":
        return SemilinearProblem(d, 2, 1.0, _f_heat, _g_heat, bm, name)
    return SemilinearProblem(d, 1, 1.0, _f_bs, _g_log, UnitDriftGbm(), name)


def _zero_drift(x):
    return np.zeros_like(x)


@dataclass(frozen=True)
class _ScaledIdentity:
    scale: float

    def __call__(self, x):
        n, d = x.shape
        return np.broadcast_to(self.scale * np.eye(d), (n, d, d))


def _identity_drift(x):
    return x.copy()


def _diag(x):
    n, d = x.shape
    out = np.zeros((n, d, d))
    out[:, np.arange(d), np.arange(d)] = x
    return out


def with_euler_maruyama(problem: SemilinearProblem, steps_per_unit_time: float | None = None) -> SemilinearProblem:
    """Same problem, but with the exact flow replaced by Euler-Maruyama."""
    flow = problem.flow
    if isinstance(flow, ScaledBrownian):
        flow = GenericSde(_zero_drift, _ScaledIdentity(flow.scale), steps_per_unit_time)
    elif isinstance(flow, UnitDriftGbm):
        flow = GenericSde(_identity_drift, _diag, steps_per_unit_time)
    else:
        flow = replace(flow, em_steps_per_unit_time=steps_per_unit_time)
    return replace(problem, flow=flow)


@dataclass(frozen=True)
class QueryTemplate:
    """Evaluation point and truncation radius of an example; ``n``/``M`` open."""

    t: float
    x: np.ndarray
    r: float

    def query(self, n: int, M: int | None = None) -> MlpQuery:
        return MlpQuery(self.t, self.x, n, n if M is None else M, self.r)


def default_query(name: str, d: int) -> QueryTemplate:
    name = canonical_name(name)
    if name == "semilinear_bs":
        return QueryTemplate(0.0, np.full(d, 50.0), INFINITE)
    r = ALLEN_CAHN_RADIUS if name == "allen_cahn" else INFINITE
    return QueryTemplate(0.0, np.zeros(d), r)


# ---------------------------------------------------------------------------
# fixtures


def parse_fixtures(text: str) -> dict[tuple[str, int, Provenance], ReferenceSolution]:
    table = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            example, d, prov, k = canonical_name(parts[0]), int(parts[1]), Provenance(parts[2]), int(parts[3])
            values = tuple(float(v) for v in parts[4:])
        except (IndexError, ValueError) as exc:
            raise ValueError(f"fixture line {lineno}: {exc}") from None
        if len(values) != k:
            raise ValueError(f"fixture line {lineno}: expected {k} values, got {len(values)}")
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"fixture line {lineno}: non-finite value")
        table[example, d, prov] = ReferenceSolution(example, d, prov, values)
    return table


def load_fixtures(path: str | Path | None = None):
    if path is None:
        text = resources.files("mlpicard").joinpath("data/references.txt").read_text()
    else:
        text = Path(path).read_text()
    return parse_fixtures(text)


def reference_value(name: str, d: int, provenance: Provenance | str, fixtures=None) -> ReferenceSolution:
    name = canonical_name(name)
    provenance = Provenance(provenance)
    table = load_fixtures() if fixtures is None else fixtures
    try:
        return table[name, d, provenance]
    except KeyError:
        raise KeyError(f"no {provenance.value} reference for {name} at d={d}") from None
