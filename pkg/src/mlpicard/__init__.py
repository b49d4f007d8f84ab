"""Full-history recursive multilevel Picard approximations for semilinear PDE systems."""

from .estimator import (
    CostCounters,
    Estimate,
    mlp_estimate,
    mlp_estimate_many,
    predicted_flow_samples,
    predicted_uniforms,
)
from .model import (
    INFINITE,
    GenericSde,
    MlpQuery,
    NonFiniteError,
    ScaledBrownian,
    SemilinearProblem,
    UnitDriftGbm,
    sample_time,
    truncate,
)
from .problems import Provenance, builtin_problem, default_query, reference_value
from .rng import ConstantSource, KeyedSource, MultiIndexKey, StreamState, derive_key

__version__ = "0.1.0"
