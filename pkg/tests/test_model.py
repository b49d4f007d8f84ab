import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mlpicard.model import INFINITE, MlpQuery, ScaledBrownian, SemilinearProblem, sample_time, truncate

finite = st.floats(-1e6, 1e6, allow_nan=False)
vectors = arrays(np.float64, st.integers(1, 5), elements=finite)
radii = st.one_of(st.just(INFINITE), st.floats(0, 100))


@pytest.mark.parametrize(
    "r, y, expected",
    [
        (INFINITE, [-7.3, 2.1], [-7.3, 2.1]),
        (4.0, [5.2], [4.0]),
        (2.0, [-3.0, 0.5], [-2.0, 0.5]),
        (0.0, [1.0, -1.0], [0.0, 0.0]),
    ],
)
def test_truncate_examples(r, y, expected):
    np.testing.assert_array_equal(truncate(r, y), expected)


@given(radii, vectors)
def test_truncate_idempotent(r, y):
    once = truncate(r, y)
    np.testing.assert_array_equal(truncate(r, once), once)


@given(st.floats(0, 100), vectors)
def test_truncate_bounded(r, y):
    assert np.max(np.abs(truncate(r, y))) <= r


@given(st.floats(0, 100), vectors)
def test_truncate_fixes_inside_points(r, y):
    inside = y[np.abs(y) <= r]
    np.testing.assert_array_equal(truncate(r, inside), inside)


@pytest.mark.parametrize("t, T, u, expected", [(1, 1, 0.73, 1), (0, 1, 0, 0), (0.5, 1, 0.5, 0.75)])
def test_sample_time_examples(t, T, u, expected):
    assert sample_time(t, T, u) == expected


@given(st.floats(0, 10), st.floats(0, 10), st.floats(0, 1), st.floats(0, 1))
def test_sample_time_in_interval_and_monotone(t, span, u1, u2):
    T = t + span
    a, b = sample_time(t, T, u1), sample_time(t, T, u2)
    assert t <= a <= T
    if u1 <= u2:
        assert a <= b


def test_query_validation():
    with pytest.raises(ValueError):
        MlpQuery(0, [0.0], -1, 1)
    with pytest.raises(ValueError):
        MlpQuery(0, [0.0], 1, 0)
    with pytest.raises(ValueError):
        MlpQuery(0, [0.0], 1, 1, r=-1)
    with pytest.raises(ValueError):
        MlpQuery(0, [0.0], 1, 1, r=math.nan)
    problem = SemilinearProblem(2, 1, 1.0, lambda x, y: y, lambda x: x[:, :1], ScaledBrownian(1.0))
    with pytest.raises(ValueError):
        MlpQuery(1.5, [0.0, 0.0], 1, 1).validate_for(problem)
    with pytest.raises(ValueError):
        MlpQuery(0.0, [0.0], 1, 1).validate_for(problem)


def test_problem_validation():
    with pytest.raises(ValueError):
        SemilinearProblem(0, 1, 1.0, None, None, ScaledBrownian(1.0))
    with pytest.raises(ValueError):
        SemilinearProblem(1, 1, 0.0, None, None, ScaledBrownian(1.0))
    with pytest.raises(ValueError):
        ScaledBrownian(0.0)
