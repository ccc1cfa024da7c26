"""Covariate adjustment: theta identity, mean preservation, variance ratio."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metaexp import cuped_adjust


def test_perfect_covariate_removes_all_variance():
    y = np.array([0.3, 1.2, -0.5, 2.0, 0.8])
    adjusted, theta = cuped_adjust(y, y)
    assert theta == pytest.approx(1.0, abs=1e-12)
    assert float(np.var(adjusted)) == pytest.approx(0.0, abs=1e-9)
    assert float(adjusted.mean()) == pytest.approx(float(y.mean()), abs=1e-9)


def test_independent_covariate_changes_little():
    rng = np.random.Generator(np.random.Philox(key=31))
    y = rng.normal(size=20_000)
    x = rng.normal(size=20_000)
    adjusted, theta = cuped_adjust(y, x)
    assert abs(theta) < 0.03
    ratio = float(np.var(adjusted) / np.var(y))
    assert ratio == pytest.approx(1.0, abs=0.01)


@pytest.mark.parametrize("rho", [0.3, 0.7, 0.9])
def test_variance_ratio_tracks_correlation(rho):
    rng = np.random.Generator(np.random.Philox(key=32))
    n = 10_000
    x = rng.normal(size=n)
    y = rho * x + np.sqrt(1.0 - rho * rho) * rng.normal(size=n)
    adjusted, _ = cuped_adjust(y, x)
    ratio = float(np.var(adjusted) / np.var(y))
    assert ratio == pytest.approx(1.0 - rho * rho, abs=0.05)


def test_zero_variance_covariate_rejected():
    with pytest.raises(ValueError):
        cuped_adjust([1.0, 2.0, 3.0], [5.0, 5.0, 5.0])
    with pytest.raises(ValueError):
        cuped_adjust([1.0], [2.0])


@settings(max_examples=100)
@given(
    st.lists(
        st.tuples(
            st.floats(min_value=-50, max_value=50),
            st.floats(min_value=-50, max_value=50),
        ),
        min_size=2,
        max_size=60,
    )
)
def test_never_increases_variance(pairs):
    y = np.array([a for a, _ in pairs])
    x = np.array([b for _, b in pairs])
    if float(np.var(x)) <= 1e-12:
        return
    adjusted, _ = cuped_adjust(y, x)
    assert float(np.var(adjusted)) <= float(np.var(y)) * (1.0 + 1e-9) + 1e-12
    assert float(adjusted.mean()) == pytest.approx(float(y.mean()), abs=1e-9)
