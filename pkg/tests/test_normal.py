"""Normal CDF and quantile against integration and bisection oracles."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metaexp import normal_cdf, normal_quantile

from oracles import bisect_normal_quantile, quadrature_normal_cdf


def test_cdf_at_zero():
    assert normal_cdf(0.0) == 0.5


def test_cdf_matches_quadrature():
    assert normal_cdf(1.959964) == pytest.approx(0.975, abs=1e-6)
    for x in [-6.0, -3.3, -1.2, -0.4, 0.7, 1.5, 2.2, 3.1, 4.8]:
        assert normal_cdf(x) == pytest.approx(quadrature_normal_cdf(x), abs=1e-9)


def test_cdf_rejects_non_finite():
    with pytest.raises(ValueError):
        normal_cdf(float("nan"))
    with pytest.raises(ValueError):
        normal_cdf(float("inf"))


@given(st.floats(min_value=-37.0, max_value=37.0, allow_nan=False))
def test_cdf_symmetry(x):
    assert normal_cdf(-x) == pytest.approx(1.0 - normal_cdf(x), abs=1e-12)


@given(
    st.floats(min_value=-37.0, max_value=37.0),
    st.floats(min_value=-37.0, max_value=37.0),
)
def test_cdf_monotone(a, b):
    lo, hi = min(a, b), max(a, b)
    assert normal_cdf(lo) <= normal_cdf(hi)


@given(st.floats(min_value=-8.0, max_value=8.0))
def test_cdf_strictly_interior(x):
    # beyond |x| ~ 8.3 the upper tail is below one ulp of 1.0, so the open
    # interval can only be checked where doubles can represent it
    assert 0.0 < normal_cdf(x) < 1.0


def test_quantile_median():
    assert normal_quantile(0.5) == 0.0


def test_quantile_975():
    assert normal_quantile(0.975) == pytest.approx(1.959964, abs=1e-5)
    assert normal_quantile(0.975) == pytest.approx(
        bisect_normal_quantile(0.975, normal_cdf), abs=1e-9
    )


def test_quantile_domain():
    for p in (0.0, 1.0, -0.2, 1.7):
        with pytest.raises(ValueError):
            normal_quantile(p)


@settings(max_examples=200)
@given(st.floats(min_value=1e-10, max_value=1.0 - 1e-10))
def test_quantile_round_trip(p):
    assert normal_cdf(normal_quantile(p)) == pytest.approx(p, abs=1e-9)


@given(st.floats(min_value=1e-7, max_value=0.5))
def test_quantile_antisymmetry(p):
    # below p ~ 1e-8 the rounding of 1 - p alone moves the upper quantile
    # by more than 1e-9, so the identity is only float-checkable here
    assert normal_quantile(p) + normal_quantile(1.0 - p) == pytest.approx(
        0.0, abs=1e-9
    )


def test_quantile_handles_extreme_tails():
    q = normal_quantile(1e-300)
    assert math.isfinite(q) and q < -30.0
