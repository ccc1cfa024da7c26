"""Two-proportion z-test: identities, permutation oracle, null calibration."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from metaexp import two_proportion_ztest

from oracles import Z_975, permutation_pvalue


def test_identical_arms():
    r = two_proportion_ztest(50, 100, 50, 100)
    assert r.estimate == 0.0
    assert r.z_score == 0.0
    assert r.p_value == 1.0
    assert r.ci_low <= 0.0 <= r.ci_high


def test_swapped_arms_negate_estimate():
    a = two_proportion_ztest(40, 120, 71, 130)
    b = two_proportion_ztest(71, 130, 40, 120)
    assert b.estimate == pytest.approx(-a.estimate, abs=1e-15)
    assert b.p_value == pytest.approx(a.p_value, abs=1e-12)


def test_against_permutation_oracle():
    r = two_proportion_ztest(9, 30, 3, 30)
    assert r.p_value == pytest.approx(permutation_pvalue(9, 30, 3, 30), abs=0.02)


def test_degenerate_counts_floored():
    r = two_proportion_ztest(0, 40, 0, 40)
    assert r.p_value == 1.0
    full = two_proportion_ztest(40, 40, 40, 40)
    assert full.p_value == 1.0


def test_invalid_inputs():
    with pytest.raises(ValueError):
        two_proportion_ztest(1, 0, 2, 10)
    with pytest.raises(ValueError):
        two_proportion_ztest(11, 10, 2, 10)
    with pytest.raises(ValueError):
        two_proportion_ztest(1, 10, 2, 10, alpha=0.0)


@given(
    st.integers(min_value=1, max_value=200),
    st.integers(min_value=1, max_value=200),
    st.data(),
)
def test_ci_brackets_estimate(n1, n2, data):
    x1 = data.draw(st.integers(min_value=0, max_value=n1))
    x2 = data.draw(st.integers(min_value=0, max_value=n2))
    r = two_proportion_ztest(x1, n1, x2, n2)
    assert r.ci_low <= r.estimate <= r.ci_high
    assert 0.0 <= r.p_value <= 1.0
    assert -1.0 <= r.estimate <= 1.0


def test_null_rejection_rate():
    # 10k null datasets; the rejection rate should sit at alpha within
    # 3 Monte Carlo standard errors.
    rng = np.random.Generator(np.random.Philox(key=77))
    n, p, reps = 400, 0.10, 10_000
    x1 = rng.binomial(n, p, size=reps)
    x2 = rng.binomial(n, p, size=reps)
    rejected = sum(
        two_proportion_ztest(int(a), n, int(b), n).p_value <= 0.05
        for a, b in zip(x1, x2)
    )
    rate = rejected / reps
    assert abs(rate - 0.05) <= 3.0 * np.sqrt(0.05 * 0.95 / reps)


def test_decision_matches_critical_value_rule():
    # The vectorized oracle in oracles.py rejects on |z| >= z_crit; spot
    # check that this agrees with the p-value rule of the real test.
    rng = np.random.Generator(np.random.Philox(key=78))
    for _ in range(200):
        n = int(rng.integers(5, 500))
        x1 = int(rng.integers(0, n + 1))
        x2 = int(rng.integers(0, n + 1))
        r = two_proportion_ztest(x1, n, x2, n)
        assert (r.p_value <= 0.05) == (abs(r.z_score) >= Z_975)
