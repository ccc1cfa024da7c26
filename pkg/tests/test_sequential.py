"""Mixture-SPRT: monotonicity, no-data behavior, null error control."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metaexp import SequentialState, sequential_update


def test_empty_state_has_p_one():
    s = SequentialState()
    assert s.running_p == 1.0
    s = sequential_update(s, 0, 0, 0, 0)
    assert s.running_p == 1.0


def test_strong_effect_drives_p_down():
    s = SequentialState()
    for _ in range(30):
        s = sequential_update(s, 10, 100, 30, 100)
    assert s.running_p < 0.05


@settings(max_examples=50)
@given(
    st.lists(
        st.tuples(
            st.integers(min_value=0, max_value=50),
            st.integers(min_value=0, max_value=50),
        ),
        min_size=1,
        max_size=40,
    )
)
def test_running_p_never_increases(batches):
    s = SequentialState()
    previous = s.running_p
    for s1, s2 in batches:
        s = sequential_update(s, s1, 50, s2, 50)
        assert s.running_p <= previous
        previous = s.running_p
    assert 0.0 <= s.running_p <= 1.0


def test_state_is_updated_by_value():
    s0 = SequentialState()
    s1 = sequential_update(s0, 5, 50, 9, 50)
    assert s0.running_p == 1.0 and s0.n1 == 0
    assert s1.n1 == 50 and s1.x2 == 9


def test_invalid_batches():
    s = SequentialState()
    with pytest.raises(ValueError):
        sequential_update(s, 5, 4, 0, 0)
    with pytest.raises(ValueError):
        sequential_update(s, -1, 4, 0, 0)
    with pytest.raises(ValueError):
        SequentialState(tau_sq=0.0)


def test_null_type_one_error_with_daily_peeking():
    # 2000 null runs, 90 daily looks of 100 per arm at rate 0.10; the
    # always-valid construction must keep the any-time rejection rate at or
    # below alpha (plus Monte Carlo noise). The acceptance suite repeats
    # this at 10k replications.
    reps, days, per_day, rate, alpha = 2000, 90, 100, 0.10, 0.05
    rng = np.random.Generator(np.random.Philox(key=4242))
    draws1 = rng.binomial(per_day, rate, size=(reps, days))
    draws2 = rng.binomial(per_day, rate, size=(reps, days))
    rejections = 0
    for r in range(reps):
        s = SequentialState()
        for d in range(days):
            s = sequential_update(s, int(draws1[r, d]), per_day, int(draws2[r, d]), per_day)
            if s.running_p <= alpha:
                rejections += 1
                break
    rate_hat = rejections / reps
    assert rate_hat <= alpha + 3.0 * np.sqrt(alpha * (1 - alpha) / reps)
