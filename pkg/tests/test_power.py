"""Power and sample-size against the Monte Carlo rejection-rate oracle."""

import pytest

from metaexp import PowerSpec, power_two_proportions, required_sample_size

from oracles import mc_rejection_rate


def spec(baseline=0.10, mde=0.02, alpha=0.05, power=0.80, n=None):
    return PowerSpec(
        baseline_rate=baseline,
        mde_abs=mde,
        alpha=alpha,
        target_power=power,
        n_per_arm=n,
    )


def test_power_tends_to_alpha_for_vanishing_effect():
    for alpha in (0.05, 0.01):
        p = power_two_proportions(spec(mde=1e-12, alpha=alpha, n=500))
        assert p == pytest.approx(alpha, abs=1e-6)


def test_power_monotone_in_n_and_mde():
    values = [power_two_proportions(spec(n=n)) for n in (100, 500, 2000, 8000)]
    assert values == sorted(values)
    by_mde = [power_two_proportions(spec(mde=m, n=1500)) for m in (0.005, 0.01, 0.03)]
    assert by_mde == sorted(by_mde)


def test_power_requires_n():
    with pytest.raises(ValueError):
        power_two_proportions(spec())


def test_required_n_round_trip():
    for baseline in (0.05, 0.1, 0.3):
        for mde in (0.01, 0.02, 0.05):
            s = spec(baseline=baseline, mde=mde)
            n = required_sample_size(s)
            assert power_two_proportions(spec(baseline, mde, n=n)) >= s.target_power
            if n > 1:
                below = power_two_proportions(spec(baseline, mde, n=n - 1))
                assert below < s.target_power


def test_required_n_decreases_when_mde_doubles():
    assert required_sample_size(spec(mde=0.04)) < required_sample_size(spec(mde=0.02))


def test_required_n_degenerate_target():
    assert required_sample_size(spec(power=0.05, alpha=0.05)) == 1


def test_invalid_specs_rejected():
    with pytest.raises(ValueError):
        spec(baseline=1.5)
    with pytest.raises(ValueError):
        spec(mde=0.0)
    with pytest.raises(ValueError):
        spec(baseline=0.98, mde=0.05)


def test_power_matches_monte_carlo_at_required_n():
    s = spec(baseline=0.10, mde=0.02)
    n = required_sample_size(s)
    analytic = power_two_proportions(spec(n=n))
    simulated = mc_rejection_rate(0.10, 0.12, n, trials=100_000, seed=1001)
    assert analytic == pytest.approx(simulated, abs=0.02)
    assert simulated >= 0.79
    under = mc_rejection_rate(0.10, 0.12, int(0.8 * n), trials=100_000, seed=1002)
    assert under < 0.80
