"""Independent oracles used by the unit and acceptance tests.

Each function recomputes an expected value along a different route than the
library (numerical integration, brute-force enumeration, vectorized Monte
Carlo); keep them free of calls into the code paths they check.
"""

from math import comb, exp, pi, sqrt

import numpy as np

Z_975 = 1.9599639845400545  # classic two-sided 5% critical value


def quadrature_normal_cdf(x: float, steps: int = 4000) -> float:
    """Standard normal CDF by composite Simpson integration of the density."""
    if x == 0.0:
        return 0.5
    a, b = (x, 0.0) if x < 0.0 else (0.0, x)
    h = (b - a) / steps
    dens = lambda t: exp(-0.5 * t * t) / sqrt(2.0 * pi)
    total = dens(a) + dens(b)
    for i in range(1, steps):
        total += dens(a + i * h) * (4 if i % 2 else 2)
    integral = total * h / 3.0
    return 0.5 - integral if x < 0.0 else 0.5 + integral


def bisect_normal_quantile(p: float, cdf, tol: float = 1e-12) -> float:
    """Plain bisection of a CDF; independent of Newton iteration details."""
    lo, hi = -40.0, 40.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if cdf(mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def mc_rejection_rate(
    p1: float,
    p2: float,
    n: int,
    trials: int,
    seed: int,
    z_crit: float = Z_975,
) -> float:
    """Monte Carlo rejection rate of the pooled two-proportion z-test.

    Simulates Bernoulli arms as binomial counts and applies the same
    decision rule as ``two_proportion_ztest`` (pooled variance with the
    0.5/n continuity floor, two-sided), vectorized for speed.
    """
    rng = np.random.Generator(np.random.Philox(key=seed))
    x1 = rng.binomial(n, p1, size=trials)
    x2 = rng.binomial(n, p2, size=trials)
    est = x2 / n - x1 / n
    total = 2 * n
    pbar = np.clip((x1 + x2) / total, 0.5 / total, 1.0 - 0.5 / total)
    se = np.sqrt(pbar * (1.0 - pbar) * (2.0 / n))
    return float(np.mean(np.abs(est / se) >= z_crit))


def permutation_pvalue(x1: int, n1: int, x2: int, n2: int) -> float:
    """Exact permutation p-value for the difference of proportions.

    Enumerates all reallocations of the pooled successes across the two
    groups (hypergeometric weights). Uses the mid-p convention (outcomes
    exactly as extreme as observed count half), the standard comparator for
    continuity-free normal approximations.
    """
    total = n1 + n2
    s = x1 + x2
    observed = abs(x2 / n2 - x1 / n1)
    p = 0.0
    denom = comb(total, s)
    for k in range(max(0, s - n2), min(n1, s) + 1):
        diff = abs((s - k) / n2 - k / n1)
        w = comb(n1, k) * comb(n2, s - k) / denom
        if diff > observed + 1e-12:
            p += w
        elif diff >= observed - 1e-12:
            p += 0.5 * w
    return p
