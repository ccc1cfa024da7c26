"""Pure-Python numeric kernels.

These are the scalar hot-path functions behind the statistics layer: the
standard normal CDF and quantile, two-proportion power and sample size, the
pooled two-proportion z statistic, and the mixture-SPRT update. A compiled
twin lives in ``_kernels_c.pyx``; backend selection happens in ``_backend``.

Bit-compatibility contract
--------------------------
The compiled twin implements the exact same sequence of floating-point
operations (same expression order, no fused multiply-add, same libm calls),
so both backends return bit-identical doubles. When editing a formula here,
mirror the change in ``_kernels_c.pyx`` operation for operation.

Algorithms
----------
* ``normal_cdf`` is computed as ``0.5 * erfc(-x / sqrt(2))``. For arguments
  below 2 the complementary error function uses the Maclaurin series of
  ``erf``; for larger arguments it uses the Lentz-evaluated continued
  fraction of the upper incomplete gamma function ``Q(1/2, t^2)``. Both
  branches converge to full double precision (absolute error well below
  1e-15, far inside the documented 1e-7 budget).
* ``normal_quantile`` solves ``cdf(x) = p`` by safeguarded Newton iteration
  (bisection fallback) on the bracket [-40, 40].
* Power and sample size use the two-sided normal approximation for the
  difference of two proportions with per-arm variance ``p1*q1 + p2*q2``;
  the returned sample size is the minimal integer n whose power clears the
  target (closed-form start, then an exact scan).
* Proportions used in variance terms get a continuity floor of ``0.5/n`` so
  degenerate counts (0 or n successes) never zero out a denominator.
"""

from math import ceil, exp, fabs, log, sqrt

SQRT_2 = 1.4142135623730951
SQRT_PI = 1.7724538509055160273
SQRT_2PI = 2.5066282746310002

_SERIES_CUTOFF = 2.0
_MAX_SERIES_TERMS = 200
_MAX_CF_ITER = 300
_CF_EPS = 1e-16
_CF_FPMIN = 1e-300


def _erfc_nonneg(t):
    """erfc(t) for t >= 0."""
    if t < _SERIES_CUTOFF:
        # erf(t) = (2/sqrt(pi)) * sum_k (-1)^k t^(2k+1) / (k! (2k+1))
        tt = t * t
        term = t
        total = t
        k = 1
        while k < _MAX_SERIES_TERMS:
            term = term * (-tt) / k
            contrib = term / (2.0 * k + 1.0)
            total = total + contrib
            if fabs(contrib) < 1e-17 * fabs(total):
                break
            k += 1
        return 1.0 - (2.0 / SQRT_PI) * total
    # erfc(t) = Q(1/2, t^2) via the incomplete-gamma continued fraction
    # (modified Lentz): Q(a, x) = e^(-x) x^a h / Gamma(a) with a = 1/2,
    # Gamma(1/2) = sqrt(pi), so erfc(t) = t * exp(-t^2) * h / sqrt(pi).
    x = t * t
    a = 0.5
    b = x + 1.0 - a
    c = 1.0 / _CF_FPMIN
    d = 1.0 / b
    h = d
    i = 1
    while i <= _MAX_CF_ITER:
        an = -i * (i - a)
        b = b + 2.0
        d = an * d + b
        if fabs(d) < _CF_FPMIN:
            d = _CF_FPMIN
        c = b + an / c
        if fabs(c) < _CF_FPMIN:
            c = _CF_FPMIN
        d = 1.0 / d
        delta = d * c
        h = h * delta
        if fabs(delta - 1.0) < _CF_EPS:
            break
        i += 1
    return t * exp(-x) * h / SQRT_PI


def erfc(t):
    """Complementary error function."""
    if t < 0.0:
        return 2.0 - _erfc_nonneg(-t)
    return _erfc_nonneg(t)


def normal_cdf(x):
    """Standard normal CDF."""
    return 0.5 * erfc(-x / SQRT_2)


def normal_pdf(x):
    """Standard normal density."""
    return exp(-0.5 * x * x) / SQRT_2PI


def normal_quantile(p):
    """Inverse standard normal CDF for p in (0, 1).

    Solved on the lower tail (upper-tail arguments are reflected, making the
    function antisymmetric by construction) with safeguarded Newton
    iteration on the CDF: the initial guess comes from the Gaussian tail
    asymptotic, steps that leave the current bracket fall back to bisection,
    and convergence is relative in both the CDF residual and the abscissa.
    """
    if p == 0.5:
        return 0.0
    if p > 0.5:
        return -_quantile_lower(1.0 - p)
    return _quantile_lower(p)


def _quantile_lower(p):
    """Root of cdf(x) = p for p in (0, 0.5); the root is negative."""
    lo = -40.0
    hi = 0.0
    x = -sqrt(-2.0 * log(p))
    if x <= lo:
        x = lo + 1.0
    i = 0
    while i < 200:
        f = normal_cdf(x) - p
        if f > 0.0:
            hi = x
        elif f < 0.0:
            lo = x
        else:
            return x
        if fabs(f) <= 5e-16 * p:
            return x
        d = normal_pdf(x)
        if d > 0.0:
            nxt = x - f / d
        else:
            nxt = 0.5 * (lo + hi)
        if nxt <= lo or nxt >= hi:
            nxt = 0.5 * (lo + hi)
        if nxt == x:
            return x
        if fabs(nxt - x) <= 1e-15 * fabs(x):
            return nxt
        x = nxt
        i += 1
    return x


def _floored(p, n):
    """Clamp a proportion used in a variance term to [0.5/n, 1 - 0.5/n]."""
    f = 0.5 / n
    if p < f:
        return f
    hi = 1.0 - f
    if p > hi:
        return hi
    return p


def power_at(p1, p2, n, z_alpha):
    """Two-sided power of the pooled z-test at n per arm.

    ``z_alpha`` is the (1 - alpha/2) normal quantile, precomputed by the
    caller so repeated evaluations share one quantile solve.
    """
    a = _floored(p1, n)
    b = _floored(p2, n)
    v = a * (1.0 - a) + b * (1.0 - b)
    zd = (p2 - p1) * sqrt(n) / sqrt(v)
    if zd < 0.0:
        zd = -zd
    return normal_cdf(zd - z_alpha) + normal_cdf(-zd - z_alpha)


def required_n(p1, p2, z_alpha, z_power, target_power):
    """Minimal per-arm n with ``power_at`` >= target_power.

    Starts from the closed form
    ``(z_alpha + z_power)^2 (p1 q1 + p2 q2) / (p2 - p1)^2`` and scans to the
    exact minimum (power is monotone in n).
    """
    delta = p2 - p1
    v = p1 * (1.0 - p1) + p2 * (1.0 - p2)
    zsum = z_alpha + z_power
    n = int(ceil(zsum * zsum * v / (delta * delta)))
    if n < 1:
        n = 1
    while n > 1 and power_at(p1, p2, n - 1, z_alpha) >= target_power:
        n -= 1
    while power_at(p1, p2, n, z_alpha) < target_power:
        n += 1
    return n


def ztest_core(x1, n1, x2, n2):
    """Pooled-variance two-proportion z test.

    Returns ``(estimate, z, p_value)`` with estimate = x2/n2 - x1/n1 and a
    two-sided p-value.
    """
    ph1 = x1 / n1
    ph2 = x2 / n2
    est = ph2 - ph1
    pbar = _floored((x1 + x2) / (n1 + n2), n1 + n2)
    se = sqrt(pbar * (1.0 - pbar) * (1.0 / n1 + 1.0 / n2))
    z = est / se
    az = z if z >= 0.0 else -z
    p = 2.0 * normal_cdf(-az)
    if p > 1.0:
        p = 1.0
    return est, z, p


def msprt_step(n1, x1, n2, x2, tau_sq, running_p):
    """One mixture-SPRT look; returns the updated always-valid p-value.

    The mixture likelihood ratio against a N(0, tau_sq) prior on the
    difference of proportions is

        Lambda = sqrt(V / (V + tau^2)) * exp(d^2 tau^2 / (2 V (V + tau^2)))

    with V the pooled-variance estimate of the difference and d the observed
    difference. The always-valid p-value is the running minimum of
    ``1 / Lambda``, never increasing across looks.
    """
    if n1 <= 0 or n2 <= 0:
        return running_p
    pbar = _floored((x1 + x2) / (n1 + n2), n1 + n2)
    v = pbar * (1.0 - pbar) * (1.0 / n1 + 1.0 / n2)
    d = x2 / n2 - x1 / n1
    vt = v + tau_sq
    log_lambda = 0.5 * log(v / vt) + d * d * tau_sq / (2.0 * v * vt)
    if log_lambda > 700.0:
        cand = 0.0
    else:
        cand = exp(-log_lambda)
    if cand < running_p:
        return cand
    return running_p
