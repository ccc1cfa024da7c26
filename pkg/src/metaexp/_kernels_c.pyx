# cython: language_level=3, boundscheck=False, cdivision=True
"""Compiled numeric kernels.

Twin of ``metaexp._kernels_py``: same functions, same floating-point
operation order, same libm calls, so results are bit-identical to the pure
Python backend (the build disables FMA contraction to keep it that way).
See the Python module for the algorithm notes; keep the two in lockstep.
"""

from libc.math cimport ceil, exp, fabs, log, sqrt

cdef double SQRT_2 = 1.4142135623730951
cdef double SQRT_PI = 1.7724538509055160273
cdef double SQRT_2PI = 2.5066282746310002

cdef double _SERIES_CUTOFF = 2.0
cdef int _MAX_SERIES_TERMS = 200
cdef int _MAX_CF_ITER = 300
cdef double _CF_EPS = 1e-16
cdef double _CF_FPMIN = 1e-300


cdef double _erfc_nonneg(double t):
    cdef double tt, term, total, contrib, x, a, b, c, d, h, an, delta
    cdef int k, i
    if t < _SERIES_CUTOFF:
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


cdef double _erfc(double t):
    if t < 0.0:
        return 2.0 - _erfc_nonneg(-t)
    return _erfc_nonneg(t)


cdef double _normal_cdf(double x):
    return 0.5 * _erfc(-x / SQRT_2)


cdef double _normal_pdf(double x):
    return exp(-0.5 * x * x) / SQRT_2PI


cdef double _quantile_lower(double p):
    cdef double lo = -40.0
    cdef double hi = 0.0
    cdef double x = -sqrt(-2.0 * log(p))
    cdef double f, d, nxt
    cdef int i = 0
    if x <= lo:
        x = lo + 1.0
    while i < 200:
        f = _normal_cdf(x) - p
        if f > 0.0:
            hi = x
        elif f < 0.0:
            lo = x
        else:
            return x
        if fabs(f) <= 5e-16 * p:
            return x
        d = _normal_pdf(x)
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


cdef double _normal_quantile(double p):
    if p == 0.5:
        return 0.0
    if p > 0.5:
        return -_quantile_lower(1.0 - p)
    return _quantile_lower(p)


cdef double _floored(double p, double n):
    cdef double f = 0.5 / n
    cdef double hi
    if p < f:
        return f
    hi = 1.0 - f
    if p > hi:
        return hi
    return p


cdef double _power_at(double p1, double p2, double n, double z_alpha):
    cdef double a = _floored(p1, n)
    cdef double b = _floored(p2, n)
    cdef double v = a * (1.0 - a) + b * (1.0 - b)
    cdef double zd = (p2 - p1) * sqrt(n) / sqrt(v)
    if zd < 0.0:
        zd = -zd
    return _normal_cdf(zd - z_alpha) + _normal_cdf(-zd - z_alpha)


def erfc(double t):
    """Complementary error function."""
    return _erfc(t)


def normal_cdf(double x):
    """Standard normal CDF."""
    return _normal_cdf(x)


def normal_pdf(double x):
    """Standard normal density."""
    return _normal_pdf(x)


def normal_quantile(double p):
    """Inverse standard normal CDF for p in (0, 1)."""
    return _normal_quantile(p)


def power_at(double p1, double p2, double n, double z_alpha):
    """Two-sided power of the pooled z-test at n per arm."""
    return _power_at(p1, p2, n, z_alpha)


def required_n(double p1, double p2, double z_alpha, double z_power,
               double target_power):
    """Minimal per-arm n with ``power_at`` >= target_power."""
    cdef double delta = p2 - p1
    cdef double v = p1 * (1.0 - p1) + p2 * (1.0 - p2)
    cdef double zsum = z_alpha + z_power
    cdef long n = <long>ceil(zsum * zsum * v / (delta * delta))
    if n < 1:
        n = 1
    while n > 1 and _power_at(p1, p2, n - 1, z_alpha) >= target_power:
        n -= 1
    while _power_at(p1, p2, n, z_alpha) < target_power:
        n += 1
    return n


def ztest_core(double x1, double n1, double x2, double n2):
    """Pooled-variance two-proportion z test: (estimate, z, p_value)."""
    cdef double ph1 = x1 / n1
    cdef double ph2 = x2 / n2
    cdef double est = ph2 - ph1
    cdef double pbar = _floored((x1 + x2) / (n1 + n2), n1 + n2)
    cdef double se = sqrt(pbar * (1.0 - pbar) * (1.0 / n1 + 1.0 / n2))
    cdef double z = est / se
    cdef double az = z if z >= 0.0 else -z
    cdef double p = 2.0 * _normal_cdf(-az)
    if p > 1.0:
        p = 1.0
    return est, z, p


def msprt_step(double n1, double x1, double n2, double x2, double tau_sq,
               double running_p):
    """One mixture-SPRT look; returns the updated always-valid p-value."""
    cdef double pbar, v, d, vt, log_lambda, cand
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
