"""Central and noncentral chi-square distribution functions.

Everything here is built on the regularized lower incomplete gamma function,
evaluated with the series / continued-fraction split at ``x = a + 1``.
"""

from __future__ import annotations

import math

import numpy as np

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 10_000


class DomainError(ValueError):
    """Argument outside the domain of a distribution function."""


def _gamma_series(a: float, x: float) -> float:
    # P(a, x) for x < a + 1
    ap = a
    term = total = 1.0 / a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cont_frac(a: float, x: float) -> float:
    # Q(a, x) for x >= a + 1, modified Lentz
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def regularized_lower_gamma(a: float, x: float) -> float:
    """Regularized lower incomplete gamma function ``P(a, x)``.

    Raises:
        DomainError: if ``a <= 0`` or ``x < 0``.
    """
    if not a > 0:
        raise DomainError(f"shape parameter must be positive, got a={a}")
    if not x >= 0:
        raise DomainError(f"argument must be nonnegative, got x={x}")
    if x == 0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if x < a + 1.0:
        return min(1.0, _gamma_series(a, x))
    return min(1.0, max(0.0, 1.0 - _gamma_cont_frac(a, x)))


def _check_dof(dof: int) -> None:
    if dof < 1 or int(dof) != dof:
        raise DomainError(f"degrees of freedom must be a positive integer, got {dof}")


def chi2_cdf(x: float, dof: int) -> float:
    """CDF of the central chi-square distribution with ``dof`` degrees of freedom."""
    _check_dof(dof)
    if not x >= 0:
        raise DomainError(f"chi-square argument must be nonnegative, got x={x}")
    return regularized_lower_gamma(dof / 2.0, x / 2.0)


def _chi2_pdf(x: float, dof: int) -> float:
    if x <= 0:
        return 0.0
    a = dof / 2.0
    return math.exp((a - 1.0) * math.log(x) - x / 2.0 - a * math.log(2.0) - math.lgamma(a))


def chi2_quantile(p: float, dof: int) -> float:
    """Inverse of :func:`chi2_cdf` in its first argument.

    The root is bracketed by doubling, then refined with Newton steps that
    fall back to bisection whenever a step leaves the bracket.
    """
    _check_dof(dof)
    if not 0.0 < p < 1.0:
        raise DomainError(f"probability must lie in (0, 1), got p={p}")
    lo, hi = 0.0, max(1.0, float(dof))
    while chi2_cdf(hi, dof) < p:
        lo, hi = hi, 2.0 * hi
    x = 0.5 * (lo + hi)
    for _ in range(500):
        f = chi2_cdf(x, dof) - p
        if f == 0.0:
            return x
        if f < 0:
            lo = x
        else:
            hi = x
        pdf = _chi2_pdf(x, dof)
        step_ok = False
        if pdf > 0:
            x_new = x - f / pdf
            step_ok = lo < x_new < hi
        if not step_ok:
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= 1e-15 * max(1.0, x) or hi - lo <= 1e-15 * max(1.0, hi):
            return x_new
        x = x_new
    return x


def _central_term(a: float, y: float) -> float:
    # y**a * e**-y / Gamma(a + 1), the gap P(a, y) - P(a + 1, y)
    if y == 0:
        return 0.0
    return math.exp(a * math.log(y) - y - math.lgamma(a + 1.0))


def noncentral_chi2_cdf(x: float, dof: int, noncentrality: float, tol: float = 1e-12) -> float:
    """CDF of the noncentral chi-square distribution.

    Poisson(noncentrality/2)-weighted mixture of central CDFs with ``dof + 2j``
    degrees of freedom. Summation starts at the modal Poisson index and walks
    outward in both directions; each direction stops once a bound on its
    remaining contribution drops below ``tol``.
    """
    _check_dof(dof)
    if not x >= 0:
        raise DomainError(f"chi-square argument must be nonnegative, got x={x}")
    if not noncentrality >= 0:
        raise DomainError(f"noncentrality must be nonnegative, got {noncentrality}")
    if noncentrality == 0:
        return chi2_cdf(x, dof)
    if x == 0:
        return 0.0

    lam = noncentrality / 2.0
    if lam == 0.0:
        return chi2_cdf(x, dof)
    y = x / 2.0
    a0 = dof / 2.0
    j0 = int(math.floor(lam))

    # central CDFs die out below the Poisson mode: sum from j = 0 directly,
    # the dropped tail is bounded by the first C_j < tol
    if y + 40.0 * math.sqrt(y + 1.0) + 40.0 < j0:
        c, t, total, j = regularized_lower_gamma(a0, y), _central_term(a0, y), 0.0, 0
        log_lam = math.log(lam)
        while c >= tol and j <= j0:
            total += math.exp(j * log_lam - lam - math.lgamma(j + 1.0)) * c
            c = max(c - t, 0.0)
            t *= y / (a0 + j + 1.0)
            j += 1
        return min(max(total, 0.0), 1.0)

    w0 = math.exp(-lam) if j0 == 0 else math.exp(j0 * math.log(lam) - lam - math.lgamma(j0 + 1.0))
    c0 = regularized_lower_gamma(a0 + j0, y)
    t0 = _central_term(a0 + j0, y)
    total = w0 * c0

    # upward: C_{j+1} = C_j - t_j, t_{j+1} = t_j * y / (a_j + 1)
    w, c, t, j = w0, c0, t0, j0
    while True:
        w *= lam / (j + 1)
        c = max(c - t, 0.0)
        t *= y / (a0 + j + 1.0)
        j += 1
        total += w * c
        ratio = lam / (j + 1)
        # both Poisson weights and central CDFs decrease from here on
        if ratio < 1.0 and w * c * ratio / (1.0 - ratio) < tol:
            break
        if c == 0.0 or j - j0 > _MAX_ITER:
            break

    # downward: C_{j-1} = C_j + t_{j-1}, t_{j-1} = t_j * (a_{j-1} + 1) / y
    w, c, t, j = w0, c0, t0, j0
    while j > 0:
        a_prev = a0 + j - 1.0
        t_prev = _central_term(a_prev, y) if t == 0.0 else t * (a_prev + 1.0) / y
        w *= j / lam
        j -= 1
        c = min(c + t_prev, 1.0)
        t = t_prev
        total += w * c
        if j == 0:
            break
        ratio = j / lam
        if ratio < 1.0 and w * ratio / (1.0 - ratio) < tol:
            break
    return min(max(total, 0.0), 1.0)


def noncentral_chi2_cdf_many(x: float, dof: int, noncentrality: np.ndarray, tol: float = 1e-15) -> np.ndarray:
    """Vectorized :func:`noncentral_chi2_cdf` over many noncentralities at one ``x``.

    The central CDFs ``C_j = P(dof/2 + j, x/2)`` are computed once and reused.
    Because ``C_j`` is nonincreasing in ``j`` and the Poisson weights sum to one,
    dropping every term past the first ``C_J < tol`` costs at most ``tol``.
    """
    _check_dof(dof)
    mu = np.asarray(noncentrality, dtype=float)
    if np.any(~(mu >= 0)):
        raise DomainError("noncentrality must be nonnegative")
    if not x >= 0:
        raise DomainError(f"chi-square argument must be nonnegative, got x={x}")
    if x == 0:
        return np.zeros_like(mu)

    y = x / 2.0
    a0 = dof / 2.0
    cs = [regularized_lower_gamma(a0, y)]
    t = _central_term(a0, y)
    while cs[-1] >= tol and len(cs) < _MAX_ITER:
        a = a0 + len(cs) - 1
        cs.append(max(cs[-1] - t, 0.0))
        t *= y / (a + 1.0)
    c = np.array(cs)
    j = np.arange(c.size, dtype=float)

    lam = mu.reshape(-1, 1) / 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        log_w = j * np.log(lam) - lam - np.array([math.lgamma(k + 1.0) for k in j])
    log_w[:, 0] = -lam[:, 0]
    out = np.exp(log_w) @ c
    return np.clip(out, 0.0, 1.0).reshape(mu.shape)
