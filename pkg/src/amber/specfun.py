"""Special functions for energy-detection statistics.

Everything here is evaluated in the log domain where magnitudes can leave
double precision: for sample lengths in the hundreds the Bessel factor of a
noncentral chi-squared density overflows long before the density itself
does.

All functions accept numpy arrays (broadcast together) and return a Python
float when every argument is scalar.
"""

import math

import numba
import numpy as np
from scipy import special as sc

from .errors import DivergentPointError, DomainError, InvalidParameterError

LN2 = math.log(2.0)

# Below this, ive() has lost relative accuracy to subnormals.
_IVE_FLOOR = 1e-280

# Half-width of a Poisson window, in standard deviations plus a constant, that
# leaves less than ~1e-17 of the mass outside.
_TAIL_SIGMAS = 9.0
_TAIL_PAD = 30.0


def _scalar_or_array(value, scalar):
    if scalar:
        return float(np.asarray(value).reshape(()))
    return value


def _is_scalar(*args):
    return all(np.ndim(a) == 0 for a in args)


def _check_int(name, value, minimum):
    v = np.asarray(value)
    if not np.all(np.equal(np.mod(v, 1), 0)) or np.any(v < minimum):
        raise InvalidParameterError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return v.astype(np.int64)


# ---------------------------------------------------------------------------
# Central chi-squared
# ---------------------------------------------------------------------------


def central_chi2_logpdf(x, k):
    """Natural log of the chi-squared(k) density; ``-inf`` outside the support."""
    scalar = _is_scalar(x, k)
    k = _check_int("k", k, 1)
    x = np.asarray(x, dtype=float)
    x, k = np.broadcast_arrays(x, k)
    half = 0.5 * k
    out = np.full(x.shape, -np.inf)
    pos = x > 0
    xp = x[pos]
    hp = half[pos]
    out[pos] = (hp - 1.0) * np.log(xp) - 0.5 * xp - hp * LN2 - sc.gammaln(hp)
    at_zero = (x == 0) & (k == 2)
    out[at_zero] = -LN2
    if np.any((x == 0) & (k == 1)):
        raise DivergentPointError("chi-squared(1) density is infinite at x = 0")
    return _scalar_or_array(out, scalar)


def central_chi2_pdf(x, k):
    """Density of a central chi-squared variable with ``k`` degrees of freedom.

    >>> round(central_chi2_pdf(0.5, 2), 5)
    0.3894
    """
    scalar = _is_scalar(x, k)
    out = np.exp(central_chi2_logpdf(x, k))
    return _scalar_or_array(out, scalar)


# ---------------------------------------------------------------------------
# Modified Bessel functions
# ---------------------------------------------------------------------------


def _log_bessel_i_series(n, z):
    """ln I_n(z) from the ascending series, summed in the log domain.

    Only used where ``ive`` underflows, i.e. ``z`` small compared to ``n``,
    so the series converges in a modest number of terms.
    """
    n = n.astype(float)
    log_q = 2.0 * np.log(0.5 * z)
    lead = n * np.log(0.5 * z) - sc.gammaln(n + 1.0)
    log_term = np.zeros_like(z)
    log_sum = np.zeros_like(z)
    active = np.ones(z.shape, dtype=bool)
    i = 0
    while np.any(active) and i < 200_000:
        log_term = log_term + log_q - np.log(i + 1.0) - np.log(n + i + 1.0)
        log_sum = np.where(active, np.logaddexp(log_sum, log_term), log_sum)
        # terms shrink once i exceeds the mode; stop when negligible
        past_mode = (i + 1.0) * (n + i + 1.0) > np.exp(log_q)
        active &= ~(past_mode & (log_term - log_sum < -40.0))
        i += 1
    return lead + log_sum


def bessel_i_log(n, z):
    """Natural log of the modified Bessel function of the first kind I_n(z).

    Integer order ``n >= 0`` and real ``z >= 0``.  Uses the exponentially
    scaled routine where it is representable and the ascending series in log
    form where it underflows, so large orders with moderate arguments stay
    finite.
    """
    scalar = _is_scalar(n, z)
    n = _check_int("n", n, 0)
    z = np.asarray(z, dtype=float)
    if np.any(z < 0) or np.any(~np.isfinite(z)):
        raise DomainError("bessel_i_log requires finite z >= 0")
    n, z = np.broadcast_arrays(n, z)
    out = np.empty(z.shape)
    zero = z == 0
    out[zero] = np.where(n[zero] == 0, 0.0, -np.inf)
    with np.errstate(divide="ignore", under="ignore"):
        scaled = sc.ive(n, z)
    good = ~zero & (scaled > _IVE_FLOOR) & np.isfinite(scaled)
    out[good] = np.log(scaled[good]) + z[good]
    rest = ~zero & ~good
    if np.any(rest):
        out[rest] = _log_bessel_i_series(n[rest], z[rest])
    return _scalar_or_array(out, scalar)


def bessel_i_log_reduced(n, z):
    """ln I_n(z) - n ln(z/2) + ln n!, i.e. the log of 0F1(; n+1; z^2/4).

    The leading power is removed analytically, so differences of this
    quantity at two nearby small arguments keep their digits.  Summed as a
    series for ``z^2/4 <= n + 1`` and taken from :func:`bessel_i_log`
    beyond, where the subtraction is harmless.
    """
    scalar = _is_scalar(n, z)
    n = _check_int("n", n, 0)
    z = np.asarray(z, dtype=float)
    if np.any(z < 0) or np.any(~np.isfinite(z)):
        raise DomainError("bessel_i_log_reduced requires finite z >= 0")
    n, z = np.broadcast_arrays(n, z)
    n = n.astype(float)
    w = 0.25 * z * z
    small = w <= n + 1.0
    out = np.empty(z.shape)
    if np.any(small):
        ws, ns = w[small], n[small]
        term = np.ones_like(ws)
        total = np.zeros_like(ws)
        # term ratio w / (k (n + k)) <= 1 / k here, so 30 terms reach 1e-32
        for k in range(1, 31):
            term = term * ws / (k * (ns + k))
            total += term
        out[small] = np.log1p(total)
    big = ~small
    if np.any(big):
        zb, nb = z[big], n[big]
        out[big] = bessel_i_log(nb.astype(int), zb) - nb * np.log(0.5 * zb) + sc.gammaln(nb + 1.0)
    return _scalar_or_array(out, scalar)


def bessel_k0(z):
    """Modified Bessel function of the second kind, order zero.

    Backed by the Cephes Chebyshev expansions (crossover at z = 2), which are
    accurate to a few ulp on ``[1e-8, 700]`` and underflow to 0 beyond.
    """
    scalar = _is_scalar(z)
    z = np.asarray(z, dtype=float)
    if np.any(~(z > 0)):
        raise DomainError("K0 is only defined for z > 0")
    return _scalar_or_array(sc.k0(z), scalar)


# ---------------------------------------------------------------------------
# Generalised Marcum Q
# ---------------------------------------------------------------------------


def _half_width(mean):
    return _TAIL_SIGMAS * np.sqrt(mean) + _TAIL_PAD


def _poisson_sf(k, lam):
    """P(K > k) for K ~ Poisson(lam); k may be negative."""
    kk = np.maximum(k, 0)
    return np.where(k < 0, 1.0, sc.gammainc(kk + 1.0, lam))


def _poisson_cdf_below(k, lam):
    """P(K < k) for K ~ Poisson(lam)."""
    kk = np.maximum(k, 1)
    return np.where(k <= 0, 0.0, sc.gammaincc(kk, lam))


_HALF_LN_2PI = 0.5 * math.log(2.0 * math.pi)

# Poisson weights are anchored at their mode, where the log form is exact to a
# few ulp, and carried outward by recurrence.  Outward steps only shrink the
# weights, so rounding stays relative to each weight; the log form is
# re-evaluated every _RESYNC steps all the same.
_RESYNC = 64


@numba.njit(cache=True)
def _poisson_weights(first, count, mean, out):
    """out[j] = P(K = first + j) for K ~ Poisson(mean), j < count."""
    if count <= 0:
        return
    anchor = min(max(math.floor(mean), first), first + count - 1)
    ja = int(anchor - first)
    out[ja] = math.exp(_log_poisson_pmf(anchor, mean))
    for j in range(ja + 1, count):
        k = first + j
        if (j - ja) % _RESYNC == 0:
            out[j] = math.exp(_log_poisson_pmf(k, mean))
        else:
            out[j] = out[j - 1] * mean / k
    for j in range(ja - 1, -1, -1):
        k = first + j
        if (ja - j) % _RESYNC == 0 or mean == 0.0:
            out[j] = math.exp(_log_poisson_pmf(k, mean))
        else:
            out[j] = out[j + 1] * (k + 1.0) / mean


@numba.njit(cache=True)
def _stirling_error(n):
    """ln(n!) - [(n + 1/2) ln n - n + ln sqrt(2 pi)] for n >= 1."""
    if n <= 15.0:
        return math.lgamma(n + 1.0) - (n + 0.5) * math.log(n) + n - _HALF_LN_2PI
    r2 = 1.0 / (n * n)
    return (1.0 / 12 - r2 * (1.0 / 360 - r2 * (1.0 / 1260 - r2 * (1.0 / 1680 - r2 / 1188)))) / n


@numba.njit(cache=True)
def _deviance(x, m):
    """x ln(x/m) + m - x without cancellation when x is close to m."""
    d = x - m
    if abs(d) >= 0.1 * (x + m):
        return x * math.log(x / m) + m - x
    v = d / (x + m)
    total = d * v
    term = 2.0 * x * v
    v2 = v * v
    for j in range(1, 60):
        term *= v2
        inc = term / (2 * j + 1)
        total += inc
        if abs(inc) <= 1e-18 * abs(total):
            break
    return total


@numba.njit(cache=True)
def _log_poisson_pmf(k, lam):
    """ln P(K = k) for K ~ Poisson(lam), via the saddle-point form.

    The naive ``k ln lam - lam - ln k!`` cancels badly once k is in the
    thousands, which is exactly where long windows live.
    """
    if k < 0.0:
        return -math.inf
    if lam <= 0.0:
        return 0.0 if k == 0.0 else -math.inf
    if k == 0.0:
        return -lam
    return -_stirling_error(k) - _deviance(k, lam) - _HALF_LN_2PI - 0.5 * math.log(k)


@numba.njit(cache=True)
def _marcum_windows(m, lam, x, lo, hi, g_start, h_start, q_out, p_out):
    """Add the windowed mixture sums to ``q_out`` and ``p_out`` in place.

    With K-weights w_k = P(K = k) and J-weights v_k = P(J = m - 1 + k):
    forward pass G_k = P(J <= m - 1 + k) grows upward from ``g_start``;
    backward pass H_k = P(J >= m + k) grows downward from ``h_start``.
    Both only ever add positive terms.
    """
    for i in range(lam.size):
        width = int(hi[i] - lo[i]) + 1
        if width <= 0 or x[i] == 0.0:
            continue
        w = np.empty(width)
        v = np.empty(width + 1)
        _poisson_weights(lo[i], width, lam[i], w)
        _poisson_weights(m - 1.0 + lo[i], width + 1, x[i], v)

        g = g_start[i]
        total = 0.0
        for j in range(width):
            total += w[j] * g
            g = min(g + v[j + 1], 1.0)
        q_out[i] += total

        h = h_start[i]
        total = 0.0
        for j in range(width - 1, -1, -1):
            total += w[j] * h
            h = min(h + v[j], 1.0)
        p_out[i] += total


def marcum_q_pair(m, a, b):
    """Return ``(Q_m(a, b), 1 - Q_m(a, b))``, each computed without cancellation.

    Uses Q_m(a, b) = P(J < K + m) with K ~ Poisson(a^2/2), J ~ Poisson(b^2/2).
    The mixture is summed only over the window of K where both the Poisson
    weight and the inner tail are non-negligible; the remainder is added in
    closed form from the Poisson tail of K.  Inner tails are carried by
    recurrence, upward for Q and downward for its complement, so both sums
    only ever add positive terms.

    Each side keeps full relative accuracy while it is above ~1e-16.  The
    window is sized for absolute accuracy, so tails far below that (1e-29,
    say) may carry percent-level relative error.
    """
    scalar = _is_scalar(a, b)
    m = int(_check_int("M", m, 1))
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a < 0) or np.any(b < 0) or not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise DomainError("Marcum Q requires finite a >= 0 and b >= 0")
    a, b = np.broadcast_arrays(a, b)
    lam = (0.5 * a * a).ravel()
    x = (0.5 * b * b).ravel()

    p_lo = np.maximum(0.0, np.floor(lam - _half_width(lam)))
    p_hi = np.where(lam > 0, np.ceil(lam + _half_width(lam)), 0.0)
    g_lo = np.maximum(0.0, np.floor(x - _half_width(x) - m + 1))
    g_hi = np.ceil(x + _half_width(x) - m + 1)
    lo = np.maximum(p_lo, g_lo)
    hi = np.minimum(p_hi, g_hi)

    # Beyond the window the inner probability is saturated only when the
    # window edge was set by the inner transition; otherwise the Poisson
    # weights there are already negligible and adding the tail would only
    # spoil relative accuracy deep in the tails.
    q = np.where(g_hi <= p_hi, _poisson_sf(hi, lam), 0.0)
    p = np.where(g_lo >= p_lo, _poisson_cdf_below(lo, lam), 0.0)

    with np.errstate(divide="ignore", invalid="ignore"):
        g_start = sc.gammaincc(m + lo, x)
        h_start = sc.gammainc(m + hi, x)
    _marcum_windows(float(m), lam, x, lo, hi, g_start, h_start, q, p)

    q[x == 0] = 1.0
    p[x == 0] = 0.0
    q = np.clip(q, 0.0, 1.0).reshape(a.shape)
    p = np.clip(p, 0.0, 1.0).reshape(a.shape)
    if scalar:
        return float(q), float(p)
    return q, p


def marcum_q(m, a, b):
    """Generalised Marcum Q-function Q_m(a, b) of integer order ``m >= 1``."""
    return marcum_q_pair(m, a, b)[0]


def marcum_q_complement(m, a, b):
    """1 - Q_m(a, b), accurate when Q is close to one."""
    return marcum_q_pair(m, a, b)[1]


# ---------------------------------------------------------------------------
# Noncentral chi-squared
# ---------------------------------------------------------------------------


def _check_even(k):
    k = _check_int("k", k, 1)
    if np.any(k % 2):
        raise InvalidParameterError("only even degrees of freedom are supported")
    return k


def _ncx2_logpdf_bessel(x, k, lam):
    half_order = 0.5 * k - 1.0
    out = np.full(x.shape, -np.inf)
    central = lam == 0
    if np.any(central):
        out[central] = central_chi2_logpdf(x[central], k[central])
    nc = ~central & (x > 0)
    if np.any(nc):
        xn, kn, ln = x[nc], k[nc], lam[nc]
        order = (0.5 * kn - 1.0).astype(np.int64)
        out[nc] = (
            -LN2
            - 0.5 * (xn + ln)
            + 0.5 * half_order[nc] * (np.log(xn) - np.log(ln))
            + bessel_i_log(order, np.sqrt(ln * xn))
        )
    at_zero = ~central & (x == 0) & (k == 2)
    out[at_zero] = -LN2 - 0.5 * lam[at_zero]
    return out


def _ncx2_logpdf_series(x, k, lam):
    """Poisson-weighted mixture of central chi-squared densities.

    Summed over a window centred on the largest term, which sits where
    i * (k/2 + i) is close to lam * x / 4.
    """
    out = np.full(x.shape, -np.inf)
    central = lam == 0
    if np.any(central):
        out[central] = central_chi2_logpdf(x[central], k[central])
    at_zero = ~central & (x == 0) & (k == 2)
    out[at_zero] = -LN2 - 0.5 * lam[at_zero]
    nc = ~central & (x > 0)
    if not np.any(nc):
        return out
    xn, kn, ln = x[nc], k[nc].astype(float), lam[nc]
    mode = 0.5 * (-0.5 * kn + np.sqrt(0.25 * kn * kn + ln * xn))
    half = np.ceil(10.0 * np.sqrt(mode + 1.0) + 40.0)
    start = np.maximum(0.0, np.floor(mode) - half)
    span = int((2 * half).max()) + 1
    i = start[:, None] + np.arange(span)[None, :]
    h = 0.5 * kn[:, None] + i
    log_terms = (
        -0.5 * ln[:, None]
        + i * np.log(0.5 * ln[:, None])
        - sc.gammaln(i + 1.0)
        + (h - 1.0) * np.log(xn[:, None])
        - 0.5 * xn[:, None]
        - h * LN2
        - sc.gammaln(h)
    )
    out[nc] = sc.logsumexp(log_terms, axis=1)
    return out


def noncentral_chi2_logpdf(x, k, lam, method="bessel"):
    """Log density of a noncentral chi-squared variable with even ``k``.

    ``method`` selects the Bessel closed form (default) or the Poisson
    mixture of central densities; the two agree to ~1e-12 relative.
    """
    scalar = _is_scalar(x, k, lam)
    k = _check_even(k)
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise InvalidParameterError("noncentrality must be >= 0")
    x, k, lam = np.broadcast_arrays(x, k, lam)
    shape = x.shape
    x, k, lam = x.ravel(), k.ravel(), lam.ravel()
    xs = np.where(x < 0, 0.0, x)
    if method == "bessel":
        out = _ncx2_logpdf_bessel(xs, k, lam)
    elif method == "series":
        out = _ncx2_logpdf_series(xs, k, lam)
    else:
        raise InvalidParameterError(f"unknown method {method!r}")
    out = np.where(x < 0, -np.inf, out).reshape(shape)
    return _scalar_or_array(out, scalar)


# Name used by the rest of the package.
noncentral_chi2_pdf_log = noncentral_chi2_logpdf


def noncentral_chi2_pdf(x, k, lam, method="bessel"):
    scalar = _is_scalar(x, k, lam)
    return _scalar_or_array(np.exp(noncentral_chi2_logpdf(x, k, lam, method)), scalar)


def noncentral_chi2_cdf(x, k, lam):
    """CDF of noncentral chi-squared, 1 - Q_{k/2}(sqrt(lam), sqrt(x))."""
    scalar = _is_scalar(x, k, lam)
    k = _check_even(k)
    if np.unique(k).size != 1:
        raise InvalidParameterError("k must be a single value")
    x = np.clip(np.asarray(x, dtype=float), 0.0, None)
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise InvalidParameterError("noncentrality must be >= 0")
    out = marcum_q_complement(int(np.ravel(k)[0]) // 2, np.sqrt(lam), np.sqrt(x))
    return _scalar_or_array(out, scalar)


def noncentral_chi2_sf(x, k, lam):
    """Upper tail of noncentral chi-squared, Q_{k/2}(sqrt(lam), sqrt(x))."""
    scalar = _is_scalar(x, k, lam)
    k = _check_even(k)
    x = np.clip(np.asarray(x, dtype=float), 0.0, None)
    out = marcum_q(int(np.ravel(k)[0]) // 2, np.sqrt(np.asarray(lam, dtype=float)), np.sqrt(x))
    return _scalar_or_array(out, scalar)
