"""Energy-detection thresholds T(mu, nu).

* MT: midpoint of the two conditional means.
* MLT: crossing point of the two exact conditional densities, found by
  regula falsi (Illinois variant) on their log ratio.
* MLT_APP1 / MLT_APP2: crossing points of the two Gaussian surrogates, in
  closed form.

The scalar functions return :class:`Threshold`; :func:`threshold_values`
works on arrays of gains and is what the BER and simulation code use.
"""

import enum
from dataclasses import dataclass

import numpy as np

from . import specfun
from .errors import ApproximationInvalidError, ConvergenceError, NoUniqueThresholdError

DEFAULT_TOL = 1e-10
MAX_EXPANSIONS = 40


class DetectionStrategy(str, enum.Enum):
    MT = "MT"
    MLT = "MLT"
    MLT_APP1 = "MLT_APP1"
    MLT_APP2 = "MLT_APP2"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().upper().replace("-", "_").replace(",", "_")
        return cls(key)


@dataclass(frozen=True)
class Threshold:
    value: float
    strategy: DetectionStrategy

    def __float__(self):
        return float(self.value)


def _gains(mu, nu):
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if np.any(mu < 0) or np.any(nu < 0):
        raise ValueError("gains must be non-negative")
    return np.broadcast_arrays(mu, nu)


def _reject_ties(mu, nu, what):
    if np.any(mu == nu):
        raise NoUniqueThresholdError(f"{what} is undefined when mu == nu (identical hypotheses)")
    if np.any(mu == 0) or np.any(nu == 0):
        raise ApproximationInvalidError(f"{what} needs strictly positive gains")


def _log_ratio_over_gap(mu, nu, c):
    """ln(1 + c (nu - mu)) / (nu - mu) without cancellation for nu close to mu."""
    d = nu - mu
    return np.log1p(c * d) / d


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------


def mt_values(mu, nu, link):
    mu, nu = _gains(mu, nu)
    return link.sigma2 + 0.5 * link.e_bar * (mu + nu)


def app1_values(mu, nu, link):
    mu, nu = _gains(mu, nu)
    _reject_ties(mu, nu, "MLT_APP1")
    e, s2, n = link.e_bar, link.sigma2, link.n_samples
    slope = _log_ratio_over_gap(mu, nu, 1.0 / mu)
    radicand = mu * nu * e * (2.0 * s2 / n * slope + e)
    if np.any(radicand < 0):
        raise ApproximationInvalidError("negative radicand in the first approximate threshold")
    return s2 + np.sqrt(radicand)


def app2_values(mu, nu, link):
    mu, nu = _gains(mu, nu)
    _reject_ties(mu, nu, "MLT_APP2")
    e, s2, n = link.e_bar, link.sigma2, link.n_samples
    a = 2.0 * mu * e + s2
    b = 2.0 * nu * e + s2
    # ln(b / a) / (nu - mu)
    slope = _log_ratio_over_gap(mu, nu, 2.0 * e / a)
    radicand = 0.25 * s2 * s2 + mu * nu * e * e + 0.5 * (mu + nu) * e * s2 + a * b * s2 * slope / (2.0 * n * e)
    if np.any(radicand < 0):
        raise ApproximationInvalidError("negative radicand in the second approximate threshold")
    return 0.5 * s2 + np.sqrt(radicand)


# ---------------------------------------------------------------------------
# Exact maximum-likelihood threshold
# ---------------------------------------------------------------------------


def log_likelihood_ratio(t, mu, nu, link):
    """ln f(t | H1, nu) - ln f(t | H0, mu) for the exact densities.

    Written out from the Bessel form with the leading power of each Bessel
    factor removed: the powers of the gains then cancel analytically, which
    keeps the ratio accurate when both gains are tiny.
    """
    t = np.asarray(t, dtype=float)
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    n, e, s2 = link.n_samples, link.e_bar, link.sigma2
    c = 2.0 * n / s2
    order = n - 1
    out = -(n / s2) * e * (nu - mu)
    out = out + specfun.bessel_i_log_reduced(order, c * np.sqrt(nu * e * t))
    out = out - specfun.bessel_i_log_reduced(order, c * np.sqrt(mu * e * t))
    return out


def _bracket(fn, lo, hi, diag):
    """Widen ``[lo, hi]`` by factors of 2 until ``fn`` changes sign on it.

    ``fn(t, idx)`` evaluates the oriented log ratio for the elements ``idx``.
    """
    every = np.arange(lo.size)
    f_lo, f_hi = fn(lo, every), fn(hi, every)
    for _ in range(MAX_EXPANSIONS):
        # an exact zero at either end is already a root
        low = np.flatnonzero(f_lo > 0)
        high = np.flatnonzero(f_hi < 0)
        if low.size == 0 and high.size == 0:
            return lo, hi, f_lo, f_hi
        # an end on the wrong side becomes the new opposite end
        hi[low], f_hi[low] = lo[low], f_lo[low]
        lo[low] /= 2.0
        f_lo[low] = fn(lo[low], low)
        lo[high], f_lo[high] = hi[high], f_hi[high]
        hi[high] *= 2.0
        f_hi[high] = fn(hi[high], high)
    failed = (f_lo > 0) | (f_hi < 0)
    i = int(np.flatnonzero(failed)[0])
    info = {name: float(v[i]) for name, v in diag.items()}
    info.update(lo=float(lo[i]), hi=float(hi[i]), f_lo=float(f_lo[i]), f_hi=float(f_hi[i]))
    raise ConvergenceError("could not bracket the ML threshold", info)


def mlt_values(mu, nu, link, tol=DEFAULT_TOL, max_iter=200):
    """Vectorised root search for the crossing of the two exact densities.

    The search starts from the bracket spanned by the two conditional means,
    widened by factors of 2 until the oriented log ratio changes sign.  The
    bracket is then shrunk by the Illinois variant of regula falsi, falling
    back to a bisection step whenever an end has been kept three times in a
    row.  Iteration stops per element once the residual is below ``tol`` or
    the bracket has shrunk to a few ulp.
    """
    mu, nu = _gains(mu, nu)
    shape = mu.shape
    mu, nu = mu.ravel().copy(), nu.ravel().copy()
    _reject_ties(mu, nu, "MLT")
    # oriented so that the function increases in t
    sign = np.where(nu > mu, 1.0, -1.0)

    def fn(t, idx):
        return sign[idx] * log_likelihood_ratio(t, mu[idx], nu[idx], link)

    lo = link.sigma2 + link.e_bar * np.minimum(mu, nu)
    hi = link.sigma2 + link.e_bar * np.maximum(mu, nu)
    lo, hi, f_lo, f_hi = _bracket(fn, lo, hi, {"mu": mu, "nu": nu})

    root = np.where(f_lo == 0, lo, np.where(f_hi == 0, hi, 0.5 * (lo + hi)))
    done = (f_lo == 0) | (f_hi == 0)
    stale_lo = np.zeros(mu.shape, dtype=int)
    stale_hi = np.zeros(mu.shape, dtype=int)
    eps = 4.0 * np.finfo(float).eps
    for _ in range(max_iter):
        act = np.flatnonzero(~done)
        if act.size == 0:
            break
        a, b, fa, fb = lo[act], hi[act], f_lo[act], f_hi[act]
        t = (a * fb - b * fa) / (fb - fa)
        stuck = (stale_lo[act] >= 3) | (stale_hi[act] >= 3) | ~(t > a) | ~(t < b)
        t = np.where(stuck, 0.5 * (a + b), t)
        ft = fn(t, act)
        root[act] = t
        finished = (np.abs(ft) < tol) | (b - a <= eps * t)
        up = ft < 0
        # Illinois: halve the weight of the end that survives
        lo[act] = np.where(up, t, a)
        f_lo[act] = np.where(up, ft, np.where(stale_lo[act] >= 1, 0.5 * fa, fa))
        hi[act] = np.where(up, b, t)
        f_hi[act] = np.where(up, np.where(stale_hi[act] >= 1, 0.5 * fb, fb), ft)
        stale_lo[act] = np.where(up, 0, stale_lo[act] + 1)
        stale_hi[act] = np.where(up, stale_hi[act] + 1, 0)
        done[act] = finished
    else:
        if not np.all(done):
            i = int(np.flatnonzero(~done)[0])
            raise ConvergenceError(
                "ML threshold search did not converge",
                {"mu": mu[i], "nu": nu[i], "lo": lo[i], "hi": hi[i]},
            )
    return root.reshape(shape)


def mlt_root_is_unique(mu, nu, link, points=1000, span=2.0):
    """True if the log ratio changes sign exactly once on a dense scan.

    The scan covers ``[m_lo / span, m_hi * span]`` where ``m_lo, m_hi`` are
    the two conditional means.
    """
    lo = (link.sigma2 + link.e_bar * min(mu, nu)) / span
    hi = (link.sigma2 + link.e_bar * max(mu, nu)) * span
    t = np.linspace(lo, hi, points)
    values = log_likelihood_ratio(t, mu, nu, link)
    signs = np.sign(values[values != 0])
    return int(np.count_nonzero(np.diff(signs))) == 1


# ---------------------------------------------------------------------------
# Public entry points
# ---------------------------------------------------------------------------


def threshold_values(strategy, mu, nu, link, tol=DEFAULT_TOL):
    """Thresholds for arrays of gains under ``strategy``."""
    strategy = DetectionStrategy.parse(strategy)
    if strategy is DetectionStrategy.MT:
        return mt_values(mu, nu, link)
    if strategy is DetectionStrategy.MLT:
        return mlt_values(mu, nu, link, tol)
    if strategy is DetectionStrategy.MLT_APP1:
        return app1_values(mu, nu, link)
    return app2_values(mu, nu, link)


def threshold_mt(mu, nu, link):
    return Threshold(float(mt_values(mu, nu, link)), DetectionStrategy.MT)


def threshold_mlt(mu, nu, link, tol=DEFAULT_TOL):
    return Threshold(float(mlt_values(mu, nu, link, tol)), DetectionStrategy.MLT)


def threshold_mlt_app1(mu, nu, link):
    return Threshold(float(app1_values(mu, nu, link)), DetectionStrategy.MLT_APP1)


def threshold_mlt_app2(mu, nu, link):
    return Threshold(float(app2_values(mu, nu, link)), DetectionStrategy.MLT_APP2)


def compute_threshold(strategy, mu, nu, link, tol=DEFAULT_TOL):
    strategy = DetectionStrategy.parse(strategy)
    return Threshold(float(threshold_values(strategy, mu, nu, link, tol)), strategy)
