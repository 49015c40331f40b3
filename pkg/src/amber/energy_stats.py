"""Conditional law of the window-averaged received energy Y.

With a fading gain of squared magnitude ``g``, ``2N Y / sigma2`` is
noncentral chi-squared with ``2N`` degrees of freedom and noncentrality
``2 N e_bar g / sigma2``.  Two Gaussian surrogates are provided as well: one
that freezes the noise-energy term at its mean and one that keeps its
variance.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import specfun
from .errors import InvalidParameterError


@dataclass(frozen=True)
class LinkParams:
    """Per-link constants: window length, ambient energy and noise variance."""

    n_samples: int
    e_bar: float = 1.0
    sigma2: float = 1.0

    def __post_init__(self):
        if int(self.n_samples) != self.n_samples or self.n_samples < 1:
            raise InvalidParameterError("n_samples must be a positive integer")
        if not (self.e_bar > 0 and self.sigma2 > 0):
            raise InvalidParameterError("e_bar and sigma2 must be positive")
        object.__setattr__(self, "n_samples", int(self.n_samples))

    @classmethod
    def from_snr_db(cls, n_samples, snr_db, e_bar=1.0):
        return cls(n_samples, e_bar, e_bar / 10.0 ** (snr_db / 10.0))

    @property
    def snr(self):
        return self.e_bar / self.sigma2

    @property
    def snr_db(self):
        return 10.0 * math.log10(self.snr)

    @property
    def scale(self):
        """Factor 2N / sigma2 mapping Y onto the chi-squared variable."""
        return 2.0 * self.n_samples / self.sigma2

    def scaled(self, c):
        """Same link with both energies multiplied by ``c`` (SNR unchanged)."""
        return LinkParams(self.n_samples, c * self.e_bar, c * self.sigma2)


def noncentrality(g, link):
    return link.scale * link.e_bar * np.asarray(g, dtype=float)


def cond_mean_y(g, link):
    return link.sigma2 + np.asarray(g, dtype=float) * link.e_bar


def cond_var_y(g, link):
    g = np.asarray(g, dtype=float)
    return (2.0 * g * link.e_bar * link.sigma2 + link.sigma2**2) / link.n_samples


def _check_gain(g):
    if np.any(np.asarray(g) < 0):
        raise InvalidParameterError("gain must be non-negative")


def cond_logpdf_y(t, g, link, method="bessel"):
    """Log of the exact conditional density of Y given gain ``g``."""
    _check_gain(g)
    scalar = np.ndim(t) == 0 and np.ndim(g) == 0
    t = np.asarray(t, dtype=float)
    c = link.scale
    inside = np.where(t > 0, t, 1.0)
    out = math.log(c) + specfun.noncentral_chi2_logpdf(
        c * inside, 2 * link.n_samples, noncentrality(g, link), method=method
    )
    out = np.where(t > 0, out, -np.inf)
    return float(out) if scalar else out


def cond_pdf_y(t, g, link, method="bessel"):
    """Exact conditional density of Y; zero for ``t <= 0``."""
    out = np.exp(cond_logpdf_y(t, g, link, method))
    return float(out) if np.ndim(out) == 0 else out


def _marcum_args(t, g, link):
    a = np.sqrt(noncentrality(g, link))
    b = np.sqrt(link.scale * np.clip(np.asarray(t, dtype=float), 0.0, None))
    return a, b


def cond_cdf_y(t, g, link):
    """P(Y <= t | g) = 1 - Q_N(sqrt(2N g e_bar / sigma2), sqrt(2N t / sigma2))."""
    _check_gain(g)
    a, b = _marcum_args(t, g, link)
    return specfun.marcum_q_complement(link.n_samples, a, b)


def cond_sf_y(t, g, link):
    """P(Y > t | g), computed directly so small tails keep their digits."""
    _check_gain(g)
    a, b = _marcum_args(t, g, link)
    return specfun.marcum_q(link.n_samples, a, b)


def _normal_pdf(t, mean, var):
    t = np.asarray(t, dtype=float)
    out = np.exp(-((t - mean) ** 2) / (2.0 * var)) / np.sqrt(2.0 * np.pi * var)
    return float(out) if np.ndim(out) == 0 else out


def gauss1_var(g, link):
    return 2.0 * np.asarray(g, dtype=float) * link.e_bar * link.sigma2 / link.n_samples


def cond_pdf_y_gauss1(t, g, link):
    """Gaussian surrogate with the noise-energy term frozen at sigma2.

    Its variance ``2 g e_bar sigma2 / N`` vanishes at ``g = 0``, so that case
    is rejected.
    """
    if np.any(np.asarray(g) <= 0):
        raise InvalidParameterError("first Gaussian approximation needs g > 0")
    return _normal_pdf(t, cond_mean_y(g, link), gauss1_var(g, link))


def cond_pdf_y_gauss2(t, g, link):
    """Gaussian surrogate matching the exact mean and variance of Y."""
    _check_gain(g)
    return _normal_pdf(t, cond_mean_y(g, link), cond_var_y(g, link))
