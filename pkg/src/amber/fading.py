"""Correlated Rayleigh fading of the two hypotheses.

Under bit 0 the receiver sees the direct-path gain ``h0 = h_r``; under bit 1
it sees ``h1 = h_r + alpha * h_b * h_t``.  The squared magnitudes
``mu = |h0|^2`` and ``nu = |h1|^2`` are therefore correlated through the
common ``h_r``.

Given ``h0``, ``h1 - h0 = U`` is a product of two independent complex
Gaussians whose density in the plane is ``2 / (pi s^2) K0(2|u| / s)`` with
``s = |alpha| sigma_h^2``.  The joint density of ``(mu, nu)`` follows by a
change to polar coordinates; the only remaining integral is over the phase
difference of ``h0`` and ``h1``.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import optimize
from scipy import special as sc

from . import quadrature
from .errors import DomainError, InvalidParameterError

DEFAULT_ATTENUATION_DB = 1.1


def alpha_from_attenuation(db=DEFAULT_ATTENUATION_DB, convention="amplitude"):
    """Reflection magnitude for a backscatter attenuation of ``db`` decibels.

    ``"amplitude"`` reads the attenuation as 20 log10 |alpha|, ``"power"`` as
    10 log10 |alpha|.
    """
    if convention == "amplitude":
        return 10.0 ** (-db / 20.0)
    if convention == "power":
        return 10.0 ** (-db / 10.0)
    raise InvalidParameterError(f"unknown attenuation convention {convention!r}")


@dataclass(frozen=True)
class FadingParams:
    """Statistics of the three i.i.d. CN(0, sigma_h2) links.

    ``alpha_mag = 0`` is accepted as a degenerate hook for sampling (both
    hypotheses then share one gain) but has no joint density.
    """

    sigma_h2: float = 1.0
    alpha_mag: float = alpha_from_attenuation()

    def __post_init__(self):
        if not self.sigma_h2 > 0:
            raise InvalidParameterError("sigma_h2 must be positive")
        if not 0 <= self.alpha_mag <= 1:
            raise InvalidParameterError("alpha_mag must lie in [0, 1]")

    @classmethod
    def from_attenuation(cls, db=DEFAULT_ATTENUATION_DB, convention="amplitude", sigma_h2=1.0):
        return cls(sigma_h2=sigma_h2, alpha_mag=alpha_from_attenuation(db, convention))

    @property
    def product_scale(self):
        """Scale ``s = |alpha| sigma_h^2`` of the backscatter product term."""
        return self.alpha_mag * self.sigma_h2

    @property
    def mean_nu(self):
        return self.sigma_h2 + self.alpha_mag**2 * self.sigma_h2**2


@dataclass(frozen=True)
class ChannelPair:
    """Fading gains under both hypotheses (scalars or equal-shape arrays)."""

    h0: complex
    h1: complex
    mu: float
    nu: float

    @classmethod
    def from_gains(cls, h0, h1):
        return cls(h0=h0, h1=h1, mu=np.abs(h0) ** 2, nu=np.abs(h1) ** 2)

    @classmethod
    def from_magnitudes(cls, mu, nu):
        """A pair with real, non-negative gains of the given squared magnitudes."""
        return cls.from_gains(np.sqrt(mu) + 0j, np.sqrt(nu) + 0j)


def _complex_gaussian(rng, variance, size):
    scale = math.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def sample_channel(rng, params, size=None):
    """Draw ``h_r, h_t, h_b`` independently and form one (or ``size``) pairs."""
    h_r = _complex_gaussian(rng, params.sigma_h2, size)
    h_t = _complex_gaussian(rng, params.sigma_h2, size)
    h_b = _complex_gaussian(rng, params.sigma_h2, size)
    h1 = h_r + params.alpha_mag * h_b * h_t
    if size is None:
        h_r, h1 = complex(h_r), complex(h1)
    return ChannelPair.from_gains(h_r, h1)


def _check_density_args(mu, nu, params):
    if params.alpha_mag == 0:
        raise DomainError("the joint density does not exist for alpha_mag = 0")
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if np.any(~(mu > 0)) or np.any(~(nu > 0)):
        raise DomainError("the joint density is defined for mu > 0 and nu > 0")
    return np.broadcast_arrays(mu, nu)


def _density_prefactor(mu, params):
    s = params.product_scale
    return 2.0 / (math.pi * params.sigma_h2 * s * s) * np.exp(-mu / params.sigma_h2)


def phase_integral(mu, nu, params, rule=None):
    """Integral over the phase difference of K0(|h1 - h0| * 2 / s), on [0, pi].

    The argument is written as ``(sqrt(mu) - sqrt(nu))^2 + 4 sqrt(mu nu)
    sin^2(theta/2)`` so that it keeps full precision near the diagonal.  The
    rule is graded toward theta = 0, where the integrand has a logarithmic
    singularity when ``mu == nu``.
    """
    nodes, weights = rule if rule is not None else quadrature.angle_rule()
    mu = np.asarray(mu, dtype=float)[..., None]
    nu = np.asarray(nu, dtype=float)[..., None]
    rm, rn = np.sqrt(mu), np.sqrt(nu)
    dist2 = (rm - rn) ** 2 + 4.0 * rm * rn * np.sin(0.5 * nodes) ** 2
    kappa = 2.0 / params.product_scale
    z = kappa * np.sqrt(dist2)
    with np.errstate(divide="ignore"):
        values = sc.k0(z)
    values = np.where(z > 0, values, 0.0)
    return np.sum(values * weights, axis=-1)


def joint_pdf_mu_nu(mu, nu, params, rule=None):
    """Joint density of ``(mu, nu)`` on the open quadrant.

    Evaluated as a single integral over the phase difference: the double
    integral over both phases depends only on their difference, which
    contributes a factor of 4 pi over [0, pi].
    """
    mu, nu = _check_density_args(mu, nu, params)
    out = _density_prefactor(mu, params) * phase_integral(mu, nu, params, rule)
    return float(out) if out.ndim == 0 else out


def joint_pdf_mu_nu_closed(mu, nu, params):
    """Same density in closed form, ``... I0(k sqrt(min)) K0(k sqrt(max))``.

    Graf's addition theorem expands K0 of the distance in cos(m theta); only
    the m = 0 term survives the phase integral, leaving
    ``pi I0(kappa r_<) K0(kappa r_>)``.  Used as an independent check of the
    quadrature route and as a fast path.
    """
    mu, nu = _check_density_args(mu, nu, params)
    kappa = 2.0 / params.product_scale
    r_small = kappa * np.sqrt(np.minimum(mu, nu))
    r_large = kappa * np.sqrt(np.maximum(mu, nu))
    # I0(a) K0(b) = ive(0, a) k0e(b) exp(a - b), bounded for a <= b
    bessel = sc.ive(0, r_small) * sc.k0e(r_large) * np.exp(r_small - r_large)
    out = math.pi * _density_prefactor(mu, params) * bessel
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Tails and marginals
# ---------------------------------------------------------------------------


def product_tail(radius, params):
    """P(|alpha h_b h_t| > radius) = 2 sqrt(y) K1(2 sqrt(y)), y = (radius/s)^2."""
    u = 2.0 * np.asarray(radius, dtype=float) / params.product_scale
    return np.where(u > 0, u * sc.k1(np.where(u > 0, u, 1.0)), 1.0)


@lru_cache(maxsize=32)
def product_tail_radius(params, eps=1e-12):
    """Radius beyond which the backscatter product term has mass below ``eps``."""
    hi = params.product_scale
    while product_tail(hi, params) > eps:
        hi *= 2.0
    return optimize.brentq(lambda r: float(product_tail(r, params)) - eps, 0.0, hi, xtol=1e-12)


def nu_upper(mu, params, eps=1e-12):
    """Conditional truncation point for nu given mu: P(nu > nu_upper | mu) < eps."""
    return (np.sqrt(mu) + product_tail_radius(params, eps)) ** 2


def mu_upper(params, eps=1e-10):
    """Exponential tail cut: P(mu > mu_upper) = eps."""
    return -params.sigma_h2 * math.log(eps)


def _graded_breaks(lo, hi, focus, ratio=4.0, smallest=1e-6):
    """Breakpoints on [lo, hi] refined geometrically toward ``focus`` in {lo, hi}."""
    span = hi - lo
    offsets = quadrature.geometric_offsets(smallest * span, span, ratio)
    if focus == lo:
        inner = lo + offsets
    else:
        inner = hi - offsets[::-1]
    return np.concatenate([[lo], inner, [hi]])


def marginal_pdf_nu(nu, params, n=12, eps=1e-10, density="integral"):
    """Marginal density of ``nu``, integrating the joint density over ``mu``.

    ``density`` picks the phase-integral evaluation (default) or the closed
    form.  The ``mu`` range is split at ``mu = nu`` with panels graded toward
    the split and toward 0.
    """
    scalar = np.ndim(nu) == 0
    nu = np.atleast_1d(np.asarray(nu, dtype=float))
    if np.any(~(nu > 0)):
        raise DomainError("marginal_pdf_nu requires nu > 0")
    pdf = joint_pdf_mu_nu if density == "integral" else joint_pdf_mu_nu_closed
    top = mu_upper(params, eps)
    out = np.empty(nu.shape)
    for i, v in enumerate(nu):
        pieces = []
        if v < top:
            below = _graded_breaks(0.0, v, v)
            below = np.unique(np.concatenate([_graded_breaks(0.0, v, 0.0), below]))
            above = _graded_breaks(v, top, v)
            pieces = [below, above]
        else:
            pieces = [_graded_breaks(0.0, top, 0.0)]
        total = 0.0
        for breaks in pieces:
            nodes, weights = quadrature.composite_rule(breaks, n)
            total += float(np.sum(weights * pdf(nodes, np.full_like(nodes, v), params)))
        out[i] = total
    return float(out[0]) if scalar else out


def marginal_cdf_nu(nu_grid, params, n=8, density="integral"):
    """CDF of ``nu`` at the increasing points ``nu_grid`` by cumulative quadrature.

    Cells of the grid wider than half the mean of ``nu`` are split into
    equal panels, so a coarse grid costs accuracy nowhere.
    """
    grid = np.asarray(nu_grid, dtype=float)
    if np.any(np.diff(grid) <= 0) or grid[0] <= 0:
        raise InvalidParameterError("nu_grid must be positive and strictly increasing")
    # grade the first cell toward 0 where the marginal has a log-slope
    first = _graded_breaks(0.0, grid[0], 0.0, smallest=1e-8)
    nodes0, weights0 = quadrature.composite_rule(first, n)
    head = float(np.sum(weights0 * marginal_pdf_nu(nodes0, params, density=density)))
    width = 0.5 * params.mean_nu
    pieces = [np.linspace(a, b, int(math.ceil((b - a) / width)) + 1)[:-1] for a, b in zip(grid[:-1], grid[1:])]
    breaks = np.concatenate(pieces + [grid[-1:]])
    nodes, weights = quadrature.composite_rule(breaks, n)
    vals = marginal_pdf_nu(nodes.ravel(), params, density=density).reshape(nodes.shape)
    cum = np.concatenate([[0.0], np.cumsum((weights * vals).reshape(len(breaks) - 1, n).sum(axis=1))])
    at_grid = np.searchsorted(breaks, grid)
    return head + cum[at_grid]
