"""Conditional and fading-averaged bit-error rates.

Receiver R1 knows ``(mu, nu)`` and slices each window's energy against a
threshold.  Receiver R2 has no channel knowledge and decodes differentially,
so a message bit is wrong exactly when one of its two symbol decisions is
wrong: ``2 p (1 - p)`` for a symbol error rate ``p``.

The average over fading is a nested Gauss-Legendre product rule over the
joint density of ``(mu, nu)``.  The rule depends only on the fading
statistics and is cached; its accuracy is estimated by comparing with the
same rule after every panel has been bisected.
"""

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import detection, fading, quadrature, specfun
from .errors import ConvergenceError, InvalidParameterError


class ReceiverKind(str, enum.Enum):
    R1_CSI = "R1_CSI"
    R2_NOCSI = "R2_NOCSI"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().upper()
        aliases = {"R1": cls.R1_CSI, "R2": cls.R2_NOCSI}
        return aliases.get(key) or cls(key)


class BerMethod(str, enum.Enum):
    ANALYTIC = "analytic"
    SEMI_ANALYTIC = "semi_analytic"
    MONTE_CARLO = "monte_carlo"


@dataclass(frozen=True)
class BerEstimate:
    """A BER value with its provenance.

    ``std_error`` and ``ci_halfwidth`` are zero for analytic values, where
    ``error_estimate`` carries the quadrature error estimate instead.
    """

    value: float
    method: BerMethod
    ci_halfwidth: float = 0.0
    std_error: float = 0.0
    n_trials: int = 0
    n_errors: int = 0
    error_estimate: float = 0.0
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise InvalidParameterError(f"BER {self.value} outside [0, 1]")
        if self.ci_halfwidth < 0:
            raise InvalidParameterError("ci_halfwidth must be non-negative")
        if self.method is BerMethod.ANALYTIC and self.ci_halfwidth:
            raise InvalidParameterError("analytic estimates carry no confidence interval")

    @property
    def ci(self):
        return max(0.0, self.value - self.ci_halfwidth), min(1.0, self.value + self.ci_halfwidth)


# ---------------------------------------------------------------------------
# Conditional BER
# ---------------------------------------------------------------------------


def _threshold_value(threshold):
    return np.asarray(getattr(threshold, "value", threshold), dtype=float)


def symbol_error_prob(mu, nu, threshold, link):
    """Per-symbol error probability of the energy slicer at ``threshold``.

    The bit whose gain is larger is declared when Y exceeds the threshold, so
    the two error events swap roles depending on the sign of ``nu - mu``.
    Both tail probabilities come from one Marcum evaluation without
    subtracting from one.
    """
    scalar = all(np.ndim(v) == 0 for v in (mu, nu, _threshold_value(threshold)))
    t = _threshold_value(threshold)
    if np.any(~(t > 0)):
        raise InvalidParameterError("threshold must be positive")
    mu, nu, t = np.broadcast_arrays(np.asarray(mu, float), np.asarray(nu, float), t)
    c = link.scale
    b = np.sqrt(c * t)
    q_mu, p_mu = specfun.marcum_q_pair(link.n_samples, np.sqrt(c * link.e_bar * mu), b)
    q_nu, p_nu = specfun.marcum_q_pair(link.n_samples, np.sqrt(c * link.e_bar * nu), b)
    up = nu >= mu
    out = 0.5 * np.where(up, q_mu + p_nu, p_mu + q_nu)
    out = np.where(mu == nu, 0.5, out)
    return float(out) if scalar else out


def cond_ber_r1(mu, nu, threshold, link):
    """Conditional BER of the receiver with channel knowledge."""
    return symbol_error_prob(mu, nu, threshold, link)


def cond_ber_r2(mu, nu, threshold, link):
    """Conditional message-bit BER of the differential receiver, ``2p(1-p)``."""
    p = symbol_error_prob(mu, nu, threshold, link)
    return 2.0 * p * (1.0 - p)


def conditional_ber(receiver, strategy, mu, nu, link, tol=detection.DEFAULT_TOL):
    """Conditional BER with the threshold chosen by ``strategy``.

    Ties ``mu == nu`` give 1/2 for any strategy without computing a
    threshold, since both hypotheses are then indistinguishable.
    """
    receiver = ReceiverKind.parse(receiver)
    mu, nu = np.broadcast_arrays(np.asarray(mu, float), np.asarray(nu, float))
    scalar = mu.ndim == 0
    mu, nu = mu.ravel(), nu.ravel()
    p = np.full(mu.shape, 0.5)
    ok = mu != nu
    if np.any(ok):
        t = detection.threshold_values(strategy, mu[ok], nu[ok], link, tol)
        p[ok] = symbol_error_prob(mu[ok], nu[ok], t, link)
    if receiver is ReceiverKind.R2_NOCSI:
        p = 2.0 * p * (1.0 - p)
    return float(p[0]) if scalar else p


# ---------------------------------------------------------------------------
# Average BER over fading
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureConfig:
    """Mesh and tolerance settings for the fading average.

    ``mu_eps`` and ``nu_eps`` bound the probability mass cut off by truncating
    the ``mu`` and ``nu`` ranges.  ``nodes`` is the Gauss-Legendre order per
    panel, ``ratio`` the geometric grading factor, ``smallest`` the relative
    size of the innermost graded panel.  ``density`` selects the
    phase-integral ("integral") or closed-form ("closed") joint density.
    """

    abs_tol: float = 1e-7
    rel_tol: float = 1e-4
    mu_eps: float = 1e-9
    nu_eps: float = 1e-12
    nodes: int = 6
    ratio: float = 4.0
    smallest: float = 1e-4
    density: str = "integral"

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise InvalidParameterError("tolerances must be positive")
        if not (0 < self.mu_eps < 1 and 0 < self.nu_eps < 1):
            raise InvalidParameterError("truncation levels must lie in (0, 1)")
        if self.nodes < 2 or self.ratio <= 1 or not 0 < self.smallest < 1:
            raise InvalidParameterError("invalid mesh settings")
        if self.density not in ("integral", "closed"):
            raise InvalidParameterError(f"unknown density route {self.density!r}")

    def tolerance(self, value):
        return max(self.abs_tol, self.rel_tol * value)


def _bisect_panels(breaks):
    mids = 0.5 * (breaks[:-1] + breaks[1:])
    out = np.empty(2 * breaks.size - 1)
    out[0::2] = breaks
    out[1::2] = mids
    return out


def _mu_breaks(params, cfg):
    """Graded toward 0 up to sigma_h^2, then unit-width (in sigma_h^2) panels."""
    top = fading.mu_upper(params, cfg.mu_eps)
    knee = min(params.sigma_h2, top)
    offsets = quadrature.geometric_offsets(cfg.smallest * knee, knee, cfg.ratio)
    tail = np.linspace(knee, top, max(2, int(math.ceil((top - knee) / params.sigma_h2)) + 1))
    return np.unique(np.concatenate([[0.0], offsets, tail]))


def _nu_breaks(mu, params, cfg):
    """Split at nu = mu; graded toward the diagonal from both sides and toward 0."""
    top = float(fading.nu_upper(mu, params, cfg.nu_eps))
    below = np.unique(
        np.concatenate(
            [
                fading._graded_breaks(0.0, mu, mu, cfg.ratio, cfg.smallest),
                fading._graded_breaks(0.0, mu, 0.0, cfg.ratio, cfg.smallest),
            ]
        )
    )
    # offsets above the diagonal scale with mu so that the two sides match
    step = cfg.smallest * mu
    above = mu + quadrature.geometric_offsets(step, top - mu, cfg.ratio)
    above = np.concatenate([[mu], above, [top]])
    return below, above


@dataclass(frozen=True)
class FadingRule:
    """Flattened product rule: nodes ``(mu, nu)`` and weights times density."""

    mu: np.ndarray
    nu: np.ndarray
    weight: np.ndarray

    @property
    def size(self):
        return self.mu.size


def _build_rule(params, cfg, refine):
    mu_breaks = _mu_breaks(params, cfg)
    if refine:
        mu_breaks = _bisect_panels(mu_breaks)
    mu_nodes, mu_weights = quadrature.composite_rule(mu_breaks, cfg.nodes)
    pdf = fading.joint_pdf_mu_nu if cfg.density == "integral" else fading.joint_pdf_mu_nu_closed
    mus, nus, ws = [], [], []
    for m, wm in zip(mu_nodes, mu_weights):
        for breaks in _nu_breaks(m, params, cfg):
            if refine:
                breaks = _bisect_panels(breaks)
            nodes, weights = quadrature.composite_rule(breaks, cfg.nodes)
            mus.append(np.full(nodes.size, m))
            nus.append(nodes)
            ws.append(wm * weights)
    mu = np.concatenate(mus)
    nu = np.concatenate(nus)
    weight = np.concatenate(ws) * pdf(mu, nu, params)
    for a in (mu, nu, weight):
        a.setflags(write=False)
    return FadingRule(mu, nu, weight)


@lru_cache(maxsize=16)
def fading_rule(params, cfg=QuadratureConfig(), refine=False):
    """Cached product rule for the fading average (``refine`` bisects all panels)."""
    return _build_rule(params, cfg, refine)


def avg_ber(receiver, strategy, link, fading_params, cfg=QuadratureConfig()):
    """Average BER over the joint fading law of ``(mu, nu)``.

    Returns the refined-rule value; the difference to the base rule is the
    reported error estimate and must be within ``cfg.tolerance(value)``.
    """
    receiver = ReceiverKind.parse(receiver)
    strategy = detection.DetectionStrategy.parse(strategy)
    values = []
    for refine in (False, True):
        rule = fading_rule(fading_params, cfg, refine)
        p = conditional_ber(receiver, strategy, rule.mu, rule.nu, link)
        values.append(float(np.dot(rule.weight, p)))
    coarse, fine = values
    error = abs(fine - coarse)
    diagnostics = {
        "coarse": coarse,
        "fine": fine,
        "nodes": fading_rule(fading_params, cfg, True).size,
        "receiver": receiver.value,
        "strategy": strategy.value,
    }
    if not error <= cfg.tolerance(abs(fine)):
        raise ConvergenceError("fading average did not reach the requested tolerance", diagnostics)
    value = min(max(fine, 0.0), 1.0)
    return BerEstimate(value, BerMethod.ANALYTIC, error_estimate=error, diagnostics=diagnostics)


def fading_mass(params, cfg=QuadratureConfig()):
    """Total probability carried by the fading rule (should be close to 1)."""
    return float(np.sum(fading_rule(params, cfg, True).weight))
