"""Composite Gauss-Legendre rules on graded meshes."""

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def _legendre(n):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def composite_rule(breaks, n):
    """Nodes and weights of an ``n``-point Gauss-Legendre rule on every panel.

    ``breaks`` may be 1-D (one mesh) or 2-D with one mesh per row, in which
    case the returned arrays have shape ``(rows, panels * n)``.
    """
    breaks = np.asarray(breaks, dtype=float)
    x, w = _legendre(n)
    a = breaks[..., :-1, None]
    b = breaks[..., 1:, None]
    half = 0.5 * (b - a)
    nodes = (a + half * (x + 1.0)).reshape(*breaks.shape[:-1], -1)
    weights = (half * w).reshape(*breaks.shape[:-1], -1)
    return nodes, weights


def geometric_offsets(smallest, largest, ratio):
    """Increasing offsets ``smallest * ratio**j`` stopping before ``largest``."""
    count = int(np.ceil(np.log(largest / smallest) / np.log(ratio)))
    return smallest * ratio ** np.arange(max(count, 0))


@lru_cache(maxsize=8)
def angle_rule(n=12, ratio=0.15, smallest=1e-15):
    """Rule on ``[0, pi]`` graded geometrically toward 0.

    Suited to integrands with a logarithmic singularity at the origin, such
    as ``K0(c * sin(theta / 2))``.
    """
    offsets = np.pi * ratio ** np.arange(int(np.log(smallest / np.pi) / np.log(ratio)), 0, -1)
    breaks = np.concatenate([[0.0], offsets, [np.pi]])
    nodes, weights = composite_rule(breaks, n)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def integrate(f, breaks, n=16):
    """Integrate a vectorised ``f`` over the panels given by ``breaks``."""
    nodes, weights = composite_rule(breaks, n)
    return float(np.sum(weights * f(nodes)))
