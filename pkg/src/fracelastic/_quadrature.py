"""Shared quadrature building blocks: Gauss rules, graded panels, series acceleration."""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


@lru_cache(maxsize=None)
def gauss_laguerre(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.laguerre.laggauss(order)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def panel_nodes(breaks: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of a composite Gauss-Legendre rule on consecutive breakpoints.

    Returns arrays of shape ``(n_panels, order)``.
    """
    breaks = np.asarray(breaks, dtype=float)
    x, w = gauss_legendre(order)
    lo = breaks[:-1, None]
    half = 0.5 * np.diff(breaks)[:, None]
    return lo + half * (x + 1.0), half * w


def graded_breaks(lo: float, hi: float, levels: int, ratio: float = 0.5) -> np.ndarray:
    """Breakpoints on ``[lo, hi]`` clustered geometrically toward ``lo``.

    The first panel is ``[lo, lo + (hi-lo)*ratio**levels]``.
    """
    width = hi - lo
    inner = lo + width * ratio ** np.arange(levels, 0, -1, dtype=float)
    return np.concatenate(([lo], inner, [hi]))


def _binomial_mean(s: np.ndarray) -> float:
    s = s.copy()
    while s.size > 1:
        s = 0.5 * (s[:-1] + s[1:])
    return float(s[0])


def euler_sum(partial_sums: np.ndarray) -> tuple[float, float]:
    """Accelerate an alternating series by repeated averaging of its partial sums.

    This is the Euler / van Wijngaarden transform written on partial sums:
    each sweep replaces neighbours by their mean until one value is left.
    The remainder estimate is the change caused by the last partial sum.
    """
    s = np.asarray(partial_sums, dtype=float)
    if s.size == 0:
        return 0.0, np.inf
    if s.size == 1:
        return float(s[0]), np.inf
    value = _binomial_mean(s)
    return value, abs(value - _binomial_mean(s[:-1]))
