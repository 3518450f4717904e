"""Riesz fractional Laplacian: Fourier multiplier and hyper-singular integral forms."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.special import comb, gamma

from ._quadrature import graded_breaks, panel_nodes
from .errors import ConvergenceError, DegenerateNormalizationError, ValidationError

_GL_ORDER = 16


@dataclass(frozen=True, eq=False)
class GridField:
    """Real samples on the periodic grid ``origin + h*j``, ``j = 0..P-1``."""

    samples: np.ndarray
    spacing: float
    origin: float = 0.0

    def __post_init__(self):
        samples = np.array(self.samples, dtype=float).ravel()
        if samples.size < 8:
            raise ValidationError(f"grid needs at least 8 samples, got {samples.size}")
        if not self.spacing > 0:
            raise ValidationError(f"spacing must be positive, got {self.spacing}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "spacing", float(self.spacing))
        object.__setattr__(self, "origin", float(self.origin))

    @property
    def size(self) -> int:
        return self.samples.size

    @property
    def x(self) -> np.ndarray:
        return self.origin + self.spacing * np.arange(self.size)

    @property
    def length(self) -> float:
        return self.spacing * self.size

    @classmethod
    def from_function(cls, f: Callable, origin: float, length: float, size: int) -> "GridField":
        h = length / size
        return cls(f(origin + h * np.arange(size)), h, origin)

    def with_samples(self, samples) -> "GridField":
        return GridField(samples, self.spacing, self.origin)


def wavenumbers(size: int, spacing: float) -> np.ndarray:
    """Non-negative angular wavenumbers matching ``np.fft.rfft`` output."""
    return 2.0 * np.pi * np.fft.rfftfreq(size, d=spacing)


def spectral_multiplier(field: GridField, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    k = wavenumbers(field.size, field.spacing)
    return k, k**alpha


def spectral_frac_laplacian(field: GridField, alpha: float) -> GridField:
    """Apply ``|k|**alpha`` to the discrete Fourier coefficients of ``field``."""
    if alpha < 0:
        raise ValidationError(f"alpha must be non-negative, got {alpha}")
    if alpha == 0:
        return field.with_samples(field.samples.copy())
    _, mult = spectral_multiplier(field, alpha)
    out = np.fft.irfft(np.fft.rfft(field.samples) * mult, n=field.size)
    return field.with_samples(out)


# --- hyper-singular form ----------------------------------------------------


def finite_difference(f: Callable, x, z, m: int):
    """``sum_k (-1)**k C(m,k) f(x - k z)``, the (backward) m-th difference."""
    if m < 1:
        raise ValidationError(f"difference order must be >= 1, got {m}")
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    total = np.zeros(np.broadcast(x, z).shape)
    for k in range(m + 1):
        total = total + (-1) ** k * comb(m, k, exact=True) * f(x - k * z)
    return float(total) if total.ndim == 0 else total


def am_constant(m: int, alpha: float) -> float:
    """``A_m(alpha) = sum_{j=1}^m (-1)**(j-1) C(m,j) j**alpha``."""
    if m < 1 or not alpha > 0:
        raise ValidationError(f"need m >= 1 and alpha > 0, got m={m}, alpha={alpha}")
    return float(sum((-1) ** (j - 1) * comb(m, j, exact=True) * j**alpha for j in range(1, m + 1)))


def dn_constant(n: int, m: int, alpha: float) -> float:
    """Normalization ``d_n(m, alpha)`` of the hyper-singular integral in ``R^n``."""
    if n not in (1, 2, 3):
        raise ValidationError(f"dimension must be 1, 2 or 3, got {n}")
    if not 0 < alpha < m:
        raise ValidationError(f"need 0 < alpha < m, got alpha={alpha}, m={m}")
    if alpha % 2 == 0:
        raise DegenerateNormalizationError(f"sin(pi*alpha/2) vanishes at alpha={alpha}")
    am = am_constant(m, alpha)
    if abs(am) < 1e-14 * sum(comb(m, j) * j**alpha for j in range(1, m + 1)):
        raise DegenerateNormalizationError(f"A_{m}({alpha}) = 0; use the spectral form")
    denom = (
        2.0**alpha
        * gamma(1 + alpha / 2)
        * gamma(n / 2 + alpha / 2)
        * math.sin(math.pi * alpha / 2)
    )
    return math.pi ** (1 + n / 2) * am / denom


@dataclass(frozen=True)
class HyperSingularConfig:
    """Discretization of the one-dimensional hyper-singular integral.

    ``split`` separates the substitution-smoothed inner region from the
    geometric outer panels; ``tol`` is the refinement tolerance.
    """

    m: int = 2
    step_count: int = 512
    cutoff: float = 1e4
    inner_exponent_split: float = 1.0
    tol: float = 1e-9
    tail_correction: bool = True

    def __post_init__(self):
        if self.m < 1:
            raise ValidationError(f"m must be >= 1, got {self.m}")
        if self.step_count < 16:
            raise ValidationError(f"step_count must be >= 16, got {self.step_count}")
        if not self.cutoff > self.inner_exponent_split > 0:
            raise ValidationError("need cutoff > split > 0")

    def refined(self) -> "HyperSingularConfig":
        return replace(self, step_count=2 * self.step_count, cutoff=2 * self.cutoff)


def _symmetric_difference(f, x, z, m):
    return finite_difference(f, x, z, m) + finite_difference(f, x, -z, m)


def _hypersingular_raw(
    f: Callable, x: float, alpha: float, cfg: HyperSingularConfig, log_weight: bool = False
) -> float:
    """``int_0^inf z**(-alpha-1) [D_z + D_-z] dz``, optionally weighted by ``-ln z``.

    The log-weighted variant is the alpha-derivative of the plain integral.
    """
    m = cfg.m
    split = cfg.inner_exponent_split
    panels = max(cfg.step_count // _GL_ORDER, 1)
    weight = (lambda z: -np.log(z)) if log_weight else (lambda z: 1.0)
    # Below z_floor the differences lose digits to cancellation; the symmetric
    # difference behaves like c*z**p there (odd powers cancel between +-z).
    p = m if m % 2 == 0 else m + 1
    z_floor = 1e-3 * split

    # two-term fit S ~ c1 z**p + c2 z**(p+2) from samples at z_floor and z_floor/2
    s1 = _symmetric_difference(f, x, np.float64(z_floor), m)
    s2 = _symmetric_difference(f, x, np.float64(0.5 * z_floor), m)
    c2 = (s1 - 2.0**p * s2) / (z_floor ** (p + 2) * (1.0 - 0.25))
    c1 = (s1 - c2 * z_floor ** (p + 2)) / z_floor**p
    total = 0.0
    for c, power in ((c1, p), (c2, p + 2)):
        e = power - alpha
        if log_weight:
            total += -c * z_floor**e * (math.log(z_floor) / e - 1.0 / e**2)
        else:
            total += c * z_floor**e / e

    # [z_floor, split]: z = split * t**(1/(m-alpha)) removes the endpoint power
    q = 1.0 / (m - alpha)
    t_floor = (z_floor / split) ** (m - alpha)
    levels = int(math.ceil(math.log2(1.0 / t_floor)))
    t, wt = panel_nodes(graded_breaks(t_floor, 1.0, levels), _GL_ORDER * max(panels // 16, 1))
    t, wt = t.ravel(), wt.ravel()
    z = split * t**q
    jac = split * q * t ** (q - 1)
    total += np.sum(wt * jac * weight(z) * z ** (-alpha - 1) * _symmetric_difference(f, x, z, m))

    # [split, cutoff]: geometric panels
    breaks = np.geomspace(split, cfg.cutoff, panels + 1)
    z, wz = panel_nodes(breaks, _GL_ORDER)
    z, wz = z.ravel(), wz.ravel()
    total += np.sum(wz * weight(z) * z ** (-alpha - 1) * _symmetric_difference(f, x, z, m))

    if cfg.tail_correction:
        # beyond the cutoff the difference is frozen at its value there: 2 f(x)
        # for decaying f, 0 for f that levels off to a constant
        c = cfg.cutoff
        level = float(_symmetric_difference(f, x, np.float64(c), m))
        if log_weight:
            total += -level * c ** (-alpha) * (math.log(c) / alpha + 1.0 / alpha**2)
        else:
            total += level * c ** (-alpha) / alpha
    return float(total)


def _removable_alpha(m: int, alpha: float) -> bool:
    """True when A_m(alpha) = 0 at an odd integer alpha < m (a 0/0 limit)."""
    return alpha == int(alpha) and int(alpha) % 2 == 1 and alpha < m


def _dn_derivative(m: int, alpha: float) -> float:
    """d/dalpha of d_1(m, alpha) at a zero of A_m (only the A_m factor varies)."""
    dam = sum((-1) ** (j - 1) * comb(m, j, exact=True) * j**alpha * math.log(j) for j in range(2, m + 1))
    return math.pi * dam / (gamma(1 + alpha) * math.sin(math.pi * alpha / 2))


def hypersingular_frac_laplacian(
    f: Callable,
    x,
    alpha: float,
    cfg: HyperSingularConfig | None = None,
    *,
    check_convergence: bool = True,
):
    """One-dimensional hyper-singular integral form of ``(-Delta)**(alpha/2) f``.

    ``f`` must accept numpy arrays.  At odd integer ``alpha`` the backward
    difference normalization vanishes together with the integral; the value
    is then the ratio of their alpha-derivatives.  When ``check_convergence`` is set the
    integral is recomputed with doubled resolution and cutoff; a change
    larger than ``10 * cfg.tol`` (relative to ``max(1, |value|)``) raises
    :class:`ConvergenceError`.  The refined value is returned.
    """
    cfg = cfg or HyperSingularConfig()
    if not 0 < alpha < cfg.m:
        raise ValidationError(f"need 0 < alpha < m, got alpha={alpha}, m={cfg.m}")
    if _removable_alpha(cfg.m, alpha):
        # A_m(alpha) = 0 makes both numerator and normalization vanish;
        # take the ratio of their alpha-derivatives instead.
        log_weight, d = True, _dn_derivative(cfg.m, alpha)
    else:
        log_weight, d = False, dn_constant(1, cfg.m, alpha)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty(xs.shape)
    for i, xi in enumerate(xs):
        value = _hypersingular_raw(f, xi, alpha, cfg, log_weight) / d
        if check_convergence:
            fine = _hypersingular_raw(f, xi, alpha, cfg.refined(), log_weight) / d
            if abs(fine - value) > 10 * cfg.tol * max(1.0, abs(fine)):
                raise ConvergenceError(
                    f"hyper-singular integral at x={xi} not converged",
                    estimate=fine,
                    remainder=abs(fine - value),
                    where=xi,
                )
            value = fine
        out[i] = value
    return float(out[0]) if np.ndim(x) == 0 else out
