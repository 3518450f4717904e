"""Dispersion laws and lattice interaction kernels.

Conventions
-----------
A :class:`DispersionLaw` describes the deviation of the kernel transform from
its ``k = 0`` value as a sum of powers of the *dimensionless* lattice
wavenumber ``theta = k * dx``::

    K_hat(theta) - K_hat(0) = sum_j a_j * |theta|**alpha_j

With this convention the continuum coefficients come out as
``G_j = g * a_j * dx**alpha_j / M`` and plane waves on the lattice satisfy
``omega**2 = -g * (K_hat(0) - K_hat(k dx)) / M``.  A kernel that realizes a
law therefore has ``eval_lattice_dispersion(kernel, k) ~ -eval_target_dispersion(law, k*dx)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import binom, gamma

from ._quadrature import gauss_laguerre, panel_nodes
from .errors import ConvergenceError, StabilityError, ValidationError

# Wavenumber window (in units of 1/dx) over which synthesized kernels are checked.
ROUND_TRIP_WINDOW = (0.01, 0.5)


@dataclass(frozen=True)
class DispersionLaw:
    """Power-law weak dispersion ``K_hat(0) + sum a_j |theta|**alpha_j``."""

    terms: tuple[tuple[float, float], ...]
    k_hat_zero: float = 0.0

    def __post_init__(self):
        terms = tuple((float(alpha), float(a)) for alpha, a in self.terms)
        if not terms:
            raise ValidationError("dispersion law needs at least one term")
        orders = [alpha for alpha, _ in terms]
        if any(not math.isfinite(alpha) or alpha <= 0 for alpha in orders):
            raise ValidationError(f"orders must be finite and positive, got {orders}")
        if any(b <= a for a, b in zip(orders, orders[1:])):
            raise ValidationError(f"orders must be strictly increasing, got {orders}")
        if any(not math.isfinite(a) for _, a in terms):
            raise ValidationError("coefficients must be finite")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "k_hat_zero", float(self.k_hat_zero))

    @property
    def orders(self) -> np.ndarray:
        return np.array([alpha for alpha, _ in self.terms])

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([a for _, a in self.terms])

    def coefficient(self, alpha: float) -> float:
        for order, a in self.terms:
            if order == alpha:
                return a
        raise KeyError(alpha)

    def to_dict(self) -> dict:
        return {
            "k_hat_zero": self.k_hat_zero,
            "terms": [{"alpha": alpha, "a": a} for alpha, a in self.terms],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DispersionLaw":
        if "terms" not in data:
            raise ValidationError("dispersion law is missing 'terms'")
        try:
            terms = [(float(t["alpha"]), float(t["a"])) for t in data["terms"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed dispersion term: {exc}") from exc
        return cls(tuple(terms), float(data.get("k_hat_zero", 0.0)))


@dataclass(frozen=True, eq=False)
class LatticeKernel:
    """Symmetric pair interaction ``K(n) = K(-n)``; only ``n >= 1`` is stored.

    ``error_band`` is the measured maximum relative round-trip error over
    :data:`ROUND_TRIP_WINDOW` for synthesized kernels, ``None`` otherwise.
    """

    coefficients: np.ndarray
    spacing: float = 1.0
    error_band: float | None = None

    def __post_init__(self):
        coeffs = np.array(self.coefficients, dtype=float).ravel()
        if coeffs.size == 0:
            raise ValidationError("kernel needs at least one coefficient")
        if not np.all(np.isfinite(coeffs)):
            raise ValidationError("kernel coefficients must be finite")
        if not self.spacing > 0:
            raise ValidationError(f"spacing must be positive, got {self.spacing}")
        coeffs.flags.writeable = False
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "spacing", float(self.spacing))

    @property
    def n_max(self) -> int:
        return self.coefficients.size

    @property
    def k_hat_zero(self) -> float:
        return 2.0 * float(self.coefficients.sum())

    def truncated(self, n_max: int) -> "LatticeKernel":
        return LatticeKernel(self.coefficients[:n_max], self.spacing)

    @classmethod
    def nearest_neighbor(cls, strength: float = 1.0, spacing: float = 1.0) -> "LatticeKernel":
        return cls(np.array([strength]), spacing)


@dataclass(frozen=True)
class LatticeSpec:
    kernel: LatticeKernel
    mass: float
    coupling: float
    particle_count: int

    def __post_init__(self):
        if not self.mass > 0:
            raise ValidationError(f"mass must be positive, got {self.mass}")
        if int(self.particle_count) != self.particle_count or self.particle_count < 3:
            raise ValidationError(f"need at least 3 particles, got {self.particle_count}")
        object.__setattr__(self, "particle_count", int(self.particle_count))

    @property
    def spacing(self) -> float:
        return self.kernel.spacing

    def check_stability(self, k: Sequence[float] | None = None) -> bool:
        """True when ``g * (K_hat(0) - K_hat(k dx)) <= 0`` on the sampled wavenumbers.

        By default samples the lattice's own Fourier grid.
        """
        if k is None:
            k = 2 * np.pi * np.arange(self.particle_count) / (self.particle_count * self.spacing)
        values = self.coupling * eval_lattice_dispersion(self.kernel, k)
        scale = max(1.0, float(np.max(np.abs(values))))
        return bool(np.all(values <= 1e-12 * scale))


def eval_lattice_dispersion(kernel: LatticeKernel, k) -> np.ndarray | float:
    """``K_hat(0) - K_hat(k dx) = 2 sum_n K(n) (1 - cos(k n dx))``."""
    k = np.asarray(k, dtype=float)
    n = np.arange(1, kernel.n_max + 1)
    theta = k.reshape(-1, 1) * kernel.spacing
    # 1 - cos(x) = 2 sin(x/2)^2 keeps small-k values free of cancellation
    vals = 4.0 * (np.sin(0.5 * theta * n) ** 2) @ kernel.coefficients
    return float(vals[0]) if k.ndim == 0 else vals.reshape(k.shape)


def eval_target_dispersion(law: DispersionLaw, theta) -> np.ndarray | float:
    """``sum_j a_j |theta|**alpha_j``, the law's deviation from ``K_hat(0)``."""
    theta = np.abs(np.asarray(theta, dtype=float))
    out = np.zeros_like(theta)
    for alpha, a in law.terms:
        out = out + a * theta**alpha
    return float(out) if out.ndim == 0 else out


def round_trip_error(kernel: LatticeKernel, law: DispersionLaw, theta) -> np.ndarray:
    """Relative mismatch between the kernel's dispersion and the law at ``theta = k dx``."""
    theta = np.asarray(theta, dtype=float)
    lattice = eval_lattice_dispersion(kernel, theta / kernel.spacing)
    target = eval_target_dispersion(law, theta)
    return np.abs(lattice + target) / np.abs(target)


# --- kernel synthesis ------------------------------------------------------
#
# K(n) = (1/pi) int_0^pi cos(n t) T(t) dt with T the law in theta.  Each term
# needs I_n(alpha) = int_0^pi t**alpha cos(n t) dt.  Small n: composite
# Gauss-Legendre graded toward the t**alpha endpoint.  Large n: rotate the
# contour into the upper half plane,
#   I_n = cos(pi (alpha+1)/2) Gamma(alpha+1) / n**(alpha+1)
#         + (-1)**n Im int_0^inf (pi + i s)**alpha exp(-n s) ds,
# and apply Gauss-Laguerre to the second, exponentially damped integral.

_DIRECT_LIMIT = 32


def _power_cosine_direct(alpha: float, n: np.ndarray, order: int) -> np.ndarray:
    panels = max(4 * int(n.max()), 8)
    breaks = np.union1d(np.pi * 0.5 ** np.arange(1, 48), np.linspace(0.0, np.pi, panels + 1))
    x, w = panel_nodes(breaks, order)
    x, w = x.ravel(), w.ravel()
    return (np.cos(np.outer(n, x)) * (w * x**alpha)).sum(axis=1)


def _power_cosine_contour(alpha: float, n: np.ndarray, order: int) -> np.ndarray:
    t, w = gauss_laguerre(order)
    nn = n.astype(float)[:, None]
    endpoint = ((np.pi + 1j * t / nn) ** alpha * w).sum(axis=1).imag / nn[:, 0]
    sign = np.where(n % 2 == 0, 1.0, -1.0)
    origin = math.cos(0.5 * math.pi * (alpha + 1)) * gamma(alpha + 1) / nn[:, 0] ** (alpha + 1)
    return origin + sign * endpoint


def power_cosine_integral(alpha: float, n, *, order: int = 32) -> np.ndarray:
    """``int_0^pi t**alpha cos(n t) dt`` for integer ``n >= 1`` (vectorized)."""
    n = np.atleast_1d(np.asarray(n, dtype=np.int64))
    out = np.empty(n.shape, dtype=float)
    small = n <= _DIRECT_LIMIT
    if small.any():
        out[small] = _power_cosine_direct(alpha, n[small], order)
    if (~small).any():
        out[~small] = _power_cosine_contour(alpha, n[~small], 2 * order)
    return out


def _synthesize(law: DispersionLaw, n: np.ndarray, order: int) -> np.ndarray:
    coeffs = np.zeros(n.size)
    for alpha, a in law.terms:
        coeffs += a * power_cosine_integral(alpha, n, order=order)
    return coeffs / np.pi


def synthesize_kernel(
    law: DispersionLaw,
    spacing: float = 1.0,
    n_max: int = 1000,
    *,
    tol: float = 1e-10,
    max_error_band: float = 0.5,
) -> LatticeKernel:
    """Kernel whose Fourier series reproduces ``law`` on ``|k dx| <= pi``.

    Coefficients are ``K(n) = (1/pi) int_0^pi cos(n t) T(t) dt`` with
    ``T = eval_target_dispersion(law, .)``.  Quadrature orders are doubled
    until successive coefficient sets agree to ``tol`` (absolute).  The
    returned kernel carries its measured round-trip error band.
    """
    if int(n_max) != n_max or n_max < 1:
        raise ValidationError(f"n_max must be a positive integer, got {n_max}")
    if not spacing > 0:
        raise ValidationError(f"spacing must be positive, got {spacing}")
    n = np.arange(1, int(n_max) + 1)
    order = 16
    previous = _synthesize(law, n, order)
    while True:
        order *= 2
        current = _synthesize(law, n, order)
        if np.max(np.abs(current - previous)) <= tol:
            break
        if order >= 256:
            raise ConvergenceError(
                "kernel synthesis did not settle",
                remainder=float(np.max(np.abs(current - previous))),
            )
        previous = current
    kernel = LatticeKernel(current, spacing)
    theta = np.geomspace(*ROUND_TRIP_WINDOW, 64)
    band = float(np.max(round_trip_error(kernel, law, theta)))
    if band > max_error_band:
        raise ValidationError(
            f"n_max={n_max} leaves a round-trip error of {band:.3g} "
            f"(> {max_error_band}) on k*dx in {ROUND_TRIP_WINDOW}"
        )
    return LatticeKernel(current, spacing, error_band=band)


def kernel_tail_expansion(law: DispersionLaw, odd_orders: int = 3) -> list[tuple[float, float, bool]]:
    """Large-``n`` expansion of the synthesized kernel.

    Returns ``(power, coefficient, alternating)`` triples with
    ``K(n) ~ sum coefficient * (-1)**(n*alternating) * n**-power``.  Each law
    term contributes one smooth power ``n**-(1+alpha)`` and the alternating
    zone-edge series in ``1/n**2, 1/n**4, ...`` (``odd_orders`` terms).
    """
    out = []
    for alpha, a in law.terms:
        smooth = math.cos(0.5 * math.pi * (alpha + 1)) * gamma(alpha + 1)
        if smooth != 0.0 and abs(smooth) > 1e-15 * gamma(alpha + 1):
            out.append((alpha + 1.0, a * smooth / np.pi, False))
        for i in range(odd_orders):
            k = 2 * i + 1
            c = binom(alpha, k) * math.factorial(k) * np.pi ** (alpha - k) * (-1) ** i
            if c != 0.0:
                out.append((k + 1.0, a * c / np.pi, True))
    return out


def smooth_tail(kernel: LatticeKernel) -> tuple[np.ndarray, np.ndarray]:
    """Non-alternating component of ``K(n)`` via the stencil ``(K[n-1] + 2K[n] + K[n+1]) / 4``.

    Truncating a power law at the zone boundary leaves an ``(-1)**n / n**2``
    component; the stencil suppresses it to ``O(n**-4)``.
    """
    K = kernel.coefficients
    n = np.arange(2, kernel.n_max)
    return n, 0.25 * (K[:-2] + 2.0 * K[1:-1] + K[2:])


def tail_exponent(kernel: LatticeKernel, n_lo: int = 100, n_hi: int = 1000) -> float:
    """Log-log slope of ``|smooth_tail|`` over ``[n_lo, n_hi]``."""
    n, s = smooth_tail(kernel)
    mask = (n >= n_lo) & (n <= n_hi)
    if mask.sum() < 3:
        raise ValidationError("kernel too short for the requested tail window")
    slope, _ = np.polyfit(np.log(n[mask]), np.log(np.abs(s[mask])), 1)
    return float(slope)


# --- continuum coefficients -------------------------------------------------


def continuum_coefficients(spec: LatticeSpec, law: DispersionLaw) -> np.ndarray:
    """``G_j = g a_j dx**alpha_j / M`` for each term of the law."""
    dx = spec.spacing
    return np.array([spec.coupling * a * dx**alpha / spec.mass for alpha, a in law.terms])


def dispersion_relation(spec: LatticeSpec, law: DispersionLaw, k, *, allow_negative: bool = False):
    """Continuum-limit ``omega**2(k) = sum_j G_j |k|**alpha_j``.

    Raises :class:`StabilityError` on a negative result unless ``allow_negative``.
    """
    k = np.abs(np.asarray(k, dtype=float))
    omega2 = np.zeros_like(k)
    for (alpha, _), G in zip(law.terms, continuum_coefficients(spec, law)):
        omega2 = omega2 + G * k**alpha
    if not allow_negative and np.any(omega2 < 0):
        raise StabilityError("negative omega^2: the signs of g and a_j give an unstable lattice")
    return float(omega2) if omega2.ndim == 0 else omega2


def lattice_omega_squared(spec: LatticeSpec, k):
    """Exact plane-wave ``omega**2`` of the lattice itself, ``-g (K_hat(0) - K_hat(k dx)) / M``."""
    return -spec.coupling * eval_lattice_dispersion(spec.kernel, k) / spec.mass


def gradient_length_squared(law: DispersionLaw, spacing: float) -> float:
    """``l**2 = |a_4| dx**2 / |a_2|`` for a law containing orders 2 and 4."""
    return abs(law.coefficient(4.0)) * spacing**2 / abs(law.coefficient(2.0))
