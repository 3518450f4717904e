"""Static continuum solutions: radial Green functions, point-force fields, asymptotics.

The medium obeys ``sum_j c_j (-Delta)**(alpha_j/2) u = f / rho``.  In three
dimensions the Green function reduces to

    G(r) = 1/(2 pi**2 r) * int_0^inf lam sin(lam r) / P(lam) dlam,
    P(lam) = sum_j c_j lam**alpha_j,

and in one dimension to ``G(r) = (1/pi) int_0^inf cos(lam r) / P(lam) dlam``.
After ``t = lam r`` the oscillation has a fixed period, so the integral is a
sum over half-periods of ``sin`` (or ``cos``) whose partial sums are
accelerated by repeated averaging.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np
from scipy.special import gamma

from ._quadrature import euler_sum, graded_breaks, panel_nodes
from .errors import ConvergenceError, ValidationError
from .fraclap import GridField

_PANEL_ORDER = 20
_WINDOW = 32
_BLOCK = 128
_BATCH = 32


@dataclass(frozen=True)
class ContinuumParams:
    """Continuum medium: density, operator terms ``(alpha_j, c_j)``, point-force size."""

    density: float
    terms: tuple[tuple[float, float], ...]
    force_magnitude: float = 1.0
    dimension: int = 3

    def __post_init__(self):
        terms = tuple((float(a), float(c)) for a, c in self.terms)
        object.__setattr__(self, "terms", terms)
        if not self.density > 0:
            raise ValidationError(f"density must be positive, got {self.density}")
        if self.dimension not in (1, 3):
            raise ValidationError(f"dimension must be 1 or 3, got {self.dimension}")
        if not terms:
            raise ValidationError("at least one term is required")
        orders = [a for a, _ in terms]
        if any(not a > 0 for a in orders) or any(b <= a for a, b in zip(orders, orders[1:])):
            raise ValidationError(f"orders must be positive and strictly increasing, got {orders}")
        if not orders[-1] > 1 or terms[-1][1] == 0:
            raise ValidationError("the highest order must exceed 1 with a nonzero coefficient")
        if not all(math.isfinite(x) for t in terms for x in t) or not math.isfinite(self.force_magnitude):
            raise ValidationError("parameters must be finite")

    @property
    def orders(self) -> np.ndarray:
        return np.array([a for a, _ in self.terms])

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([c for _, c in self.terms])

    def coefficient(self, alpha: float) -> float:
        for a, c in self.terms:
            if a == alpha:
                return c
        raise KeyError(alpha)

    def symbol(self, lam) -> np.ndarray:
        """``P(lam) = sum_j c_j lam**alpha_j``."""
        lam = np.asarray(lam, dtype=float)
        return sum(c * lam**a for a, c in self.terms)

    def scaled(self, s: float) -> "ContinuumParams":
        return ContinuumParams(self.density, tuple((a, s * c) for a, c in self.terms), self.force_magnitude, self.dimension)

    def to_dict(self) -> dict:
        return {
            "density": self.density,
            "terms": [{"alpha": a, "c": c} for a, c in self.terms],
            "force_magnitude": self.force_magnitude,
            "dimension": self.dimension,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ContinuumParams":
        try:
            terms = tuple((t["alpha"], t["c"]) for t in data["terms"])
            return cls(
                float(data["density"]),
                terms,
                float(data.get("force_magnitude", 1.0)),
                int(data.get("dimension", 3)),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed continuum parameters: {exc}") from exc


@dataclass(frozen=True)
class QuadratureConfig:
    """Discretization of the half-period sums.

    ``acceleration="alternating"`` applies repeated averaging to a window of
    partial sums; ``"none"`` sums half-periods until the last one is below
    tolerance.  ``small_lambda_panels`` is the number of dyadic levels in the
    first half-period.
    """

    rel_tol: float = 1e-9
    max_half_periods: int = 1 << 16
    acceleration: Literal["none", "alternating"] = "alternating"
    small_lambda_panels: int = 64

    def __post_init__(self):
        if not 0 < self.rel_tol <= 1e-2:
            raise ValidationError(f"rel_tol must lie in (0, 1e-2], got {self.rel_tol}")
        if self.max_half_periods < 8:
            raise ValidationError(f"max_half_periods must be >= 8, got {self.max_half_periods}")
        if self.acceleration not in ("none", "alternating"):
            raise ValidationError(f"unknown acceleration {self.acceleration!r}")
        if self.small_lambda_panels < 1:
            raise ValidationError("small_lambda_panels must be >= 1")

    def to_dict(self) -> dict:
        return {
            "rel_tol": self.rel_tol,
            "max_half_periods": self.max_half_periods,
            "acceleration": self.acceleration,
            "small_lambda_panels": self.small_lambda_panels,
        }


@dataclass(frozen=True)
class QuadratureResult:
    """Value of an oscillatory integral with its error evidence.

    ``bracket`` holds two consecutive partial sums at the end of the window
    used for the estimate.
    """

    value: float
    remainder: float
    half_periods: int
    bracket: tuple[float, float]


# --- oscillatory engine ------------------------------------------------------


def _first_panel(kind: str) -> float:
    return math.pi if kind == "sin" else 0.5 * math.pi


def _oscillatory_batch(
    h: Callable[[np.ndarray], np.ndarray], n: int, kind: str, cfg: QuadratureConfig
) -> list[QuadratureResult]:
    """``int_0^inf h_i(t) osc(t) dt`` for ``n`` integrands at once.

    ``h`` maps nodes of shape ``(m,)`` to values of shape ``(n, m)``.
    """
    osc = np.sin if kind == "sin" else np.cos
    t0 = _first_panel(kind)
    nodes, weights = panel_nodes(graded_breaks(0.0, t0, cfg.small_lambda_panels), _PANEL_ORDER)
    nodes, weights = nodes.ravel(), weights.ravel()
    # row-wise sums keep each radius independent of its batch companions
    first = (h(nodes) * (weights * osc(nodes))).sum(axis=1)
    sums = [first[:, None]]
    done = [None] * n
    count = 1
    prev_est = np.full(n, np.nan)
    start = 8
    while True:
        # extend the partial sums by another block of half-periods
        if count < cfg.max_half_periods:
            j = np.arange(count, min(count + _BLOCK, cfg.max_half_periods + 1))
            breaks = np.concatenate(([t0 + (j[0] - 1) * math.pi], t0 + j * math.pi))
            t, w = panel_nodes(breaks, _PANEL_ORDER)
            vals = h(t.ravel()).reshape(n, j.size, _PANEL_ORDER)
            pieces = (vals * (w * osc(t))).sum(axis=2)
            sums.append(sums[-1][:, -1:] + np.cumsum(pieces, axis=1))
            count += j.size
        partial = np.concatenate(sums, axis=1)
        exhausted = count > cfg.max_half_periods

        if cfg.acceleration == "alternating":
            while start + _WINDOW <= partial.shape[1]:
                for i in range(n):
                    if done[i] is not None:
                        continue
                    est, rem = euler_sum(partial[i, start : start + _WINDOW])
                    drift = abs(est - prev_est[i]) if np.isfinite(prev_est[i]) else np.inf
                    err = max(rem, drift, 4.0 * np.finfo(float).eps * abs(est))
                    if err <= cfg.rel_tol * abs(est):
                        lo, hi = partial[i, start + _WINDOW - 2], partial[i, start + _WINDOW - 1]
                        done[i] = QuadratureResult(est, err, start + _WINDOW, (lo, hi))
                    prev_est[i] = est
                if all(d is not None for d in done):
                    return done
                start *= 2
        else:
            last = partial[:, -1]
            est = 0.5 * (partial[:, -1] + partial[:, -2])
            err = 0.5 * np.abs(last - partial[:, -2])
            for i in range(n):
                if done[i] is None and err[i] <= cfg.rel_tol * abs(est[i]):
                    done[i] = QuadratureResult(est[i], err[i], count, (partial[i, -2], last[i]))
            if all(d is not None for d in done):
                return done

        if exhausted:
            i = next(k for k, d in enumerate(done) if d is None)
            est = float(partial[i, -1])
            raise ConvergenceError(
                f"oscillatory integral not converged within {cfg.max_half_periods} half-periods",
                estimate=est,
                remainder=float(abs(partial[i, -1] - partial[i, -2])),
                where=i,
            )


def oscillatory_integral(
    h: Callable[[np.ndarray], np.ndarray], kind: Literal["sin", "cos"] = "sin", cfg: QuadratureConfig | None = None
) -> QuadratureResult:
    """``int_0^inf h(t) sin(t) dt`` (or ``cos``) for a slowly varying, decaying ``h``."""
    cfg = cfg or QuadratureConfig()
    if kind not in ("sin", "cos"):
        raise ValidationError(f"kind must be 'sin' or 'cos', got {kind!r}")
    return _oscillatory_batch(lambda t: np.atleast_2d(h(t)), 1, kind, cfg)[0]


# --- Green functions ---------------------------------------------------------


def _check_integrable(params: ContinuumParams) -> None:
    lowest = params.orders[0]
    limit = 3.0 if params.dimension == 3 else 1.0
    if not lowest < limit:
        raise ValidationError(
            f"lowest order {lowest} makes the {params.dimension}-D Green integral diverge at small wavenumber "
            f"(needs < {limit})"
        )


def green_radial_results(params: ContinuumParams, r, cfg: QuadratureConfig | None = None) -> list[QuadratureResult]:
    """Radial Green function with remainder estimates, one result per radius."""
    cfg = cfg or QuadratureConfig()
    _check_integrable(params)
    rs = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(~(rs > 0)) or np.any(~np.isfinite(rs)):
        raise ValidationError("radii must be positive and finite; use nearfield_gradient at r = 0")
    out: list[QuadratureResult] = []
    for lo in range(0, rs.size, _BATCH):
        batch = rs[lo : lo + _BATCH, None]
        if params.dimension == 3:
            # G = 1/(2 pi^2 r^3) int t sin t / P(t/r) dt
            h = lambda t, b=batch: t / params.symbol(t / b)
            scale = 1.0 / (2.0 * math.pi**2 * batch[:, 0] ** 3)
            kind = "sin"
        else:
            # G = 1/(pi r) int cos t / P(t/r) dt
            h = lambda t, b=batch: 1.0 / params.symbol(t / b)
            scale = 1.0 / (math.pi * batch[:, 0])
            kind = "cos"
        try:
            results = _oscillatory_batch(h, batch.shape[0], kind, cfg)
        except ConvergenceError as exc:
            where = float(batch[exc.where, 0])
            raise ConvergenceError(
                f"Green integral not converged at r={where}",
                estimate=exc.estimate * scale[exc.where],
                remainder=exc.remainder * abs(scale[exc.where]),
                where=where,
            ) from exc
        for res, s in zip(results, scale):
            out.append(
                QuadratureResult(res.value * s, res.remainder * abs(s), res.half_periods, (res.bracket[0] * s, res.bracket[1] * s))
            )
    return out


def green_radial(params: ContinuumParams, r, cfg: QuadratureConfig | None = None):
    """Radial Green function ``G(r)`` of ``sum_j c_j (-Delta)**(alpha_j/2)`` (dimension 1 or 3)."""
    values = np.array([res.value for res in green_radial_results(params, r, cfg)])
    return float(values[0]) if np.ndim(r) == 0 else values


def displacement_point_force(params: ContinuumParams, r, cfg: QuadratureConfig | None = None):
    """Displacement ``(f0/rho) G(r)`` caused by a point force of magnitude ``f0``."""
    factor = params.force_magnitude / params.density
    if factor == 0:
        return 0.0 if np.ndim(r) == 0 else np.zeros(np.shape(r))
    return factor * green_radial(params, r, cfg)


# --- asymptotics -------------------------------------------------------------


def _two_terms(params: ContinuumParams, fixed: float) -> tuple[float, float, float]:
    """Return ``(alpha, c_alpha, c_fixed)`` for a two-term medium containing order ``fixed``."""
    if len(params.terms) != 2 or fixed not in params.orders:
        raise ValidationError(f"expected exactly two terms, one of order {fixed}")
    (a1, c1), (a2, c2) = params.terms
    return (a1, c1, c2) if a2 == fixed else (a2, c2, c1)


def mellin_sine(s: float) -> float:
    """``Gamma(s) sin(pi s / 2)``: ``int_0^inf z**(s-1) sin z dz`` continued in ``s``."""
    return float(gamma(s) * math.sin(0.5 * math.pi * s))


@dataclass(frozen=True)
class FarFieldSeries:
    """Truncated large-distance expansion ``sum_k C_k / r**p_k``.

    ``terms`` are the individual contributions at ``r``; ``used`` is the number
    kept after optimal truncation; ``flagged`` lists indices whose Mellin
    exponent is an even integer (the continued integral vanishes there and
    the true expansion acquires logarithms).
    """

    r: float
    value: float
    coefficients: tuple[float, ...]
    powers: tuple[float, ...]
    terms: tuple[float, ...]
    used: int
    flagged: tuple[int, ...]
    sign_convention: str


def farfield_coefficients(
    params: ContinuumParams, k_max: int, sign_convention: Literal["alternating", "published"] = "alternating"
) -> tuple[np.ndarray, np.ndarray, list[int]]:
    """``(C_k, p_k, flagged)`` for ``k = 0..k_max`` with ``u ~ sum C_k r**-p_k``.

    Expanding ``1/(c_alpha lam**alpha + c2 lam**2)`` in powers of
    ``c2 lam**(2-alpha)/c_alpha`` gives terms with sign ``(-1)**k``;
    ``sign_convention="published"`` instead uses a minus sign for every ``k >= 1``.
    """
    alpha, c_alpha, c2 = _two_terms(params, 2.0)
    if not 0 < alpha < 2:
        raise ValidationError(f"far-field series needs 0 < alpha < 2, got {alpha}")
    if params.dimension != 3:
        raise ValidationError("far-field series is for dimension 3")
    if k_max < 0:
        raise ValidationError("k_max must be non-negative")
    if sign_convention not in ("alternating", "published"):
        raise ValidationError(f"unknown sign convention {sign_convention!r}")
    base = params.force_magnitude / (2.0 * math.pi**2 * params.density)
    coeffs, powers, flagged = [], [], []
    for k in range(k_max + 1):
        s = (2.0 - alpha) * (k + 1)
        if k == 0:
            sign = 1.0
        else:
            sign = (-1.0) ** k if sign_convention == "alternating" else -1.0
        if abs(s / 2 - round(s / 2)) < 1e-12:
            flagged.append(k)
        coeffs.append(sign * base * c2**k / c_alpha ** (k + 1) * mellin_sine(s))
        powers.append(s + 1.0)
    return np.array(coeffs), np.array(powers), flagged


def farfield_leading_coefficient(params: ContinuumParams) -> float:
    """``C_0 = f0 Gamma(2-alpha) sin(pi alpha/2) / (2 pi^2 rho c_alpha)``."""
    alpha, c_alpha, _ = _two_terms(params, 2.0)
    return params.force_magnitude * gamma(2 - alpha) * math.sin(math.pi * alpha / 2) / (
        2 * math.pi**2 * params.density * c_alpha
    )


def farfield_series(
    params: ContinuumParams,
    r: float,
    k_max: int = 0,
    *,
    sign_convention: Literal["alternating", "published"] = "alternating",
) -> FarFieldSeries:
    """Large-``r`` expansion for the medium ``c_alpha (-Delta)**(alpha/2) + c2 (-Delta)``, ``alpha < 2``.

    The series is asymptotic: summation stops before the first term whose
    magnitude exceeds its predecessor's (terms that vanish identically are
    skipped in that comparison).
    """
    if not r > 0:
        raise ValidationError(f"r must be positive, got {r}")
    coeffs, powers, flagged = farfield_coefficients(params, k_max, sign_convention)
    terms = coeffs / r**powers
    used = len(terms)
    last = abs(terms[0])
    for k in range(1, len(terms)):
        if terms[k] == 0 or k in flagged:
            continue
        if abs(terms[k]) > last:
            used = k
            break
        last = abs(terms[k])
    return FarFieldSeries(
        r=float(r),
        value=float(terms[:used].sum()),
        coefficients=tuple(coeffs),
        powers=tuple(powers),
        terms=tuple(terms),
        used=used,
        flagged=tuple(flagged),
        sign_convention=sign_convention,
    )


def nearfield_gradient(
    params: ContinuumParams, r, variant: Literal["published", "derived"] = "published"
):
    """Small-``r`` behaviour for ``c2 (-Delta) + c_alpha (-Delta)**(alpha/2)``, ``alpha > 2``.

    For ``2 < alpha < 3`` the field grows like ``r**(alpha-3)`` with a
    prefactor that involves ``c_alpha`` only; for ``alpha > 3`` it tends to a
    finite constant.

    ``variant="published"`` evaluates the closed forms as published:
    ``f0 Gamma((3-alpha)/2) / (2**alpha pi**2 sqrt(pi) rho c_alpha Gamma(alpha/2))``
    and ``f0 / (2 pi alpha rho c2**(1-3/alpha) c_alpha**(3/alpha) sin(3 pi/alpha))``.
    ``variant="derived"`` uses the limits obtained directly from the radial
    integral: ``f0 Gamma(2-alpha) sin(pi alpha/2) / (2 pi**2 rho c_alpha)`` and
    ``u(0) = f0 c2**(1/(alpha-2)-1) c_alpha**(-1/(alpha-2)) / (2 pi rho (alpha-2) sin(pi/(alpha-2)))``.
    """
    alpha, c_alpha, c2 = _two_terms(params, 2.0)
    if not alpha > 2:
        raise ValidationError(f"near-field forms need alpha > 2, got {alpha}")
    if alpha == 3:
        raise ValidationError("alpha = 3 is the logarithmic boundary case; neither form applies")
    if variant not in ("published", "derived"):
        raise ValidationError(f"unknown variant {variant!r}")
    if params.dimension != 3:
        raise ValidationError("near-field forms are for dimension 3")
    r = np.asarray(r, dtype=float)
    if np.any(~(r > 0)) and alpha < 3:
        raise ValidationError("r must be positive")
    f0, rho = params.force_magnitude, params.density
    if alpha < 3:
        if variant == "published":
            pref = f0 * gamma((3 - alpha) / 2) / (2**alpha * math.pi**2 * math.sqrt(math.pi) * rho * c_alpha * gamma(alpha / 2))
        else:
            pref = f0 * gamma(2 - alpha) * math.sin(math.pi * alpha / 2) / (2 * math.pi**2 * rho * c_alpha)
        value = pref * r ** (alpha - 3)
    else:
        if variant == "published":
            s = math.sin(3 * math.pi / alpha)
            value = f0 / (2 * math.pi * alpha * rho * c2 ** (1 - 3 / alpha) * c_alpha ** (3 / alpha) * s)
        else:
            q = alpha - 2
            value = f0 * c2 ** (1 / q - 1) * c_alpha ** (-1 / q) / (2 * math.pi * rho * q * math.sin(math.pi / q))
        value = np.full(r.shape, value)
    return float(value) if value.ndim == 0 else value


# --- distributed sources -----------------------------------------------------


def displacement_field_convolution(
    force: GridField,
    params: ContinuumParams,
    r,
    cfg: QuadratureConfig | None = None,
    *,
    inner_order: int = 12,
) -> np.ndarray:
    """Field of a spherically symmetric force density in three dimensions.

    ``force`` samples the radial profile ``f(s)`` on ``s = origin + h*j``
    (``origin >= 0``), taken to vanish outside the sampled range.  Shells are
    integrated with the trapezoid rule over the grid, and each shell's
    contribution uses

        u_shell(r) = (2 pi / rho) (s / r) int_{|r-s|}^{r+s} q G(q) dq

    with Gauss-Legendre nodes in ``q``.
    """
    if params.dimension != 3:
        raise ValidationError("radial convolution is implemented for dimension 3")
    if force.origin < 0:
        raise ValidationError("radial grid must start at s >= 0")
    cfg = cfg or QuadratureConfig()
    rs = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(~(rs > 0)):
        raise ValidationError("radii must be positive")
    s = force.x
    f = force.samples
    tw = np.full(s.size, force.spacing)
    tw[0] = tw[-1] = 0.5 * force.spacing
    active = (f != 0) & (s > 0)
    out = np.zeros(rs.size)
    if not active.any():
        return out if np.ndim(r) else float(out[0])
    x, w = np.polynomial.legendre.leggauss(inner_order)
    for i, ri in enumerate(rs):
        ss, fs, ws = s[active], f[active], tw[active]
        lo, hi = np.abs(ri - ss), ri + ss
        half = 0.5 * (hi - lo)
        q = lo[:, None] + half[:, None] * (x + 1.0)
        g = green_radial(params, q.ravel(), cfg).reshape(q.shape)
        inner = (half[:, None] * w * q * g).sum(axis=1)
        out[i] = 2.0 * math.pi / params.density * np.sum(ws * fs * ss / ri * inner)
    return out if np.ndim(r) else float(out[0])
