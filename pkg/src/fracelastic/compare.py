"""Lattice statics against the continuum limit on a periodic ring.

A chain of ``N`` particles with spacing ``dx`` closes into a ring of length
``L = N dx``.  Its continuum counterpart is the one-dimensional medium
``sum_j c_j (-Delta)**(alpha_j/2) u = f / rho`` on the same ring, whose
point-force response is the periodic Green function

    G_per(x) = (2/L) sum_{j >= 1} cos(2 pi j x / L) / P(2 pi j / L).

For a single power law this is a Clausen function, evaluated through its
small-argument expansion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import gamma, zeta

from .dispersion import DispersionLaw, LatticeKernel, LatticeSpec, kernel_tail_expansion, synthesize_kernel
from .errors import ValidationError
from .green import ContinuumParams
from .lattice import ExternalForce, solve_static

_CLAUSEN_TERMS = 60
_DIRECT_MODES = 1 << 16


def map_lattice_to_continuum(spec: LatticeSpec, law: DispersionLaw) -> ContinuumParams:
    """Continuum medium of the chain: ``c_j = g a_j dx**alpha_j / M``, ``rho = M / dx``.

    The force magnitude is left at 1 and the dimension is 1.
    """
    dx = spec.spacing
    terms = tuple((a, spec.coupling * c * dx**a / spec.mass) for a, c in law.terms)
    return ContinuumParams(spec.mass / dx, terms, 1.0, 1)


def clausen(s: float, phi) -> np.ndarray:
    """``Cl_s(phi) = sum_{j >= 1} cos(j phi) / j**s`` for real ``s > 1``.

    Uses ``pi/(2 Gamma(s) cos(pi s/2)) |phi|**(s-1) + sum_k (-1)**k zeta(s-2k) phi**(2k)/(2k)!``
    after folding ``phi`` into ``[0, pi]``.  Odd integer ``s`` is a removable
    singularity of that form and is rejected.
    """
    if not s > 1:
        raise ValidationError(f"Clausen sum needs s > 1, got {s}")
    if abs(s - round(s)) < 1e-9 and round(s) % 2 == 1:
        raise ValidationError(f"odd integer order {s} is not supported")
    phi = np.mod(np.asarray(phi, dtype=float), 2 * math.pi)
    phi = np.minimum(phi, 2 * math.pi - phi)
    total = math.pi / (2 * gamma(s) * math.cos(math.pi * s / 2)) * phi ** (s - 1)
    power = np.ones_like(phi)
    fact = 1.0
    for k in range(_CLAUSEN_TERMS):
        if k:
            power = power * phi * phi
            fact *= (2 * k - 1) * (2 * k)
        total = total + (-1) ** k * zeta(s - 2 * k) * power / fact
    return total


def periodic_green_1d(params: ContinuumParams, length: float, x) -> np.ndarray:
    """Mean-zero periodic Green function of ``sum_j c_j (-Delta)**(alpha_j/2)`` on a ring."""
    if params.dimension != 1:
        raise ValidationError("periodic Green function is one-dimensional")
    x = np.asarray(x, dtype=float)
    phi = 2 * math.pi * x / length
    scale = 2 * math.pi / length
    a_top, c_top = params.terms[-1]
    tail = 2.0 / (length * c_top * scale**a_top) * clausen(a_top, phi)
    if len(params.terms) == 1:
        return tail
    # low modes summed directly, the rest from the top-order Clausen sum
    j = np.arange(1, _DIRECT_MODES + 1, dtype=float)
    k = scale * j
    diff = 1.0 / params.symbol(k) - 1.0 / (c_top * k**a_top)
    direct = np.cos(np.multiply.outer(phi, j)) @ diff
    return tail + 2.0 / length * direct


class PowerLawFit(NamedTuple):
    exponent: float
    prefactor: float
    r_squared: float


def fit_power_law(xs: Sequence[float], ys: Sequence[float]) -> PowerLawFit:
    """Least-squares line through ``(log x, log y)``."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or x.size < 3:
        raise ValidationError("need at least three matching samples")
    if np.any(~(x > 0)) or np.any(~(y > 0)):
        raise ValidationError("power-law fit needs positive data")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    spread = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / spread if spread > 0 else 1.0
    return PowerLawFit(float(slope), float(math.exp(intercept)), float(r2))


@dataclass(frozen=True)
class ConvergenceRow:
    dx: float
    n: int
    err_max: float
    err_l2: float
    order: float
    n_max: int


@dataclass(frozen=True)
class ConvergenceReport:
    """Discrete-vs-continuum errors per spacing.

    ``rows`` are ordered by decreasing ``dx``; ``truncation_rows`` repeat
    the finest spacing with longer kernels.
    """

    rows: tuple[ConvergenceRow, ...]
    truncation_rows: tuple[ConvergenceRow, ...] = ()
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        dxs = [row.dx for row in self.rows]
        if any(b >= a for a, b in zip(dxs, dxs[1:])):
            raise ValidationError("rows must have strictly decreasing dx")
        if any(row.err_max < 0 or row.err_l2 < 0 for row in self.rows):
            raise ValidationError("error norms must be non-negative")

    @property
    def monotone(self) -> bool:
        errs = [row.err_max for row in self.rows]
        return all(b < a for a, b in zip(errs, errs[1:]))

    @property
    def errors(self) -> np.ndarray:
        return np.array([row.err_max for row in self.rows])


def _window_mask(x: np.ndarray, length: float, sources: Sequence[tuple[float, float]], margin: float) -> np.ndarray:
    mask = np.ones(x.size, dtype=bool)
    for pos, _ in sources:
        d = np.abs(np.mod(x - pos + 0.5 * length, length) - 0.5 * length)
        mask &= d >= margin
    return mask


def fold_kernel(coefficients, n: int) -> np.ndarray:
    """Sum a kernel over the periodic images of an ``n``-site ring.

    Returns ring coefficients for separations ``1..n//2``.  Self-images
    exert no force and are dropped.  The antipodal particle of an even ring
    is reached from both sides, so its class carries twice the folded sum.
    """
    coefficients = np.asarray(coefficients, dtype=float)
    idx = np.arange(1, coefficients.size + 1) % n
    sep = np.minimum(idx, n - idx)
    keep = sep >= 1
    ring = np.bincount(sep[keep] - 1, weights=coefficients[keep], minlength=n // 2)
    if n % 2 == 0:
        ring[-1] *= 2.0
    return ring


def folded_tail(law: DispersionLaw, n_synth: int, n: int) -> np.ndarray:
    """Images beyond ``n_synth`` folded onto an even ``n``-site ring, from the kernel's tail expansion.

    Each residue class ``r`` sums ``n**-s`` over ``n = n0 + m*N`` in closed form
    with the Hurwitz zeta function.  Layout matches :func:`fold_kernel`.
    """
    if n % 2:
        raise ValidationError("tail folding needs an even ring")
    r = np.arange(1, n)
    n0 = r + n * np.maximum(np.ceil((n_synth + 1 - r) / n), 0)
    by_residue = np.zeros(n - 1)
    for power, coeff, alternating in kernel_tail_expansion(law):
        term = coeff * n ** (-power) * zeta(power, n0 / n)
        if alternating:
            term = term * np.where(n0 % 2, -1.0, 1.0)
        by_residue += term
    half = n // 2
    ring = by_residue[:half] + by_residue[::-1][:half]
    ring[-1] = 2.0 * by_residue[half - 1]
    return ring


def lattice_for_spacing(
    law: DispersionLaw,
    continuum: ContinuumParams,
    dx: float,
    length: float,
    kernel_range: float,
    tail_correction: bool = True,
) -> tuple[LatticeSpec, DispersionLaw, int]:
    """Ring with spacing ``dx`` whose continuum limit is ``continuum``.

    The law's relative weights are kept and rescaled so that every ``c_j``
    and the density stay fixed: ``M = rho dx`` and
    ``g = c_top M / (a_top dx**alpha_top)``.  The kernel is synthesized out
    to ``kernel_range`` in physical units and folded onto the ring, so each
    particle feels every periodic image within that range; with
    ``tail_correction`` the images beyond it are added from the kernel's
    large-``n`` expansion.  Returns the
    spec, the rescaled law and the synthesized range in sites.
    """
    n = int(round(length / dx))
    if abs(n * dx - length) > 1e-9 * length:
        raise ValidationError(f"dx={dx} does not divide the ring length {length}")
    if [a for a, _ in continuum.terms] != list(law.orders):
        raise ValidationError("law and continuum parameters have different orders")
    a_top, coef_top = law.terms[-1]
    c_top = continuum.terms[-1][1]
    mass = continuum.density * dx
    g = c_top * mass / (coef_top * dx**a_top)
    scaled = DispersionLaw(
        tuple((a, c * mass / (g * dx**a)) for (a, _), (_, c) in zip(law.terms, continuum.terms)),
        law.k_hat_zero,
    )
    n_synth = max(int(round(kernel_range / dx)), 1)
    if list(scaled.orders) == [2.0] and n_synth == 1:
        coeffs = LatticeKernel.nearest_neighbor(-scaled.terms[0][1], dx).coefficients
    else:
        coeffs = synthesize_kernel(scaled, dx, n_synth, max_error_band=math.inf).coefficients
    ring = fold_kernel(coeffs, n)
    if tail_correction and n_synth > 1:
        ring = ring + folded_tail(scaled, n_synth, n)
    last = np.flatnonzero(ring)
    ring = ring[: last[-1] + 1] if last.size else ring[:1]
    return LatticeSpec(LatticeKernel(ring, dx), mass, g, n), scaled, n_synth


def _row(law, continuum, dx, length, kernel_range, sources, margin, tail_correction):
    spec, _, n_synth = lattice_for_spacing(law, continuum, dx, length, kernel_range, tail_correction)
    n = spec.particle_count
    x = dx * np.arange(n)
    values = {}
    for pos, mag in sources:
        site = pos / dx
        if abs(site - round(site)) > 1e-9:
            raise ValidationError(f"source at {pos} is not on the grid with dx={dx}")
        idx = int(round(site)) % n
        values[idx] = values.get(idx, 0.0) + mag
    u_lat = solve_static(spec, ExternalForce.point(n, values), pin=None)
    u_con = sum(mag / continuum.density * periodic_green_1d(continuum, length, x - pos) for pos, mag in sources)
    mask = _window_mask(x, length, sources, margin)
    err = (u_lat[mask] - u_lat[mask].mean()) - (u_con[mask] - u_con[mask].mean())
    return spec, n_synth, float(np.max(np.abs(err))), float(math.sqrt(dx * np.sum(err**2)))


def static_convergence_study(
    law: DispersionLaw,
    continuum: ContinuumParams,
    dxs: Sequence[float],
    *,
    length: float = 1.0,
    sources: Sequence[tuple[float, float]] | None = None,
    kernel_range: float | None = None,
    margin: float | None = None,
    truncation_ranges: Sequence[float] = (),
    tail_correction: bool = False,
) -> ConvergenceReport:
    """Solve the chain at each spacing and measure its distance to the continuum field.

    ``sources`` are point forces ``(position, magnitude)`` that must sum to
    zero; the default is a dipole ``+f0`` at ``L/2`` and ``-f0`` at ``0``.
    Errors are taken over grid points at least ``margin`` (default ``L/16``)
    from every source, after removing each field's mean over that window.
    ``truncation_ranges`` adds rows at the finest spacing with longer
    kernels to separate truncation from discretization error.
    """
    dxs = [float(d) for d in dxs]
    if len(dxs) < 2 or any(b >= a for a, b in zip(dxs, dxs[1:])):
        raise ValidationError("dx sequence must be strictly decreasing with at least two entries")
    if continuum.dimension != 1:
        raise ValidationError("the comparison runs on a one-dimensional ring")
    f0 = continuum.force_magnitude
    if sources is None:
        sources = ((0.5 * length, f0), (0.0, -f0))
    if abs(sum(m for _, m in sources)) > 1e-12 * max(sum(abs(m) for _, m in sources), 1e-300):
        raise ValidationError("sources must balance on a ring")
    kernel_range = 16.0 * length if kernel_range is None else kernel_range
    margin = length / 16 if margin is None else margin
    if margin < 10 * dxs[0]:
        raise ValidationError("window margin must cover at least 10 cells at the coarsest spacing")

    rows = []
    prev = None
    for dx in dxs:
        spec, n_synth, emax, el2 = _row(law, continuum, dx, length, kernel_range, sources, margin, tail_correction)
        order = math.log2(prev / emax) if prev and emax > 0 else math.nan
        rows.append(ConvergenceRow(dx, spec.particle_count, emax, el2, order, n_synth))
        prev = emax
    trunc = []
    for rng in truncation_ranges:
        spec, n_synth, emax, el2 = _row(law, continuum, dxs[-1], length, rng, sources, margin, tail_correction)
        trunc.append(ConvergenceRow(dxs[-1], spec.particle_count, emax, el2, math.nan, n_synth))
    meta = {
        "law": law.to_dict(),
        "continuum": continuum.to_dict(),
        "length": length,
        "sources": [list(s) for s in sources],
        "kernel_range": kernel_range,
        "margin": margin,
    }
    report = ConvergenceReport(tuple(rows), tuple(trunc), meta)
    meta["monotone"] = report.monotone
    return report
