"""One-dimensional chain with long-range pair interactions.

Equation of motion::

    M u_n'' = g sum_{m != n} K(n - m) (u_n - u_m) + F(n)

Boundaries: ``"periodic"`` wraps the chain into a ring, where ``K`` is a
function of ring distance and may reach at most half the ring (the
antipodal particle of an even ring is a single site, so ``K(N/2)`` acts
once); ``"fixed"`` surrounds the chain with immobile
particles at zero displacement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Iterator, Literal

import numpy as np
import scipy.linalg
import scipy.signal
from scipy.sparse.linalg import LinearOperator, cg, minres

from .dispersion import LatticeKernel, LatticeSpec
from .errors import SingularSystemError, StabilityError, ValidationError

Boundary = Literal["periodic", "fixed"]

# Direct shifted sums are exact for translated inputs; FFT is used above this range.
_DIRECT_RANGE = 64
_DENSE_LIMIT = 4096


@dataclass(frozen=True, eq=False)
class LatticeState:
    displacements: np.ndarray
    velocities: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        u = np.array(self.displacements, dtype=float).ravel()
        v = np.array(self.velocities, dtype=float).ravel()
        if u.shape != v.shape:
            raise ValidationError("displacements and velocities differ in length")
        if self.time < 0:
            raise ValidationError("time must be non-negative")
        object.__setattr__(self, "displacements", u)
        object.__setattr__(self, "velocities", v)

    @classmethod
    def at_rest(cls, displacements) -> "LatticeState":
        u = np.asarray(displacements, dtype=float)
        return cls(u, np.zeros_like(u))

    @classmethod
    def zeros(cls, n: int) -> "LatticeState":
        return cls(np.zeros(n), np.zeros(n))


@dataclass(frozen=True, eq=False)
class ExternalForce:
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.array(self.values, dtype=float).ravel())

    @property
    def total(self) -> float:
        return float(self.values.sum())

    @classmethod
    def zeros(cls, n: int) -> "ExternalForce":
        return cls(np.zeros(n))

    @classmethod
    def point(cls, n: int, sites_and_values: dict[int, float]) -> "ExternalForce":
        f = np.zeros(n)
        for site, value in sites_and_values.items():
            f[site] += value
        return cls(f)


def _check(spec: LatticeSpec, u: np.ndarray, boundary: str) -> None:
    if u.size != spec.particle_count:
        raise ValidationError(f"state has {u.size} sites, lattice has {spec.particle_count}")
    if boundary == "periodic" and 2 * spec.kernel.n_max > spec.particle_count:
        raise ValidationError(
            f"periodic wrap needs kernel range <= N/2 (range {spec.kernel.n_max}, N {spec.particle_count})"
        )
    if boundary not in ("periodic", "fixed"):
        raise ValidationError(f"unknown boundary {boundary!r}")


@lru_cache(maxsize=32)
def _ring_symbol(kernel: LatticeKernel, n: int) -> np.ndarray:
    """``K_hat(0) - K_hat(theta_j)`` on the ring's ``rfft`` wavenumbers."""
    ring = np.zeros(n)
    K = kernel.coefficients
    ring[1 : K.size + 1] = K
    ring[n - K.size :] += K[::-1]
    if 2 * K.size == n:
        ring[K.size] -= K[-1]
    symbol = ring.sum() - np.fft.rfft(ring).real
    symbol[0] = 0.0
    return symbol


def lattice_symbol(spec: LatticeSpec) -> np.ndarray:
    """Eigenvalues of the periodic interaction operator on the ``rfft`` grid."""
    return _ring_symbol(spec.kernel, spec.particle_count)


def interaction_force(spec: LatticeSpec, u, boundary: Boundary = "periodic") -> np.ndarray:
    """``g sum_m K(n-m) (u_n - u_m)`` for every site."""
    u = np.asarray(u, dtype=float)
    _check(spec, u, boundary)
    K = spec.kernel.coefficients
    g = spec.coupling
    if K.size <= _DIRECT_RANGE:
        if boundary == "periodic":
            out = np.zeros_like(u)
            for p, kp in enumerate(K, start=1):
                if 2 * p == u.size:
                    out += kp * (u - np.roll(u, p))
                else:
                    out += kp * ((u - np.roll(u, -p)) + (u - np.roll(u, p)))
            return g * out
        pad = np.concatenate((np.zeros(K.size), u, np.zeros(K.size)))
        n = u.size
        out = np.zeros_like(u)
        for p, kp in enumerate(K, start=1):
            out += kp * ((u - pad[K.size + p : K.size + p + n]) + (u - pad[K.size - p : K.size - p + n]))
        return g * out
    if boundary == "periodic":
        return g * np.fft.irfft(lattice_symbol(spec) * np.fft.rfft(u), n=u.size)
    stencil = np.concatenate((K[::-1], [0.0], K))
    return g * (spec.kernel.k_hat_zero * u - scipy.signal.fftconvolve(u, stencil, mode="same"))


def acceleration(
    spec: LatticeSpec,
    state: LatticeState,
    force: ExternalForce | None = None,
    boundary: Boundary = "periodic",
) -> np.ndarray:
    """``[g sum_m K(n-m)(u_n - u_m) + F(n)] / M``."""
    a = interaction_force(spec, state.displacements, boundary)
    if force is not None:
        a = a + force.values
    return a / spec.mass


def omega_max(spec: LatticeSpec, boundary: Boundary = "periodic") -> float:
    """Largest plane-wave frequency; for fixed ends the symbol's supremum bounds the spectrum."""
    if boundary == "periodic":
        values = -spec.coupling * lattice_symbol(spec) / spec.mass
    else:
        theta = np.linspace(0.0, np.pi, 4 * spec.particle_count + 1)
        K = spec.kernel.coefficients
        n = np.arange(1, K.size + 1)
        values = -spec.coupling * (4.0 * np.sin(0.5 * np.outer(theta, n)) ** 2 @ K) / spec.mass
    return math.sqrt(max(float(values.max()), 0.0))


def step_dynamics(
    spec: LatticeSpec,
    state: LatticeState,
    force: ExternalForce | None,
    dt: float,
    boundary: Boundary = "periodic",
    *,
    accel: np.ndarray | None = None,
) -> LatticeState:
    """One velocity-Verlet step.

    ``accel`` may carry the acceleration at ``state`` from the previous step.
    """
    if not dt > 0:
        raise ValidationError(f"dt must be positive, got {dt}")
    w = omega_max(spec, boundary)
    if dt * w >= 2.0:
        raise StabilityError(f"dt*omega_max = {dt * w:.4g} >= 2; velocity Verlet is unstable")
    a0 = acceleration(spec, state, force, boundary) if accel is None else accel
    v_half = state.velocities + 0.5 * dt * a0
    u1 = state.displacements + dt * v_half
    moved = LatticeState(u1, v_half, state.time + dt)
    a1 = acceleration(spec, moved, force, boundary)
    return LatticeState(u1, v_half + 0.5 * dt * a1, state.time + dt)


def integrate(
    spec: LatticeSpec,
    state: LatticeState,
    force: ExternalForce | None,
    dt: float,
    steps: int,
    boundary: Boundary = "periodic",
) -> Iterator[LatticeState]:
    """Yield the state after each of ``steps`` velocity-Verlet steps."""
    w = omega_max(spec, boundary)
    if dt * w >= 2.0:
        raise StabilityError(f"dt*omega_max = {dt * w:.4g} >= 2; velocity Verlet is unstable")
    u, v, t = state.displacements.copy(), state.velocities.copy(), state.time
    f = 0.0 if force is None else force.values
    a = (interaction_force(spec, u, boundary) + f) / spec.mass
    for _ in range(steps):
        v += 0.5 * dt * a
        u += dt * v
        a = (interaction_force(spec, u, boundary) + f) / spec.mass
        v += 0.5 * dt * a
        t += dt
        yield LatticeState(u.copy(), v.copy(), t)


def potential_energy(spec: LatticeSpec, u, boundary: Boundary = "periodic") -> float:
    """``-(g/4) sum_{n != m} K(n-m) (u_n - u_m)**2`` (walls count as zero displacement)."""
    u = np.asarray(u, dtype=float)
    return -0.5 * float(u @ interaction_force(spec, u, boundary))


def total_energy(spec: LatticeSpec, state: LatticeState, boundary: Boundary = "periodic") -> float:
    """Kinetic plus interaction energy, external forces excluded."""
    kinetic = 0.5 * spec.mass * float(state.velocities @ state.velocities)
    return kinetic + potential_energy(spec, state.displacements, boundary)


def dominant_frequency(series, dt: float, pad_factor: int = 16) -> float:
    """Angular frequency of the strongest spectral peak of a sampled signal.

    Hann window, zero padding and a parabolic fit to the log-magnitude around
    the peak bin.
    """
    x = np.asarray(series, dtype=float)
    x = (x - x.mean()) * np.hanning(x.size)
    n = pad_factor * x.size
    mag = np.abs(np.fft.rfft(x, n=n))
    i = int(np.argmax(mag[1:-1])) + 1
    a, b, c = np.log(mag[i - 1 : i + 2])
    shift = 0.5 * (a - c) / (a - 2 * b + c)
    return 2.0 * np.pi * (i + shift) / (n * dt)


# --- statics ----------------------------------------------------------------


def _operator_matrix(spec: LatticeSpec, boundary: Boundary) -> np.ndarray:
    """Dense ``A`` with ``A u = interaction_force(u)``."""
    n = spec.particle_count
    K = spec.kernel.coefficients
    col = np.zeros(n)
    col[1 : K.size + 1] = -K[: n - 1]
    if boundary == "periodic":
        col[n - K.size :] += -K[::-1]
        if 2 * K.size == n:
            col[K.size] += K[-1]
        mat = scipy.linalg.circulant(col)
        mat[np.diag_indices(n)] = -col.sum()
    else:
        mat = scipy.linalg.toeplitz(col)
        mat[np.diag_indices(n)] = spec.kernel.k_hat_zero
    return spec.coupling * mat


def _connected(spec: LatticeSpec) -> bool:
    support = [p for p, k in enumerate(spec.kernel.coefficients, start=1) if k != 0]
    return math.gcd(spec.particle_count, *support) == 1 if support else False


_AUTO = object()


def solve_static(
    spec: LatticeSpec,
    force: ExternalForce,
    *,
    pin=_AUTO,
    boundary: Boundary = "periodic",
    rtol: float = 1e-10,
) -> np.ndarray:
    """Displacements with ``g sum_m K(n-m)(u_n - u_m) + F(n) = 0``.

    Periodic chains have a translation zero mode.  With ``pin`` (default
    site 0) the pinned particle takes up any net load as a reaction and the
    result is shifted so that ``u[pin] = 0``.  With ``pin=None`` the load
    must balance and the mean-zero solution is returned.  Fixed chains need
    no gauge; ``pin`` defaults to ``None`` there.
    """
    n = spec.particle_count
    f = np.asarray(force.values, dtype=float)
    _check(spec, f, boundary)
    if pin is _AUTO:
        pin = 0 if boundary == "periodic" else None
    if pin is not None and not 0 <= pin < n:
        raise ValidationError(f"pin site {pin} outside the chain")

    if boundary == "periodic":
        if not _connected(spec):
            raise SingularSystemError("kernel does not connect every site of the ring")
        load = f.copy()
        if pin is not None:
            load[pin] -= load.sum()
        elif abs(load.sum()) > 1e-12 * max(np.abs(load).sum(), 1e-300):
            raise SingularSystemError("unbalanced load on a periodic chain with no pinned site")
        u = _solve_periodic(spec, load)
        u -= u[pin] if pin is not None else u.mean()
    else:
        load = f
        if pin is not None:
            keep = np.arange(n) != pin
            A = _operator_matrix(spec, boundary)
            u = np.zeros(n)
            u[keep] = np.linalg.solve(A[np.ix_(keep, keep)], -load[keep])
            load = np.where(keep, load, -(A[pin] @ u))
        else:
            u = _solve_fixed(spec, load)

    residual = interaction_force(spec, u, boundary) + load
    scale = max(np.linalg.norm(load), 1e-300)
    if np.linalg.norm(residual) > rtol * scale and np.linalg.norm(load) > 0:
        raise SingularSystemError(
            f"static residual {np.linalg.norm(residual) / scale:.3g} exceeds {rtol}"
        )
    return u


def _solve_periodic(spec: LatticeSpec, load: np.ndarray) -> np.ndarray:
    n = spec.particle_count
    if n <= _DENSE_LIMIT:
        A = _operator_matrix(spec, "periodic")
        shift = np.abs(np.diag(A)).mean()
        return np.linalg.solve(A + shift / n, -load)
    op = LinearOperator((n, n), matvec=lambda x: interaction_force(spec, x, "periodic"), dtype=float)
    return _krylov(spec, op, -load, lattice_symbol(spec), project=True)


def _solve_fixed(spec: LatticeSpec, load: np.ndarray) -> np.ndarray:
    n = spec.particle_count
    if n <= _DENSE_LIMIT:
        return np.linalg.solve(_operator_matrix(spec, "fixed"), -load)
    op = LinearOperator((n, n), matvec=lambda x: interaction_force(spec, x, "fixed"), dtype=float)
    theta = np.linspace(0.0, np.pi, 257)
    K = spec.kernel.coefficients
    symbol = 4.0 * np.sin(0.5 * np.outer(theta, np.arange(1, K.size + 1))) ** 2 @ K
    return _krylov(spec, op, -load, symbol, project=False)


def _krylov(spec, op, rhs, symbol, project):
    signs = np.sign(spec.coupling * symbol[np.abs(symbol) > 0])
    definite = signs.size and (np.all(signs > 0) or np.all(signs < 0))
    if definite:
        s = float(signs[0])
        scaled = LinearOperator(op.shape, matvec=lambda x: s * op.matvec(x), dtype=float)
        u, info = cg(scaled, s * rhs, rtol=1e-13, atol=0.0, maxiter=50 * rhs.size)
    else:
        u, info = minres(op, rhs, rtol=1e-13, maxiter=50 * rhs.size)
    if info != 0:
        raise SingularSystemError(f"iterative static solve failed (info={info})")
    return u - u.mean() if project else u
