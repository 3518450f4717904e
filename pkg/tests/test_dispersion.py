import math

import mpmath as mp
import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from fracelastic import (
    DispersionLaw,
    LatticeKernel,
    LatticeSpec,
    StabilityError,
    ValidationError,
    dispersion_relation,
    eval_lattice_dispersion,
    eval_target_dispersion,
    synthesize_kernel,
)
from fracelastic.dispersion import (
    continuum_coefficients,
    gradient_length_squared,
    kernel_tail_expansion,
    lattice_omega_squared,
    power_cosine_integral,
    round_trip_error,
    tail_exponent,
)


# --- lattice dispersion ------------------------------------------------------


def test_nearest_neighbor_values():
    kernel = LatticeKernel.nearest_neighbor()
    assert eval_lattice_dispersion(kernel, 0.0) == 0.0
    assert eval_lattice_dispersion(kernel, math.pi) == pytest.approx(4.0, rel=1e-15)


def test_nearest_neighbor_small_k_limit():
    kernel = LatticeKernel.nearest_neighbor()
    k = 1e-3
    assert eval_lattice_dispersion(kernel, k) / k**2 == pytest.approx(1.0, abs=1e-4)
    assert eval_lattice_dispersion(kernel, k) == pytest.approx(2 * (1 - math.cos(k)), rel=1e-6)


def test_zero_wavenumber_is_exactly_zero():
    kernel = synthesize_kernel(DispersionLaw(((1.5, 1.0), (2.0, -0.3))), 0.5, 300)
    assert eval_lattice_dispersion(kernel, 0.0) == 0.0


def test_array_input_keeps_shape():
    kernel = LatticeKernel(np.array([1.0, 0.5]), 2.0)
    k = np.linspace(-1, 1, 12).reshape(3, 4)
    assert eval_lattice_dispersion(kernel, k).shape == (3, 4)


@settings(max_examples=50, deadline=None)
@given(st.floats(-20, 20), st.integers(-3, 3))
def test_even_and_periodic(k, shift):
    kernel = LatticeKernel(np.array([1.0, -0.25, 0.125]), 0.7)
    base = eval_lattice_dispersion(kernel, k)
    assert eval_lattice_dispersion(kernel, -k) == pytest.approx(base, abs=1e-12)
    period = 2 * math.pi / kernel.spacing
    assert eval_lattice_dispersion(kernel, k + shift * period) == pytest.approx(base, abs=1e-10)


def test_nonnegative_for_positive_kernel(rng):
    kernel = LatticeKernel(rng.uniform(0, 1, 20))
    assert np.all(eval_lattice_dispersion(kernel, rng.uniform(-10, 10, 200)) >= 0)


# --- target dispersion -------------------------------------------------------


@pytest.mark.parametrize(
    "terms, k, expected",
    [
        (((2.0, 1.0),), 3.0, 9.0),
        (((2.0, 1.0), (4.0, 1.0)), 2.0, 20.0),
        (((1.5, 0.5), (2.0, 1.0)), 4.0, 20.0),
    ],
)
def test_target_examples(terms, k, expected):
    assert eval_target_dispersion(DispersionLaw(terms), k) == pytest.approx(expected, rel=1e-15)


def test_law_validation():
    with pytest.raises(ValidationError):
        DispersionLaw(())
    with pytest.raises(ValidationError):
        DispersionLaw(((2.0, 1.0), (1.5, 1.0)))
    with pytest.raises(ValidationError):
        DispersionLaw(((0.0, 1.0),))
    with pytest.raises(ValidationError):
        DispersionLaw.from_dict({"k_hat_zero": 0})


def test_law_dict_round_trip():
    law = DispersionLaw(((1.5, 0.25), (2.0, -1.0)), 3.0)
    assert DispersionLaw.from_dict(law.to_dict()) == law


# --- synthesis ----------------------------------------------------------------


def test_quadratic_law_gives_two_over_n_squared():
    # int_0^pi t^2 cos(n t) dt = 2 pi (-1)^n / n^2, so a2 = -1 gives K(n) = -2 (-1)^n / n^2
    kernel = synthesize_kernel(DispersionLaw(((2.0, -1.0),)), 1.0, 50, max_error_band=math.inf)
    n = np.arange(1, 51)
    np.testing.assert_allclose(kernel.coefficients, -2.0 * (-1.0) ** n / n**2, rtol=1e-12, atol=1e-14)
    assert kernel.coefficients[0] == pytest.approx(2.0, rel=1e-13)


@pytest.mark.parametrize("alpha", [0.5, 1.5, 2.5])
@pytest.mark.parametrize("n", [1, 7, 31, 33, 100, 1000])
def test_power_cosine_integral_against_mpmath(alpha, n):
    # int_0^pi t^a e^{i n t} dt = (-i n)^(-a-1) * lower_gamma(a+1, -i n pi)
    with mp.workdps(30):
        z = -1j * mp.mpf(n)
        exact = mp.re(z ** (-alpha - 1) * mp.gammainc(alpha + 1, 0, z * mp.pi))
    assert power_cosine_integral(alpha, n)[0] == pytest.approx(float(exact), rel=1e-10, abs=1e-13)


def test_alpha_one_point_five_round_trip_and_tail():
    law = DispersionLaw(((1.5, 1.0),))
    kernel = synthesize_kernel(law, 1.0, 10_000)
    theta = np.geomspace(0.01, 0.5, 100)
    assert np.max(round_trip_error(kernel, law, theta)) < 0.02
    assert kernel.error_band < 0.02
    assert tail_exponent(kernel) == pytest.approx(-2.5, rel=0.05)


def test_tail_expansion_matches_coefficients():
    law = DispersionLaw(((1.5, 1.0),))
    kernel = synthesize_kernel(law, 1.0, 2000)
    n = np.arange(500, 2001)
    approx = np.zeros(n.size)
    for power, coeff, alternating in kernel_tail_expansion(law, odd_orders=4):
        approx += coeff * np.where(alternating & (n % 2 == 1), -1.0, 1.0) * n**-power
    np.testing.assert_allclose(kernel.coefficients[n - 1], approx, rtol=1e-8, atol=1e-16)


def test_spacing_only_labels_the_kernel():
    law = DispersionLaw(((1.5, 1.0),))
    a = synthesize_kernel(law, 1.0, 100, max_error_band=math.inf)
    b = synthesize_kernel(law, 0.25, 100, max_error_band=math.inf)
    np.testing.assert_array_equal(a.coefficients, b.coefficients)
    assert eval_lattice_dispersion(b, 0.3 / 0.25) == pytest.approx(eval_lattice_dispersion(a, 0.3), rel=1e-14)


def test_synthesis_rejects_short_kernels():
    with pytest.raises(ValidationError):
        synthesize_kernel(DispersionLaw(((0.5, 1.0),)), 1.0, 2)
    with pytest.raises(ValidationError):
        synthesize_kernel(DispersionLaw(((1.5, 1.0),)), 1.0, 0)


# --- continuum relation -------------------------------------------------------


def test_dispersion_relation_unit_example():
    law = DispersionLaw(((2.0, 2.0),))
    spec = LatticeSpec(LatticeKernel.nearest_neighbor(), 4.0, 2.0, 16)
    assert dispersion_relation(spec, law, 3.0) == pytest.approx(9.0, rel=1e-15)


def test_negative_omega_squared_is_flagged():
    law = DispersionLaw(((2.0, 1.0),))
    spec = LatticeSpec(LatticeKernel.nearest_neighbor(), 1.0, -1.0, 16)
    with pytest.raises(StabilityError):
        dispersion_relation(spec, law, 1.0)
    assert dispersion_relation(spec, law, 1.0, allow_negative=True) == pytest.approx(-1.0)


def test_continuum_coefficients_scale_with_spacing():
    law = DispersionLaw(((1.5, 2.0), (2.0, 3.0)))
    spec = LatticeSpec(LatticeKernel(np.ones(3), 0.5), 2.0, 4.0, 16)
    np.testing.assert_allclose(continuum_coefficients(spec, law), [4 * 2 * 0.5**1.5 / 2, 4 * 3 * 0.25 / 2])


def test_lattice_omega_matches_continuum_at_small_k():
    law = DispersionLaw(((2.0, -1.0),))
    spec = LatticeSpec(LatticeKernel.nearest_neighbor(), 1.0, -1.0, 64)
    k = 1e-3
    assert lattice_omega_squared(spec, k) == pytest.approx(dispersion_relation(spec, law, k), rel=1e-6)


def test_young_modulus_mapping_symbolic():
    g, a2, dx, M, A = sp.symbols("g a2 dx M A", positive=True)
    K = g * a2
    E = K * dx / A
    rho = M / (A * dx)
    G2 = g * a2 * dx**2 / M
    assert sp.simplify(G2 - E / rho) == 0


def test_gradient_length():
    law = DispersionLaw(((2.0, -2.0), (4.0, 0.5)))
    assert gradient_length_squared(law, 0.1) == pytest.approx(0.5 * 0.01 / 2.0)


def test_check_stability():
    kernel = LatticeKernel.nearest_neighbor()
    assert LatticeSpec(kernel, 1.0, -1.0, 16).check_stability()
    assert not LatticeSpec(kernel, 1.0, 1.0, 16).check_stability()
