import math

import mpmath as mp
import numpy as np
import pytest

from fracelastic import (
    ContinuumParams,
    DispersionLaw,
    LatticeKernel,
    LatticeSpec,
    ValidationError,
    fit_power_law,
    map_lattice_to_continuum,
    periodic_green_1d,
    static_convergence_study,
)
from fracelastic.compare import clausen, fold_kernel, folded_tail, lattice_for_spacing
from fracelastic.dispersion import eval_lattice_dispersion, synthesize_kernel
from fracelastic.lattice import lattice_symbol


# --- mapping ----------------------------------------------------------------------


def test_unit_mapping():
    spec = LatticeSpec(LatticeKernel.nearest_neighbor(), 1.0, 1.0, 16)
    params = map_lattice_to_continuum(spec, DispersionLaw(((2.0, 1.0),)))
    assert params.terms == ((2.0, 1.0),)
    assert params.density == 1.0 and params.dimension == 1


def test_gradient_length_ratio():
    dx, a2, a4 = 0.1, -2.0, 0.5
    spec = LatticeSpec(LatticeKernel.nearest_neighbor(1.0, dx), 1.0, -1.0, 16)
    params = map_lattice_to_continuum(spec, DispersionLaw(((2.0, a2), (4.0, a4))))
    c2, c4 = params.coefficients
    assert c4 / c2 == pytest.approx(a4 / a2 * dx**2, rel=1e-14)


def test_halving_spacing_scales_coefficient():
    law = DispersionLaw(((1.5, 1.0),))
    a = map_lattice_to_continuum(LatticeSpec(LatticeKernel(np.ones(2), 0.2), 1.0, 1.0, 16), law)
    b = map_lattice_to_continuum(LatticeSpec(LatticeKernel(np.ones(2), 0.1), 1.0, 1.0, 16), law)
    # rho = M / dx doubles as well
    assert b.coefficients[0] == pytest.approx(2**-1.5 * a.coefficients[0], rel=1e-14)
    assert b.density == pytest.approx(2 * a.density)


def test_coefficient_ratios_do_not_depend_on_coupling():
    law = DispersionLaw(((1.5, 0.3), (2.0, 1.0)))
    ratios = []
    for g in (0.5, 4.0):
        c = map_lattice_to_continuum(LatticeSpec(LatticeKernel(np.ones(2), 0.3), 1.0, g, 16), law).coefficients
        ratios.append(c[0] / c[1])
    assert ratios[0] == pytest.approx(ratios[1], rel=1e-14)


# --- power-law fits ------------------------------------------------------------------


def test_fit_exact_square():
    x = np.geomspace(1, 100, 10)
    fit = fit_power_law(x, x**2)
    assert fit.exponent == pytest.approx(2.0, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)


def test_fit_noisy_power_law(rng):
    x = np.geomspace(1, 1e3, 40)
    y = 3.7 * x**-1.5 * (1 + 1e-6 * rng.normal(size=x.size))
    fit = fit_power_law(x, y)
    assert fit.exponent == pytest.approx(-1.5, abs=1e-4)
    assert fit.prefactor == pytest.approx(3.7, rel=1e-4)


def test_fit_rejects_bad_data():
    with pytest.raises(ValidationError):
        fit_power_law([1, 2, 3], [1, -1, 2])
    with pytest.raises(ValidationError):
        fit_power_law([1, 2], [1, 2])


# --- periodic continuum reference ------------------------------------------------------


@pytest.mark.parametrize("s", [1.5, 2.0, 2.5, 3.5, 4.0])
def test_clausen_against_mpmath(s):
    phi = np.array([1e-4, 0.3, 1.0, 2.5, math.pi, 4.0, 6.0])
    expected = [float(mp.clcos(s, p)) for p in phi]
    np.testing.assert_allclose(clausen(s, phi), expected, rtol=1e-12, atol=1e-14)


def test_clausen_rejects_odd_integer_order():
    with pytest.raises(ValidationError):
        clausen(3.0, 1.0)
    with pytest.raises(ValidationError):
        clausen(1.0, 1.0)


def test_periodic_green_solves_the_ring_equation():
    params = ContinuumParams(1.0, ((1.5, 2.0),), dimension=1)
    n, length = 4096, 3.0
    x = length * np.arange(n) / n
    g = periodic_green_1d(params, length, x)
    k = 2 * math.pi * np.arange(1, 6) / length
    # int G cos(k x) dx over the ring must equal 1 / (c k^alpha); the mean vanishes
    coeff = np.array([np.sum(g * np.cos(kk * x)) * length / n for kk in k])
    np.testing.assert_allclose(coeff, 1.0 / (2.0 * k**1.5), rtol=1e-3)
    assert abs(g.mean()) < 1e-2 * np.abs(g).max()


def test_multi_term_green_matches_mode_sum():
    params = ContinuumParams(1.0, ((1.5, 1.0), (2.0, 0.5)), dimension=1)
    length = 2.0
    x = np.array([0.1, 0.7, 1.3])
    j = np.arange(1, 400_001)
    k = 2 * math.pi * j / length
    direct = 2 / length * np.cos(np.outer(x, k)) @ (1 / (k**1.5 + 0.5 * k**2))
    np.testing.assert_allclose(periodic_green_1d(params, length, x), direct, rtol=1e-6)


# --- kernel folding ----------------------------------------------------------------------


def test_fold_matches_infinite_chain_symbol():
    law = DispersionLaw(((1.5, 1.0),))
    kernel = synthesize_kernel(law, 1.0, 4096)
    n = 64
    ring = LatticeKernel(fold_kernel(kernel.coefficients, n)[: n // 2], 1.0)
    theta = 2 * math.pi * np.arange(n // 2 + 1) / n
    # the folded ring has the infinite chain's symbol on the ring's own wavenumbers
    spec = LatticeSpec(ring, 1.0, 1.0, n)
    np.testing.assert_allclose(lattice_symbol(spec), eval_lattice_dispersion(kernel, theta), atol=1e-12)


def test_tail_correction_is_independent_of_range():
    law = DispersionLaw(((1.5, 1.0),))
    n = 128

    def ring(sites, corrected):
        folded = fold_kernel(synthesize_kernel(law, 1.0, sites, max_error_band=math.inf).coefficients, n)
        return folded + folded_tail(law, sites, n) if corrected else folded

    reference = ring(64 * n, True)
    assert np.max(np.abs(ring(2 * n, True) - reference)) < 1e-14
    assert np.max(np.abs(ring(2 * n, False) - reference)) > 1e-5


def test_lattice_for_spacing_keeps_continuum_fixed():
    law = DispersionLaw(((1.5, 1.0),))
    continuum = ContinuumParams(2.0, ((1.5, 0.5),), dimension=1)
    for dx in (1 / 64, 1 / 128):
        spec, scaled, _ = lattice_for_spacing(law, continuum, dx, 1.0, 4.0)
        mapped = map_lattice_to_continuum(spec, scaled)
        assert mapped.density == pytest.approx(2.0)
        assert mapped.coefficients[0] == pytest.approx(0.5, rel=1e-14)


# --- convergence studies -------------------------------------------------------------------


def test_string_matches_continuum_to_rounding():
    law = DispersionLaw(((2.0, -1.0),))
    continuum = ContinuumParams(1.0, ((2.0, 1.0),), dimension=1)
    # a range below one cell keeps the plain nearest-neighbour string at every spacing
    report = static_convergence_study(law, continuum, [1 / 256, 1 / 512], kernel_range=1e-6)
    assert np.all(report.errors < 1e-11)


def test_fractional_chain_converges_monotonically():
    law = DispersionLaw(((1.5, 1.0),))
    continuum = ContinuumParams(1.0, ((1.5, 1.0),), dimension=1)
    report = static_convergence_study(law, continuum, [1 / 256, 1 / 512, 1 / 1024, 1 / 2048], tail_correction=True)
    assert report.monotone
    assert all(row.order > 0 for row in report.rows[1:])
    assert report.metadata["monotone"] is True


def test_truncation_rows_shrink_with_range():
    law = DispersionLaw(((1.5, 1.0),))
    continuum = ContinuumParams(1.0, ((1.5, 1.0),), dimension=1)
    report = static_convergence_study(law, continuum, [1 / 256, 1 / 512], truncation_ranges=(1.0, 4.0, 16.0))
    floor = [row.err_max for row in report.truncation_rows]
    assert floor[0] > floor[1] > floor[2]
    assert all(row.dx == 1 / 512 for row in report.truncation_rows)


def test_study_is_deterministic():
    law = DispersionLaw(((1.5, 1.0),))
    continuum = ContinuumParams(1.0, ((1.5, 1.0),), dimension=1)
    a = static_convergence_study(law, continuum, [1 / 256, 1 / 512], kernel_range=2.0)
    b = static_convergence_study(law, continuum, [1 / 256, 1 / 512], kernel_range=2.0)
    assert a.rows == b.rows


def test_study_validation():
    law = DispersionLaw(((1.5, 1.0),))
    continuum = ContinuumParams(1.0, ((1.5, 1.0),), dimension=1)
    with pytest.raises(ValidationError):
        static_convergence_study(law, continuum, [1 / 512, 1 / 256])
    with pytest.raises(ValidationError):
        static_convergence_study(law, continuum, [1 / 256, 1 / 512], sources=((0.5, 1.0),))
    with pytest.raises(ValidationError):
        static_convergence_study(law, continuum, [1 / 64, 1 / 128])
    with pytest.raises(ValidationError):
        static_convergence_study(law, ContinuumParams(1.0, ((1.5, 1.0),)), [1 / 256, 1 / 512])
