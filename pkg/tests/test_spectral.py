import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import pair
from shearlab.spectral import (TWO_PI, MeanNotZero, SpectralField2D, Wavevector, YSpectrum,
                               h1_single_xmode, inner_y, mixing_scale, norm_l2, norm_sobolev,
                               random_field, single_xmode_assemble)

PI = math.pi


def quad_torus(func, n=64):
    """Trapezoid rule on the periodic square; exact for trigonometric polynomials of degree < n."""
    x = TWO_PI * np.arange(n) / n - PI
    xx, yy = np.meshgrid(x, x, indexing="ij")
    return float(np.sum(func(xx, yy))) * (TWO_PI / n) ** 2


def test_wavevector_norm_is_integer():
    k = Wavevector(3, -4)
    assert k.norm2 == 25 and isinstance(k.norm2, int)


class TestNorms:
    def test_l2_single_pair(self):
        assert norm_l2(pair(1, 1, 1.0)) == pytest.approx(2 * math.sqrt(2) * PI, rel=1e-15)

    def test_l2_empty(self):
        assert norm_l2(SpectralField2D.zero(4)) == 0.0

    def test_l2_sin_x_against_quadrature(self):
        rho = pair(1, 0, -0.5j)
        assert norm_l2(rho) == pytest.approx(math.sqrt(2) * PI, rel=1e-15)
        assert norm_l2(rho) ** 2 == pytest.approx(quad_torus(lambda x, y: np.sin(x) ** 2), rel=1e-13)
        # frozen high-precision quadrature value
        assert norm_l2(rho) == pytest.approx(4.442882938158366, rel=1e-14)

    def test_sobolev_single_pair(self):
        rho = pair(1, 1, 1.0)
        assert norm_sobolev(rho, -1) == pytest.approx(2 * PI, rel=1e-15)
        assert norm_sobolev(rho, 1) == pytest.approx(2 * math.sqrt(6) * PI, rel=1e-15)

    def test_hneg1_two_modes_against_mode_sum(self):
        rho = SpectralField2D.from_modes({(1, 0): -0.5j, (-1, 0): 0.5j, (0, 3): 0.5, (0, -3): 0.5})
        assert norm_sobolev(rho, -1) == pytest.approx(4.683209820693818, rel=1e-14)

    def test_negative_s_rejects_mean(self):
        rho = SpectralField2D.from_modes({(0, 0): 1.0, (1, 0): 1.0, (-1, 0): 1.0})
        with pytest.raises(MeanNotZero):
            norm_sobolev(rho, -1)

    @pytest.mark.parametrize("k,expected", [((1, 1), 1 / math.sqrt(2)), ((1, 2), 1 / math.sqrt(5)),
                                            ((1, 0), 1.0)])
    def test_mixing_scale_single_pair(self, k, expected):
        assert mixing_scale(pair(*k, 0.3 - 0.1j)) == pytest.approx(expected, abs=1e-15)

    def test_mixing_scale_zero_field(self):
        with pytest.raises(ValueError):
            mixing_scale(SpectralField2D.zero(3))


class TestFieldInvariants:
    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            SpectralField2D.from_modes({(1, 0): 1.0, (-1, 0): 2.0})

    def test_rejects_mode_outside_band(self):
        with pytest.raises(ValueError):
            SpectralField2D.from_modes({(5, 0): 1.0, (-5, 0): 1.0}, band=4)

    def test_zero_amplitudes_are_not_stored(self):
        rho = SpectralField2D.from_modes({(1, 0): 0.0, (-1, 0): 0.0, (2, 1): 1.0, (-2, -1): 1.0})
        assert len(rho) == 2

    def test_pruned_mass_goes_to_error_budget(self):
        rho = SpectralField2D.from_modes({(1, 0): 1e-301, (-1, 0): 1e-301, (2, 1): 1.0, (-2, -1): 1.0})
        assert len(rho) == 2
        assert rho.err_budget == pytest.approx(2 * TWO_PI**2 * 1e-602, rel=1e-12)

    def test_half_dense_round_trip(self, rng):
        rho = random_field(rng, 6, 10)
        back = SpectralField2D.from_half_dense(rho.to_half_dense(), 6)
        assert back.is_hermitian()
        assert back.modes == rho.modes

    def test_evaluate_matches_direct_formula(self):
        rho = pair(2, -1, 0.25 + 0.5j)
        x, y = 0.3, -1.1
        direct = 2 * ((0.25 + 0.5j) * np.exp(1j * (2 * x - y))).real
        assert rho.evaluate(x, y) == pytest.approx(direct, abs=1e-15)


class TestYSpectrum:
    def test_sin_and_cos_evaluate(self):
        y = np.linspace(-PI, PI, 17)
        assert np.allclose(YSpectrum.sin(3, 2.0).evaluate(y), 2 * np.sin(3 * y), atol=1e-15)
        assert np.allclose(YSpectrum.cos(2).evaluate(y), np.cos(2 * y), atol=1e-15)

    def test_convolve_is_pointwise_product(self, rng):
        a = YSpectrum.from_dict({int(l): complex(*rng.normal(size=2)) for l in range(-3, 4)})
        b = YSpectrum.from_dict({int(l): complex(*rng.normal(size=2)) for l in range(-5, 2)})
        y = rng.uniform(-PI, PI, 25)
        assert np.allclose(a.convolve(b).evaluate(y), a.evaluate(y) * b.evaluate(y), atol=1e-13)

    def test_derivative(self):
        y = np.linspace(0, 1, 5)
        assert np.allclose(YSpectrum.sin(2).derivative().evaluate(y), 2 * np.cos(2 * y), atol=1e-15)

    def test_l2_and_inner(self):
        s = YSpectrum.sin(1)
        assert s.l2_sq() == pytest.approx(PI, rel=1e-15)
        assert inner_y(s, s).real == pytest.approx(PI, rel=1e-15)

    def test_is_real(self):
        assert YSpectrum.sin(4).is_real()
        assert not YSpectrum.from_dict({1: 1.0}).is_real()


class TestSingleXMode:
    def test_sin_x(self):
        rho = single_xmode_assemble(YSpectrum.constant(1.0), YSpectrum.zero())
        assert rho.amplitude(1, 0) == -0.5j and rho.amplitude(-1, 0) == 0.5j

    def test_cos_y_cos_x_against_quadrature(self):
        rho = single_xmode_assemble(YSpectrum.zero(), YSpectrum.cos(1))
        assert rho.amplitude(1, 1) == pytest.approx(0.25) and rho.amplitude(1, -1) == pytest.approx(0.25)
        ref = quad_torus(lambda x, y: (np.cos(y) * np.cos(x)) ** 2)
        assert norm_l2(rho) == pytest.approx(math.sqrt(ref), rel=1e-13)
        assert norm_l2(rho) == pytest.approx(PI, rel=1e-14)

    def test_zero(self):
        assert len(single_xmode_assemble(YSpectrum.zero(), YSpectrum.zero())) == 0

    def test_h1_identity_examples(self):
        assert h1_single_xmode(YSpectrum.constant(1.0), YSpectrum.zero()) == pytest.approx(TWO_PI, rel=1e-15)
        assert h1_single_xmode(YSpectrum.zero(), YSpectrum.zero()) == 0.0
        f, g = YSpectrum.sin(1), YSpectrum.cos(1)
        val = h1_single_xmode(f, g)
        assert val == pytest.approx(math.sqrt(6) * PI, rel=1e-14)
        assert val == pytest.approx(norm_sobolev(single_xmode_assemble(f, g), 1), rel=1e-14)


finite_spectrum = st.dictionaries(
    st.integers(-6, 6),
    st.tuples(st.floats(-2, 2), st.floats(-2, 2)).map(lambda p: complex(*p)),
    min_size=1, max_size=8)


def _real(d):
    s = YSpectrum.from_dict(d)
    mirror = YSpectrum(-s.l[::-1], np.conj(s.c[::-1]))
    return (s + mirror).scale(0.5)


@settings(max_examples=60, deadline=None)
@given(finite_spectrum, finite_spectrum)
def test_h1_identity_matches_assembled_norm(fd, gd):
    f, g = _real(fd), _real(gd)
    rho = single_xmode_assemble(f, g)
    if len(rho) == 0:
        return
    assert h1_single_xmode(f, g) == pytest.approx(norm_sobolev(rho, 1), rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 12), st.floats(0.0, 3.0))
def test_norm_ordering(seed, n_modes, decay):
    rho = random_field(np.random.default_rng(seed), 8, n_modes, decay)
    hm1, l2, h1 = norm_sobolev(rho, -1), norm_l2(rho), norm_sobolev(rho, 1)
    assert hm1 <= l2 * (1 + 1e-15) and l2 <= h1 * (1 + 1e-15)
    assert rho.is_hermitian() and rho.is_mean_zero()


@settings(max_examples=60, deadline=None)
@given(st.integers(-30, 30), st.integers(-30, 30), st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3))
def test_single_pair_mixing_scale(kx, ky, amp):
    if (kx, ky) == (0, 0):
        return
    assert mixing_scale(pair(kx, ky, amp)) == pytest.approx(1 / math.hypot(kx, ky), abs=1e-15)
