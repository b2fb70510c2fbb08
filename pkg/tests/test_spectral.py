import math

import numpy as np
import pytest

from liref.lightfield import LightField
from liref.losses import crie, ucrie, vwe
from liref.refocus import ShiftEngine
from liref.spectral import (
    crie2_spectral,
    directional_weight_map,
    sinc,
    ucrie2_spectral,
    view_error_spectra,
    vwe2_spectral,
)
from liref.synthdata import random_lightfield, verification_pair

SPECTRAL = ShiftEngine.spectral()


class TestErrorSpectra:
    def test_identical_fields_give_zero(self, rng):
        lf = rng.uniform(0, 1, size=(3, 3, 8, 8, 1))
        es = view_error_spectra(lf, lf)
        np.testing.assert_array_equal(es.spectra, 0)

    def test_constant_offset_is_dc_only(self, rng):
        gt = rng.uniform(0, 0.8, size=(3, 3, 8, 8, 1))
        es = view_error_spectra(gt + 0.1, gt)
        dc = es.spectra[:, :, 0, 0, :]
        np.testing.assert_allclose(dc, 0.1 * 64, atol=1e-10)
        rest = es.spectra.copy()
        rest[:, :, 0, 0, :] = 0
        np.testing.assert_allclose(rest, 0, atol=1e-10)

    def test_inverse_transform_round_trip(self, rng):
        pred = rng.uniform(0, 1, size=(3, 3, 8, 8, 3))
        gt = rng.uniform(0, 1, size=(3, 3, 8, 8, 3))
        es = view_error_spectra(pred, gt)
        recovered = np.fft.ifft2(es.spectra, axes=(2, 3)).real
        np.testing.assert_allclose(recovered, pred - gt, atol=1e-12)

    def test_hermitian_symmetry(self, rng):
        pred = rng.uniform(0, 1, size=(3, 3, 8, 8, 1))
        gt = rng.uniform(0, 1, size=(3, 3, 8, 8, 1))
        spectra = view_error_spectra(pred, gt).spectra
        flipped = spectra[:, :, :, :, :].copy()
        flipped = np.roll(np.flip(flipped, axis=(2, 3)), shift=(1, 1), axis=(2, 3))
        np.testing.assert_allclose(spectra, np.conj(flipped), atol=1e-10)


class TestVwe2Spectral:
    def test_identical_is_zero(self, rng):
        lf = rng.uniform(0, 1, size=(3, 3, 8, 8, 1))
        assert vwe2_spectral(lf, lf) == 0.0

    def test_constant_offset_closed_form(self, rng):
        gt = rng.uniform(0, 0.8, size=(5, 5, 8, 8, 1))
        assert vwe2_spectral(gt + 0.1, gt) == pytest.approx(0.25, rel=1e-12)

    def test_matches_direct_vwe_white_noise(self, rng):
        # Plancherel holds for arbitrary content, even sizes included
        pred = rng.uniform(0, 1, size=(3, 3, 8, 8, 3))
        gt = rng.uniform(0, 1, size=(3, 3, 8, 8, 3))
        direct = vwe(pred, gt, 2)
        assert abs(vwe2_spectral(pred, gt) - direct) <= 1e-10 * direct


class TestClosedForms:
    def test_identical_fields_give_zero(self, rng):
        lf = rng.uniform(0, 1, size=(3, 3, 8, 8, 1))
        value = ucrie2_spectral(lf, lf)
        assert value.canonical == 0.0 and value.literal == 0.0

    def test_diagonal_restriction_reduces_to_vwe(self, small_pair):
        pred, gt = small_pair
        diag = ucrie2_spectral(pred, gt, 2.5, diagonal_only=True)
        expected = vwe(pred, gt, 2) / 3 ** 4
        assert diag.canonical == pytest.approx(expected, rel=1e-12)

    def test_ucrie_canonical_matches_quadrature(self, small_pair):
        pred, gt = small_pair
        value = ucrie2_spectral(pred, gt, 2.5).canonical
        quad = ucrie(pred, gt, p=2, d_max=2.5, q=0.001, engine=SPECTRAL)
        assert value == pytest.approx(quad, rel=1e-6)

    def test_ucrie_canonical_matches_quadrature_odd_white_noise(self, rng):
        # no Nyquist bins on odd grids: exact for arbitrary content
        pred = LightField(rng.uniform(0, 1, size=(3, 3, 9, 9, 1)))
        gt = LightField(rng.uniform(0, 1, size=(3, 3, 9, 9, 1)))
        value = ucrie2_spectral(pred, gt, 2.5).canonical
        quad = ucrie(pred, gt, p=2, d_max=2.5, q=0.001, engine=SPECTRAL)
        assert value == pytest.approx(quad, rel=1e-6)

    def test_crie_canonical_matches_quadrature(self, small_pair):
        pred, gt = small_pair
        value = crie2_spectral(pred, gt, 2.5).canonical
        quad = crie(pred, gt, p=2, d_max=2.5, r_max=6.0, q=0.001, engine=SPECTRAL)
        assert value == pytest.approx(quad, rel=1e-6)

    def test_crie_single_pair_direct_formula(self, rng):
        # two views carry the same error field, everything else matches:
        # the double sum collapses to Gaussian-weighted power sums
        shape = (3, 3, 8, 8, 1)
        gt = rng.uniform(0, 1, size=shape)
        pred = gt.copy()
        err = rng.normal(0, 0.1, size=(8, 8))
        u, v = (0, 1), (2, 2)  # angular offset (u - v) = (-2, -1)
        pred[u[0], u[1], :, :, 0] += err
        pred[v[0], v[1], :, :, 0] += err
        got = crie2_spectral(pred, gt, 2.5).canonical
        f = np.fft.fft2(err)
        wy = 2 * np.pi * np.fft.fftfreq(8)
        wx = 2 * np.pi * np.fft.fftfreq(8)
        power = np.abs(f) ** 2
        scale = math.sqrt(math.pi) / 5.0
        ds, dt = u[0] - v[0], u[1] - v[1]
        k = wx[None, :] * ds + wy[:, None] * dt
        cross = np.sum(power * scale * np.exp(-0.25 * k * k)) * 2  # (u,v) and (v,u)
        diag = np.sum(power) * scale * 2  # (u,u) and (v,v)
        expected = (cross + diag) / (81 * 64 * 64)
        assert got == pytest.approx(expected, rel=1e-10)

    def test_scaling_is_quadratic_in_error(self, small_pair):
        pred, gt = small_pair
        scaled = LightField(gt.samples + 2.0 * (pred.samples - gt.samples))
        for fn in (ucrie2_spectral, crie2_spectral):
            base = fn(pred, gt, 2.5)
            big = fn(scaled, gt, 2.5)
            assert big.canonical == pytest.approx(4.0 * base.canonical, rel=1e-10)
            assert big.literal == pytest.approx(4.0 * base.literal, rel=1e-10)

    def test_gaussian_canonical_nonnegative(self, rng):
        for seed in range(5):
            pred, gt = verification_pair(np.random.default_rng(seed), 1, 8, 8, 1)
            assert crie2_spectral(pred, gt, 2.5).canonical >= 0.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="differ"):
            ucrie2_spectral(np.zeros((3, 3, 8, 8, 1)), np.zeros((3, 3, 8, 9, 1)))


class TestWeightMaps:
    def test_zero_offset_sinc_is_all_ones(self):
        m = directional_weight_map((0, 0), 2.5, "sinc", 33)
        np.testing.assert_allclose(m, 1.0)

    def test_diagonal_offset_ridge_is_anti_diagonal(self):
        # offset (1, 1): the ridge omega . u = 0 runs at 135 degrees
        size = 33
        m = directional_weight_map((1, 1), 2.5, "sinc", size)
        anti_diag = np.asarray([m[size - 1 - i, i] for i in range(size)])
        np.testing.assert_allclose(anti_diag, 1.0, atol=1e-12)
        assert m.max() == pytest.approx(1.0)
        assert m.min() < 0  # sinc sidelobes oscillate below zero

    def test_steep_offset_ridge_orientation(self):
        # offset (2, -1): the ridge follows omega_y = 2 * omega_x
        size = 33
        half = size // 2
        m = directional_weight_map((2, -1), 2.5, "sinc", size)
        for step in range(-half // 2, half // 2 + 1):
            assert m[half + 2 * step, half + step] == pytest.approx(1.0, abs=1e-12)

    def test_gauss_map_matches_formula(self):
        size = 9
        m = directional_weight_map((1, 0), 2.5, "gauss", size)
        axis = np.linspace(-np.pi, np.pi, size)
        expected = (math.sqrt(math.pi) / 5.0) * np.exp(-0.25 * axis ** 2)
        np.testing.assert_allclose(m[0, :], expected)  # constant along rows for u=(1,0)

    def test_even_size_rejected(self):
        with pytest.raises(ValueError, match="odd"):
            directional_weight_map((1, 1), 2.5, "sinc", 32)

    def test_unknown_filter_rejected(self):
        with pytest.raises(ValueError):
            directional_weight_map((1, 1), 2.5, "box", 33)


class TestSinc:
    def test_values(self):
        assert sinc(0.0) == pytest.approx(1.0)
        assert sinc(np.pi) == pytest.approx(0.0, abs=1e-15)
        assert float(sinc(1.0)) == pytest.approx(math.sin(1.0), rel=1e-14)

    def test_tiny_arguments_stable(self):
        x = np.asarray([1e-12, -1e-12, 1e-9])
        np.testing.assert_allclose(sinc(x), 1.0, atol=1e-15)
