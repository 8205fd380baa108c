"""
Tests for the Chebyshev chi2 series.
"""

import numpy as np
import pytest

from chi2map.exceptions import LogSingularity, ParameterError
from chi2map.services.chebyshev_service import ChebyshevService
from chi2map.services.chi2direct_service import Chi2DirectService


class TestEmbedding:
    """Tests for the d_q embedding."""

    def test_embedding_at_one(self):
        np.testing.assert_array_equal(ChebyshevService.cheb_embed([1.0], 3), [1.0, 0.0, 0.0, 0.0])

    def test_first_terms(self):
        x = 0.2
        d = ChebyshevService.cheb_embed([x], 2)
        L = np.log(x)
        assert d[0] == pytest.approx(2 * x / (x + 1))
        assert d[1] == pytest.approx(-np.sqrt(2) * L / np.pi * d[0])
        assert d[2] == pytest.approx((2 * L / np.pi) * d[1] / 2)

    def test_zero_and_floor(self):
        np.testing.assert_array_equal(ChebyshevService.cheb_embed([0.0, 1e-13], 4), np.zeros(10))
        assert np.any(ChebyshevService.cheb_embed([1e-13], 4, floor=0.0) != 0)

    def test_matrix_matches_rows(self, dirichlet_matrix):
        C = ChebyshevService.cheb_embed_matrix(dirichlet_matrix, 5)
        assert C.shape == (40, 16 * 6)
        np.testing.assert_array_equal(C[5], ChebyshevService.cheb_embed(dirichlet_matrix.data[5], 5))
        np.testing.assert_array_equal(ChebyshevService.cheb_embed_matrix(dirichlet_matrix, 5, threads=3), C)

    def test_negative_terms(self):
        with pytest.raises(ParameterError):
            ChebyshevService.coefficients(np.array([0.5]), -1)

    def test_series_converges_to_similarity(self):
        x, y = 0.3, 0.05
        d = ChebyshevService.coefficients(np.array([x, y]), 64, floor=0.0)
        assert d[0] @ d[1] == pytest.approx(2 * x * y / (x + y), abs=5e-3)

    def test_stays_finite_down_to_tiny_values(self):
        xs = np.geomspace(1e-8, 1.0, 400)
        d = ChebyshevService.coefficients(xs, 128, floor=0.0)
        assert d.shape == (400, 129)
        assert np.all(np.isfinite(d))
        assert np.abs(d).max() <= 1.0 + 1e-12


class TestFourierCoefficients:
    """Tests for the a_q/b_q coefficients."""

    @pytest.mark.parametrize("x", [0.1, 0.3, 0.5, 0.9])
    def test_recurrence_matches_quadrature(self, x):
        coeffs = ChebyshevService.fourier_coeffs_recurrence(x, 6)
        assert coeffs.a[0] == pytest.approx(4 * np.sqrt(x) / (x + 1), abs=1e-14)
        for q in (0, 2, 4, 6):
            a_q, _ = ChebyshevService.quadrature_coefficients(x, q)
            assert coeffs.a[q] == pytest.approx(a_q, abs=1e-6)
        for q in (1, 3, 5):
            _, b_q = ChebyshevService.quadrature_coefficients(x, q)
            assert coeffs.b[q] == pytest.approx(b_q, abs=1e-6)

    def test_parity_structure(self):
        coeffs = ChebyshevService.fourier_coeffs_recurrence(0.4, 7)
        np.testing.assert_array_equal(coeffs.a[1::2], 0.0)
        np.testing.assert_array_equal(coeffs.b[0::2], 0.0)
        assert coeffs.terms == 7

    def test_first_sine_coefficient(self):
        x = 0.25
        coeffs = ChebyshevService.fourier_coeffs_recurrence(x, 2)
        w = np.log(x) / np.pi
        assert coeffs.b[1] == pytest.approx(-w * coeffs.a[0])
        assert coeffs.a[2] == pytest.approx(-w * w * coeffs.a[0])

    @pytest.mark.parametrize("x", [0.05, 0.5, 3.0])
    def test_embedding_and_recurrence_agree(self, x):
        d = ChebyshevService.cheb_embed([x], 10)
        from_embedding = ChebyshevService.coefficients_from_embedding(d, x)
        direct = ChebyshevService.fourier_coeffs_recurrence(x, 10)
        np.testing.assert_allclose(from_embedding.interleaved(), direct.interleaved(), rtol=1e-10, atol=1e-14)

    def test_singular_and_invalid_points(self):
        with pytest.raises(LogSingularity):
            ChebyshevService.fourier_coeffs_recurrence(1.0, 3)
        with pytest.raises(ParameterError):
            ChebyshevService.fourier_coeffs_recurrence(0.0, 3)
        with pytest.raises(ParameterError):
            ChebyshevService.fourier_coeffs_recurrence(0.5, 0)

    @pytest.mark.parametrize("x,y", [(0.1, 0.9), (0.5, 0.5), (0.02, 0.7)])
    def test_sech_identity(self, x, y):
        expected = 2 * x * y / (x + y)
        assert ChebyshevService.sech_identity_check(x, y) == pytest.approx(expected, rel=1e-12)
        assert ChebyshevService.sech_identity_check(y, x) == ChebyshevService.sech_identity_check(x, y)


class TestConvergence:
    """Tests for the convergence profile."""

    @pytest.fixture(scope="class")
    def profile(self):
        xs = np.linspace(0.05, 1.0, 40)
        return ChebyshevService.cheb_convergence_profile(xs, 64)

    def test_shape(self, profile):
        assert profile.terms.tolist() == list(range(65))
        assert profile.max_residual.shape == (65,)

    def test_decays_like_one_over_n(self, profile):
        assert -1.4 <= profile.slope <= -0.7
        assert np.all(np.diff(profile.max_residual[4:]) <= 1e-12)
        assert profile.max_residual[64] <= profile.max_residual[4] / 4

    def test_rate_on_log_grid(self):
        profile = ChebyshevService.cheb_convergence_profile(np.geomspace(0.05, 1.0, 20), 64)
        assert -1.4 <= profile.slope <= -0.7

    def test_single_constant_bounds_every_pair(self, profile):
        xs = np.linspace(0.05, 1.0, 40)
        d = ChebyshevService.coefficients(xs, 64, floor=0.0)
        for N in (4, 16, 64):
            approx = d[:, None, :N + 1] * d[None, :, :N + 1]
            residual = np.abs(2 * np.outer(xs, xs) / (xs[:, None] + xs[None, :]) - approx.sum(axis=-1))
            assert np.all(residual <= profile.constant * np.sqrt(np.outer(xs, xs)) / N * (1 + 1e-9) + 1e-14)

    def test_grid_outside_unit_interval(self):
        with pytest.raises(ParameterError):
            ChebyshevService.cheb_convergence_profile([0.5, 1.5], 4)

    @pytest.mark.parametrize("N", [5, 7])
    def test_direct_series_is_much_more_accurate(self, log_uniform_matrix, N):
        xs = np.geomspace(0.01, 1.0, 200)
        direct = Chi2DirectService.max_residual(xs, Chi2DirectService.fit_params(log_uniform_matrix, N))
        chebyshev = ChebyshevService.cheb_convergence_profile(xs, N, terms=[N]).max_residual[0]
        assert direct <= 0.1 * chebyshev
