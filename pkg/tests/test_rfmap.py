"""
Tests for random Fourier lifting and basis files.
"""

import numpy as np
import pytest

from chi2map.exceptions import ConsistencyError, DimensionError, FormatError, ParameterError
from chi2map.models.basis import RFBasis
from chi2map.models.histogram import HistogramMatrix
from chi2map.services.chi2direct_service import Chi2DirectService
from chi2map.services.rfmap_service import RFMapService


class TestBasis:
    """Tests for seeded basis sampling."""

    def test_same_seed_same_basis(self):
        a = RFMapService.sample_basis(12, 64, 0.75, seed=5)
        b = RFMapService.sample_basis(12, 64, 0.75, seed=5)
        np.testing.assert_array_equal(a.omega, b.omega)
        np.testing.assert_array_equal(a.phase, b.phase)
        assert a.fingerprint == b.fingerprint

    def test_different_seed_different_basis(self):
        a = RFMapService.sample_basis(12, 64, 0.75, seed=5)
        b = RFMapService.sample_basis(12, 64, 0.75, seed=6)
        assert not np.array_equal(a.omega, b.omega)
        assert a.fingerprint != b.fingerprint

    def test_shapes_and_ranges(self):
        basis = RFMapService.sample_basis(10, 5000, 0.75, seed=0)
        assert basis.omega.shape == (10, 5000)
        assert basis.embed_dim == 10 and basis.dims == 5000
        assert np.all((basis.phase >= 0) & (basis.phase < 2 * np.pi))
        assert basis.omega.var() == pytest.approx(1.5, rel=0.05)

    @pytest.mark.parametrize("args", [(0, 4, 1.0, 0), (4, 0, 1.0, 0), (4, 4, 0.0, 0), (4, 4, 1.0, -1)])
    def test_invalid_arguments(self, args):
        with pytest.raises(ParameterError):
            RFMapService.sample_basis(*args)


class TestTransform:
    """Tests for the cosine feature map."""

    def test_shape_and_bound(self, rng):
        basis = RFMapService.sample_basis(6, 100, 0.5, seed=1)
        Z = RFMapService.rf_transform(rng.random((7, 6)), basis)
        assert Z.shape == (7, 100)
        assert np.all(np.abs(Z) <= np.sqrt(2 / 100) + 1e-15)

    def test_dimension_mismatch(self):
        basis = RFMapService.sample_basis(6, 10, 0.5, seed=1)
        with pytest.raises(DimensionError):
            RFMapService.rf_transform(np.zeros((2, 5)), basis)

    def test_threads_give_identical_output(self, rng):
        basis = RFMapService.sample_basis(6, 50, 0.5, seed=1)
        C = rng.random((30, 6))
        np.testing.assert_array_equal(RFMapService.rf_transform(C, basis, threads=4),
                                      RFMapService.rf_transform(C, basis))

    def test_estimates_gaussian_kernel(self, rng):
        C = 0.3 * rng.random((5, 20))
        basis = RFMapService.sample_basis(20, 20000, 0.75, seed=2)
        Z = RFMapService.rf_transform(C, basis)
        np.testing.assert_allclose(Z @ Z.T, RFMapService.gaussian_gram(C, 0.75), atol=0.05)

    def test_approximates_exp_chi2(self, dirichlet_matrix):
        X = HistogramMatrix(dirichlet_matrix.data[:8])
        k = Chi2DirectService.fit_params(dirichlet_matrix, 5)
        basis = RFMapService.sample_basis(16 * 5, 20000, 0.75, seed=3)
        approx = RFMapService.approx_exp_chi2_gram(X, k, basis)
        np.testing.assert_array_equal(approx, approx.T)
        np.testing.assert_allclose(approx, Chi2DirectService.exact_exp_chi2_gram(X, beta=1.5), atol=0.05)


class TestBasisFiles:
    """Tests for reading and writing basis files."""

    def test_round_trip_and_verify(self, tmp_path):
        basis = RFMapService.sample_basis(7, 33, 0.6, seed=9)
        path = RFMapService.write_basis(basis, tmp_path / "basis.rfb")
        back = RFMapService.read_basis(path, verify=True)
        assert back.fingerprint == basis.fingerprint
        assert (back.gamma, back.seed) == (0.6, 9)

    def test_tampered_basis_fails_verification(self, tmp_path):
        basis = RFMapService.sample_basis(7, 33, 0.6, seed=9)
        tampered = RFBasis(omega=basis.omega, phase=basis.phase[::-1], gamma=0.6, seed=9)
        path = RFMapService.write_basis(tampered, tmp_path / "basis.rfb")
        RFMapService.read_basis(path)
        with pytest.raises(ConsistencyError):
            RFMapService.read_basis(path, verify=True)

    def test_bad_magic_and_truncation(self, tmp_path):
        path = RFMapService.write_basis(RFMapService.sample_basis(3, 4, 1.0, seed=0), tmp_path / "b.rfb")
        raw = path.read_bytes()
        path.write_bytes(b"XXXXXXXX" + raw[8:])
        with pytest.raises(FormatError):
            RFMapService.read_basis(path)
        path.write_bytes(raw[:-8])
        with pytest.raises(FormatError):
            RFMapService.read_basis(path)


@pytest.mark.slow
class TestMonteCarloRate:
    """Gram-matrix error of the full map over many seeds."""

    def test_error_shrinks_like_inverse_sqrt_d(self):
        rng = np.random.default_rng(21)
        X = HistogramMatrix(rng.dirichlet(np.ones(16), size=20))
        k = Chi2DirectService.fit_params(X, 5)
        C = Chi2DirectService.embed_matrix(X, k)
        exact = Chi2DirectService.exact_exp_chi2_gram(X, beta=1.5)
        dims = [2 ** p for p in range(8, 15)]
        medians = []
        for D in dims:
            worst = []
            for seed in range(50):
                Z = RFMapService.rf_transform(C, RFMapService.sample_basis(C.shape[1], D, 0.75, seed))
                worst.append(np.abs(Z @ Z.T - exact).max())
            medians.append(np.median(worst))
        slope = np.polyfit(np.log(dims), np.log(medians), 1)[0]
        assert -0.65 <= slope <= -0.35
        assert medians[dims.index(8192)] <= 0.05
