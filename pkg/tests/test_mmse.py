import numpy as np
import pytest

from covsim.geometry import AntennaLayout
from covsim.mmse import (HermitianSolver, SingularMatrixError, error_covariance, mmse_estimate,
                         normalized_mse)
from covsim.sampling import complex_normal, psd_sqrt
from covsim.scenario import build_seven_cell


def ideal_run(n_t, trials, seed):
    """Draw (g, y) pairs at the center BS and return ideal MMSE estimates."""
    scn = build_seven_cell(AntennaLayout.ula(n_t), rng=np.random.default_rng(seed))
    rng = np.random.default_rng(seed + 1)
    r, q = scn.covariance(0, 0), scn.q_matrix(0)
    amp = np.sqrt(scn.ul_weights(0))
    g = psd_sqrt(r) @ complex_normal(rng, (n_t, trials))
    y = g + np.sqrt(scn.noise_scale(0)) * complex_normal(rng, (n_t, trials))
    for k in range(1, scn.l_cells):
        y += amp[k] * (psd_sqrt(scn.covariance(0, k)) @ complex_normal(rng, (n_t, trials)))
    return r, q, g, mmse_estimate(r, q, y)


class TestEstimate:
    def test_identity_filter(self):
        r = np.array([[2.0, 0.5j], [-0.5j, 1.0]])
        y = np.array([1.0, 2.0 - 1j])
        np.testing.assert_allclose(mmse_estimate(r, r, y), y)

    def test_zero_covariance(self):
        np.testing.assert_array_equal(mmse_estimate(np.zeros((3, 3)), np.eye(3), np.ones(3)), 0)

    def test_scalar(self):
        assert mmse_estimate(np.array([[1.0]]), np.array([[2.0]]), np.array([3.0]))[0] == \
            pytest.approx(1.5)

    def test_multiple_snapshots(self):
        rng = np.random.default_rng(0)
        a = complex_normal(rng, (5, 5))
        q = a @ a.conj().T + np.eye(5)
        r = 0.5 * q
        y = complex_normal(rng, (5, 3))
        np.testing.assert_allclose(mmse_estimate(r, q, y), r @ np.linalg.solve(q, y))

    def test_singular_rejected(self):
        with pytest.raises(SingularMatrixError):
            mmse_estimate(np.eye(2), np.diag([1.0, 0.0]), np.ones(2))
        with pytest.raises(SingularMatrixError):
            HermitianSolver(np.diag([1.0, 1e-14]))
        with pytest.raises(SingularMatrixError):
            HermitianSolver(np.zeros((3, 3)))
        with pytest.raises(SingularMatrixError):
            HermitianSolver(np.diag([1.0, np.nan]))

    def test_indefinite_accepted(self):
        a = np.diag([2.0, -1.0, 0.5]).astype(complex)
        b = np.array([1.0, 1.0, 1.0])
        np.testing.assert_allclose(HermitianSolver(a).solve(b), [0.5, -1.0, 2.0])

    def test_solver_reuse(self):
        q = np.array([[3.0, 1j], [-1j, 2.0]])
        s = HermitianSolver(q)
        assert s.rcond > 0.1
        np.testing.assert_allclose(mmse_estimate(np.eye(2), s, np.ones(2)),
                                   np.linalg.solve(q, np.ones(2)))


class TestErrorCovariance:
    def test_noiseless(self):
        r = np.array([[2.0, 1.0], [1.0, 2.0]])
        np.testing.assert_allclose(error_covariance(r, r), r)

    def test_scalar(self):
        assert error_covariance(np.array([[1.0]]), np.array([[2.0]]))[0, 0] == pytest.approx(0.5)

    def test_residual_psd(self):
        scn = build_seven_cell(AntennaLayout.ula(8), rng=np.random.default_rng(1))
        r, q = scn.covariance(0, 0), scn.q_matrix(0)
        phi = error_covariance(r, q)
        assert np.array_equal(phi, phi.conj().T)
        ev = np.linalg.eigvalsh(r - phi)
        assert ev.min() >= -1e-10 * ev.max()


class TestNormalizedMse:
    def test_perfect(self):
        g = [np.ones(3), np.arange(3.0)]
        assert normalized_mse(zip(g, g), np.eye(3)) == 0.0

    def test_zero_estimate(self):
        rng = np.random.default_rng(2)
        g = complex_normal(rng, (4, 20_000))
        mse = normalized_mse(((c, np.zeros(4)) for c in g.T), np.eye(4))
        assert mse == pytest.approx(1.0, abs=0.02)

    def test_empty(self):
        with pytest.raises(ValueError):
            normalized_mse([], np.eye(2))

    def test_closed_form_ula128(self):
        r, q, g, g_hat = ideal_run(128, 1000, seed=3)
        sim = normalized_mse(zip(g.T, g_hat.T), r)
        oracle = np.trace(r - error_covariance(r, q)).real / np.trace(r).real
        assert sim == pytest.approx(oracle, rel=0.03)


class TestOrthogonality:
    def test_cross_covariance_vanishes(self):
        _, _, g, g_hat = ideal_run(16, 10_000, seed=4)
        cross = g_hat @ (g - g_hat).conj().T / g.shape[1]
        assert np.abs(cross).max() < 0.02

    def test_estimate_covariance_is_phi(self):
        r, q, _, g_hat = ideal_run(16, 10_000, seed=5)
        phi = error_covariance(r, q)
        emp = g_hat @ g_hat.conj().T / g_hat.shape[1]
        assert np.linalg.norm(emp - phi) / np.linalg.norm(phi) < 0.05
