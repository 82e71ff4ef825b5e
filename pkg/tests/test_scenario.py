import numpy as np
import pytest

from covsim.geometry import AntennaLayout
from covsim.scenario import (ScenarioParams, build_seven_cell, db_to_linear, draw_aoas,
                             linear_to_db)


class TestSnrTables:
    def test_uplink(self):
        t = ScenarioParams().snr_ul_db()
        assert t.shape == (7, 7)
        assert np.all(np.diag(t) == -7.0)
        assert np.all(t[~np.eye(7, dtype=bool)] == -8.6)

    def test_downlink_neighbor_at_twice_distance(self):
        t = ScenarioParams().snr_dl_db()
        assert np.all(np.diag(t) == 13.0)
        off = t[~np.eye(7, dtype=bool)]
        np.testing.assert_allclose(off, 13.0 - 20.0 * np.log10(2.0))
        assert off[0] == pytest.approx(7.0, abs=0.05)

    def test_per_neighbor_ratios(self):
        prm = ScenarioParams(dl_distance_ratio=(1.0, 2.0, 3.0, 4.0, 5.0, 6.0))
        t = prm.snr_dl_db()
        np.testing.assert_allclose(t[1:, 0], 13.0 - 20.0 * np.log10([1, 2, 3, 4, 5, 6]))
        assert t[0, 1] == 13.0

    def test_linear_tables_positive(self):
        scn = build_seven_cell(AntennaLayout.ula(4), rng=np.random.default_rng(0))
        assert np.all(scn.snr_ul > 0) and np.all(scn.snr_dl > 0)
        assert scn.snr_ul[0, 0] == pytest.approx(10 ** -0.7)

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            ScenarioParams(r_h=1.2)
        with pytest.raises(ValueError):
            ScenarioParams(dl_distance_ratio=(2.0, 2.0))
        with pytest.raises(ValueError):
            ScenarioParams(dl_distance_ratio=-1.0)

    def test_from_config(self):
        prm = ScenarioParams.from_config({"r_h": 0.3, "dl_distance_ratio": [2] * 6, "seed": 4})
        assert prm.r_h == 0.3 and prm.dl_distance_ratio == (2,) * 6


class TestConversions:
    def test_round_trip(self):
        x = np.array([-30.0, -8.6, 0.0, 7.0, 13.0, 40.0])
        np.testing.assert_allclose(linear_to_db(db_to_linear(x)), x, atol=1e-12)
        assert db_to_linear(10.0) == pytest.approx(10.0)


class TestAoas:
    def test_ranges(self):
        th, tv = draw_aoas(np.random.default_rng(1), 7)
        assert th.shape == tv.shape == (7, 7)
        assert np.all(np.abs(th) <= np.pi) and np.all(np.abs(tv) <= np.pi / 2)

    def test_mean(self):
        th, _ = draw_aoas(np.random.default_rng(2), 317)  # ~10^5 links
        assert abs(th.mean()) < 0.02

    def test_determinism(self):
        a = build_seven_cell(AntennaLayout.upa(2, 4), rng=np.random.default_rng(3))
        b = build_seven_cell(AntennaLayout.upa(2, 4), rng=np.random.default_rng(3))
        np.testing.assert_array_equal(a.theta_h, b.theta_h)
        np.testing.assert_array_equal(a.q_matrix(0), b.q_matrix(0))


class TestNetwork:
    def test_link_parameters(self):
        scn = build_seven_cell(AntennaLayout.upa(2, 4), rng=np.random.default_rng(4))
        prm = scn.link(2, 5)
        assert (prm.r_h, prm.r_v) == (0.5, 0.65)
        assert prm.theta_h == scn.theta_h[2, 5]

    def test_q_matrix_consistency(self):
        scn = build_seven_cell(AntennaLayout.ula(6), rng=np.random.default_rng(5))
        w = scn.snr_ul[1] / scn.snr_ul[1, 1]
        q = sum(w[k] * scn.covariance(1, k) for k in range(7)) + np.eye(6) / scn.snr_ul[1, 1]
        np.testing.assert_allclose(scn.q_matrix(1), q)
        np.testing.assert_allclose(scn.q_neighbors(1), q - scn.covariance(1, 1))

    def test_cached_matrices_read_only(self):
        scn = build_seven_cell(AntennaLayout.ula(4), rng=np.random.default_rng(6))
        assert scn.covariance(0, 1) is scn.covariance(0, 1)
        with pytest.raises(ValueError):
            scn.q_matrix(0)[0, 0] = 0

    def test_covariances_linearly_independent(self):
        scn = build_seven_cell(AntennaLayout.ula(32), rng=np.random.default_rng(7))
        vecs = np.array([scn.covariance(0, k).ravel() for k in range(7)])
        assert np.linalg.matrix_rank(vecs) == 7

    def test_explicit_aoas(self):
        th = np.zeros((7, 7))
        scn = build_seven_cell(AntennaLayout.ula(3), aoas=(th, th))
        np.testing.assert_allclose(scn.covariance(0, 0).imag, 0)
        with pytest.raises(ValueError):
            build_seven_cell(AntennaLayout.ula(3), aoas=(th[:3], th))
        with pytest.raises(ValueError):
            build_seven_cell(AntennaLayout.ula(3))
