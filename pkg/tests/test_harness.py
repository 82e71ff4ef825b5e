import hashlib
import io
import json
import math

import numpy as np
import pytest

from covsim import cli
from covsim.geometry import AntennaLayout
from covsim.harness import (CSV_COLUMNS, ConfigError, Row, RunConfig, emit_csv, kappa_point,
                            read_csv, run_experiment, simulate_mse_point, simulate_se_point)


def small(experiment, **kw):
    cfg = dict(layout="ula", nt=8, trials=20, drops=2, seed=7)
    if experiment == "mse-sweep":
        cfg["np"] = [50, 200]
    else:
        cfg["np"] = 200
    cfg.update(kw)
    return RunConfig.from_dict(experiment, cfg)


def digest(rows):
    buf = io.StringIO()
    emit_csv(rows, buf)
    return hashlib.sha256(buf.getvalue().encode()).hexdigest()


class TestConfig:
    def test_defaults(self):
        cfg = RunConfig.from_dict("mse-sweep")
        assert cfg.trials == 500 and cfg.drops == 10
        assert cfg.np_grid == (100, 250, 500, 1000, 3000, 6000)
        assert cfg.nt == (128,)
        assert [lay.label for lay in cfg.iter_layouts()] == ["ula", "upa8x16"]
        se = RunConfig.from_dict("se-sweep")
        assert se.nt == (2, 4, 8, 16, 32, 64, 128, 256) and se.np_grid == (3000,)

    def test_layout_forms(self):
        cfg = RunConfig.from_dict("se-sweep", {"layout": {"kind": "upa", "nt": 24, "m": 4}})
        assert [l.label for l in cfg.iter_layouts()] == ["upa4x6"]
        cfg = RunConfig.from_dict("se-sweep", {"layout": "upa", "nt": [8, 32], "m": 2})
        assert [l.label for l in cfg.iter_layouts()] == ["upa2x4", "upa2x16"]
        cfg = RunConfig.from_dict("mse-sweep", {"layouts": [
            {"kind": "generic", "coords": [[0, 0], [1, 0], [3, 0]]}]})
        assert [l.n_t for l in cfg.iter_layouts()] == [3]

    @pytest.mark.parametrize("bad", [
        {"trials": 1},
        {"drops": 0},
        {"np": []},
        {"nt": [0]},
        {"estimators": ["ala", "lw"]},
        {"layout": {"kind": "upa", "nt": 10, "m": 3}},
        {"layout": "hex"},
        {"bogus": 1},
        {"seed": -1},
        {"experiment": "se-sweep"},
        {"r_h": 2.0},
    ])
    def test_rejected(self, bad):
        with pytest.raises(ConfigError):
            RunConfig.from_dict("mse-sweep", bad)

    def test_se_needs_three_trials(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict("se-sweep", {"trials": 2})
        with pytest.raises(ConfigError):
            RunConfig.from_dict("nope")

    def test_overrides_win(self):
        cfg = RunConfig.from_dict("mse-sweep", {"seed": 1, "trials": 9}, seed=5, trials=None)
        assert cfg.seed == 5 and cfg.trials == 9
        cfg = RunConfig.from_dict("mse-sweep", {}, estimators="ideal, ala")
        assert [e.value for e in cfg.estimators] == ["ideal", "ala"]


class TestCsv:
    def test_header_only(self, tmp_path):
        path = tmp_path / "empty.csv"
        emit_csv([], path)
        assert path.read_text() == ",".join(CSV_COLUMNS) + "\n"
        assert read_csv(path) == []

    def test_round_trip(self, tmp_path):
        rows = [Row("mse-sweep", "ula", 8, 100, "ala", "mse", 0.1 + 0.2, 1e-17, 10, 0, 3),
                Row("se-sweep", "upa2x4", 8, 3000, "viaq", "se_avg", float("nan"), 0.0, 0, 5, 3)]
        path = tmp_path / "rows.csv"
        emit_csv(rows, path)
        back = read_csv(path)
        assert back[0] == rows[0]
        assert math.isnan(back[1].value) and back[1].failures == 5

    def test_bad_header(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError):
            read_csv(path)


class TestMseSweep:
    def test_rows_and_accounting(self):
        cfg = small("mse-sweep", estimators=["ideal", "sample", "viaq", "ala"])
        rows = run_experiment(cfg, log=None)
        mse = [r for r in rows if r.metric == "mse"]
        assert len(mse) == 2 * 4
        for r in mse:
            assert r.trials + r.failures == cfg.trials * cfg.drops
            assert math.isfinite(r.value) or r.trials == 0
        assert sum(r.metric == "mse_oracle" for r in rows) == 2

    def test_sample_fails_below_rank(self):
        cfg = RunConfig.from_dict("mse-sweep", dict(layout="ula", nt=16, np=8, trials=10,
                                                    drops=1, estimators=["sample", "ideal"]))
        pt = simulate_mse_point(cfg, AntennaLayout.ula(16), 8)
        assert pt.failures("sample") == 10 and pt.failures("ideal") == 0
        row = {r.estimator: r for r in pt.rows() if r.metric == "mse"}["sample"]
        assert row.trials == 0 and math.isnan(row.value)

    def test_reproducible_bytes(self):
        cfg = small("mse-sweep")
        assert digest(run_experiment(cfg, log=None)) == digest(run_experiment(cfg, log=None))

    def test_seed_changes_output(self):
        a = run_experiment(small("mse-sweep"), log=None)
        b = run_experiment(small("mse-sweep", seed=8), log=None)
        assert digest(a) != digest(b)

    def test_threads_agree(self):
        one = run_experiment(small("mse-sweep"), log=None)
        three = run_experiment(small("mse-sweep", threads=3), log=None)
        for a, b in zip(one, three):
            assert a.value == pytest.approx(b.value, rel=1e-9)
            assert (a.trials, a.failures) == (b.trials, b.failures)

    def test_ideal_flat_across_np(self):
        rows = run_experiment(small("mse-sweep", estimators=["ideal"]), log=None)
        vals = [r.value for r in rows if r.metric == "mse"]
        assert vals[0] == vals[1]

    def test_stderr_shrinks(self):
        def se(trials):
            cfg = RunConfig.from_dict("mse-sweep", dict(layout="ula", nt=8, np=100,
                                                        trials=trials, drops=1, seed=1,
                                                        estimators=["ala"]))
            return simulate_mse_point(cfg, AntennaLayout.ula(8), 100).summary("ala")[1]

        ratio = se(100) / se(400)
        assert 2 / 1.5 < ratio < 2 * 1.5

    def test_paired_gap_matches_means(self):
        cfg = small("mse-sweep")
        pt = simulate_mse_point(cfg, AntennaLayout.ula(8), 200)
        gap, se = pt.paired_gap("viaq", "ideal")
        assert gap == pytest.approx(pt.summary("viaq")[0] - pt.summary("ideal")[0])
        assert se > 0


class TestSeSweep:
    def test_rows(self):
        cfg = small("se-sweep")
        rows = run_experiment(cfg, log=None)
        assert {(r.estimator, r.metric) for r in rows} == {
            (e, m) for e in ("ideal", "viaq", "ala") for m in ("se_center", "se_avg")}
        for r in rows:
            assert r.trials + r.failures == cfg.trials * cfg.drops
            assert r.value > 0 and r.stderr > 0

    def test_threads_agree(self):
        one = run_experiment(small("se-sweep", trials=8), log=None)
        two = run_experiment(small("se-sweep", trials=8, threads=2), log=None)
        for a, b in zip(one, two):
            assert a.value == pytest.approx(b.value, rel=1e-9)

    def test_reproducible_bytes(self):
        cfg = small("se-sweep", trials=6, drops=1)
        assert digest(run_experiment(cfg, log=None)) == digest(run_experiment(cfg, log=None))

    def test_paired_gap_consistent(self):
        cfg = small("se-sweep", trials=10)
        pt = simulate_se_point(cfg, AntennaLayout.ula(8), 200)
        gap, _ = pt.paired_gap("ideal", "viaq", "se_avg")
        assert gap == pytest.approx(pt.summary("ideal", "se_avg")[0]
                                    - pt.summary("viaq", "se_avg")[0])
        assert len(pt.per_drop("ala")) == cfg.drops


class TestKappa:
    def test_rows(self):
        cfg = RunConfig.from_dict("kappa-table", dict(layout="ula", nt=[4, 8], drops=2,
                                                      kappa_calibration=3, seed=1))
        rows = run_experiment(cfg, log=None)
        assert len(rows) == 4
        assert all(0.0 <= r.value <= 1.0 and r.trials == 6 for r in rows)

    def test_point(self):
        cfg = RunConfig.from_dict("kappa-table", dict(drops=3, kappa_calibration=2))
        out = kappa_point(cfg, AntennaLayout.ula(16), 3000)
        assert set(out) == {"kappa_q", "kappa_r"}
        assert len(out["kappa_q"][2]) == 3


class TestCli:
    def test_stdout_and_file(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(dict(layout="ula", nt=4, np=50, trials=5, drops=1)))
        assert cli.main(["mse-sweep", "--config", str(cfg_path), "--seed", "3"]) == 0
        out, err = capsys.readouterr()
        assert out.splitlines()[0] == ",".join(CSV_COLUMNS)
        assert "[mse-sweep]" in err
        dest = tmp_path / "out.csv"
        assert cli.main(["mse-sweep", "--config", str(cfg_path), "--seed", "3",
                         "--out", str(dest), "--quiet"]) == 0
        assert dest.read_text() == out
        assert capsys.readouterr().err == ""

    def test_overrides(self, tmp_path):
        dest = tmp_path / "k.csv"
        assert cli.main(["kappa-table", "--drops", "1", "--trials", "4", "--quiet",
                         "--out", str(dest)]) == 0
        rows = read_csv(dest)
        assert len(rows) == 2 * 8 * 2

    def test_errors(self, tmp_path, capsys):
        assert cli.main(["mse-sweep", "--config", str(tmp_path / "missing.json")]) == 2
        bad = tmp_path / "bad.json"
        bad.write_text('{"trials": 1}')
        assert cli.main(["mse-sweep", "--config", str(bad)]) == 2
        bad.write_text("[1, 2]")
        assert cli.main(["mse-sweep", "--config", str(bad)]) == 2
        bad.write_text("{not json")
        assert cli.main(["mse-sweep", "--config", str(bad)]) == 2
        assert "covsim:" in capsys.readouterr().err
        with pytest.raises(SystemExit):
            cli.main(["fig7"])

    def test_unwritable_output(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(dict(layout="ula", nt=4, np=50, trials=3, drops=1)))
        assert cli.main(["mse-sweep", "--config", str(cfg_path), "--quiet",
                         "--out", str(tmp_path / "no" / "dir.csv")]) == 1
