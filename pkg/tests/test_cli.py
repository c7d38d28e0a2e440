import json

import numpy as np
import pytest

from subpoisson import cli, validation
from subpoisson.config import load_config, parse_config, preset_names
from subpoisson.errors import ConfigError
from subpoisson.output import load_rate_table, read_csv
from subpoisson.params import to_hz

SMALL = {
    "physical": {
        "omega_p_hz": 400e3,
        "omega_c_hz": 2e6,
        "delta_s_hz": 200e6,
        "delta_hz": 50e3,
        "n_target": 2,
    },
    "noise": {"sigma_delta_l_hz": 6e3, "nbar_initial": 3},
    "run": {
        "trajectories": 300,
        "horizon_s": 300e-6,
        "dt_out_s": 2e-6,
        "seed": 5,
        "delta_l_grid_points": 9,
    },
    "solver": {"plateau_tol": 1e-7, "max_horizon_factor": 2000.0},
}


def write(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def variant(**sections):
    doc = json.loads(json.dumps(SMALL))
    for section, values in sections.items():
        doc.setdefault(section, {}).update(values)
    return doc


class TestConfig:
    def test_presets_ship(self):
        assert {"baseline", "target8", "target8_nbar40", "sweep_target4", "sweep_target8", "sweep_target20"} <= set(preset_names())

    @pytest.mark.parametrize("name", ["baseline", "target8", "sweep_target4", "sweep_target8", "sweep_target20"])
    def test_presets_resolve(self, name):
        cfg = load_config(name)
        assert cfg.params.omega_s > 0 and cfg.params.delta_p < 0

    def test_target8_values(self):
        cfg = load_config("target8")
        assert cfg.run.trajectories == 20000
        assert cfg.run.noise.nbar_initial == 26
        assert to_hz(cfg.run.noise.sigma_delta_l) == pytest.approx(6e3)

    def test_unknown_key_is_named(self):
        with pytest.raises(ConfigError, match="'omega_q_hz'"):
            parse_config(variant(physical={"omega_q_hz": 1.0}))
        with pytest.raises(ConfigError, match="'extras'"):
            parse_config({**SMALL, "extras": {}})

    def test_missing_and_bad_values(self):
        doc = variant()
        del doc["physical"]["delta_hz"]
        with pytest.raises(ConfigError, match="omega_s_hz or delta_hz"):
            parse_config(doc)
        with pytest.raises(ConfigError, match="must be a number"):
            parse_config(variant(run={"trajectories": "many"}))
        with pytest.raises(ConfigError, match="integer"):
            parse_config(variant(run={"trajectories": 2.5}))
        with pytest.raises(ConfigError):
            parse_config(variant(physical={"omega_c_hz": 500e3}))

    def test_inconsistent_dressing(self):
        with pytest.raises(ConfigError, match="disagree"):
            parse_config(variant(physical={"omega_s_hz": 60e6}))

    def test_probe_override(self):
        cfg = parse_config(variant(physical={"delta_p_hz_override": -2e6}))
        assert to_hz(cfg.params.delta_p) == pytest.approx(-2e6)

    def test_round_trip(self):
        cfg = parse_config(SMALL)
        again = parse_config(cfg.resolved())
        assert again.sha256() == cfg.sha256()
        assert again.params == cfg.params

    def test_seed_override(self):
        assert parse_config(SMALL, seed=99).run.seed == 99

    def test_missing_file(self):
        with pytest.raises(ConfigError, match="no config file or preset"):
            load_config("does-not-exist")


class TestCommands:
    def test_loss_rates(self, tmp_path, capsys):
        out = tmp_path / "lr"
        code = cli.main(["loss-rates", "--config", "baseline", "--n-min", "6", "--n-max", "10", "--out", str(out)])
        assert code == 0
        cols, rows = read_csv(out / "loss_rates.csv")
        assert cols[:3] == ["n", "gamma_per_s", "bloch_gamma_per_s"]
        by_n = {int(r[0]): r for r in rows}
        assert float(by_n[8][2]) == 0.0
        summary = json.loads((out / "loss_rates_summary.json").read_text())
        assert summary["argmin_n"] == 8
        assert "argmin N = 8" in capsys.readouterr().out

    def test_dark_probe_gives_zero_column(self, tmp_path):
        path = write(tmp_path, variant(physical={"omega_p_hz": 0.0}))
        assert cli.main(["loss-rates", "--config", path, "--n-max", "4", "--out", str(tmp_path)]) == 0
        _, rows = read_csv(tmp_path / "loss_rates.csv")
        assert all(float(r[1]) == 0.0 for r in rows)

    def test_header_and_precision(self, tmp_path):
        cli.main(["loss-rates", "--config", "baseline", "--n-max", "2", "--out", str(tmp_path)])
        first = (tmp_path / "loss_rates.csv").read_text().splitlines()[0]
        assert first.startswith("# subpoisson 0.1.0 config_sha256=")
        _, rows = read_csv(tmp_path / "loss_rates.csv")
        assert len(rows[0][1].replace(".", "").replace("e", " ").split()[0].lstrip("0")) <= 9

    def test_config_error_exit(self, tmp_path, capsys):
        path = write(tmp_path, variant(noise={"sigma": 1}))
        assert cli.main(["evolve", "--config", path, "--out", str(tmp_path)]) == 2
        assert "'sigma'" in capsys.readouterr().err

    def test_solver_error_exit(self, tmp_path):
        path = write(tmp_path, variant(solver={"plateau_tol": 1e-12, "max_horizon_factor": 10.0}))
        assert cli.main(["loss-rates", "--config", path, "--n-max", "2", "--out", str(tmp_path)]) == 3

    def test_evolve_is_reproducible(self, tmp_path):
        path = write(tmp_path, SMALL)
        a, b = tmp_path / "a", tmp_path / "b"
        assert cli.main(["evolve", "--config", path, "--out", str(a), "--trajectories-csv"]) == 0
        assert cli.main(["evolve", "--config", path, "--out", str(b), "--threads", "2", "--trajectories-csv"]) == 0
        for name in ("evolution.csv", "histogram.csv", "trajectories.csv", "summary.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()
        summary = json.loads((a / "summary.json").read_text())
        assert summary["config"]["physical"]["omega_s_hz"] > 0
        assert parse_config(summary["config"]).sha256() == summary["config_sha256"]
        cols, rows = read_csv(a / "trajectories.csv")
        assert cols == ["trajectory_id", "event_index", "t_s", "n_after"]

        # reusing the stored table gives the same series
        c = tmp_path / "c"
        assert cli.main(["evolve", "--config", path, "--out", str(c), "--rate-table", str(a / "rate_table.json")]) == 0
        assert (a / "evolution.csv").read_bytes() == (c / "evolution.csv").read_bytes()

        # a different seed gives a different series
        d = tmp_path / "d"
        assert cli.main(["evolve", "--config", path, "--out", str(d), "--seed", "6"]) == 0
        assert (a / "evolution.csv").read_bytes() != (d / "evolution.csv").read_bytes()

    def test_rate_table_must_match_params(self, tmp_path):
        path = write(tmp_path, SMALL)
        cli.main(["evolve", "--config", path, "--out", str(tmp_path / "a")])
        other = write(tmp_path, variant(physical={"omega_p_hz": 300e3}), "other.json")
        table = str(tmp_path / "a" / "rate_table.json")
        assert cli.main(["evolve", "--config", other, "--out", str(tmp_path), "--rate-table", table]) == 2
        loaded = load_rate_table(table)
        assert loaded.n_max >= 2

    def test_single_sigma_sweep_matches_evolve(self, tmp_path):
        path = write(tmp_path, SMALL)
        cli.main(["evolve", "--config", path, "--out", str(tmp_path / "e")])
        assert cli.main(["sweep", "--config", path, "--sigmas-hz", "6000", "--out", str(tmp_path / "s")]) == 0
        summary = json.loads((tmp_path / "e" / "summary.json").read_text())
        sweep = json.loads((tmp_path / "s" / "sweep_summary.json").read_text())["sweep"][0]
        assert sweep["min_var"] == summary["min_var"]
        assert sweep["t_min_s"] == summary["t_min_s"]

    def test_sweep_needs_sigmas(self, tmp_path):
        path = write(tmp_path, SMALL)
        assert cli.main(["sweep", "--config", path, "--out", str(tmp_path)]) == 2

    def test_horizon_too_short_exit(self, tmp_path):
        path = write(tmp_path, variant(run={"horizon_s": 4e-6, "dt_out_s": 1e-6}))
        assert cli.main(["evolve", "--config", path, "--out", str(tmp_path)]) == 3
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["stabilization_time_s"] is None

    def test_validate(self, tmp_path):
        assert cli.main(["validate", "--quick", "--out", str(tmp_path)]) == 0
        report = json.loads((tmp_path / "validation.json").read_text())
        assert report["passed"]
        names = {c["name"] for c in report["checks"]}
        assert {"oracle_equivalence", "stark_expansion", "frame_equivalence", "dressing_table"} <= names
        row = next(c for c in report["checks"] if c["name"] == "dressing_table")
        assert row["detail"]["n_target_8"]["delta_p_hz"] == pytest.approx(-2.2e6, rel=0.05)

    def test_validate_failure_exit(self, tmp_path, monkeypatch):
        monkeypatch.setattr(validation, "run_all", lambda **kw: {"passed": False, "checks": []})
        assert cli.main(["validate", "--out", str(tmp_path)]) == 4

    def test_dump_basis(self, tmp_path):
        assert cli.main(["dump-basis", "--n", "3", "--out", str(tmp_path)]) == 0
        lines = (tmp_path / "basis.csv").read_text().splitlines()
        assert len(lines) == 1 + 16
        assert (tmp_path / "sigma_eg.csv").exists()


def test_perturbed_operator_breaks_equivalence():
    def nudge(h):
        h[1, 0] += 1e-6 * np.abs(h).max()
        return h

    assert not validation.oracle_equivalence(draws=2, perturb=nudge).passed
    assert validation.oracle_equivalence(draws=2).passed
