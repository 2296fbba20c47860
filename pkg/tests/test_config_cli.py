"""Config round-trips and CLI behavior (exit codes, outputs, verify suites)."""

import csv
import json

import numpy as np
import pytest

import twoarm.designs
from twoarm import verify
from twoarm.cli import main
from twoarm.config import (
    ConfigError,
    design_from_dict,
    design_to_dict,
    load_json,
    model_from_dict,
    model_to_dict,
    save_json,
    sim_config_from_dict,
    sim_config_to_dict,
)
from twoarm.responses import CovariateSpec, ResponseModel, default_model
from twoarm.simulate import SimConfig


class TestConfigRoundTrips:
    def test_design_dict(self):
        data = design_to_dict("block", 48, 48, B=8, seed=1)
        assert design_from_dict(data) == {"family": "block", "n": 48, "n_T": 48, "B": 8, "seed": 1}
        with pytest.raises(ConfigError):
            design_from_dict({"family": "crd", "n": 4, "n_T": 2, "color": "red"})
        with pytest.raises(ConfigError):
            design_from_dict({"family": "crd", "n": 4})

    def test_model_dict_round_trip(self):
        model = default_model("survival", 2)
        cov = CovariateSpec("uniform", 1.0, 2, 48)
        data = model_to_dict(model, cov)
        assert data["k"] == 4.0 and "sigma" not in data
        back, cov_back = model_from_dict(data)
        assert back.kind == "survival" and back.dispersion == 4.0
        assert np.allclose(back.beta, model.beta)
        assert cov_back.distribution == "uniform"

    def test_model_dict_wrong_dispersion_key(self):
        with pytest.raises(ConfigError):
            model_from_dict({"kind": "count", "sigma": 1.0})

    def test_sim_config_round_trip(self):
        config = SimConfig(kinds=("count",), p_list=(1,), B_list=(1, 2), N_y=2000)
        data = sim_config_to_dict(config)
        assert sim_config_from_dict(data) == config

    def test_sim_overrides_win(self):
        data = {"N_y": 5000, "kinds": ["count"], "p_list": [1], "B_list": [1, 2]}
        config = sim_config_from_dict(data, {"N_y": 2000, "seed": 9})
        assert config.N_y == 2000 and config.seed == 9

    def test_unknown_sim_key(self):
        with pytest.raises(ConfigError):
            sim_config_from_dict({"draws": 100})

    def test_json_io(self, tmp_path):
        path = tmp_path / "config.json"
        save_json({"n": 4}, path)
        assert load_json(path) == {"n": 4}
        bad = tmp_path / "bad.json"
        bad.write_text("{nope")
        with pytest.raises(ConfigError):
            load_json(bad)


class TestCliDesign:
    def test_crd_enumerate(self, capsys):
        assert main(["design", "--family", "crd", "--n", "3", "--nT", "1",
                     "--enumerate"]) == 0
        out = capsys.readouterr().out
        assert "support: 6 allocations" in out

    def test_block_structure_size(self, capsys):
        assert main(["design", "--family", "block", "--n", "48", "--nT", "48",
                     "--B", "8"]) == 0
        assert "blocks of size 12" in capsys.readouterr().out

    def test_invalid_block_count(self, capsys):
        assert main(["design", "--family", "block", "--n", "48", "--nT", "48",
                     "--B", "7"]) == 2

    def test_usage_error_exit_code(self):
        with pytest.raises(SystemExit) as err:
            main(["design", "--family", "hexagon"])
        assert err.value.code == 1

    def test_allocation_csv_export(self, tmp_path, capsys):
        out = tmp_path / "allocs.csv"
        assert main(["design", "--family", "crd", "--n", "4", "--nT", "2",
                     "--samples", "5", "--out", str(out)]) == 0
        rows = list(csv.reader(out.open()))
        assert len(rows) == 5
        assert all(set(map(int, row)) <= {1, -1} for row in rows)
        assert all(sum(map(int, row)) == 2 * 2 - 8 for row in rows)

    def test_pb_family(self, capsys):
        assert main(["design", "--family", "pb", "--n", "6", "--nT", "6"]) == 0
        assert "balance" in capsys.readouterr().out


class TestCliCriteria:
    def test_text_table(self, capsys):
        assert main(["criteria", "--kind", "continuous", "--p", "1", "--n", "4",
                     "--B", "1,2,4"]) == 0
        out = capsys.readouterr().out
        assert "worst_case" in out and len(out.splitlines()) == 4

    def test_csv_output(self, tmp_path):
        path = tmp_path / "crit.csv"
        assert main(["criteria", "--kind", "count", "--n", "6", "--B", "1,2",
                     "--format", "csv", "--out", str(path)]) == 0
        rows = list(csv.reader(path.open()))
        assert rows[0] == ["B", "B1", "B2", "S", "R", "mean_mse", "var_mse", "Q_q", "worst_case"]
        assert len(rows) == 3


class TestCliSimulate:
    def test_smoke_grid_with_config(self, tmp_path, capsys):
        config_path = tmp_path / "sim.json"
        config_path.write_text(json.dumps({
            "kinds": ["continuous"], "p_list": [1], "B_list": [1, 2],
            "N_y": 1000, "seed": 5,
        }))
        out = tmp_path / "rows.csv"
        assert main(["simulate", "--config", str(config_path), "--out", str(out),
                     "--threads", "1"]) == 0
        text = capsys.readouterr().out
        assert "argmin-B" in text
        assert out.exists()
        sidecar = tmp_path / "rows.csv.config.json"
        assert sidecar.exists()
        meta = json.loads(sidecar.read_text())
        assert meta["covariates"] == "uniform"
        assert meta["covariate_params"]["incidence"] == 3.0

    def test_validation_exit(self, tmp_path):
        config_path = tmp_path / "sim.json"
        config_path.write_text(json.dumps({"B_list": [5]}))
        assert main(["simulate", "--config", str(config_path)]) == 2


class TestCliVerify:
    def test_single_suite(self, capsys):
        assert main(["verify", "--suite", "closed_forms"]) == 0
        assert "[ok] closed_forms" in capsys.readouterr().out

    def test_corrupted_constant_fails(self, monkeypatch, capsys):
        """Mutation check: a wrong closed-form constant must be caught."""
        real = twoarm.designs.cov_crd_closed

        def corrupted(n, n_T):
            cov = real(n, n_T)
            return twoarm.designs.CovMatrix(cov.dense * 1.001, n, n_T, cov.structure)

        monkeypatch.setattr(twoarm.designs, "cov_crd_closed", corrupted)
        result = verify.suite_closed_forms()
        assert not result.passed
        assert "covariance mismatch" in result.detail

    def test_unknown_suite_rejected(self):
        with pytest.raises(SystemExit) as err:
            main(["verify", "--suite", "nonsense"])
        assert err.value.code == 1
