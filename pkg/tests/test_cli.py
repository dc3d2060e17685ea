"""
Tests for the command line interface.
"""
import json

import numpy as np
import pytest

from app import dispatch, parse_overrides, parse_vector
from config import settings
from model.lcs import Controller, LCSModel
from output.files import read_gains, read_gains_file, read_model, read_trajectory_csv, write_gains, write_model


def stable_model():
    """dx/dt = -x with one contact that never touches the state."""
    return LCSModel(
        A_bar=-np.eye(2),
        B=np.zeros((2, 1)),
        D_bar=np.zeros((2, 1)),
        a=np.zeros(2),
        E_bar=np.zeros((1, 2)),
        F_bar=[[1.0]],
        H=np.zeros((1, 1)),
        c=[1.0],
        name="stable"
    )


@pytest.fixture
def stable_files(tmp_path):
    """Model and zero-gain files for the stable toy system."""
    model_path = write_model(stable_model(), tmp_path / "inputs" / "stable.model.json")
    ctrl = Controller(K=np.zeros((1, 2)), L_tilde=[[0.0]], W=[[1.0]])
    gains_path = write_gains(ctrl, tmp_path / "inputs" / "stable.gains.json", model="stable")
    return model_path, gains_path


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


class TestParsing:
    """Tests for argument helpers."""

    def test_parse_vector(self):
        """Test comma-separated floats, including negatives."""
        assert parse_vector("0.05,0,-1,0.2") == [0.05, 0.0, -1.0, 0.2]

    def test_parse_overrides(self):
        """Test KEY=VALUE pairs with case-insensitive keys."""
        assert parse_overrides(["FEAS_TOL=1e-6", "seed = 3"]) == {"feas_tol": "1e-6", "seed": "3"}

    def test_parse_overrides_rejects_bare_key(self):
        """Test that a pair without '=' is rejected."""
        with pytest.raises(ValueError):
            parse_overrides(["feas_tol"])


class TestUsageErrors:
    """Tests for exit code 2."""

    def test_unknown_command(self):
        """Test that an unknown subcommand is a usage error."""
        assert dispatch(["teleport"]) == 2

    def test_missing_required_option(self):
        """Test that a missing --model is a usage error."""
        assert dispatch(["verify", "--gains", "g.json"]) == 2

    def test_unknown_setting(self, tmp_path):
        """Test that --set with an unknown key is rejected."""
        assert dispatch(["-o", str(tmp_path), "--set", "warp_factor=9", "export-example", "cartpole"]) == 2

    def test_invalid_setting_value(self, tmp_path):
        """Test that --set with an out-of-range value is rejected."""
        assert dispatch(["-o", str(tmp_path), "--set", "sim_dt=-1", "export-example", "cartpole"]) == 2

    def test_missing_input_file(self, tmp_path):
        """Test that a missing model file gives exit code 2 and a manifest."""
        out = tmp_path / "out"
        code = dispatch([
            "-o", str(out), "verify",
            "--model", str(tmp_path / "nope.json"),
            "--gains", str(tmp_path / "nope.gains.json")
        ])
        assert code == 2
        assert manifest(out)["exit_code"] == 2

    def test_overrides_do_not_leak(self, tmp_path):
        """Test that --set and --seed only apply to their own run."""
        seed, feas_tol = settings.seed, settings.feas_tol
        dispatch(["-o", str(tmp_path), "--seed", "123", "--set", "feas_tol=1e-5", "export-example", "box_friction"])
        assert settings.seed == seed
        assert settings.feas_tol == feas_tol


class TestExportExample:
    """Tests for export-example."""

    def test_cartpole(self, tmp_path):
        """Test that the model and published gains round trip through their files."""
        assert dispatch(["-o", str(tmp_path), "export-example", "cartpole"]) == 0
        model = read_model(tmp_path / "cartpole.model.json")
        ctrl, kappa = read_gains(tmp_path / "cartpole.gains.json")
        assert model.n_x == 4 and model.m == 2
        np.testing.assert_allclose(ctrl.K, [[3.69, -46.7, 3.39, -5.71]])
        assert kappa is None

        doc = manifest(tmp_path)
        assert doc["command"] == "export-example"
        assert doc["exit_code"] == 0
        assert len(doc["outputs"]) == 2
        assert "numpy" in doc["versions"]

    def test_filtered_example_keeps_kappa(self, tmp_path):
        """Test that the box example stores its filter bandwidth."""
        assert dispatch(["-o", str(tmp_path), "export-example", "box_friction"]) == 0
        _, kappa = read_gains(tmp_path / "box_friction.gains.json")
        assert kappa == 100.0
        gains = read_gains_file(tmp_path / "box_friction.gains.json")
        assert gains.gamma3 == 0.0
        assert gains.certificate_W is None
        assert gains.pinned == []

    def test_table_keeps_certificate_map(self, tmp_path):
        """Test that the table gains carry the total-force map and the pinned contacts."""
        assert dispatch(["-o", str(tmp_path), "export-example", "table3"]) == 0
        gains = read_gains_file(tmp_path / "table3.gains.json")
        assert gains.certificate_W == [[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]]
        np.testing.assert_array_equal(gains.certificate_map(), [[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]])
        assert gains.pinned == [3, 4, 5]
        assert gains.W == [[0.0, 1.0, -1.0, 0.0, 0.0, 0.0]]


class TestSimulate:
    """Tests for simulate."""

    def test_equilibrium_stays_at_zero(self, tmp_path):
        """Test that the cart-pole at rest with published gains never moves."""
        dispatch(["-o", str(tmp_path), "export-example", "cartpole"])
        out = tmp_path / "sim"
        code = dispatch([
            "-o", str(out), "simulate",
            "--model", str(tmp_path / "cartpole.model.json"),
            "--gains", str(tmp_path / "cartpole.gains.json"),
            "--x0", "0,0,0,0",
            "--dt", "0.01",
            "--T", "0.1"
        ])
        assert code == 0
        traj = read_trajectory_csv(out / "trajectory.csv")
        assert len(traj) > 1
        np.testing.assert_array_equal(traj.states, 0.0)
        np.testing.assert_array_equal(traj.inputs, 0.0)

        doc = manifest(out)
        assert set(doc["inputs"]) == {str(tmp_path / "cartpole.model.json"), str(tmp_path / "cartpole.gains.json")}
        assert all(len(h) == 64 for h in doc["inputs"].values())

    def test_wrong_state_length(self, stable_files, tmp_path):
        """Test that an initial state of the wrong size is rejected."""
        model_path, gains_path = stable_files
        code = dispatch([
            "-o", str(tmp_path / "sim"), "simulate",
            "--model", str(model_path), "--gains", str(gains_path),
            "--x0", "1,2,3", "--dt", "0.01", "--T", "0.1"
        ])
        assert code == 2


class TestVerify:
    """Tests for verify."""

    def test_stable_model(self, stable_files, tmp_path, capsys):
        """Test that the stable toy system is certified and the certificate written."""
        model_path, gains_path = stable_files
        out = tmp_path / "verify"
        code = dispatch(["-o", str(out), "verify", "--model", str(model_path), "--gains", str(gains_path)])
        assert code == 0
        assert "feasible, margin=" in capsys.readouterr().out
        cert = json.loads((out / "certificate.json").read_text())
        assert cert["status"] == "feasible"
        assert cert["candidate"] is not None

    def test_box_uses_rate_from_gains_file(self, tmp_path, capsys):
        """Test that the exported box gains verify with the file's gamma3 = 0."""
        dispatch(["-o", str(tmp_path), "export-example", "box_friction"])
        capsys.readouterr()
        out = tmp_path / "verify"
        code = dispatch([
            "-o", str(out), "verify",
            "--model", str(tmp_path / "box_friction.model.json"),
            "--gains", str(tmp_path / "box_friction.gains.json")
        ])
        assert code == 0
        assert capsys.readouterr().out.startswith("feasible")
        cert = json.loads((out / "certificate.json").read_text())
        assert cert["provenance"] == "filtered"


class TestFindW:
    """Tests for find-w."""

    def test_scalar_contact(self, tmp_path):
        """Test that a single positive-definite contact gets one row."""
        model = LCSModel(
            A_bar=[[1.0]], B=[[1.0]], D_bar=[[0.0]], a=[0.0],
            E_bar=[[0.0]], F_bar=[[1.0]], H=[[0.0]], c=[1.0],
            name="scalar"
        )
        model_path = write_model(model, tmp_path / "scalar.model.json")
        out = tmp_path / "findw"
        assert dispatch(["-o", str(out), "--seed", "0", "find-w", "--model", str(model_path)]) == 0
        report = json.loads((out / "find_w.json").read_text())
        assert len(report["W"]) == 1
        assert len(report["etas"]) == len(report["objectives"])
        assert report["seed"] == 0
        assert not report["oracle_failed"]


class TestSynthesize:
    """Tests for synthesize."""

    def test_lqr_start(self, tmp_path):
        """Test that synthesis from LQR writes certified gains."""
        model = LCSModel(
            A_bar=[[1.0]], B=[[1.0]], D_bar=[[0.0]], a=[0.0],
            E_bar=[[0.0]], F_bar=[[1.0]], H=[[0.0]], c=[1.0],
            name="scalar"
        )
        model_path = write_model(model, tmp_path / "scalar.model.json")
        config_path = tmp_path / "synth.json"
        config_path.write_text(json.dumps({"init": "lqr", "W": [[1.0]], "validation_trials": 2}))
        out = tmp_path / "synth"
        code = dispatch(["-o", str(out), "synthesize", "--model", str(model_path), "--config", str(config_path)])
        assert code == 0
        ctrl, _ = read_gains(out / "gains.json")
        assert ctrl.K[0, 0] == pytest.approx(-(1.0 + np.sqrt(101.0)))
        assert json.loads((out / "certificate.json").read_text())["status"] == "feasible"

    def test_unknown_config_key(self, tmp_path):
        """Test that a misspelled configuration key is rejected."""
        dispatch(["-o", str(tmp_path), "export-example", "cartpole"])
        config_path = tmp_path / "synth.json"
        config_path.write_text(json.dumps({"inti": "lqr"}))
        code = dispatch([
            "-o", str(tmp_path / "synth"), "synthesize",
            "--model", str(tmp_path / "cartpole.model.json"), "--config", str(config_path)
        ])
        assert code == 2


class TestBench:
    """Tests for bench."""

    def test_small_run(self, tmp_path):
        """Test that a short bench run writes its summary, table and trial CSV."""
        out = tmp_path / "bench"
        code = dispatch([
            "-o", str(out),
            "bench", "--example", "box_friction", "--trials", "2", "--workers", "1", "--seed", "0"
        ])
        assert code == 0
        summary = json.loads((out / "bench.json").read_text())
        assert summary["trials"] == 2
        assert len(summary["records"]) == 2
        assert (out / "bench.md").read_text().startswith("#")
        assert len((out / "trials.csv").read_text().strip().splitlines()) == 3
        assert manifest(out)["seeds"] == {"seed": 0}

    def test_file_controller_needs_gains(self, tmp_path):
        """Test that --controller file without --gains is rejected."""
        code = dispatch(["-o", str(tmp_path), "bench", "--example", "cartpole", "--controller", "file", "--trials", "1"])
        assert code == 2


if __name__ == '__main__':
    pytest.main([__file__, '-v'])
