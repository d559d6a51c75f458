"""
Tests for the command-line front door.
"""

import json

import pytest

from mfront import main
from mfront.core.store import read_csv
from mfront.middleware.context import get_run_id, run_context


def write_config(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


def test_steady_smoke(tmp_path, config_payload, capsys):
    out = tmp_path / "run"
    code = main(["steady", "--config", write_config(tmp_path, config_payload), "--out", str(out), "--jobs", "1"])
    assert code == 0
    assert "kappa=" in capsys.readouterr().out
    profile = read_csv(out / "profile_exact_eps0.1.csv")
    assert list(profile) == ["x", "U", "dU_dx"]
    assert len(profile["x"]) == 1001
    metadata = json.loads((out / "metadata.json").read_text(encoding="utf-8"))
    assert metadata["command"] == "steady"
    assert metadata["run_id"]
    assert len(metadata["points"]) == 1
    assert metadata["points"][0]["metrics"]["kappa"] == pytest.approx(1.0000907, rel=1e-6)


def test_malformed_config_names_the_field(tmp_path, config_payload, capsys):
    config_payload["problem"]["colour"] = "red"
    code = main(["steady", "--config", write_config(tmp_path, config_payload), "--out", str(tmp_path / "run")])
    assert code == 2
    assert "problem.colour" in capsys.readouterr().err
    assert not (tmp_path / "run").exists()


def test_kind_mismatch(tmp_path, config_payload, capsys):
    code = main(["spectrum", "--config", write_config(tmp_path, config_payload), "--out", str(tmp_path / "run")])
    assert code == 2
    assert "experiment.kind" in capsys.readouterr().err


def test_missing_config(tmp_path):
    assert main(["steady", "--config", str(tmp_path / "absent.json")]) == 2


def test_failed_run_keeps_partial_outputs(tmp_path, config_payload):
    config_payload["experiment"] = {"kind": "spectrum", "xi": 0.99, "K": 2}
    path = write_config(tmp_path, config_payload)
    out = tmp_path / "run"
    assert main(["spectrum", "--config", path, "--out", str(out), "--jobs", "1"]) == 2
    partial = tmp_path / "run_partial"
    error = json.loads((partial / "error.json").read_text(encoding="utf-8"))
    assert error["type"] == "DomainError"
    assert not out.exists()
    assert main(["spectrum", "--config", path, "--out", str(out), "--jobs", "1"]) == 2
    assert (tmp_path / "run_partial.1").exists()


def test_repro_list(capsys):
    assert main(["repro", "--list"]) == 0
    listing = capsys.readouterr().out
    for name in ("eigen-scaling", "residual-map", "slow-motion", "pde-vs-reduced"):
        assert name in listing


def test_repro_needs_a_preset():
    assert main(["repro"]) == 2


def test_unknown_preset_rejected_by_parser():
    with pytest.raises(SystemExit) as info:
        main(["repro", "--preset", "nonexistent"])
    assert info.value.code == 2


def test_run_context_scopes_the_run_id():
    assert get_run_id() == ""
    with run_context("steady") as context:
        assert get_run_id() == context.run_id
        assert context.elapsed >= 0.0
    assert get_run_id() == ""


@pytest.mark.slow
def test_eigen_scaling_preset(tmp_path):
    out = tmp_path / "eigen"
    assert main(["repro", "--preset", "eigen-scaling", "--out", str(out), "--jobs", "1"]) == 0
    table = read_csv(out / "sweep_spectrum.csv")
    assert list(table) == ["epsilon", "lambda1", "lambda2", "gap"]
    assert (table["lambda1"] < 0.0).all()
    summary = json.loads((out / "fit_summary.json").read_text(encoding="utf-8"))
    assert summary["fit"]["slope"] < 0.0
    assert summary["fit"]["r2"] >= 0.99
    assert summary["checks"]["eps_lambda2_band_ratio"] <= 3.0
    assert summary["checks"]["eps_lambda1_monotone"] == 1.0


@pytest.mark.slow
def test_residual_map_preset(tmp_path):
    out = tmp_path / "residual"
    assert main(["repro", "--preset", "residual-map", "--out", str(out), "--jobs", "1"]) == 0
    summary = json.loads((out / "fit_summary.json").read_text(encoding="utf-8"))
    assert summary["fit"]["r2"] >= 0.999
    assert summary["fit"]["slope"] < 0.0


@pytest.mark.slow
def test_slow_motion_preset(tmp_path):
    out = tmp_path / "slow"
    assert main(["repro", "--preset", "slow-motion", "--out", str(out), "--jobs", "1"]) == 0
    table = read_csv(out / "sweep_slow_motion.csv")
    assert list(table) == ["epsilon", "beta", "t_half", "envelope_ratio"]
    assert table["t_half"][-1] == pytest.approx(390.0, rel=0.15)
    summary = json.loads((out / "fit_summary.json").read_text(encoding="utf-8"))
    assert summary["fit"]["slope"] > 0.0
    assert summary["fit"]["r2"] >= 0.98
    assert summary["checks"]["t_half_decreasing_in_eps"] == 1.0
