"""
Tests for the config schema, the presets and the scaling fit.
"""

import math

import pytest
from pydantic import ValidationError

from mfront.core.errors import ConfigError
from mfront.core.experiment_service import fit_inverse_epsilon
from mfront.core.presets import PRESET_DOCS, canned_reproductions, get_preset
from mfront.models.config import ExperimentConfig, IntegratorConfig, SimulateExperiment


def test_round_trip(config_payload):
    config = ExperimentConfig.model_validate(config_payload)
    again = ExperimentConfig.model_validate(config.model_dump(mode="json"))
    assert again == config
    assert config.experiment.kind == "steady"
    assert config.problem.epsilons == [0.1]


def test_epsilon_list(config_payload):
    config_payload["problem"]["epsilon"] = [0.08, 0.1]
    assert ExperimentConfig.model_validate(config_payload).problem.epsilons == [0.08, 0.1]


def test_unknown_key_rejected(config_payload):
    config_payload["problem"]["colour"] = "red"
    with pytest.raises(ValidationError) as info:
        ExperimentConfig.model_validate(config_payload)
    assert ("problem", "colour") in [entry["loc"] for entry in info.value.errors()]


@pytest.mark.parametrize(
    "field, value",
    [("n", 1000), ("epsilon", -0.1), ("epsilon", []), ("epsilon", "0.1"), ("delta_band", 0.7)],
)
def test_invalid_problem_rejected(config_payload, field, value):
    config_payload["problem"][field] = value
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate(config_payload)


def test_unknown_experiment_kind(config_payload):
    config_payload["experiment"] = {"kind": "bifurcation"}
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate(config_payload)


def test_experiment_defaults():
    experiment = SimulateExperiment()
    assert experiment.initial == "member"
    assert experiment.integrator.cfl_safety == 0.25
    assert experiment.integrator.reconstruction == "minmod"


def test_cfl_safety_capped():
    with pytest.raises(ValidationError):
        IntegratorConfig(cfl_safety=0.95)


class TestSnapshotSchedule:
    def test_log_spaced(self):
        schedule = IntegratorConfig(t_first=1.0, t_end=100.0, n_snapshots=3).snapshot_schedule()
        assert schedule == pytest.approx([1.0, 10.0, 100.0])

    def test_explicit_times_are_clipped_and_end_at_t_end(self):
        config = IntegratorConfig(t_end=5.0, snapshot_times=[3.0, 1.0, 7.0, 3.0])
        assert config.snapshot_schedule() == [1.0, 3.0, 5.0]

    def test_first_time_past_the_end(self):
        assert IntegratorConfig(t_first=10.0, t_end=5.0).snapshot_schedule() == [5.0]


class TestPresets:
    def test_all_presets_validate(self):
        presets = canned_reproductions()
        assert set(presets) == set(PRESET_DOCS)
        assert presets["eigen-scaling"].problem.epsilons == pytest.approx([0.06, 0.07, 0.08, 0.09, 0.1, 0.11, 0.12])
        assert presets["slow-motion"].experiment.of == "slow-motion"

    def test_pde_vs_reduced(self):
        config = get_preset("pde-vs-reduced")
        assert config.experiment.kind == "simulate"
        assert config.experiment.reduced
        assert config.experiment.integrator.t_end == 2000.0

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            get_preset("nonexistent")


class TestScalingFit:
    def test_exact_line(self):
        eps = [0.06, 0.08, 0.1, 0.12]
        fit = fit_inverse_epsilon("ln t", eps, [1.0 + 2.0 / e for e in eps])
        assert fit.slope == pytest.approx(2.0, rel=1e-10)
        assert fit.intercept == pytest.approx(1.0, abs=1e-9)
        assert fit.r2 == pytest.approx(1.0)
        assert fit.n == 4
        assert fit.slope_ci[0] <= fit.slope <= fit.slope_ci[1]

    def test_missing_values_skipped(self):
        eps = [0.06, 0.08, 0.1, 0.12]
        assert fit_inverse_epsilon("q", eps, [1.0, None, math.nan, 2.0]) is None
        fit = fit_inverse_epsilon("q", eps, [1.0, None, 3.0, 2.0])
        assert fit.n == 3
