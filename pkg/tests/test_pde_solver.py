"""
Tests for the IMEX solver, the interface extraction and the perturbation diagnostics.
"""

import math

import numpy as np
import pytest

from mfront.core.errors import ConfigError, ExtractionError
from mfront.core.experiment_service import compare_trajectories, decay_after_transient
from mfront.core.pde_solver import (
    ImexStepper,
    extract_interface,
    initial_state,
    perturbation_diagnostics,
    run_experiment,
    step,
)
from mfront.core.reduced_dynamics import integrate_interface
from mfront.core.spectral import spectrum_at
from mfront.core.steady_family import build_approx_member, build_exact_steady
from mfront.models.config import IntegratorConfig, SimulateExperiment
from mfront.models.results import PdeState
from tests.conftest import make_spec


def datum(spec, initial="member", xi0=0.3) -> np.ndarray:
    return initial_state(spec, SimulateExperiment(initial=initial, xi0=xi0))


def short_run(**overrides) -> IntegratorConfig:
    settings = {"t_end": 1.0, "n_snapshots": 3, "t_first": 0.25, "K": 2, "coupling": False}
    settings.update(overrides)
    return IntegratorConfig(**settings)


class TestStepper:
    def test_constant_state_is_stationary(self):
        spec = make_spec(u_minus=0.5, u_plus=0.5, check=False)
        stepper = ImexStepper(spec, IntegratorConfig())
        u = np.full(spec.grid.n, 0.5)
        for _ in range(10):
            u, gained = stepper.advance(u, stepper.dt)
            assert gained == pytest.approx(0.0, abs=1e-14)
        assert np.max(np.abs(u - 0.5)) <= 1e-13

    def test_derived_step_is_the_cfl_bound(self, burgers_spec):
        stepper = ImexStepper(burgers_spec, IntegratorConfig(cfl_safety=0.5))
        assert stepper.dt == pytest.approx(0.5 * burgers_spec.grid.h_min)

    def test_step_above_bound_rejected(self, burgers_spec):
        with pytest.raises(ConfigError):
            ImexStepper(burgers_spec, IntegratorConfig(dt=1.0))

    def test_step_keeps_the_mass_ledger(self, burgers_spec):
        stepper = ImexStepper(burgers_spec, IntegratorConfig())
        u0 = datum(burgers_spec)
        state = PdeState(t=0.0, u=u0, mass=stepper.mass(u0))
        for _ in range(20):
            state = step(state, stepper)
        assert state.steps == 20
        assert state.t == pytest.approx(20 * stepper.dt)
        assert state.mass - stepper.mass(u0) == pytest.approx(state.inflow, abs=1e-10)
        assert state.u[0] == 1.0 and state.u[-1] == -1.0

    def test_explicit_step_size(self, burgers_spec):
        stepper = ImexStepper(burgers_spec, IntegratorConfig())
        u0 = datum(burgers_spec)
        state = step(PdeState(t=0.0, u=u0, mass=stepper.mass(u0)), stepper, dt=0.5 * stepper.dt)
        assert state.t == pytest.approx(0.5 * stepper.dt)


class TestExtraction:
    def test_member_recovers_its_parameter(self, burgers_spec):
        u = np.array(build_approx_member(burgers_spec, 0.2).profile)
        estimate = extract_interface(u, burgers_spec)
        assert not estimate.degraded
        assert estimate.xi_hat == pytest.approx(0.2, abs=1e-8)

    def test_perturbed_member(self, burgers_spec):
        x = burgers_spec.nodes
        u = np.array(build_approx_member(burgers_spec, 0.2).profile) + 0.01 * np.sin(math.pi * (x + 1.0))
        estimate = extract_interface(u, burgers_spec)
        assert estimate.xi_hat == pytest.approx(0.2, abs=1e-2)

    def test_antisymmetric_profile(self, burgers_spec):
        u = np.array(build_exact_steady(burgers_spec).profile)
        assert extract_interface(u, burgers_spec).xi_hat == pytest.approx(0.0, abs=1e-8)

    def test_several_crossings_rejected(self, burgers_spec):
        u = np.sin(1.5 * math.pi * burgers_spec.nodes)
        with pytest.raises(ExtractionError):
            extract_interface(u, burgers_spec)

    def test_crossing_outside_band_rejected(self, burgers_spec):
        u = -np.tanh((burgers_spec.nodes - 0.97) / 0.005)
        with pytest.raises(ExtractionError):
            extract_interface(u, burgers_spec)


class TestDiagnostics:
    def test_member_has_no_perturbation(self, burgers_spec):
        u = np.array(build_approx_member(burgers_spec, 0.2).profile)
        diagnostics = perturbation_diagnostics(burgers_spec, u, spectrum_at(burgers_spec, 0.2, 3))
        assert diagnostics.norms.l2 == 0.0
        assert diagnostics.norms.linf == 0.0
        assert diagnostics.norms.h1_semi == 0.0
        assert np.all(diagnostics.coeffs == 0.0)
        assert diagnostics.coupling == 0.0

    def test_second_mode_projects_onto_itself(self, burgers_spec):
        spectrum = spectrum_at(burgers_spec, 0.2, 3)
        u = np.array(build_approx_member(burgers_spec, 0.2).profile) + 1e-3 * spectrum.phis[1]
        diagnostics = perturbation_diagnostics(burgers_spec, u, spectrum, coupling=False)
        assert diagnostics.coeffs == pytest.approx([0.0, 1e-3, 0.0], abs=1e-11)
        assert diagnostics.norms.l2 == pytest.approx(1e-3, rel=1e-9)
        assert diagnostics.coupling is None


class TestInitialState:
    def test_member(self, burgers_spec):
        u = initial_state(burgers_spec, SimulateExperiment(initial="member", xi0=0.3))
        assert np.array_equal(u[1:-1], build_approx_member(burgers_spec, 0.3).profile[1:-1])
        assert u[0] == 1.0 and u[-1] == -1.0

    def test_smoothed_step_with_bump(self, burgers_spec):
        u = initial_state(burgers_spec, SimulateExperiment(initial="smoothed-step", xi0=-0.2, bump=0.1))
        assert u[0] == 1.0 and u[-1] == -1.0
        assert extract_interface(u, burgers_spec).crossing == pytest.approx(-0.2, abs=1e-2)


class TestRunExperiment:
    def test_steady_state_is_preserved(self, burgers_spec):
        exact = build_exact_steady(burgers_spec)
        run = run_experiment(burgers_spec, datum(burgers_spec, "exact"), short_run())
        assert np.max(np.abs(run.final.u - exact.profile)) <= 5e-3
        assert abs(run.trajectory.xi[-1]) <= 1e-3
        assert run.final.t == 1.0
        assert [s.t for s in run.snapshots] == pytest.approx([0.25, 0.5, 1.0])
        assert run.metadata["mass_defect_max"] <= run.metadata["ledger_tol"] * 2.0

    def test_snapshots_land_on_schedule(self, burgers_spec):
        config = short_run(snapshot_times=[0.1, 0.3333], t_end=0.5)
        run = run_experiment(burgers_spec, datum(burgers_spec), config)
        assert [s.t for s in run.snapshots] == [0.1, 0.3333, 0.5]
        assert run.trajectory.provenance == "pde"
        assert not np.any(run.trajectory.degraded)

    def test_boundary_values_required(self, burgers_spec):
        u0 = datum(burgers_spec)
        u0[0] = 0.9
        with pytest.raises(ConfigError):
            run_experiment(burgers_spec, u0, short_run())

    def test_run_advances_through_step(self, burgers_spec, monkeypatch):
        calls = []

        def counting_step(state, stepper, dt=None):
            calls.append(dt)
            return step(state, stepper, dt)

        monkeypatch.setattr("mfront.core.pde_solver.step", counting_step)
        run = run_experiment(burgers_spec, datum(burgers_spec), short_run(t_end=0.1, t_first=0.05, n_snapshots=2))
        assert len(calls) == run.final.steps
        assert run.final.t == 0.1
        assert run.metadata["mass_defect_max"] == run.final.mass_defect

    def test_reaction_kind_runs(self, allen_cahn_spec):
        u0 = datum(allen_cahn_spec)
        run = run_experiment(allen_cahn_spec, u0, short_run(t_end=2.0))
        assert len(run.snapshots) == 3
        assert 0.0 < run.trajectory.xi[-1] <= 0.3 + 1e-3

    @pytest.mark.slow
    def test_long_steady_run(self, burgers_spec):
        exact = build_exact_steady(burgers_spec)
        run = run_experiment(burgers_spec, datum(burgers_spec, "exact"), short_run(t_end=10.0))
        assert np.max(np.abs(run.final.u - exact.profile)) <= 5e-3

    @pytest.mark.slow
    def test_pde_follows_the_reduced_motion(self, burgers_spec):
        config = IntegratorConfig(t_end=2000.0, cfl_safety=0.5, n_snapshots=80, K=1, coupling=False)
        run = run_experiment(burgers_spec, datum(burgers_spec), config)
        reduced = integrate_interface(burgers_spec, 0.3, t_end=2000.0)
        comparison = compare_trajectories(run, reduced, transient=10.0, h=burgers_spec.grid.h_min)
        assert comparison["agrees"] == 1.0
        decay = decay_after_transient(run, 10.0)
        assert decay["v_l2_final_fraction"] is not None

    @pytest.mark.slow
    def test_bump_on_a_member_decays(self, burgers_spec):
        experiment = SimulateExperiment(initial="member", xi0=0.25, bump=0.05)
        config = IntegratorConfig(t_end=2000.0, cfl_safety=0.5, n_snapshots=80, K=1, coupling=False)
        run = run_experiment(burgers_spec, initial_state(burgers_spec, experiment), config)
        decay = decay_after_transient(run, experiment.transient)
        assert decay["v_l2_nonincreasing"] == 1.0
        assert decay["v_l2_final_fraction"] < 0.1
