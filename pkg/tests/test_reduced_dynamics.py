"""
Tests for the interface speed, its decay rate and the reduced trajectories.
"""

import math

import numpy as np
import pytest

from mfront.core.errors import MonotonicityError
from mfront.core.reduced_dynamics import (
    decay_rate,
    default_xi_grid,
    envelope_ratio,
    fit_tail_rate,
    halving_time,
    integrate_interface,
    speed_map,
    theta,
)
from mfront.core.steady_family import steady_interface
from mfront.models.results import InterfaceTrajectory, frozen_array
from tests.conftest import make_spec


@pytest.fixture(scope="module")
def burgers_trajectory(burgers_spec):
    return integrate_interface(burgers_spec, 0.3)


def synthetic(times, xi, xi_star=0.0) -> InterfaceTrajectory:
    return InterfaceTrajectory(
        times=frozen_array(times),
        xi=frozen_array(xi),
        provenance="reduced",
        xi_star=xi_star,
        xi0=float(xi[0]),
    )


class TestTheta:
    def test_vanishes_at_equilibrium(self, burgers_spec):
        at_star = theta(burgers_spec, 0.0)
        away = theta(burgers_spec, 0.3)
        assert at_star.sign == 0 or at_star.log_abs <= away.log_abs - 10.0 * math.log(10.0)

    def test_points_toward_equilibrium(self, burgers_spec):
        assert theta(burgers_spec, 0.3).sign == -1
        assert theta(burgers_spec, -0.3).sign == 1

    def test_is_odd_for_the_symmetric_problem(self, burgers_spec):
        right, left = theta(burgers_spec, 0.3), theta(burgers_spec, -0.3)
        assert right.log_abs == pytest.approx(left.log_abs, abs=1e-6)

    def test_fast_mode_agrees_in_sign(self, burgers_spec):
        for xi in (-0.5, 0.4):
            assert theta(burgers_spec, xi, mode="fast").sign == theta(burgers_spec, xi).sign

    def test_exponentially_small(self, burgers_spec):
        assert theta(burgers_spec, 0.3).log_abs < math.log(1e-2)


class TestDecayRate:
    def test_burgers_rate(self, burgers_spec):
        beta = decay_rate(burgers_spec)
        assert beta > 0.0
        assert beta == pytest.approx((2.0 / 0.1) * math.exp(-1.0 / 0.1), rel=0.25)

    def test_fast_mode_is_close(self, burgers_spec):
        assert decay_rate(burgers_spec, mode="fast") == pytest.approx(decay_rate(burgers_spec), rel=0.2)

    def test_mirrored_problem_has_the_same_rate(self, exp_diffusion_spec):
        mirrored = make_spec(diffusion={"name": "exponential", "params": {"scale": 1.0, "rate": -1.0}})
        assert steady_interface(mirrored) == pytest.approx(-steady_interface(exp_diffusion_spec), abs=1e-6)
        assert decay_rate(mirrored) == pytest.approx(decay_rate(exp_diffusion_spec), rel=1e-3)


class TestSpeedMap:
    def test_default_grid_is_interior(self, burgers_spec):
        grid = default_xi_grid(burgers_spec)
        lo, hi = burgers_spec.band
        assert len(grid) == 41
        assert lo < grid[0] and grid[-1] < hi

    def test_constant_diffusion_is_dissipative(self, burgers_spec):
        result = speed_map(burgers_spec, default_xi_grid(burgers_spec, 9))
        assert result.dissipative
        assert result.theta_prime_at_star < 0.0
        assert result.xi_star == pytest.approx(0.0, abs=1e-8)

    def test_exponential_diffusion_is_dissipative(self, exp_diffusion_spec):
        result = speed_map(exp_diffusion_spec, default_xi_grid(exp_diffusion_spec, 9))
        assert result.dissipative
        assert result.xi_star == pytest.approx(-math.log(math.cosh(1.0)), abs=1e-6)

    @pytest.mark.slow
    @pytest.mark.parametrize("spec_name", ["burgers_spec", "exp_diffusion_spec"])
    def test_full_grid_is_dissipative(self, request, spec_name):
        spec = request.getfixturevalue(spec_name)
        result = speed_map(spec)
        assert len(result.xi_grid) == 41
        assert result.dissipative
        assert result.violations() == []


class TestIntegrateInterface:
    def test_starting_at_equilibrium_stays_there(self, burgers_spec):
        xi_star = steady_interface(burgers_spec)
        trajectory = integrate_interface(burgers_spec, xi_star, t_end=100.0)
        assert np.all(trajectory.xi == xi_star)
        assert trajectory.times[-1] == pytest.approx(100.0)

    def test_distance_is_monotone(self, burgers_trajectory):
        distance = burgers_trajectory.distance
        assert distance[0] == pytest.approx(0.3)
        assert np.all(np.diff(distance) <= 1e-15)
        assert np.all(np.diff(burgers_trajectory.times) > 0.0)
        assert np.all(burgers_trajectory.xi >= 0.0)

    def test_halving_time(self, burgers_trajectory):
        assert halving_time(burgers_trajectory) == pytest.approx(390.0, rel=0.15)

    def test_tail_follows_the_linear_rate(self, burgers_spec, burgers_trajectory):
        beta = decay_rate(burgers_spec)
        assert burgers_trajectory.beta_fit == pytest.approx(beta, rel=0.05)
        assert 0.5 <= envelope_ratio(burgers_trajectory, beta) <= 2.0

    def test_distance_stays_under_the_linear_envelope(self, burgers_spec, burgers_trajectory):
        beta = decay_rate(burgers_spec)
        envelope = 1.5 * 0.3 * np.exp(-beta * burgers_trajectory.times)
        assert np.all(burgers_trajectory.distance <= envelope)

    def test_target_stops_the_run(self, burgers_spec):
        trajectory = integrate_interface(burgers_spec, 0.3, target_xi=0.15)
        assert trajectory.xi[-1] == pytest.approx(0.15, abs=1e-4)

    @pytest.mark.parametrize("target", [-0.1, 0.4])
    def test_unreachable_target(self, burgers_spec, target):
        with pytest.raises(MonotonicityError):
            integrate_interface(burgers_spec, 0.3, target_xi=target)


class TestTrajectoryMetrics:
    def test_halving_time_interpolates_in_log_distance(self):
        trajectory = synthetic([0.0, 1.0, 2.0], [0.4, 0.3, 0.1])
        expected = 1.0 + math.log(2.0 / 3.0) / math.log(1.0 / 3.0)
        assert halving_time(trajectory) == pytest.approx(expected)

    def test_halving_time_not_reached(self):
        assert halving_time(synthetic([0.0, 1.0], [0.4, 0.3])) is None

    def test_pure_exponential(self):
        times = np.linspace(0.0, 50.0, 200)
        xi = 0.3 * np.exp(-0.1 * times)
        trajectory = synthetic(times, xi)
        assert envelope_ratio(trajectory, 0.1) == pytest.approx(1.0, rel=1e-9)
        assert fit_tail_rate(times, xi, 0.3) == pytest.approx(0.1, rel=1e-9)

    def test_short_tail_has_no_fit(self):
        times = np.array([0.0, 1.0, 2.0])
        assert fit_tail_rate(times, np.array([0.3, 0.2, 0.1]), 0.3) is None
