import math

import numpy as np
import pytest
from hypothesis import given
import hypothesis.strategies as st

from mfront.core.errors import ConfigError, DomainError, HypothesisError
from mfront.core.problem import (
    b_at,
    b_integral,
    b_profile,
    equilibrium_point,
    hyperbolic_profile,
    invert_b,
    smoothed_step,
    validate_hypotheses,
)
from tests.conftest import make_spec


def test_b_of_constant_diffusion_is_length(burgers_spec):
    assert b_integral(burgers_spec, 1.0) == pytest.approx(2.0, rel=1e-12)
    assert b_profile(burgers_spec)[-1] == pytest.approx(2.0, rel=1e-12)
    assert equilibrium_point(burgers_spec) == pytest.approx(0.0, abs=1e-12)


def test_b_of_exponential_diffusion(exp_diffusion_spec):
    assert b_integral(exp_diffusion_spec, 1.0) == pytest.approx(math.e - 1.0 / math.e, rel=1e-10)
    assert equilibrium_point(exp_diffusion_spec) == pytest.approx(-math.log(math.cosh(1.0)), abs=1e-8)


def test_b_at_matches_quadrature_between_nodes(exp_diffusion_spec):
    for x in (-0.7311, 0.0004, 0.5123):
        assert b_at(exp_diffusion_spec, x) == pytest.approx(b_integral(exp_diffusion_spec, x), rel=1e-9)


def test_invert_b_round_trip(exp_diffusion_spec):
    x = 0.3217
    assert invert_b(exp_diffusion_spec, b_at(exp_diffusion_spec, x)) == pytest.approx(x, abs=1e-10)


@given(st.floats(min_value=0.1, max_value=2.0))
def test_b_profile_increasing_for_positive_diffusion(rate):
    spec = make_spec(n=201, diffusion={"name": "exponential", "params": {"scale": 1.0, "rate": rate}})
    b = b_profile(spec)
    assert b[0] == 0.0
    assert np.all(np.diff(b) > 0.0)
    assert b[-1] == pytest.approx(2.0 * math.sinh(rate) / rate, rel=1e-6)


def test_b_integral_rejects_points_outside_interval(burgers_spec):
    with pytest.raises(DomainError):
        b_integral(burgers_spec, 1.5)


def test_xi_outside_band_raises(burgers_spec):
    lo, hi = burgers_spec.band
    assert lo == pytest.approx(-0.95)
    with pytest.raises(DomainError):
        burgers_spec.check_xi(hi + 1e-3)


def test_missing_u_plus_uses_rankine_hugoniot_partner():
    spec = make_spec(u_plus=None)
    assert spec.flux.u_plus == pytest.approx(-1.0)


def test_flux_is_shifted_to_vanish_at_critical_value():
    spec = make_spec(
        flux={"name": "quadratic", "params": {"curvature": 2.0, "center": 0.5, "offset": 0.3}},
        u_minus=1.5,
        u_plus=None,
    )
    assert spec.flux.u_plus == pytest.approx(-0.5)
    assert spec.flux.shift == pytest.approx(0.3)
    assert spec.flux.f(0.5) == pytest.approx(0.0, abs=1e-15)
    assert spec.flux.f(spec.flux.u_minus) == pytest.approx(spec.flux.f(spec.flux.u_plus))


def test_report_passes_for_burgers(burgers_spec):
    report = validate_hypotheses(burgers_spec)
    assert report.passed
    assert report.get("convexity").status == "pass"
    assert report.get("rankine_hugoniot").status == "pass"


def test_reversed_boundary_values_fail_hypotheses():
    with pytest.raises(HypothesisError) as info:
        make_spec(u_minus=-1.0, u_plus=1.0)
    assert info.value.report is not None
    assert not info.value.report.get("boundary_order").passed


def test_unchecked_problem_carries_failures():
    spec = make_spec(u_minus=-1.0, u_plus=1.0, check=False)
    assert not validate_hypotheses(spec).passed


def test_coarse_grid_only_warns():
    spec = make_spec(epsilon=0.1, n=51)
    assert validate_hypotheses(spec).get("resolution").status == "warn"


def test_unknown_catalog_parameter_rejected():
    with pytest.raises(ConfigError):
        make_spec(flux={"name": "burgers", "params": {"slope": 2.0}})


def test_smoothed_step_pins_boundary_values(burgers_spec):
    u = smoothed_step(burgers_spec, 0.3, 0.2)
    assert u[0] == 1.0 and u[-1] == -1.0
    crossing = np.flatnonzero(np.diff(np.sign(u)))
    assert burgers_spec.nodes[crossing[0]] == pytest.approx(0.3, abs=3e-3)


def test_hyperbolic_profile_is_a_step(burgers_spec):
    u = hyperbolic_profile(burgers_spec, 0.2)
    x = burgers_spec.nodes
    assert np.all(u[x < 0.2] == 1.0)
    assert np.all(u[x >= 0.2] == -1.0)
