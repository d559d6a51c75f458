"""
Shared fixtures for the test suite.

Problem instances are built once per session; the numerical modules cache
family members and spectra by ProblemSpec, so sharing instances keeps the
suite fast.
"""

import os

import pytest
from hypothesis import HealthCheck, settings

from mfront.core.problem import build_problem
from mfront.models.config import ProblemConfig

settings.register_profile("ci", max_examples=50, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("dev", max_examples=15, deadline=None)
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "dev"))


def make_spec(epsilon=0.1, n=1001, diffusion=None, flux=None, u_minus=1.0, u_plus=-1.0, **extra):
    """Build a ProblemSpec from keyword overrides of a Burgers problem on [-1, 1]."""
    config = {
        "epsilon": epsilon,
        "ell": 1.0,
        "n": n,
        "diffusion": diffusion or {"name": "constant", "params": {"value": 1.0}},
        "flux": flux or {"name": "burgers", "params": {}},
        "u_minus": u_minus,
        "u_plus": u_plus,
    }
    config.update(extra)
    check = config.pop("check", True)
    return build_problem(ProblemConfig.model_validate(config), check=check)


@pytest.fixture(scope="session")
def burgers_spec():
    """Burgers, a = 1, u_pm = -+1, eps = 0.1, n = 1001."""
    return make_spec()


@pytest.fixture(scope="session")
def burgers_fine_spec():
    """Burgers, a = 1, eps = 0.1, n = 2001."""
    return make_spec(n=2001)


@pytest.fixture(scope="session")
def exp_diffusion_spec():
    """Burgers with a(x) = e^x, eps = 0.1, n = 1001."""
    return make_spec(diffusion={"name": "exponential", "params": {"scale": 1.0, "rate": 1.0}})


@pytest.fixture(scope="session")
def allen_cahn_spec():
    """Allen-Cahn reaction, a = 1, eps = 0.1, n = 401."""
    return make_spec(n=401, flux={"name": "allen_cahn", "params": {}}, u_minus=None, u_plus=None)


@pytest.fixture
def config_payload():
    """A valid steady experiment config as a JSON-ready dict."""
    return {
        "problem": {
            "epsilon": 0.1,
            "ell": 1.0,
            "n": 1001,
            "diffusion": {"name": "constant", "params": {"value": 1.0}},
            "flux": {"name": "burgers", "params": {}},
            "u_minus": 1.0,
            "u_plus": -1.0,
        },
        "experiment": {"kind": "steady"},
    }
