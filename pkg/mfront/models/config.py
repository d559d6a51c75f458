"""
Config Models Module.

This module contains the strict Pydantic schema of experiment configs. A config
is a JSON document with a `problem` block and an `experiment` block; the
experiment block is a union discriminated on `kind`. Unknown keys are rejected.
"""

from typing import Annotated, Dict, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

ParamValue = Union[float, List[float]]


class StrictModel(BaseModel):
    """Base for all config blocks: strict types, no unknown keys."""
    model_config = ConfigDict(extra="forbid", strict=True)


class CatalogSelection(StrictModel):
    """
    A catalog entry with numeric parameters.

    Attributes:
        name (str): Catalog entry name
        params (Dict[str, float | List[float]]): Entry parameters
    """
    name: str = Field(..., description="Catalog entry name")
    params: Dict[str, ParamValue] = Field(default_factory=dict, description="Entry parameters")


class GridConfig(StrictModel):
    kind: Literal["uniform", "tanh"] = Field("uniform", description="Node distribution")
    center: float = Field(0.0, description="Clustering center (tanh grid)")
    stretch: float = Field(2.0, gt=0, description="Clustering strength (tanh grid)")


class ProblemConfig(StrictModel):
    """
    Problem block of an experiment config.

    Attributes:
        epsilon (float | List[float]): Viscosity or a list of viscosities
        ell (float): Half-length of the interval
        n (int): Number of grid nodes (odd)
        grid (GridConfig): Node distribution
        diffusion (CatalogSelection): a(x) entry
        flux (CatalogSelection): f(u) or g(u) entry
        u_minus (float, optional): Left state; reaction entries supply a default
        u_plus (float, optional): Right state; derived from f(u_+) = f(u_-) when omitted
        delta_band (float): Admissible interface band margin / ell
    """
    epsilon: Union[float, List[float]] = Field(..., description="Viscosity or list of viscosities")
    ell: float = Field(1.0, gt=0, description="Half-length of the interval")
    n: int = Field(1001, ge=3, description="Number of grid nodes (odd)")
    grid: GridConfig = Field(default_factory=GridConfig, description="Node distribution")
    diffusion: CatalogSelection = Field(
        default_factory=lambda: CatalogSelection(name="constant", params={"value": 1.0}),
        description="Diffusion coefficient a(x)",
    )
    flux: CatalogSelection = Field(
        default_factory=lambda: CatalogSelection(name="burgers"),
        description="Flux f(u) or reaction g(u)",
    )
    u_minus: Optional[float] = Field(None, description="Left boundary state")
    u_plus: Optional[float] = Field(None, description="Right boundary state")
    delta_band: float = Field(0.05, gt=0, lt=0.5, description="Admissible band margin / ell")

    @model_validator(mode="after")
    def _check_epsilon(self):
        values = self.epsilons
        if not values:
            raise ValueError("epsilon list must not be empty")
        if any(eps <= 0 for eps in values):
            raise ValueError("epsilon must be positive")
        if self.n % 2 == 0:
            raise ValueError(f"n must be odd, got {self.n}")
        return self

    @property
    def epsilons(self) -> List[float]:
        return list(self.epsilon) if isinstance(self.epsilon, list) else [self.epsilon]


class IntegratorConfig(StrictModel):
    """
    Time integration settings of the PDE solver.

    Attributes:
        dt (float, optional): Fixed step; derived from the CFL bound when omitted
        t_end (float): Final time
        cfl_safety (float): Fraction of the CFL bound used, at most 0.9
        n_snapshots (int): Number of log-spaced snapshots
        t_first (float): First snapshot time
        snapshot_times (List[float], optional): Explicit snapshot times (override)
        scheme (str): Time integrator
        reconstruction (str): Face reconstruction of the convective flux
        K (int): Spectral coefficients recorded per snapshot
        coupling (bool): Record the reduced-model coupling term per snapshot
    """
    dt: Optional[float] = Field(None, gt=0, description="Fixed time step")
    t_end: float = Field(100.0, gt=0, description="Final time")
    cfl_safety: float = Field(0.25, gt=0, le=0.9, description="Fraction of the CFL bound")
    n_snapshots: int = Field(40, ge=1, description="Number of log-spaced snapshots")
    t_first: float = Field(1e-2, gt=0, description="First snapshot time")
    snapshot_times: Optional[List[float]] = Field(None, description="Explicit snapshot times")
    scheme: Literal["imex-llf"] = Field("imex-llf", description="Time integrator")
    reconstruction: Literal["minmod", "constant"] = Field("minmod", description="Face reconstruction")
    K: int = Field(3, ge=1, le=10, description="Spectral coefficients per snapshot")
    coupling: bool = Field(True, description="Record the coupling term per snapshot")

    def snapshot_schedule(self):
        """Sorted snapshot times within (0, t_end], always ending at t_end."""
        if self.snapshot_times is not None:
            times = [t for t in self.snapshot_times if 0 < t <= self.t_end]
        elif self.t_first >= self.t_end:
            times = []
        else:
            times = list(np.geomspace(self.t_first, self.t_end, self.n_snapshots))
        times.append(self.t_end)
        return sorted(set(float(t) for t in times))


class SteadyExperiment(StrictModel):
    kind: Literal["steady"] = "steady"
    xi: Optional[float] = Field(None, description="Family member to build besides the exact steady state")


class SpectrumExperiment(StrictModel):
    kind: Literal["spectrum"] = "spectrum"
    xi: float = Field(0.0, description="Interface position")
    K: int = Field(4, ge=2, le=10, description="Number of leading eigenpairs")
    gap_min: float = Field(0.1, description="Spectral gap threshold")
    h3_ratio_max: float = Field(100.0, description="Upper bound for Omega / |lambda_1|")


class SpeedmapExperiment(StrictModel):
    kind: Literal["speedmap"] = "speedmap"
    n_xi: int = Field(41, ge=3, description="Number of interface positions")
    theta_mode: Literal["accurate", "fast"] = Field("accurate", description="Adjoint eigenfunction source")


class SlowMotionExperiment(StrictModel):
    kind: Literal["slow-motion"] = "slow-motion"
    xi0: float = Field(0.3, description="Initial interface position")
    t_end: Optional[float] = Field(None, gt=0, description="Final time")
    target_xi: Optional[float] = Field(None, description="Stop when the interface reaches this position")
    n_times: int = Field(200, ge=2, description="Number of log-spaced output times")
    theta_mode: Literal["accurate", "fast"] = Field("accurate", description="Adjoint eigenfunction source")


class SimulateExperiment(StrictModel):
    kind: Literal["simulate"] = "simulate"
    initial: Literal["member", "exact", "smoothed-step"] = Field("member", description="Initial datum")
    xi0: float = Field(0.3, description="Interface position of the initial datum")
    width: Optional[float] = Field(None, gt=0, description="Smoothed step width, default 2 epsilon")
    bump: float = Field(0.0, description="Amplitude of an added Gaussian bump")
    integrator: IntegratorConfig = Field(default_factory=IntegratorConfig, description="Integrator settings")
    reduced: bool = Field(False, description="Also integrate the reduced model for comparison")
    transient: float = Field(10.0, ge=0, description="Comparison starts after this time")


class SweepExperiment(StrictModel):
    kind: Literal["sweep"] = "sweep"
    of: Literal["spectrum", "residual", "slow-motion"] = Field(..., description="Quantity swept over epsilon")
    xi: float = Field(0.2, description="Interface position (spectrum, residual)")
    xi0: float = Field(0.3, description="Initial position (slow-motion)")
    K: int = Field(4, ge=2, le=10, description="Number of leading eigenpairs (spectrum)")
    theta_mode: Literal["accurate", "fast"] = Field("accurate", description="Adjoint eigenfunction source")


Experiment = Annotated[
    Union[
        SteadyExperiment,
        SpectrumExperiment,
        SpeedmapExperiment,
        SlowMotionExperiment,
        SimulateExperiment,
        SweepExperiment,
    ],
    Field(discriminator="kind"),
]


class ExperimentConfig(StrictModel):
    """
    A complete experiment config.

    Attributes:
        problem (ProblemConfig): Problem block
        experiment (Experiment): Experiment block, discriminated on `kind`
        output_dir (str, optional): Default output directory (overridden by --out)
    """
    problem: ProblemConfig = Field(..., description="Problem block")
    experiment: Experiment = Field(..., description="Experiment block")
    output_dir: Optional[str] = Field(None, description="Output directory")
