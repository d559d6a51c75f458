"""
Problem Models Module.

This module contains the Pydantic models describing one problem instance:
grid, diffusion coefficient, flux or reaction nonlinearity, and the
hypothesis report produced when the instance is validated.

Problem models are frozen and hold only hashable scalars and tuples, so a
ProblemSpec can key caches of family members and spectra.
"""

from functools import lru_cache
from typing import Any, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from mfront.core.catalog import diffusion_law, flux_law
from mfront.core.errors import DomainError

FrozenParams = Tuple[Tuple[str, Any], ...]


@lru_cache(maxsize=64)
def grid_nodes(ell: float, n: int, kind: str, center: float, stretch: float) -> np.ndarray:
    """
    Abscissae of a grid on [-ell, ell].

    The "tanh" grid maps a uniform parameter s in [-1, 1] through
    artanh(s tanh(stretch)) / stretch on each side of `center`, which clusters
    nodes around the center.

    Returns:
        np.ndarray: Read-only, strictly increasing nodes with exact endpoints
    """
    if kind == "uniform":
        nodes = np.linspace(-ell, ell, n)
    else:
        s = np.linspace(-1.0, 1.0, n)
        g = np.arctanh(s * np.tanh(stretch)) / stretch
        nodes = np.where(s >= 0.0, center + (ell - center) * g, center + (ell + center) * g)
    nodes[0], nodes[-1] = -ell, ell
    nodes.setflags(write=False)
    return nodes


class Grid1D(BaseModel):
    """
    Grid on the interval [-ell, ell].

    Attributes:
        ell (float): Half-length of the interval
        n (int): Number of nodes, odd
        kind (str): "uniform" or "tanh" (clustered at `center`)
        center (float): Clustering center of the tanh grid
        stretch (float): Clustering strength of the tanh grid
    """
    model_config = ConfigDict(frozen=True)

    ell: float = Field(..., gt=0, description="Half-length of the interval")
    n: int = Field(..., ge=3, description="Number of nodes, odd")
    kind: Literal["uniform", "tanh"] = Field("uniform", description="Node distribution")
    center: float = Field(0.0, description="Clustering center (tanh grid)")
    stretch: float = Field(2.0, gt=0, description="Clustering strength (tanh grid)")

    @model_validator(mode="after")
    def _check_layout(self):
        if self.n % 2 == 0:
            raise ValueError(f"n must be odd so the midpoint is a node, got {self.n}")
        if not -self.ell < self.center < self.ell:
            raise ValueError(f"center {self.center} must lie inside (-ell, ell)")
        return self

    @property
    def nodes(self) -> np.ndarray:
        return grid_nodes(self.ell, self.n, self.kind, self.center, self.stretch)

    @property
    def spacing(self) -> np.ndarray:
        """Node-to-node distances x_{i+1} - x_i."""
        return np.diff(self.nodes)

    @property
    def h(self) -> Optional[float]:
        """Uniform spacing, None on a stretched grid."""
        if self.kind != "uniform":
            return None
        return 2.0 * self.ell / (self.n - 1)

    @property
    def h_min(self) -> float:
        return float(self.spacing.min())

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid weights; interior entries are the finite-volume cell widths."""
        x = self.nodes
        w = np.empty_like(x)
        w[1:-1] = 0.5 * (x[2:] - x[:-2])
        w[0] = 0.5 * (x[1] - x[0])
        w[-1] = 0.5 * (x[-1] - x[-2])
        return w


class DiffusionCoefficient(BaseModel):
    """
    Diffusion coefficient a(x) selected from the catalog.

    Attributes:
        name (str): Catalog entry
        params (tuple): Frozen catalog parameters
        alpha (float): min a over the grid nodes
        beta (float): max a over the grid nodes
    """
    model_config = ConfigDict(frozen=True)

    name: str = Field(..., description="Catalog entry")
    params: FrozenParams = Field((), description="Frozen catalog parameters")
    alpha: float = Field(..., description="Lower bound of a on the grid")
    beta: float = Field(..., description="Upper bound of a on the grid")

    def a(self, x):
        return diffusion_law(self.name, self.params).a(x)

    def a_prime(self, x):
        return diffusion_law(self.name, self.params).a_prime(x)

    @classmethod
    def on_grid(cls, name: str, params: FrozenParams, nodes: np.ndarray) -> "DiffusionCoefficient":
        """Resolve the catalog entry and measure its bounds on `nodes`."""
        values = diffusion_law(name, params).a(nodes)
        return cls(name=name, params=params, alpha=float(np.min(values)), beta=float(np.max(values)))


class FluxSpec(BaseModel):
    """
    Nonlinearity and boundary data.

    For the conservation kind f is stored shifted so that f(u*) = 0; the
    subtracted constant is kept in `shift`.

    Attributes:
        kind (str): "conservation" (G = f(u)_x) or "reaction" (G = g(u))
        name (str): Catalog entry
        params (tuple): Frozen catalog parameters
        u_minus (float): Left boundary value
        u_plus (float): Right boundary value
        u_star (float): Critical value, f'(u*) = 0 or middle zero of g
        shift (float): Constant subtracted from the catalog flux
    """
    model_config = ConfigDict(frozen=True)

    kind: Literal["conservation", "reaction"] = Field(..., description="Problem kind")
    name: str = Field(..., description="Catalog entry")
    params: FrozenParams = Field((), description="Frozen catalog parameters")
    u_minus: float = Field(..., description="Left boundary value")
    u_plus: float = Field(..., description="Right boundary value")
    u_star: float = Field(..., description="Critical value")
    shift: float = Field(0.0, description="Flux normalization shift f(u*)")

    @property
    def law(self):
        return flux_law(self.name, self.params)

    def f(self, u):
        return self.law.f(u) - self.shift

    def df(self, u):
        return self.law.df(u)

    def d2f(self, u):
        return self.law.d2f(u)

    def drop(self, u_ref: float, step):
        """f(u_ref) - f(u_ref + step) without cancellation."""
        return self.law.drop(u_ref, step)

    def g(self, u):
        return self.law.g(u)

    def dg(self, u):
        return self.law.dg(u)

    @property
    def amplitude(self) -> float:
        return self.u_minus - self.u_plus


class ProblemSpec(BaseModel):
    """
    One problem instance: viscosity, grid, diffusion and nonlinearity.

    Attributes:
        epsilon (float): Viscosity
        grid (Grid1D): Spatial grid
        diffusion (DiffusionCoefficient): a(x)
        flux (FluxSpec): f or g with boundary data
        delta_band (float): Admissible interface band margin, as a fraction of ell
    """
    model_config = ConfigDict(frozen=True)

    epsilon: float = Field(..., gt=0, description="Viscosity")
    grid: Grid1D = Field(..., description="Spatial grid")
    diffusion: DiffusionCoefficient = Field(..., description="Diffusion coefficient")
    flux: FluxSpec = Field(..., description="Nonlinearity and boundary data")
    delta_band: float = Field(0.05, gt=0, lt=0.5, description="Admissible band margin / ell")

    @property
    def ell(self) -> float:
        return self.grid.ell

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def kind(self) -> str:
        return self.flux.kind

    @property
    def is_extension(self) -> bool:
        """True for the reaction kind, whose family construction is our own."""
        return self.flux.kind == "reaction"

    @property
    def band(self) -> Tuple[float, float]:
        """Admissible interval for the interface parameter."""
        margin = self.delta_band * self.ell
        return -self.ell + margin, self.ell - margin

    def check_xi(self, xi: float) -> None:
        """
        Raise DomainError unless xi lies in the admissible band.
        """
        lo, hi = self.band
        if not lo < xi < hi:
            raise DomainError(f"xi={xi} outside the admissible band ({lo:.6g}, {hi:.6g})")


class HypothesisCheck(BaseModel):
    """
    One checked hypothesis.

    Attributes:
        name (str): Hypothesis identifier
        status (str): "pass", "fail", "warn" or "insufficient data"
        value (float): Measured quantity
        threshold (float): Value the measurement is compared against
        margin (float): Signed slack, positive when satisfied
        detail (str): Human readable explanation
    """
    name: str = Field(..., description="Hypothesis identifier")
    status: Literal["pass", "fail", "warn", "insufficient data"] = Field(..., description="Outcome")
    value: Optional[float] = Field(None, description="Measured quantity")
    threshold: Optional[float] = Field(None, description="Comparison threshold")
    margin: Optional[float] = Field(None, description="Signed slack, positive when satisfied")
    detail: str = Field("", description="Explanation")

    @property
    def passed(self) -> bool:
        return self.status != "fail"

    @classmethod
    def measure(
        cls,
        name: str,
        margin: float,
        value: Optional[float] = None,
        threshold: Optional[float] = None,
        detail: str = "",
        soft: bool = False,
    ) -> "HypothesisCheck":
        """Build a check from its signed margin; soft checks degrade to "warn"."""
        ok = bool(np.isfinite(margin) and margin > 0)
        status = "pass" if ok else ("warn" if soft else "fail")
        return cls(
            name=name,
            status=status,
            value=None if value is None else float(value),
            threshold=threshold,
            margin=float(margin) if np.isfinite(margin) else None,
            detail=detail,
        )


class HypothesisReport(BaseModel):
    """
    Structured outcome of a hypothesis validation.

    Attributes:
        checks (List[HypothesisCheck]): Individual checks
        flux_shift (float): Constant subtracted from f so that f(u*) = 0
        notes (List[str]): Additional remarks
    """
    checks: List[HypothesisCheck] = Field(default_factory=list, description="Individual checks")
    flux_shift: float = Field(0.0, description="Flux normalization shift")
    notes: List[str] = Field(default_factory=list, description="Remarks")

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def failures(self) -> List[HypothesisCheck]:
        return [check for check in self.checks if not check.passed]

    def get(self, name: str) -> HypothesisCheck:
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(name)
