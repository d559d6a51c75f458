"""
Result Models Module.

This module contains the Pydantic models returned by the numerical modules:
steady states, operators, spectra, speed maps, trajectories and PDE snapshots.
Arrays are numpy arrays marked read-only once a result is built.
"""

import math
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from mfront.models.problem import HypothesisCheck, ProblemSpec


class ResultModel(BaseModel):
    """Base for result records holding numpy arrays."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


def frozen_array(values) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


class SignedLog(BaseModel):
    """
    A real number stored as sign and natural log of its magnitude.

    Quantities of size e^{-C/epsilon} keep full relative precision for any
    epsilon the grid can resolve. Zero is (0, -inf).
    """
    model_config = ConfigDict(frozen=True)

    sign: int = Field(..., ge=-1, le=1, description="Sign: -1, 0 or 1")
    log_abs: float = Field(..., description="Natural log of the magnitude")

    @property
    def value(self) -> float:
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(self.log_abs)

    @property
    def log10_abs(self) -> float:
        return self.log_abs / math.log(10.0)

    @classmethod
    def zero(cls) -> "SignedLog":
        return cls(sign=0, log_abs=-math.inf)

    @classmethod
    def of(cls, value: float) -> "SignedLog":
        if value == 0.0:
            return cls.zero()
        return cls(sign=1 if value > 0 else -1, log_abs=math.log(abs(value)))

    @classmethod
    def exp_difference(cls, log_a: float, log_b: float) -> "SignedLog":
        """e^{log_a} - e^{log_b} without forming either exponential."""
        if log_a == log_b:
            return cls.zero()
        hi, lo = max(log_a, log_b), min(log_a, log_b)
        sign = 1 if log_a > log_b else -1
        return cls(sign=sign, log_abs=hi + math.log1p(-math.exp(lo - hi)))

    def scaled(self, log_factor: float, sign: int = 1) -> "SignedLog":
        """Multiply by sign * e^{log_factor}."""
        if self.sign == 0 or sign == 0:
            return SignedLog.zero()
        return SignedLog(sign=self.sign * sign, log_abs=self.log_abs + log_factor)

    def plus(self, value: float) -> "SignedLog":
        """Add an ordinary float (used for tiny flux mismatches)."""
        if value == 0.0:
            return self
        return SignedLog.of(self.value + value)

    def magnitude(self) -> "SignedLog":
        return SignedLog(sign=abs(self.sign), log_abs=self.log_abs)


class BranchLevel(BaseModel):
    """
    Constant of one stationary branch eps a U' = f(U) - k.

    Attributes:
        log_gap (float): ln(k - f(u_side)), the level above the boundary flux
        level (float): k
        amplitude (float): kappa, the root u > u* of f(u) = k
    """
    model_config = ConfigDict(frozen=True)

    log_gap: float = Field(..., description="ln(k - f(u_side))")
    level: float = Field(..., description="Branch level k")
    amplitude: float = Field(..., description="kappa: root above u* of f(u) = k")

    @property
    def gap(self) -> float:
        return math.exp(self.log_gap)


class ExactSteadyState(ResultModel):
    """
    The exact steady state of the problem.

    Attributes:
        kappa (float): Amplitude of the common branch level (reaction kind: the slope constant p)
        level (BranchLevel, optional): Branch level (conservation kind)
        x_star (float): Zero of b(x) - b(ell)/2
        xi_star (float): u*-crossing of the profile
        nodes (np.ndarray): Grid nodes
        profile (np.ndarray): Samples of the steady state
        profile_deriv (np.ndarray): Samples of its x-derivative
        boundary_residual (float): max of the two boundary mismatches
        extension (bool): True when built by the reaction-kind construction
    """
    kappa: float = Field(..., description="Branch amplitude")
    level: Optional[BranchLevel] = Field(None, description="Branch level (conservation kind)")
    x_star: float = Field(..., description="Zero of b(x) - b(ell)/2")
    xi_star: float = Field(..., description="u*-crossing of the profile")
    nodes: np.ndarray = Field(..., description="Grid nodes")
    profile: np.ndarray = Field(..., description="Profile samples")
    profile_deriv: np.ndarray = Field(..., description="Derivative samples")
    boundary_residual: float = Field(..., description="Boundary mismatch")
    extension: bool = Field(False, description="Reaction-kind construction")


class ApproxSteadyState(ResultModel):
    """
    One member U(.; xi) of the approximate steady-state family.

    Attributes:
        spec (ProblemSpec): Problem instance
        xi (float): Interface parameter
        match_point (float): Abscissa where the two branches meet (equals xi)
        kappa_minus (float): Left branch amplitude (reaction kind: slope constant p_-)
        kappa_plus (float): Right branch amplitude (reaction kind: slope constant p_+)
        branch_minus (BranchLevel, optional): Left branch level
        branch_plus (BranchLevel, optional): Right branch level
        level_difference (SignedLog): eps a(xi) [[U_x]] (k_- - k_+ for the conservation kind)
        jump (SignedLog): [[U_x]] at the match point
        profile (np.ndarray): Samples of U
        profile_deriv (np.ndarray): Samples of U_x (left limit at the match point)
        boundary_residual (float): max of the two boundary mismatches
        extension (bool): True for the reaction-kind construction
    """
    spec: ProblemSpec = Field(..., description="Problem instance")
    xi: float = Field(..., description="Interface parameter")
    match_point: float = Field(..., description="Matching abscissa")
    kappa_minus: float = Field(..., description="Left branch constant")
    kappa_plus: float = Field(..., description="Right branch constant")
    branch_minus: Optional[BranchLevel] = Field(None, description="Left branch level")
    branch_plus: Optional[BranchLevel] = Field(None, description="Right branch level")
    level_difference: SignedLog = Field(..., description="eps a(xi) times the derivative jump")
    jump: SignedLog = Field(..., description="Derivative jump at the match point")
    profile: np.ndarray = Field(..., description="Profile samples")
    profile_deriv: np.ndarray = Field(..., description="Derivative samples")
    boundary_residual: float = Field(..., description="Boundary mismatch")
    extension: bool = Field(False, description="Reaction-kind construction")

    @property
    def nodes(self) -> np.ndarray:
        return self.spec.nodes


class TridiagonalOperator(ResultModel):
    """
    A tridiagonal operator on the interior nodes (Dirichlet rows eliminated).

    Attributes:
        provenance (str): "L" (linearized operator) or "N" (self-adjoint surrogate)
        scale (float): epsilon
        diag (np.ndarray): Main diagonal, length dim
        lower (np.ndarray): Sub-diagonal, entry i couples row i+1 to column i
        upper (np.ndarray): Super-diagonal, entry i couples row i to column i+1
        symmetric (bool): lower and upper are the same array values
        nodes (np.ndarray): Interior abscissae
        weights (np.ndarray): Finite-volume cell widths (trapezoid weights)
        log_similarity (np.ndarray, optional): ln of the diagonal similarity D with N = eps D^-1 L D
    """
    provenance: Literal["L", "N"] = Field(..., description="Operator identity")
    scale: float = Field(..., description="epsilon")
    diag: np.ndarray = Field(..., description="Main diagonal")
    lower: np.ndarray = Field(..., description="Sub-diagonal")
    upper: np.ndarray = Field(..., description="Super-diagonal")
    symmetric: bool = Field(..., description="Exactly symmetric")
    nodes: np.ndarray = Field(..., description="Interior abscissae")
    weights: np.ndarray = Field(..., description="Cell widths")
    log_similarity: Optional[np.ndarray] = Field(None, description="ln D")

    @property
    def dim(self) -> int:
        return len(self.diag)

    @property
    def off_diag(self) -> np.ndarray:
        return self.upper

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Matrix-vector product on interior values."""
        out = self.diag * v
        out[:-1] += self.upper * v[1:]
        out[1:] += self.lower * v[:-1]
        return out

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.upper, 1) + np.diag(self.lower, -1)


class PotentialW(ResultModel):
    """
    Samples of the potential W(x; xi) of the self-adjoint surrogate.

    Attributes:
        nodes (np.ndarray): Grid nodes
        values (np.ndarray): W at the nodes
        lam (float): Spectral shift; zeros refer to W + eps * lam
        zeros (Tuple[float, ...]): Sign changes of W + eps * lam
    """
    nodes: np.ndarray = Field(..., description="Grid nodes")
    values: np.ndarray = Field(..., description="W samples")
    lam: float = Field(0.0, description="Spectral shift")
    zeros: Tuple[float, ...] = Field((), description="Sign changes of W + eps lam")


class RawEigenpairs(ResultModel):
    """
    Leading eigenpairs of a symmetric tridiagonal operator, largest first.

    Attributes:
        values (np.ndarray): Eigenvalues, decreasing
        vectors (np.ndarray): Unit eigenvectors as columns
    """
    values: np.ndarray = Field(..., description="Eigenvalues, decreasing")
    vectors: np.ndarray = Field(..., description="Unit eigenvectors (columns)")


class SpectrumResult(ResultModel):
    """
    Leading spectrum of the linearized operator at one family member.

    Attributes:
        xi (float): Interface parameter
        epsilon (float): Viscosity
        nodes (np.ndarray): Grid nodes
        eigenvalues (np.ndarray): lambda_1 > lambda_2 > ... of L
        phis (np.ndarray): Right eigenfunctions on the full grid, rows, unit L2 norm
        psis (np.ndarray): Adjoint eigenfunctions on the full grid, rows, <psi_k, phi_k> = 1
        residuals (np.ndarray): ||L phi_k - lambda_k phi_k||_2
        raw (RawEigenpairs): Eigenpairs of the surrogate N
    """
    xi: float = Field(..., description="Interface parameter")
    epsilon: float = Field(..., description="Viscosity")
    nodes: np.ndarray = Field(..., description="Grid nodes")
    eigenvalues: np.ndarray = Field(..., description="Eigenvalues of L, decreasing")
    phis: np.ndarray = Field(..., description="Right eigenfunctions")
    psis: np.ndarray = Field(..., description="Adjoint eigenfunctions")
    residuals: np.ndarray = Field(..., description="Eigen-residual norms")
    raw: RawEigenpairs = Field(..., description="Surrogate eigenpairs")

    @property
    def K(self) -> int:
        return len(self.eigenvalues)

    @property
    def gap(self) -> Optional[float]:
        if self.K < 2:
            return None
        return float(self.eigenvalues[0] - self.eigenvalues[1])


class SpectralReport(BaseModel):
    """
    Spectral hypothesis report.

    Attributes:
        checks (List[HypothesisCheck]): gap, lambda_2 scaling and residual/eigenvalue ratio
    """
    checks: List[HypothesisCheck] = Field(default_factory=list, description="Checks")

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def get(self, name: str) -> HypothesisCheck:
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(name)


class PotentialReport(BaseModel):
    """
    Properties of W + eps * lam about the interface.

    Attributes:
        lam (float): Spectral value the potential is shifted by
        applicable (bool): eps * lam > -alpha0^2 / (4 beta)
        checks (List[HypothesisCheck]): Measured properties
        measured (Dict[str, float]): Measured constants C, c0 and the zeros y_-/y_+
    """
    lam: float = Field(..., description="Spectral shift")
    applicable: bool = Field(..., description="Shift inside the admissible range")
    checks: List[HypothesisCheck] = Field(default_factory=list, description="Checks")
    measured: Dict[str, float] = Field(default_factory=dict, description="Measured constants")

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def get(self, name: str) -> HypothesisCheck:
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(name)


class SpeedMap(ResultModel):
    """
    Interface speed theta over a grid of interface positions.

    Attributes:
        xi_grid (np.ndarray): Interface positions
        theta_sign (np.ndarray): Sign of theta
        theta_log (np.ndarray): ln |theta|
        theta_prime_at_star (float): theta'(xi*)
        xi_star (float): Equilibrium interface position
        mode (str): "accurate" or "fast"
    """
    xi_grid: np.ndarray = Field(..., description="Interface positions")
    theta_sign: np.ndarray = Field(..., description="Sign of theta")
    theta_log: np.ndarray = Field(..., description="ln|theta|")
    theta_prime_at_star: float = Field(..., description="theta'(xi*)")
    xi_star: float = Field(..., description="Equilibrium interface position")
    mode: Literal["accurate", "fast"] = Field("accurate", description="Adjoint eigenfunction source")

    def violations(self) -> List[float]:
        """Grid points where (xi - xi*) theta(xi) < 0 fails."""
        offset = self.xi_grid - self.xi_star
        expected = np.where(np.abs(offset) <= 1e-9 * max(1.0, abs(self.xi_star)), 0.0, -np.sign(offset))
        bad = (expected != 0) & (self.theta_sign != expected)
        return [float(x) for x in self.xi_grid[bad]]

    @property
    def dissipative(self) -> bool:
        return not self.violations()


class InterfaceTrajectory(ResultModel):
    """
    Time-stamped interface positions.

    Attributes:
        times (np.ndarray): Sample times
        xi (np.ndarray): Interface positions
        provenance (str): "reduced" or "pde"
        xi_star (float): Equilibrium interface position
        xi0 (float): Initial position
        beta_fit (float, optional): Fitted exponential rate of the tail
        degraded (np.ndarray, optional): Samples extracted by the crossing fallback
    """
    times: np.ndarray = Field(..., description="Sample times")
    xi: np.ndarray = Field(..., description="Interface positions")
    provenance: Literal["reduced", "pde"] = Field(..., description="Origin")
    xi_star: float = Field(..., description="Equilibrium interface position")
    xi0: float = Field(..., description="Initial position")
    beta_fit: Optional[float] = Field(None, description="Fitted tail rate")
    degraded: Optional[np.ndarray] = Field(None, description="Fallback-extracted samples")

    @property
    def distance(self) -> np.ndarray:
        return np.abs(self.xi - self.xi_star)


class VNorms(BaseModel):
    """Norms of the perturbation v = u - U(.; xi_hat)."""
    model_config = ConfigDict(frozen=True)

    l2: float = Field(..., description="||v||_L2")
    linf: float = Field(..., description="||v||_Linf")
    h1_semi: float = Field(..., description="||v_x||_L2")


class Diagnostics(ResultModel):
    """
    Perturbation diagnostics at one state.

    Attributes:
        norms (VNorms): L2, Linf and H1-seminorm of v
        coeffs (np.ndarray): v_k = <psi_k, v>
        coupling (float, optional): |<d psi_1 / d xi, v>|
    """
    norms: VNorms = Field(..., description="Perturbation norms")
    coeffs: np.ndarray = Field(..., description="Spectral coefficients")
    coupling: Optional[float] = Field(None, description="Reduced-model coupling magnitude")


class PdeState(ResultModel):
    """
    State of the PDE integration.

    Attributes:
        t (float): Time
        u (np.ndarray): Grid samples
        steps (int): Steps taken
        mass (float): Trapezoid integral of u
        inflow (float): Cumulative boundary inflow
        mass_defect (float): Largest per-step mismatch between mass change and inflow
    """
    t: float = Field(..., description="Time")
    u: np.ndarray = Field(..., description="Grid samples")
    steps: int = Field(0, description="Steps taken")
    mass: float = Field(..., description="Integral of u")
    inflow: float = Field(0.0, description="Cumulative boundary inflow")
    mass_defect: float = Field(0.0, description="Largest per-step balance mismatch")


class Snapshot(ResultModel):
    """
    PDE state with derived diagnostics.

    Attributes:
        t (float): Time
        u (np.ndarray): Grid samples
        xi_hat (float): Extracted interface
        degraded (bool): Extraction fell back to the u*-crossing
        v_norms (VNorms): Perturbation norms
        spectral_coeffs (np.ndarray): First K projections <psi_k, v>
        v1_resid (float): |<psi_1, v>| at xi_hat
        coupling (float, optional): |<d psi_1 / d xi, v>|
    """
    t: float = Field(..., description="Time")
    u: np.ndarray = Field(..., description="Grid samples")
    xi_hat: float = Field(..., description="Extracted interface")
    degraded: bool = Field(False, description="Crossing fallback used")
    v_norms: VNorms = Field(..., description="Perturbation norms")
    spectral_coeffs: np.ndarray = Field(..., description="Spectral coefficients")
    v1_resid: float = Field(..., description="|<psi_1, v>|")
    coupling: Optional[float] = Field(None, description="Coupling magnitude")


class RunResult(ResultModel):
    """
    Outcome of one PDE run.

    Attributes:
        trajectory (InterfaceTrajectory): Extracted interface positions
        snapshots (List[Snapshot]): Emitted snapshots
        final (PdeState): Last state
        dt (float): Time step
        metadata (Dict[str, float]): Tolerances and ledger figures
    """
    trajectory: InterfaceTrajectory = Field(..., description="PDE interface trajectory")
    snapshots: List[Snapshot] = Field(default_factory=list, description="Snapshots")
    final: PdeState = Field(..., description="Last state")
    dt: float = Field(..., description="Time step")
    metadata: Dict[str, float] = Field(default_factory=dict, description="Ledger and tolerances")


class InterfaceEstimate(BaseModel):
    """
    Interface position extracted from a profile.

    Attributes:
        xi_hat (float): Root of <psi_1(.; xi), u - U(.; xi)> = 0, or the crossing on fallback
        crossing (float): Linearly interpolated u*-crossing (the secant seed)
        residual (float): |<psi_1(.; xi_hat), u - U(.; xi_hat)>|
        iterations (int): Secant iterations used
        degraded (bool): The secant did not converge and xi_hat is the crossing
    """
    model_config = ConfigDict(frozen=True)

    xi_hat: float = Field(..., description="Extracted interface")
    crossing: float = Field(..., description="u*-crossing")
    residual: float = Field(..., description="Projection residual")
    iterations: int = Field(0, description="Secant iterations")
    degraded: bool = Field(False, description="Crossing fallback used")


class ScalingFit(BaseModel):
    """
    Least-squares fit of a log quantity against 1/epsilon.

    Attributes:
        quantity (str): What was fitted
        slope (float): Fitted slope
        intercept (float): Fitted intercept
        r2 (float): Coefficient of determination
        slope_ci (Tuple[float, float]): 95% Student-t confidence interval of the slope
        n (int): Number of points
    """
    quantity: str = Field(..., description="Fitted quantity")
    slope: float = Field(..., description="Slope")
    intercept: float = Field(..., description="Intercept")
    r2: float = Field(..., description="Coefficient of determination")
    slope_ci: Tuple[float, float] = Field(..., description="95% confidence interval of the slope")
    n: int = Field(..., description="Number of points")


class PointSummary(BaseModel):
    """
    Outcome of one epsilon-point of an experiment.

    Attributes:
        epsilon (float): Viscosity
        line (str): One-line human readable summary
        metrics (Dict[str, float]): Scalar results; None where undefined
        reports (Dict[str, Any]): Hypothesis reports and solver metadata
        files (List[str]): Files written for this point
    """
    epsilon: float = Field(..., description="Viscosity")
    line: str = Field(..., description="One-line summary")
    metrics: Dict[str, Optional[float]] = Field(default_factory=dict, description="Scalar results")
    reports: Dict[str, Any] = Field(default_factory=dict, description="Reports and metadata")
    files: List[str] = Field(default_factory=list, description="Files written")
