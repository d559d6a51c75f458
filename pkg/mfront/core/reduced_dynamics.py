"""
Reduced Dynamics Module.

This module evaluates the interface speed theta(xi) = <psi_1, P[U(.; xi)]>,
its decay rate at the equilibrium, and the reduced interface motion
d xi / dt = theta(xi).

The reduced equation is separable. With d = |xi - xi*| and
R(d) = -s theta(xi* + s d) / d (s the side of the start), time is
t(d) = int_{ln d}^{ln d0} dz / R(e^z). R varies on the scale eps and tends to
beta as d -> 0, so it is sampled on a coarse mesh, interpolated as ln R and
integrated in z without ever stepping theta in time.
"""

import math
from typing import Optional

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicSpline
from scipy.stats import linregress

from mfront.core.errors import HypothesisError, MonotonicityError, TransversalityError
from mfront.core.spectral import adjoint_eigenfunction_limit, spectrum_at, weighted_inner
from mfront.core.steady_family import build_approx_member, family_derivative, steady_interface
from mfront.models.problem import ProblemSpec
from mfront.models.results import InterfaceTrajectory, SignedLog, SpeedMap, frozen_array
from mfront.utils.logger import get_logger

logger = get_logger()

TRANSVERSALITY_MIN = 1e-14
RATE_STEP = 1e-3
STOP_DISTANCE = 1e-6
TAIL_FRACTION = 0.1
QUADRATURE_POINTS = 2001


def theta(spec: ProblemSpec, xi: float, mode: str = "accurate") -> SignedLog:
    """
    Interface speed at xi.

    theta = eps a(xi) [[U_x]] psi_1(xi), with psi_1 rescaled so that
    <psi_1, d U / d xi> = 1. In "fast" mode psi_1 is the small-eps closed form.

    Args:
        spec: Problem instance
        xi: Interface position inside the admissible band
        mode: "accurate" or "fast"

    Returns:
        SignedLog: theta as sign and ln magnitude

    Raises:
        TransversalityError: If |<psi_1, d U / d xi>| < 1e-14
    """
    member = build_approx_member(spec, xi)
    if mode == "fast":
        psi = adjoint_eigenfunction_limit(spec, xi)
    else:
        psi = spectrum_at(spec, xi, 1).psis[0]
    tangent = family_derivative(spec, xi)
    norm = weighted_inner(psi, tangent, spec.grid.weights)
    if not abs(norm) >= TRANSVERSALITY_MIN:
        raise TransversalityError(f"psi_1 is orthogonal to dU/dxi at xi={xi} (<psi_1, dU/dxi> = {norm:.3e})")
    factor = float(np.interp(xi, spec.nodes, psi)) / norm
    if factor == 0.0:
        return SignedLog.zero()
    return member.level_difference.scaled(math.log(abs(factor)), 1 if factor > 0 else -1)


def _derivative_at_star(spec: ProblemSpec, mode: str) -> float:
    """theta'(xi*) by central differences with step 1e-3 ell."""
    xi_star = steady_interface(spec)
    step = RATE_STEP * spec.ell
    behind = theta(spec, xi_star - step, mode)
    ahead = theta(spec, xi_star + step, mode)
    if behind.sign > 0 and ahead.sign < 0:
        return -math.exp(np.logaddexp(behind.log_abs, ahead.log_abs)) / (2.0 * step)
    return (ahead.value - behind.value) / (2.0 * step)


def decay_rate(spec: ProblemSpec, mode: str = "accurate") -> float:
    """
    Linearized decay rate beta = -theta'(xi*).

    Args:
        spec: Problem instance
        mode: "accurate" or "fast"

    Returns:
        float: beta > 0

    Raises:
        HypothesisError: If beta <= 0
    """
    beta = -_derivative_at_star(spec, mode)
    if not beta > 0.0:
        logger.error("Nonpositive decay rate", extra={"epsilon": spec.epsilon, "beta": beta})
        raise HypothesisError(f"Decay rate beta={beta:.3e} is not positive; theta is not dissipative at xi*")
    logger.info("Decay rate computed", extra={"epsilon": spec.epsilon, "beta": beta, "mode": mode})
    return beta


def default_xi_grid(spec: ProblemSpec, n_xi: int = 41) -> np.ndarray:
    """n_xi interior points of the admissible band."""
    lo, hi = spec.band
    return np.linspace(lo, hi, n_xi + 2)[1:-1]


def speed_map(spec: ProblemSpec, xi_grid: Optional[np.ndarray] = None, mode: str = "accurate") -> SpeedMap:
    """
    theta over a grid of interface positions.

    Args:
        spec: Problem instance
        xi_grid: Interface positions; defaults to 41 interior points of the band
        mode: "accurate" or "fast"

    Returns:
        SpeedMap: Signs and ln magnitudes of theta with theta'(xi*)
    """
    grid = default_xi_grid(spec) if xi_grid is None else np.asarray(xi_grid, dtype=float)
    values = [theta(spec, float(xi), mode) for xi in grid]
    result = SpeedMap(
        xi_grid=frozen_array(grid),
        theta_sign=frozen_array([v.sign for v in values]),
        theta_log=frozen_array([v.log_abs for v in values]),
        theta_prime_at_star=_derivative_at_star(spec, mode),
        xi_star=steady_interface(spec),
        mode=mode,
    )
    if not result.dissipative:
        logger.warning(
            "Speed map violates sign dissipativity",
            extra={"epsilon": spec.epsilon, "violations": result.violations()},
        )
    return result


def _output_times(horizon: float, n_times: int) -> np.ndarray:
    if horizon <= 0.0:
        return np.zeros(1)
    return np.concatenate(([0.0], np.geomspace(horizon * 1e-6, horizon, n_times)))


def _rate_profile(spec: ProblemSpec, xi_star: float, side: int, d0: float, beta: float, mode: str) -> CubicSpline:
    """Spline of ln R(d) on [0, d0], R(d) = -side theta(xi* + side d) / d, R(0) = beta."""
    count = max(9, int(math.ceil(4.0 * d0 / spec.epsilon)) + 1)
    mesh = np.linspace(0.0, d0, count)
    log_rate = np.empty(count)
    log_rate[0] = math.log(beta)
    for i, d in enumerate(mesh[1:], start=1):
        value = theta(spec, xi_star + side * d, mode)
        if value.sign != -side:
            raise HypothesisError(
                f"theta has the wrong sign at xi={xi_star + side * d:.6g}; the interface would recede from xi*"
            )
        log_rate[i] = value.log_abs - math.log(d)
    return CubicSpline(mesh, log_rate)


def integrate_interface(
    spec: ProblemSpec,
    xi0: float,
    t_end: Optional[float] = None,
    target_xi: Optional[float] = None,
    n_times: int = 200,
    mode: str = "accurate",
) -> InterfaceTrajectory:
    """
    Reduced interface motion d xi / dt = theta(xi) from xi0.

    Without t_end and target_xi the trajectory runs until |xi - xi*| = 1e-6 ell.
    Below that distance the motion continues as d0' e^{-beta (t - t')}.

    Args:
        spec: Problem instance
        xi0: Initial position inside the admissible band
        t_end: Final time
        target_xi: Stop when the interface reaches this position
        n_times: Number of output times after t = 0 (log-spaced)
        mode: "accurate" or "fast"

    Returns:
        InterfaceTrajectory: Samples at t = 0 and n_times log-spaced times

    Raises:
        MonotonicityError: If target_xi lies beyond xi* or behind xi0
        HypothesisError: If theta is not dissipative along the path
    """
    spec.check_xi(xi0)
    xi_star = steady_interface(spec)
    d0 = abs(xi0 - xi_star)
    side = 1 if xi0 > xi_star else -1
    d_stop = min(STOP_DISTANCE * spec.ell, 0.5 * d0)

    if target_xi is not None:
        if (target_xi - xi_star) * side < 0.0:
            raise MonotonicityError(f"target_xi={target_xi} lies beyond xi*={xi_star:.6g}; trajectories cannot cross it")
        if abs(target_xi - xi_star) > d0:
            raise MonotonicityError(f"target_xi={target_xi} lies behind xi0={xi0}; trajectories approach xi*")

    if d0 <= 1e-12 * spec.ell:
        times = _output_times(1.0 if t_end is None else t_end, n_times)
        return InterfaceTrajectory(
            times=frozen_array(times),
            xi=frozen_array(np.full(len(times), xi0)),
            provenance="reduced",
            xi_star=xi_star,
            xi0=xi0,
        )

    beta = decay_rate(spec, mode)
    spline = _rate_profile(spec, xi_star, side, d0, beta, mode)
    z = np.linspace(math.log(d0), math.log(d_stop), QUADRATURE_POINTS)
    inverse_rate = np.exp(-spline(np.exp(z)))
    # z decreases along the path, so the elapsed time is the integral over -z
    elapsed = cumulative_simpson(inverse_rate, x=-z, initial=0.0)
    t_stop = float(elapsed[-1])

    def time_of(d: float) -> float:
        if d >= d_stop:
            return float(np.interp(-math.log(d), -z, elapsed))
        return t_stop + math.log(d_stop / d) / beta

    def distance_at(t: np.ndarray) -> np.ndarray:
        inside = np.exp(np.interp(t, elapsed, z))
        tail = d_stop * np.exp(-beta * (t - t_stop))
        return np.where(t <= t_stop, inside, tail)

    if target_xi is not None:
        horizon = time_of(max(abs(target_xi - xi_star), 1e-300))
    elif t_end is not None:
        horizon = t_end
    else:
        horizon = t_stop
    times = _output_times(horizon, n_times)
    distance = distance_at(times)
    distance[0] = d0
    xi = xi_star + side * distance
    trajectory = InterfaceTrajectory(
        times=frozen_array(times),
        xi=frozen_array(xi),
        provenance="reduced",
        xi_star=xi_star,
        xi0=xi0,
        beta_fit=fit_tail_rate(times, distance, d0),
    )
    logger.info(
        "Reduced trajectory integrated",
        extra={"epsilon": spec.epsilon, "xi0": xi0, "t_end": horizon, "beta": beta, "mode": mode},
    )
    return trajectory


def fit_tail_rate(times: np.ndarray, distance: np.ndarray, d0: float) -> Optional[float]:
    """Exponential rate of the samples with distance <= 0.1 d0 by a least-squares fit of ln d."""
    tail = (distance <= TAIL_FRACTION * d0) & (distance > 0.0)
    if np.count_nonzero(tail) < 3:
        return None
    fit = linregress(times[tail], np.log(distance[tail]))
    return float(-fit.slope)


def halving_time(trajectory: InterfaceTrajectory) -> Optional[float]:
    """
    First time at which |xi - xi*| falls to half its initial value.

    ln d is interpolated linearly in t between the bracketing samples.

    Returns:
        Optional[float]: The halving time, None if the trajectory never gets there
    """
    distance = trajectory.distance
    half = 0.5 * distance[0]
    below = np.flatnonzero(distance <= half)
    if below.size == 0 or distance[0] == 0.0:
        return None
    j = int(below[0])
    if j == 0:
        return 0.0
    t0, t1 = trajectory.times[j - 1], trajectory.times[j]
    l0, l1 = math.log(distance[j - 1]), math.log(distance[j])
    return float(t0 + (math.log(half) - l0) * (t1 - t0) / (l1 - l0))


def envelope_ratio(trajectory: InterfaceTrajectory, beta: float) -> Optional[float]:
    """
    Median of |xi(t) - xi*| / (|xi0 - xi*| e^{-beta t}) over the late-time samples.

    Late time means |xi - xi*| <= 0.1 |xi0 - xi*|.
    """
    distance = trajectory.distance
    d0 = distance[0]
    tail = (distance <= TAIL_FRACTION * d0) & (distance > 0.0)
    if not np.any(tail):
        return None
    log_ratio = np.log(distance[tail]) - math.log(d0) + beta * trajectory.times[tail]
    return float(np.exp(np.median(log_ratio)))
