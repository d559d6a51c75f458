"""
Steady Family Module.

This module builds the exact steady state and the one-parameter family of
approximate steady states U(.; xi), and evaluates the residual functionals.

Conservation kind: each branch solves eps a U' = f(U) - k. In the coordinate
b = int 1/a the branch ODE is autonomous, so its level is fixed by a scalar
integral equation

    eps * int_{u*}^{u_side} dU / (k - f(U)) = length of the branch in b,

solved for ln(k - f(u_side)) by a bracketed root finder. Profiles are then
integrated with classical RK4 outward from the match point.

Reaction kind (extension): each branch solves eps (a U')' = g(U) and is shot
from the match point on its slope constant p = a U'.
"""

import math
from functools import lru_cache
from typing import Callable, List, Tuple

import numpy as np
from scipy.integrate import quad
from scipy.optimize import bisect, brentq

from mfront.core.errors import AccuracyError, ConvergenceError, DomainError
from mfront.core.problem import b_at, b_profile, equilibrium_point, invert_b
from mfront.models.problem import ProblemSpec
from mfront.models.results import ApproxSteadyState, BranchLevel, ExactSteadyState, SignedLog, frozen_array
from mfront.utils.logger import get_logger

logger = get_logger()

QUAD_EPSREL = 1e-13
LEVEL_XTOL = 1e-13
TAIL_FRACTION = 1e-6
BOUNDARY_TOL = 1e-8
MAX_EXPANSIONS = 60


def _branch_integral(spec: ProblemSpec, side: str, log_gap: float) -> float:
    """
    Psi(delta) = int_0^W dw / (delta + D(w)), delta = e^{log_gap}.

    D(w) = f(u_side) - f(u_side -+ w) is the flux drop measured from the
    boundary state. The integral is taken in tau = ln w; below w_a the
    integrand is 1/(delta + |f'| w) to relative order 1e-6 and is integrated
    in closed form.
    """
    flux = spec.flux
    if side == "minus":
        u_ref, direction, span = flux.u_minus, -1.0, flux.u_minus - flux.u_star
    else:
        u_ref, direction, span = flux.u_plus, 1.0, flux.u_star - flux.u_plus
    delta = math.exp(log_gap)
    if delta == 0.0:
        raise ConvergenceError(f"Branch level gap underflows (log gap {log_gap:.6g}); epsilon too small")
    slope = abs(float(flux.df(u_ref)))
    w_a = min(span, TAIL_FRACTION * delta / slope)
    tail = math.log1p(slope * w_a / delta) / slope
    if w_a >= span:
        return tail

    def integrand(tau: float) -> float:
        w = math.exp(tau)
        return w / (delta + float(flux.drop(u_ref, direction * w)))

    lo, hi = math.log(w_a), math.log(span)
    knee = math.log(delta / slope)
    points = [knee] if lo < knee < hi else None
    value, _ = quad(integrand, lo, hi, points=points, epsabs=0.0, epsrel=QUAD_EPSREL, limit=400)
    return tail + value


def _solve_log_gap(residual: Callable[[float], float], guess: float, label: str) -> float:
    """
    Root of a decreasing function of the log gap, bracketed by exponential expansion.

    Raises:
        ConvergenceError: If no bracket is found
    """
    lo, hi = guess - 2.0, guess + 2.0
    step = 2.0
    for _ in range(MAX_EXPANSIONS):
        if residual(lo) > 0.0:
            break
        lo -= step
        step *= 2.0
    else:
        raise ConvergenceError(f"No bracket for the {label} level (lower side)")
    step = 2.0
    for _ in range(MAX_EXPANSIONS):
        if residual(hi) < 0.0:
            break
        hi += step
        step *= 2.0
    else:
        raise ConvergenceError(f"No bracket for the {label} level (upper side)")
    root, info = brentq(residual, lo, hi, xtol=LEVEL_XTOL, rtol=1e-15, maxiter=200, full_output=True)
    if not info.converged:
        raise ConvergenceError(f"Level solve for the {label} branch did not converge: {info.flag}")
    logger.debug("Branch level solved", extra={"branch": label, "log_gap": root, "iterations": info.iterations})
    return float(root)


def _initial_guess(spec: ProblemSpec, side: str, length: float) -> float:
    flux = spec.flux
    u_ref = flux.u_minus if side == "minus" else flux.u_plus
    slope = abs(float(flux.df(u_ref)))
    span = flux.u_minus - flux.u_star if side == "minus" else flux.u_star - flux.u_plus
    return math.log(slope * span) - slope * length / spec.epsilon


def _amplitude(spec: ProblemSpec, level_above_minus: float) -> float:
    """kappa: the root u > u* of f(u) = f(u_minus) + level_above_minus."""
    flux = spec.flux
    u_minus = flux.u_minus

    def rise(s: float) -> float:
        return -float(flux.drop(u_minus, s)) - level_above_minus

    if level_above_minus == 0.0:
        return u_minus
    if level_above_minus > 0.0:
        lo, hi = 0.0, max(1.0, abs(u_minus))
        for _ in range(MAX_EXPANSIONS):
            if rise(hi) > 0.0:
                break
            hi *= 2.0
        else:
            raise ConvergenceError("No bracket for the branch amplitude")
    else:
        lo, hi = flux.u_star - u_minus, 0.0
    return u_minus + brentq(rise, lo, hi, xtol=1e-300, rtol=1e-15, maxiter=200)


def _branch_level(spec: ProblemSpec, side: str, log_gap: float) -> BranchLevel:
    flux = spec.flux
    u_side = flux.u_minus if side == "minus" else flux.u_plus
    gap = math.exp(log_gap)
    above_minus = gap + (float(flux.f(u_side)) - float(flux.f(flux.u_minus)))
    return BranchLevel(
        log_gap=log_gap,
        level=float(flux.f(u_side)) + gap,
        amplitude=_amplitude(spec, above_minus),
    )


def solve_kappa_exact(spec: ProblemSpec) -> BranchLevel:
    """
    Level of the exact steady state, eps * Phi(k) = b(ell).

    Phi(k) = int_{u+}^{u-} ds / (k - f(s)) is strictly decreasing in k; the
    root is bracketed in ln(k - max f(u_pm)) and refined with Brent's method.

    Args:
        spec: Problem instance (conservation kind)

    Returns:
        BranchLevel: level k, its log gap and the amplitude kappa

    Raises:
        DomainError: For the reaction kind
        ConvergenceError: If no bracket is found
    """
    if spec.kind != "conservation":
        raise DomainError("solve_kappa_exact applies to the conservation kind")
    flux = spec.flux
    f_minus, f_plus = float(flux.f(flux.u_minus)), float(flux.f(flux.u_plus))
    f_max = max(f_minus, f_plus)
    offset_minus, offset_plus = f_max - f_minus, f_max - f_plus
    b_ell = float(b_profile(spec)[-1])
    eps = spec.epsilon

    def logs(eta: float) -> Tuple[float, float]:
        gap = math.exp(eta)
        return (
            eta if offset_minus == 0.0 else math.log(gap + offset_minus),
            eta if offset_plus == 0.0 else math.log(gap + offset_plus),
        )

    def residual(eta: float) -> float:
        eta_minus, eta_plus = logs(eta)
        total = _branch_integral(spec, "minus", eta_minus) + _branch_integral(spec, "plus", eta_plus)
        return eps * total - b_ell

    guess = min(_initial_guess(spec, "minus", 0.5 * b_ell), _initial_guess(spec, "plus", 0.5 * b_ell))
    eta = _solve_log_gap(residual, guess, "exact")
    level = _branch_level(spec, "minus", logs(eta)[0])
    logger.info(
        "Exact steady level solved",
        extra={"epsilon": eps, "log_gap": level.log_gap, "kappa": level.amplitude},
    )
    return level


def _rk4_path(rhs: Callable[[float], float], u0: float, b0: float, targets: np.ndarray) -> np.ndarray:
    """Classical RK4 for dU/db = rhs(U) from (b0, u0) through the targets in order."""
    out = np.empty(len(targets))
    u, b = u0, b0
    for i, bt in enumerate(targets):
        step = bt - b
        if step != 0.0:
            k1 = rhs(u)
            k2 = rhs(u + 0.5 * step * k1)
            k3 = rhs(u + 0.5 * step * k2)
            k4 = rhs(u + step * k3)
            u = u + step * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        out[i] = u
        b = bt
    return out


def _conservation_profile(
    spec: ProblemSpec, xi: float, gap_minus: float, gap_plus: float
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Assemble both branches from U(xi) = u* outward.

    Returns:
        Tuple[np.ndarray, np.ndarray]: profile and its x-derivative on the grid
    """
    flux = spec.flux
    eps = spec.epsilon
    u_minus, u_plus, u_star = flux.u_minus, flux.u_plus, flux.u_star
    drop = flux.drop
    nodes = spec.nodes
    b = b_profile(spec)
    b_xi = b_at(spec, xi)
    left = np.flatnonzero(nodes <= xi)[::-1]
    right = np.flatnonzero(nodes > xi)

    def rhs_minus(u: float) -> float:
        return -(gap_minus + drop(u_minus, u - u_minus)) / eps

    def rhs_plus(u: float) -> float:
        return -(gap_plus + drop(u_plus, u - u_plus)) / eps

    profile = np.empty(len(nodes))
    profile[left] = _rk4_path(rhs_minus, u_star, b_xi, b[left])
    profile[right] = _rk4_path(rhs_plus, u_star, b_xi, b[right])

    a = spec.diffusion.a(nodes)
    deriv = np.empty(len(nodes))
    u_left, u_right = profile[left], profile[right]
    deriv[left] = -(gap_minus + drop(u_minus, u_left - u_minus)) / (eps * a[left])
    deriv[right] = -(gap_plus + drop(u_plus, u_right - u_plus)) / (eps * a[right])
    return profile, deriv


def _boundary_residual(spec: ProblemSpec, profile: np.ndarray) -> float:
    flux = spec.flux
    residual = max(abs(profile[0] - flux.u_minus), abs(profile[-1] - flux.u_plus))
    if not residual <= BOUNDARY_TOL * flux.amplitude:
        logger.error(
            "Boundary residual exceeds tolerance",
            extra={"epsilon": spec.epsilon, "residual": residual, "n": spec.grid.n},
        )
        raise AccuracyError(
            f"Boundary residual {residual:.3e} exceeds {BOUNDARY_TOL:.0e}*(u_minus - u_plus); refine the grid"
        )
    return float(residual)


def _reaction_shoot_plan(spec: ProblemSpec, xi: float, side: str) -> List[Tuple[float, float, float, float]]:
    """Step sizes and a at (start, mid, end) of every RK4 step from xi to the boundary."""
    nodes = spec.nodes
    idx = np.flatnonzero(nodes <= xi)[::-1] if side == "minus" else np.flatnonzero(nodes > xi)
    points = np.concatenate(([xi], nodes[idx]))
    a = spec.diffusion.a
    a_pts = a(points)
    a_mid = a(0.5 * (points[1:] + points[:-1]))
    return [(float(points[i + 1] - points[i]), float(a_pts[i]), float(a_mid[i]), float(a_pts[i + 1]))
            for i in range(len(points) - 1)]


def _reaction_path(spec: ProblemSpec, plan, p0: float, side: str, record: bool = False):
    """
    RK4 for U' = p / a, p' = g(U) / eps from (u*, p0) along the plan.

    Returns the signed boundary miss (positive when the branch overshoots), or
    the recorded (U, p) samples when `record` is set.
    """
    flux = spec.flux
    g = flux.law.g
    eps = spec.epsilon
    target = flux.u_minus if side == "minus" else flux.u_plus
    orientation = 1.0 if side == "minus" else -1.0
    limit = abs(target - flux.u_star)
    u, p = flux.u_star, p0
    us, ps = [], []
    for step, a0, am, a1 in plan:
        k1u, k1p = p / a0, g(u) / eps
        u2, p2 = u + 0.5 * step * k1u, p + 0.5 * step * k1p
        k2u, k2p = p2 / am, g(u2) / eps
        u3, p3 = u + 0.5 * step * k2u, p + 0.5 * step * k2p
        k3u, k3p = p3 / am, g(u3) / eps
        u4, p4 = u + step * k3u, p + step * k3p
        k4u, k4p = p4 / a1, g(u4) / eps
        u = u + step * (k1u + 2.0 * k2u + 2.0 * k3u + k4u) / 6.0
        p = p + step * (k1p + 2.0 * k2p + 2.0 * k3p + k4p) / 6.0
        if record:
            us.append(u)
            ps.append(p)
            continue
        miss = orientation * (u - target)
        if not math.isfinite(u) or miss > limit:
            return 1.0
        if p >= 0.0:
            return -1.0
    if record:
        return np.array(us), np.array(ps)
    return orientation * (u - target)


def _shoot_reaction_branch(spec: ProblemSpec, xi: float, side: str) -> float:
    """
    Slope constant p = a U' at xi of the branch reaching the boundary state.

    Bisection on |p|: small slopes fall short, large slopes overshoot.
    """
    plan = _reaction_shoot_plan(spec, xi, side)
    flux = spec.flux
    target = flux.u_minus if side == "minus" else flux.u_plus
    potential, _ = quad(lambda s: flux.g(s), flux.u_star, target)
    guess = max(math.sqrt(2.0 * abs(potential) * float(spec.diffusion.a(xi)) / spec.epsilon), 1e-3)

    def miss(magnitude: float) -> float:
        return _reaction_path(spec, plan, -magnitude, side)

    hi = guess
    for _ in range(MAX_EXPANSIONS):
        if miss(hi) > 0.0:
            break
        hi *= 2.0
    else:
        raise ConvergenceError(f"No shooting bracket for the {side} reaction branch at xi={xi}")
    magnitude = bisect(miss, 0.0, hi, xtol=1e-15, rtol=1e-13, maxiter=200)
    return -float(magnitude)


def _reaction_member_data(spec: ProblemSpec, xi: float):
    p_minus = _shoot_reaction_branch(spec, xi, "minus")
    p_plus = _shoot_reaction_branch(spec, xi, "plus")
    nodes = spec.nodes
    profile = np.empty(len(nodes))
    slope = np.empty(len(nodes))
    for side, p0 in (("minus", p_minus), ("plus", p_plus)):
        idx = np.flatnonzero(nodes <= xi)[::-1] if side == "minus" else np.flatnonzero(nodes > xi)
        plan = _reaction_shoot_plan(spec, xi, side)
        us, ps = _reaction_path(spec, plan, p0, side, record=True)
        profile[idx], slope[idx] = us, ps
    deriv = slope / spec.diffusion.a(nodes)
    return p_minus, p_plus, profile, deriv


@lru_cache(maxsize=1024)
def build_approx_member(spec: ProblemSpec, xi: float) -> ApproxSteadyState:
    """
    Family member U(.; xi): two stationary branches matched at xi with U(xi) = u*.

    Args:
        spec: Problem instance
        xi: Interface parameter inside the admissible band

    Returns:
        ApproxSteadyState: Member with branch constants, profile and jump

    Raises:
        DomainError: If xi lies outside the admissible band
        ConvergenceError: If a branch constant cannot be bracketed
        AccuracyError: If the profile misses a boundary value
    """
    spec.check_xi(xi)
    eps = spec.epsilon
    a_xi = float(spec.diffusion.a(xi))
    try:
        if spec.kind == "conservation":
            b_xi = b_at(spec, xi)
            b_ell = float(b_profile(spec)[-1])

            def left(eta: float) -> float:
                return eps * _branch_integral(spec, "minus", eta) - b_xi

            def right(eta: float) -> float:
                return eps * _branch_integral(spec, "plus", eta) - (b_ell - b_xi)

            eta_minus = _solve_log_gap(left, _initial_guess(spec, "minus", b_xi), "left")
            eta_plus = _solve_log_gap(right, _initial_guess(spec, "plus", b_ell - b_xi), "right")
            branch_minus = _branch_level(spec, "minus", eta_minus)
            branch_plus = _branch_level(spec, "plus", eta_plus)
            flux = spec.flux
            mismatch = float(flux.f(flux.u_minus)) - float(flux.f(flux.u_plus))
            level_difference = SignedLog.exp_difference(eta_minus, eta_plus).plus(mismatch)
            profile, deriv = _conservation_profile(spec, xi, math.exp(eta_minus), math.exp(eta_plus))
            kappa_minus, kappa_plus = branch_minus.amplitude, branch_plus.amplitude
        else:
            branch_minus = branch_plus = None
            kappa_minus, kappa_plus, profile, deriv = _reaction_member_data(spec, xi)
            level_difference = SignedLog.of(eps * (kappa_plus - kappa_minus))
        residual = _boundary_residual(spec, profile)
    except Exception as e:
        logger.error(
            f"Error building family member: {str(e)}",
            extra={"epsilon": eps, "xi": xi},
        )
        raise

    jump = level_difference.scaled(-math.log(eps * a_xi))
    logger.debug(
        "Family member built",
        extra={"epsilon": eps, "xi": xi, "log_abs_jump": jump.log_abs, "jump_sign": jump.sign},
    )
    return ApproxSteadyState(
        spec=spec,
        xi=xi,
        match_point=xi,
        kappa_minus=kappa_minus,
        kappa_plus=kappa_plus,
        branch_minus=branch_minus,
        branch_plus=branch_plus,
        level_difference=level_difference,
        jump=jump,
        profile=frozen_array(profile),
        profile_deriv=frozen_array(deriv),
        boundary_residual=residual,
        extension=spec.is_extension,
    )


def _reaction_exact(spec: ProblemSpec) -> Tuple[float, ApproxSteadyState]:
    """The reaction-kind member with vanishing derivative jump, by bisection on xi."""
    lo, hi = spec.band
    pad = 1e-6 * spec.ell
    lo, hi = lo + pad, hi - pad

    def jump_of(xi: float) -> float:
        return build_approx_member(spec, xi).level_difference.value

    j_lo, j_hi = jump_of(lo), jump_of(hi)
    if j_lo == 0.0:
        return lo, build_approx_member(spec, lo)
    if j_hi == 0.0:
        return hi, build_approx_member(spec, hi)
    if j_lo * j_hi > 0.0:
        raise ConvergenceError("No sign change of the derivative jump across the admissible band")
    xi_star = float(bisect(jump_of, lo, hi, xtol=1e-10 * spec.ell, maxiter=200))
    return xi_star, build_approx_member(spec, xi_star)


@lru_cache(maxsize=256)
def build_exact_steady(spec: ProblemSpec) -> ExactSteadyState:
    """
    Exact steady state: both branches share one level, matched at their u*-crossing.

    Args:
        spec: Problem instance

    Returns:
        ExactSteadyState: Level, crossing, profile and derivative

    Raises:
        ConvergenceError: If the level cannot be bracketed
        AccuracyError: If the profile misses a boundary value by more than 1e-8 (u_minus - u_plus)
    """
    x_star = equilibrium_point(spec)
    if spec.kind == "reaction":
        xi_star, member = _reaction_exact(spec)
        return ExactSteadyState(
            kappa=member.kappa_minus,
            level=None,
            x_star=x_star,
            xi_star=xi_star,
            nodes=spec.nodes,
            profile=member.profile,
            profile_deriv=member.profile_deriv,
            boundary_residual=member.boundary_residual,
            extension=True,
        )

    level = solve_kappa_exact(spec)
    flux = spec.flux
    gap_minus = level.level - float(flux.f(flux.u_minus))
    gap_plus = level.level - float(flux.f(flux.u_plus))
    b_cross = spec.epsilon * _branch_integral(spec, "minus", math.log(gap_minus))
    xi_star = invert_b(spec, min(b_cross, float(b_profile(spec)[-1])))
    profile, deriv = _conservation_profile(spec, xi_star, gap_minus, gap_plus)
    residual = _boundary_residual(spec, profile)
    logger.info(
        "Exact steady state built",
        extra={"epsilon": spec.epsilon, "xi_star": xi_star, "x_star": x_star, "kappa": level.amplitude},
    )
    return ExactSteadyState(
        kappa=level.amplitude,
        level=level,
        x_star=x_star,
        xi_star=xi_star,
        nodes=spec.nodes,
        profile=frozen_array(profile),
        profile_deriv=frozen_array(deriv),
        boundary_residual=residual,
    )


def steady_interface(spec: ProblemSpec) -> float:
    """Equilibrium interface xi*, the u*-crossing of the exact steady state."""
    return build_exact_steady(spec).xi_star


def omega_residual(member: ApproxSteadyState) -> SignedLog:
    """
    Mass of the residual P[U(.; xi)] = eps a(xi) [[U_x]] delta_xi.

    Returns:
        SignedLog: Omega(xi) = eps a(xi) |[[U_x]]| as (sign, ln magnitude)
    """
    return member.level_difference.magnitude()


def omega_asymptotic(spec: ProblemSpec, xi: float) -> SignedLog:
    """
    Leading-order residual of a member, for quadratic-like fluxes.

    Each branch of b-length L has level gap (2 m^2 / f'') e^{-m L / eps} with
    m = |f'(u_side)|; the residual is the difference of the two gaps.
    """
    flux = spec.flux
    eps = spec.epsilon
    b_xi = b_at(spec, xi)
    b_ell = float(b_profile(spec)[-1])
    m_minus, m_plus = abs(float(flux.df(flux.u_minus))), abs(float(flux.df(flux.u_plus)))
    log_minus = math.log(2.0 * m_minus ** 2 / float(flux.d2f(flux.u_minus))) - m_minus * b_xi / eps
    log_plus = math.log(2.0 * m_plus ** 2 / float(flux.d2f(flux.u_plus))) - m_plus * (b_ell - b_xi) / eps
    return SignedLog.exp_difference(log_minus, log_plus).magnitude()


def family_derivative(spec: ProblemSpec, xi: float) -> np.ndarray:
    """
    d U(.; xi) / d xi by central differences, step max(1e-6, 1e-4 eps).

    Raises:
        DomainError: If xi +- step leaves the admissible band
    """
    step = max(1e-6, 1e-4 * spec.epsilon)
    spec.check_xi(xi - step)
    spec.check_xi(xi + step)
    ahead = build_approx_member(spec, xi + step).profile
    behind = build_approx_member(spec, xi - step).profile
    return (ahead - behind) / (2.0 * step)
