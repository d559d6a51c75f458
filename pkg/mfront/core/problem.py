"""
Problem Core Module.

This module builds problem instances from configs and provides the primitive
integrals every other module consumes: the diffusion-weighted coordinate
b(x) = int_{-ell}^{x} 1/a, the equilibrium abscissa, and the hypothesis report.
"""

from functools import lru_cache
from typing import List, Optional

import numpy as np
from scipy.integrate import cumulative_simpson, simpson
from scipy.optimize import bisect

from mfront.core.catalog import FluxLaw, ReactionLaw, diffusion_law, flux_law, freeze_params
from mfront.core.errors import ConfigError, DomainError, HypothesisError
from mfront.models.config import ProblemConfig
from mfront.models.problem import (
    DiffusionCoefficient,
    FluxSpec,
    Grid1D,
    HypothesisCheck,
    HypothesisReport,
    ProblemSpec,
)
from mfront.utils.logger import get_logger

logger = get_logger()

RH_TOLERANCE = 1e-12
RESOLUTION_LAYERS = 5.0


def b_integral(spec: ProblemSpec, x: float) -> float:
    """
    Diffusion-weighted coordinate b(x) = int_{-ell}^{x} dt / a(t).

    Composite Simpson rule on as many equispaced points of [-ell, x] as the
    grid has nodes.

    Args:
        spec: Problem instance
        x: Abscissa in [-ell, ell]

    Returns:
        float: b(x), with b(-ell) = 0

    Raises:
        DomainError: If x lies outside [-ell, ell]
    """
    ell = spec.ell
    slack = 1e-12 * ell
    if not -ell - slack <= x <= ell + slack:
        raise DomainError(f"x={x} outside [-{ell}, {ell}]")
    x = min(max(x, -ell), ell)
    if x == -ell:
        return 0.0
    t = np.linspace(-ell, x, spec.grid.n)
    return float(simpson(1.0 / spec.diffusion.a(t), x=t))


@lru_cache(maxsize=256)
def b_profile(spec: ProblemSpec) -> np.ndarray:
    """
    Samples of b at every grid node (cumulative Simpson).

    Returns:
        np.ndarray: Read-only array with b[0] = 0
    """
    x = spec.nodes
    with np.errstate(divide="ignore", invalid="ignore"):
        b = cumulative_simpson(1.0 / spec.diffusion.a(x), x=x, initial=0.0)
    b.setflags(write=False)
    return b


def b_at(spec: ProblemSpec, x: float) -> float:
    """
    b at an arbitrary abscissa: nodal value plus a three-point Simpson panel.
    """
    nodes = spec.nodes
    j = int(np.clip(np.searchsorted(nodes, x, side="right") - 1, 0, len(nodes) - 1))
    xj = nodes[j]
    if x == xj:
        return float(b_profile(spec)[j])
    mid = 0.5 * (xj + x)
    a = spec.diffusion.a
    panel = (x - xj) / 6.0 * (1.0 / a(xj) + 4.0 / a(mid) + 1.0 / a(x))
    return float(b_profile(spec)[j] + panel)


def invert_b(spec: ProblemSpec, target: float) -> float:
    """
    Abscissa x with b(x) = target, by bisection between bracketing nodes.

    Raises:
        DomainError: If target lies outside [0, b(ell)]
    """
    b = b_profile(spec)
    nodes = spec.nodes
    if not 0.0 <= target <= b[-1]:
        raise DomainError(f"b-target {target} outside [0, {b[-1]}]")
    j = int(np.clip(np.searchsorted(b, target) - 1, 0, len(nodes) - 2))
    lo, hi = nodes[j], nodes[j + 1]
    f_lo = b_at(spec, lo) - target
    f_hi = b_at(spec, hi) - target
    if f_lo == 0.0:
        return float(lo)
    if f_hi == 0.0:
        return float(hi)
    return float(bisect(lambda x: b_at(spec, x) - target, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200))


def equilibrium_point(spec: ProblemSpec) -> float:
    """
    Interface position of the exact steady state, the zero of b(x) - b(ell)/2.

    Args:
        spec: Problem instance

    Returns:
        float: x* with |b(x*) - b(ell)/2| <= 1e-10 b(ell)

    Raises:
        HypothesisError: If b(x) - b(ell)/2 does not change sign exactly once
    """
    b = b_profile(spec)
    half = 0.5 * b_integral(spec, spec.ell)
    residual = b - half
    if not np.all(np.isfinite(residual)):
        raise HypothesisError("No unique steady state: b(x) is not finite on the grid")
    positive = residual > 0.0
    changes = np.flatnonzero(positive[:-1] != positive[1:])
    if len(changes) != 1:
        raise HypothesisError(
            f"No unique steady state: b(x) - b(ell)/2 changes sign {len(changes)} times"
        )
    j = int(changes[0])
    nodes = spec.nodes
    x_star = bisect(
        lambda x: b_integral(spec, x) - half,
        nodes[j],
        nodes[j + 1],
        xtol=1e-14,
        rtol=1e-15,
        maxiter=200,
    )
    logger.debug("Equilibrium point located", extra={"x_star": x_star, "epsilon": spec.epsilon})
    return float(x_star)


def _resolution_check(spec: ProblemSpec, center: float) -> HypothesisCheck:
    nodes = spec.nodes
    eps = spec.epsilon
    near = np.abs(0.5 * (nodes[1:] + nodes[:-1]) - center) <= RESOLUTION_LAYERS * eps
    spacing = spec.grid.spacing
    width = float(spacing[near].max()) if np.any(near) else float(spacing.max())
    return HypothesisCheck.measure(
        "resolution",
        eps / 10.0 - width,
        value=width,
        threshold=eps / 10.0,
        detail="cell width near the interface should not exceed epsilon/10",
        soft=True,
    )


def validate_hypotheses(spec: ProblemSpec) -> HypothesisReport:
    """
    Check the structural hypotheses of a problem instance.

    Args:
        spec: Problem instance

    Returns:
        HypothesisReport: One entry per hypothesis with its measured margin;
        failures are carried in the report, never raised
    """
    nodes = spec.nodes
    a_values = spec.diffusion.a(nodes)
    a_prime_values = spec.diffusion.a_prime(nodes)
    flux = spec.flux
    u_minus, u_plus, u_star = flux.u_minus, flux.u_plus, flux.u_star
    checks: List[HypothesisCheck] = [
        HypothesisCheck.measure(
            "ellipticity",
            float(np.min(a_values)),
            value=float(np.min(a_values)),
            threshold=0.0,
            detail=f"alpha={np.min(a_values):.6g} <= a(x) <= beta={np.max(a_values):.6g}",
        ),
        HypothesisCheck.measure(
            "a_prime_bounded",
            1.0 if np.all(np.isfinite(a_prime_values)) else -1.0,
            value=float(np.max(np.abs(a_prime_values))),
            detail="a' finite at every node",
        ),
        HypothesisCheck.measure(
            "boundary_order",
            u_minus - u_plus,
            value=u_minus - u_plus,
            threshold=0.0,
            detail="u_minus > u_plus",
        ),
        HypothesisCheck.measure(
            "critical_value_between",
            min(u_minus - u_star, u_star - u_plus),
            value=u_star,
            detail="u_plus < u* < u_minus",
        ),
    ]

    if spec.kind == "conservation":
        samples = np.linspace(min(u_plus, u_minus), max(u_plus, u_minus), 201)
        curvature = float(np.min(flux.d2f(samples)))
        rh_gap = abs(flux.f(u_plus) - flux.f(u_minus))
        rh_tol = RH_TOLERANCE * max(1.0, abs(flux.f(u_minus)))
        checks += [
            HypothesisCheck.measure(
                "convexity", curvature, value=curvature, threshold=0.0, detail="f'' >= c0 > 0 on [u_plus, u_minus]"
            ),
            HypothesisCheck.measure(
                "rankine_hugoniot",
                rh_tol - rh_gap,
                value=rh_gap,
                threshold=rh_tol,
                detail="f(u_plus) = f(u_minus)",
            ),
            HypothesisCheck.measure(
                "characteristic_signs",
                min(-flux.df(u_plus), flux.df(u_minus)),
                value=min(-flux.df(u_plus), flux.df(u_minus)),
                threshold=0.0,
                detail="f'(u_plus) < 0 < f'(u_minus)",
            ),
        ]
        try:
            checks.append(_resolution_check(spec, equilibrium_point(spec)))
        except HypothesisError as exc:
            checks.append(HypothesisCheck(name="unique_steady_state", status="fail", detail=str(exc)))
    else:
        g_gap = max(abs(flux.g(u_minus)), abs(flux.g(u_plus)), abs(flux.g(u_star)))
        checks += [
            HypothesisCheck.measure(
                "reaction_zeros",
                RH_TOLERANCE - g_gap,
                value=g_gap,
                threshold=RH_TOLERANCE,
                detail="g(u_minus) = g(u*) = g(u_plus) = 0",
            ),
            HypothesisCheck.measure(
                "stable_states",
                min(flux.dg(u_minus), flux.dg(u_plus)),
                value=min(flux.dg(u_minus), flux.dg(u_plus)),
                threshold=0.0,
                detail="g'(u_minus) > 0 and g'(u_plus) > 0",
            ),
            HypothesisCheck.measure(
                "unstable_middle",
                -flux.dg(u_star),
                value=flux.dg(u_star),
                threshold=0.0,
                detail="g'(u*) < 0",
            ),
            _resolution_check(spec, 0.0),
        ]

    notes = []
    if flux.shift != 0.0:
        notes.append(f"flux shifted by f(u*)={flux.shift:.17g} so that f(u*) = 0")
    if spec.is_extension:
        notes.append("reaction family: translated layer construction (extension)")
    return HypothesisReport(checks=checks, flux_shift=flux.shift, notes=notes)


def build_problem(
    config: ProblemConfig,
    epsilon: Optional[float] = None,
    check: bool = True,
) -> ProblemSpec:
    """
    Build a problem instance from the problem block of a config.

    Args:
        config: Problem block
        epsilon: Viscosity; defaults to the first configured value
        check: Raise when a hypothesis fails

    Returns:
        ProblemSpec: The frozen instance

    Raises:
        ConfigError: If the catalog selection is inconsistent
        HypothesisError: If check is set and a hypothesis fails
    """
    eps = config.epsilons[0] if epsilon is None else float(epsilon)
    grid = Grid1D(
        ell=config.ell,
        n=config.n,
        kind=config.grid.kind,
        center=config.grid.center,
        stretch=config.grid.stretch,
    )
    d_params = freeze_params(config.diffusion.params)
    f_params = freeze_params(config.flux.params)
    diffusion_law(config.diffusion.name, d_params)
    law = flux_law(config.flux.name, f_params)

    if isinstance(law, ReactionLaw):
        u_minus = law.default_states[0] if config.u_minus is None else config.u_minus
        u_plus = law.default_states[1] if config.u_plus is None else config.u_plus
        flux = FluxSpec(
            kind="reaction", name=config.flux.name, params=f_params,
            u_minus=u_minus, u_plus=u_plus, u_star=law.u_star,
        )
    elif isinstance(law, FluxLaw):
        if config.u_minus is None:
            raise ConfigError(f"Flux '{config.flux.name}' needs u_minus")
        u_minus = config.u_minus
        u_plus = law.rh_partner(u_minus) if config.u_plus is None else config.u_plus
        flux = FluxSpec(
            kind="conservation", name=config.flux.name, params=f_params,
            u_minus=u_minus, u_plus=u_plus, u_star=law.u_star,
            shift=float(law.f(law.u_star)),
        )
    else:
        raise ConfigError(f"Catalog entry '{config.flux.name}' is neither a flux nor a reaction")

    spec = ProblemSpec(
        epsilon=eps,
        grid=grid,
        diffusion=DiffusionCoefficient.on_grid(config.diffusion.name, d_params, grid.nodes),
        flux=flux,
        delta_band=config.delta_band,
    )
    report = validate_hypotheses(spec)
    for warning in (c for c in report.checks if c.status == "warn"):
        logger.warning(
            f"Soft hypothesis not met: {warning.name}",
            extra={"epsilon": eps, "value": warning.value, "threshold": warning.threshold},
        )
    if check and not report.passed:
        names = ", ".join(c.name for c in report.failures())
        logger.error(f"Hypotheses failed: {names}", extra={"epsilon": eps})
        raise HypothesisError(f"Hypotheses failed: {names}", report)
    return spec


def hyperbolic_profile(spec: ProblemSpec, xi: float) -> np.ndarray:
    """The inviscid standing shock u_minus on (-ell, xi), u_plus on (xi, ell)."""
    x = spec.nodes
    return np.where(x < xi, spec.flux.u_minus, spec.flux.u_plus).astype(float)


def smoothed_step(spec: ProblemSpec, xi: float, width: float) -> np.ndarray:
    """
    Riemann-like initial datum: a tanh step of the given width centered at xi,
    with the boundary values pinned.
    """
    x = spec.nodes
    u_minus, u_plus = spec.flux.u_minus, spec.flux.u_plus
    u = 0.5 * (u_minus + u_plus) - 0.5 * (u_minus - u_plus) * np.tanh((x - xi) / width)
    u[0], u[-1] = u_minus, u_plus
    return u
