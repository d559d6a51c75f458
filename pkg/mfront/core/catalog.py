"""
Function Catalog Module.

Named builtin definitions for the diffusion coefficient a(x), the convex flux
f(u) and the bistable reaction g(u). Configs select an entry by name and pass
numeric parameters only, so a config never carries code.
"""

from functools import lru_cache
from typing import Any, Callable, Dict, Mapping, Optional, Tuple

import numpy as np
from numpy.polynomial import Polynomial
from scipy.optimize import brentq

from mfront.core.errors import ConfigError

FrozenParams = Tuple[Tuple[str, Any], ...]


def freeze_params(params: Optional[Mapping[str, Any]]) -> FrozenParams:
    """Turn a parameter mapping into a hashable, order-independent key."""
    if not params:
        return ()
    frozen = []
    for key, value in sorted(params.items()):
        if isinstance(value, (list, tuple)):
            value = tuple(float(v) for v in value)
        frozen.append((key, value))
    return tuple(frozen)


def _take(params: Dict[str, Any], name: str, allowed: Tuple[str, ...]) -> Dict[str, Any]:
    unknown = set(params) - set(allowed)
    if unknown:
        raise ConfigError(
            f"Unknown parameter(s) {sorted(unknown)} for catalog entry '{name}'; allowed: {list(allowed)}"
        )
    return params


class DiffusionLaw:
    """
    A diffusion coefficient a(x) together with its derivative.

    Attributes:
        name (str): Catalog entry name
        a (Callable): x -> a(x), vectorized
        a_prime (Callable): x -> a'(x), vectorized
    """

    def __init__(self, name: str, a: Callable, a_prime: Callable):
        self.name = name
        self.a = a
        self.a_prime = a_prime


class FluxLaw:
    """
    A convex flux f with derivatives and a cancellation-free drop function.

    `drop(u_ref, step)` returns f(u_ref) - f(u_ref + step). Near a boundary
    state the difference is far below the rounding level of f itself, so laws
    with a closed form supply it directly.
    """

    kind = "conservation"

    def __init__(
        self,
        name: str,
        f: Callable,
        df: Callable,
        d2f: Callable,
        u_star: float,
        drop: Optional[Callable] = None,
        rh_partner: Optional[Callable[[float], float]] = None,
    ):
        self.name = name
        self.f = f
        self.df = df
        self.d2f = d2f
        self.u_star = u_star
        self._drop = drop
        self._rh_partner = rh_partner

    def drop(self, u_ref: float, step):
        if self._drop is not None:
            return self._drop(u_ref, step)
        step = np.asarray(step, dtype=float)
        taylor = -self.df(u_ref) * step - 0.5 * self.d2f(u_ref) * step ** 2
        direct = self.f(u_ref) - self.f(u_ref + step)
        return np.where(np.abs(step) < 1e-6, taylor, direct)

    def rh_partner(self, u_minus: float) -> float:
        """The state u_+ < u* with f(u_+) = f(u_-)."""
        if self._rh_partner is not None:
            return self._rh_partner(u_minus)
        target = self.f(u_minus)
        width = max(1.0, abs(u_minus - self.u_star))
        for _ in range(60):
            lo = self.u_star - width
            if self.f(lo) >= target:
                return brentq(lambda u: self.f(u) - target, lo, self.u_star, xtol=1e-15, rtol=1e-15)
            width *= 2.0
        raise ConfigError(f"No Rankine-Hugoniot partner for u_minus={u_minus} with flux '{self.name}'")


class ReactionLaw:
    """
    A bistable reaction g with derivative and middle zero u*.
    """

    kind = "reaction"

    def __init__(self, name: str, g: Callable, dg: Callable, u_star: float, default_states: Tuple[float, float]):
        self.name = name
        self.g = g
        self.dg = dg
        self.u_star = u_star
        self.default_states = default_states


def _constant(params):
    value = float(_take(params, "constant", ("value",)).get("value", 1.0))
    return DiffusionLaw(
        "constant",
        lambda x: value * np.ones_like(np.asarray(x, dtype=float)),
        lambda x: np.zeros_like(np.asarray(x, dtype=float)),
    )


def _exponential_diffusion(params):
    params = _take(params, "exponential", ("scale", "rate"))
    scale = float(params.get("scale", 1.0))
    rate = float(params.get("rate", 1.0))
    return DiffusionLaw(
        "exponential",
        lambda x: scale * np.exp(rate * np.asarray(x, dtype=float)),
        lambda x: rate * scale * np.exp(rate * np.asarray(x, dtype=float)),
    )


def _polynomial(params):
    params = _take(params, "polynomial", ("coeffs",))
    coeffs = params.get("coeffs")
    if not coeffs:
        raise ConfigError("Catalog entry 'polynomial' needs non-empty 'coeffs' (ascending powers)")
    p = Polynomial(coeffs)
    dp = p.deriv()
    return DiffusionLaw("polynomial", lambda x: p(np.asarray(x, dtype=float)), lambda x: dp(np.asarray(x, dtype=float)))


def _rational(params):
    params = _take(params, "rational", ("num", "den"))
    if not params.get("num") or not params.get("den"):
        raise ConfigError("Catalog entry 'rational' needs 'num' and 'den' coefficient lists")
    p, q = Polynomial(params["num"]), Polynomial(params["den"])
    dp, dq = p.deriv(), q.deriv()

    def a(x):
        x = np.asarray(x, dtype=float)
        return p(x) / q(x)

    def a_prime(x):
        x = np.asarray(x, dtype=float)
        return (dp(x) * q(x) - p(x) * dq(x)) / q(x) ** 2

    return DiffusionLaw("rational", a, a_prime)


def _quadratic_flux(name: str, curvature: float, center: float, offset: float) -> FluxLaw:
    c, uc = curvature, center

    def drop(u_ref, step):
        return -c * (u_ref - uc) * step - 0.5 * c * step * step

    return FluxLaw(
        name,
        f=lambda u: 0.5 * c * (u - uc) ** 2 + offset,
        df=lambda u: c * (u - uc),
        d2f=lambda u: c + 0.0 * np.asarray(u, dtype=float),
        u_star=uc,
        drop=drop,
        rh_partner=lambda u_minus: 2.0 * uc - u_minus,
    )


def _burgers(params):
    params = _take(params, "burgers", ("scale",))
    return _quadratic_flux("burgers", float(params.get("scale", 1.0)), 0.0, 0.0)


def _quadratic(params):
    params = _take(params, "quadratic", ("curvature", "center", "offset"))
    curvature = float(params.get("curvature", 1.0))
    if curvature <= 0:
        raise ConfigError("Catalog entry 'quadratic' needs curvature > 0")
    return _quadratic_flux("quadratic", curvature, float(params.get("center", 0.0)), float(params.get("offset", 0.0)))


def _exponential_flux(params):
    params = _take(params, "exponential", ("rate",))
    r = float(params.get("rate", 1.0))
    if r == 0:
        raise ConfigError("Catalog entry 'exponential' flux needs rate != 0")

    def drop(u_ref, step):
        step = np.asarray(step, dtype=float)
        return -(np.exp(r * u_ref) * np.expm1(r * step) - r * step) / r ** 2

    return FluxLaw(
        "exponential",
        f=lambda u: (np.expm1(r * np.asarray(u, dtype=float)) - r * np.asarray(u, dtype=float)) / r ** 2,
        df=lambda u: np.expm1(r * np.asarray(u, dtype=float)) / r,
        d2f=lambda u: np.exp(r * np.asarray(u, dtype=float)),
        u_star=0.0,
        drop=drop,
    )


def _allen_cahn(params):
    params = _take(params, "allen_cahn", ("scale",))
    s = float(params.get("scale", 1.0))
    return ReactionLaw(
        "allen_cahn",
        g=lambda u: s * (u ** 3 - u),
        dg=lambda u: s * (3.0 * u ** 2 - 1.0),
        u_star=0.0,
        default_states=(1.0, -1.0),
    )


def _bistable_cubic(params):
    params = _take(params, "bistable_cubic", ("middle", "scale"))
    m = float(params.get("middle", 0.0))
    s = float(params.get("scale", 1.0))
    if not -1.0 < m < 1.0:
        raise ConfigError("Catalog entry 'bistable_cubic' needs -1 < middle < 1")
    return ReactionLaw(
        "bistable_cubic",
        g=lambda u: s * (u ** 2 - 1.0) * (u - m),
        dg=lambda u: s * (2.0 * u * (u - m) + u ** 2 - 1.0),
        u_star=m,
        default_states=(1.0, -1.0),
    )


DIFFUSION_CATALOG: Dict[str, Callable[[Dict[str, Any]], DiffusionLaw]] = {
    "constant": _constant,
    "exponential": _exponential_diffusion,
    "polynomial": _polynomial,
    "rational": _rational,
}

FLUX_CATALOG: Dict[str, Callable[[Dict[str, Any]], Any]] = {
    "burgers": _burgers,
    "quadratic": _quadratic,
    "exponential": _exponential_flux,
    "allen_cahn": _allen_cahn,
    "bistable_cubic": _bistable_cubic,
}


@lru_cache(maxsize=None)
def diffusion_law(name: str, params: FrozenParams = ()) -> DiffusionLaw:
    """
    Resolve a diffusion coefficient from the catalog.

    Args:
        name: Catalog entry
        params: Frozen parameters (see freeze_params)

    Returns:
        DiffusionLaw: The resolved law

    Raises:
        ConfigError: Unknown entry or parameters
    """
    try:
        factory = DIFFUSION_CATALOG[name]
    except KeyError:
        raise ConfigError(f"Unknown diffusion '{name}'; known: {sorted(DIFFUSION_CATALOG)}") from None
    return factory(dict(params))


@lru_cache(maxsize=None)
def flux_law(name: str, params: FrozenParams = ()):
    """
    Resolve a flux (conservation kind) or reaction (reaction kind) from the catalog.

    Args:
        name: Catalog entry
        params: Frozen parameters (see freeze_params)

    Returns:
        FluxLaw | ReactionLaw: The resolved law

    Raises:
        ConfigError: Unknown entry or parameters
    """
    try:
        factory = FLUX_CATALOG[name]
    except KeyError:
        raise ConfigError(f"Unknown flux '{name}'; known: {sorted(FLUX_CATALOG)}") from None
    return factory(dict(params))
