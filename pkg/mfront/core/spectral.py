"""
Spectral Module.

This module discretizes the operator obtained by linearizing about a family
member, symmetrizes it, and computes its leading eigenpairs.

Conservation kind: L v = eps (a v')' - (f'(U) v)'. Reaction kind:
L v = eps (a v')' - g'(U) v. Both are discretized by finite volumes on the
node-centered cells of the grid, with the Dirichlet rows eliminated.

The discrete L is similar to a symmetric tridiagonal matrix through a diagonal
D, N = eps D^-1 L D, so sigma(N) = eps sigma(L) holds exactly in the discrete
setting and the eigensolve is always done on N. D is kept as ln D.
"""

import math
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError, eigh_tridiagonal

from mfront.core.errors import (
    AccuracyError,
    ConvergenceError,
    DomainError,
    TransformConsistencyError,
)
from mfront.core.problem import b_at, b_profile
from mfront.core.steady_family import build_approx_member
from mfront.models.problem import HypothesisCheck, ProblemSpec
from mfront.models.results import (
    ApproxSteadyState,
    PotentialReport,
    PotentialW,
    RawEigenpairs,
    SignedLog,
    SpectralReport,
    SpectrumResult,
    TridiagonalOperator,
    frozen_array,
)
from mfront.utils.logger import get_logger

logger = get_logger()

RESIDUAL_TOL = 1e-8
SIGN_THRESHOLD = 1e-8
LAYER_NODES_MIN = 5
ZERO_RADIUS_MAX = 10.0


def weighted_inner(u: np.ndarray, v: np.ndarray, weights: np.ndarray) -> float:
    """Trapezoidal inner product <u, v>."""
    return float(np.sum(weights * u * v))


def _face_data(spec: ProblemSpec):
    x = spec.nodes
    d = np.diff(x)
    a_face = spec.diffusion.a(0.5 * (x[1:] + x[:-1]))
    w = spec.grid.weights[1:-1]
    return x, d, a_face, w


def assemble_linearized(member: ApproxSteadyState) -> TridiagonalOperator:
    """
    Finite-volume discretization of the linearized operator at a family member.

    Diffusion uses a at the cell faces; the convective face flux is
    f'(U_{i+1/2}) (v_i + v_{i+1}) / 2 with U_{i+1/2} the face average.

    Args:
        member: Family member U(.; xi)

    Returns:
        TridiagonalOperator: L on the interior nodes (provenance "L")
    """
    spec = member.spec
    eps = spec.epsilon
    x, d, a_face, w = _face_data(spec)
    U = member.profile
    k_face = eps * a_face / d

    if spec.kind == "conservation":
        c_face = np.asarray(spec.flux.df(0.5 * (U[1:] + U[:-1])), dtype=float)
        reaction = 0.0
    else:
        c_face = np.zeros_like(d)
        reaction = np.asarray(spec.flux.dg(U[1:-1]), dtype=float)

    # face i+1/2 for i = 0..n-2; row i uses faces i-1/2 (index i-1) and i+1/2 (index i)
    k_minus, k_plus = k_face[:-1], k_face[1:]
    c_minus, c_plus = c_face[:-1], c_face[1:]
    upper = (k_plus - 0.5 * c_plus) / w
    lower = (k_minus + 0.5 * c_minus) / w
    diag = -(k_plus + k_minus + 0.5 * c_plus - 0.5 * c_minus) / w - reaction

    layer = np.abs(x - member.xi) <= eps
    if np.count_nonzero(layer) < LAYER_NODES_MIN:
        logger.warning(
            "Coarse layer resolution",
            extra={"epsilon": eps, "xi": member.xi, "layer_nodes": int(np.count_nonzero(layer))},
        )

    return TridiagonalOperator(
        provenance="L",
        scale=eps,
        diag=frozen_array(diag),
        lower=frozen_array(lower[1:]),
        upper=frozen_array(upper[:-1]),
        symmetric=False,
        nodes=frozen_array(x[1:-1]),
        weights=frozen_array(w),
    )


def symmetrize(op: TridiagonalOperator, anchor: int) -> TridiagonalOperator:
    """
    Exact diagonal similarity N = scale * D^-1 L D.

    (D_{i+1}/D_i)^2 = lower_i / upper_i, anchored by ln D = 0 at `anchor`.

    Raises:
        AccuracyError: If an off-diagonal product is not positive (cell Peclet >= 1)
    """
    product = op.lower * op.upper
    if np.any(product <= 0.0):
        bad = int(np.argmin(product))
        raise AccuracyError(
            f"Cell Peclet number >= 1 near x={op.nodes[bad]:.6g}; refine the grid to symmetrize the operator"
        )
    increments = 0.5 * np.log(op.lower / op.upper)
    log_d = np.concatenate(([0.0], np.cumsum(increments)))
    log_d -= log_d[anchor]
    off = op.scale * np.sqrt(product)
    return TridiagonalOperator(
        provenance="N",
        scale=op.scale,
        diag=frozen_array(op.scale * op.diag),
        lower=frozen_array(off),
        upper=frozen_array(off),
        symmetric=True,
        nodes=op.nodes,
        weights=op.weights,
        log_similarity=frozen_array(log_d),
    )


def _anchor(op: TridiagonalOperator, xi: float) -> int:
    return int(np.argmin(np.abs(op.nodes - xi)))


def potential_and_selfadjoint(member: ApproxSteadyState) -> Tuple[PotentialW, TridiagonalOperator]:
    """
    Potential W and the self-adjoint surrogate N at a family member.

    Conservation kind: W = (1/a) (f'(U)/2)^2 + (eps/2) d/dx f'(U), with the
    derivative taken by centered differences. Reaction kind: W = eps g'(U).

    Args:
        member: Family member U(.; xi)

    Returns:
        Tuple[PotentialW, TridiagonalOperator]: W on the grid and N (provenance "N")
    """
    spec = member.spec
    x = spec.nodes
    U = member.profile
    if spec.kind == "conservation":
        c = np.asarray(spec.flux.df(U), dtype=float)
        values = (0.5 * c) ** 2 / spec.diffusion.a(x) + 0.5 * spec.epsilon * np.gradient(c, x)
    else:
        values = spec.epsilon * np.asarray(spec.flux.dg(U), dtype=float)
    op = assemble_linearized(member)
    opN = symmetrize(op, _anchor(op, member.xi))
    potential = PotentialW(nodes=x, values=frozen_array(values), lam=0.0, zeros=_sign_changes(x, values))
    return potential, opN


def _sign_changes(x: np.ndarray, values: np.ndarray) -> Tuple[float, ...]:
    positive = values > 0.0
    idx = np.flatnonzero(positive[:-1] != positive[1:])
    zeros = []
    for i in idx:
        v0, v1 = values[i], values[i + 1]
        zeros.append(float(x[i] - v0 * (x[i + 1] - x[i]) / (v1 - v0)))
    return tuple(zeros)


def eigen_leading(opN: TridiagonalOperator, K: int) -> RawEigenpairs:
    """
    The K largest eigenpairs of a symmetric tridiagonal operator.

    Sturm-sequence bisection to full working precision (LAPACK stebz) and
    inverse iteration (stein). Eigenvectors have unit Euclidean norm and their
    first component above 1e-8 of the largest is positive.

    Args:
        opN: Symmetric tridiagonal operator
        K: Number of eigenpairs

    Returns:
        RawEigenpairs: Eigenvalues in decreasing order with eigenvector columns

    Raises:
        DomainError: If K is not in [1, dim]
        ConvergenceError: If inverse iteration fails
    """
    dim = opN.dim
    if not 1 <= K <= dim:
        raise DomainError(f"K={K} must lie in [1, {dim}]")
    try:
        values, vectors = eigh_tridiagonal(
            np.array(opN.diag),
            np.array(opN.off_diag),
            select="i",
            select_range=(dim - K, dim - 1),
            lapack_driver="stebz",
            tol=0.0,
        )
    except LinAlgError as e:
        logger.error(f"Tridiagonal eigensolve failed: {str(e)}", extra={"dim": dim, "K": K})
        raise ConvergenceError(f"Tridiagonal eigensolve failed: {str(e)}") from e
    values = values[::-1].copy()
    vectors = vectors[:, ::-1].copy()
    for k in range(K):
        column = vectors[:, k]
        significant = np.flatnonzero(np.abs(column) > SIGN_THRESHOLD * np.max(np.abs(column)))
        if column[significant[0]] < 0.0:
            vectors[:, k] = -column
    return RawEigenpairs(values=frozen_array(values), vectors=frozen_array(vectors))


def _recover(log_scale: np.ndarray, y: np.ndarray) -> np.ndarray:
    """sign(y) exp(log_scale + ln|y|), rescaled to max magnitude 1."""
    with np.errstate(divide="ignore"):
        log_mag = log_scale + np.log(np.abs(y))
    return np.sign(y) * np.exp(log_mag - np.max(log_mag))


def _pad(v: np.ndarray) -> np.ndarray:
    return np.concatenate(([0.0], v, [0.0]))


def spectrum_of_L(member: ApproxSteadyState, K: int) -> SpectrumResult:
    """
    Leading spectrum of L at a family member, through the symmetric surrogate N.

    lambda_k = mu_k / eps for the eigenvalues mu_k of N. With y_k the unit
    eigenvectors of N: phi_k = D y_k (right eigenfunctions, unit trapezoidal
    norm) and psi_k = M^-1 D^-1 y_k (adjoint eigenfunctions with respect to
    the trapezoidal inner product, M the cell widths), scaled so that
    <psi_k, phi_k> = 1. Both are formed in log magnitude.

    Args:
        member: Family member U(.; xi)
        K: Number of eigenpairs

    Returns:
        SpectrumResult: Eigenvalues, eigenfunctions on the full grid and residuals

    Raises:
        AccuracyError: If the operator cannot be symmetrized on this grid
        TransformConsistencyError: If ||L phi_k - lambda_k phi_k|| > 1e-8 max(1, |lambda_k|)
    """
    spec = member.spec
    eps = spec.epsilon
    opL = assemble_linearized(member)
    opN = symmetrize(opL, _anchor(opL, member.xi))
    raw = eigen_leading(opN, K)
    log_d = opN.log_similarity
    w = opL.weights
    lambdas = raw.values / eps

    phis, psis, residuals = [], [], []
    for k in range(K):
        y = raw.vectors[:, k]
        phi = _recover(log_d, y)
        phi /= math.sqrt(weighted_inner(phi, phi, w))
        psi = _recover(-log_d - np.log(w), y)
        psi /= weighted_inner(psi, phi, w)
        r = opL.apply(phi) - lambdas[k] * phi
        residual = math.sqrt(weighted_inner(r, r, w))
        tolerance = RESIDUAL_TOL * max(1.0, abs(lambdas[k]))
        if not residual <= tolerance:
            logger.error(
                "Eigenpair fails the transformation consistency check",
                extra={"epsilon": eps, "xi": member.xi, "k": k + 1, "residual": residual},
            )
            raise TransformConsistencyError(
                f"Residual {residual:.3e} of eigenpair {k + 1} exceeds {tolerance:.3e}"
            )
        phis.append(_pad(phi))
        psis.append(_pad(psi))
        residuals.append(residual)

    logger.debug(
        "Spectrum computed",
        extra={"epsilon": eps, "xi": member.xi, "lambda1": float(lambdas[0]), "K": K},
    )
    return SpectrumResult(
        xi=member.xi,
        epsilon=eps,
        nodes=spec.nodes,
        eigenvalues=frozen_array(lambdas),
        phis=frozen_array(phis),
        psis=frozen_array(psis),
        residuals=frozen_array(residuals),
        raw=raw,
    )


@lru_cache(maxsize=1024)
def spectrum_at(spec: ProblemSpec, xi: float, K: int) -> SpectrumResult:
    """Cached spectrum_of_L at the member U(.; xi)."""
    return spectrum_of_L(build_approx_member(spec, xi), K)


def check_spectral_hypotheses(
    result: SpectrumResult,
    omega: SignedLog,
    gap_min: float = 0.1,
    h3_ratio_max: float = 100.0,
) -> SpectralReport:
    """
    Measure the gap, the scaling of lambda_2 and the residual-to-eigenvalue ratio.

    Args:
        result: Spectrum at xi
        omega: Residual mass at the same xi
        gap_min: Lower bound for lambda_1 - lambda_2
        h3_ratio_max: Upper bound for Omega / |lambda_1|

    Returns:
        SpectralReport: One entry per check
    """
    lam = result.eigenvalues
    eps = result.epsilon
    checks = [
        HypothesisCheck.measure(
            "lambda1_negative", -lam[0], value=lam[0], threshold=0.0, detail="lambda_1 < 0"
        )
    ]
    if result.K < 2:
        checks += [
            HypothesisCheck(name="gap", status="insufficient data", detail="needs K >= 2"),
            HypothesisCheck(name="lambda2_scaling", status="insufficient data", detail="needs K >= 2"),
        ]
    else:
        gap = result.gap
        checks += [
            HypothesisCheck.measure(
                "gap", gap - gap_min, value=gap, threshold=gap_min, detail="lambda_1 - lambda_2 >= gap_min"
            ),
            HypothesisCheck.measure(
                "lambda2_scaling",
                -eps * lam[1],
                value=-eps * lam[1],
                threshold=0.0,
                detail="-eps lambda_2 stays bounded away from 0",
            ),
        ]
    if omega.sign == 0:
        ratio = 0.0
    else:
        ratio = math.exp(min(omega.log_abs - math.log(abs(lam[0])), 700.0))
    checks.append(
        HypothesisCheck.measure(
            "h3_ratio",
            h3_ratio_max - ratio,
            value=ratio,
            threshold=h3_ratio_max,
            detail="Omega / |lambda_1| <= h3_ratio_max",
        )
    )
    return SpectralReport(checks=checks)


def adjoint_eigenfunction_limit(spec: ProblemSpec, xi: float) -> np.ndarray:
    """
    Small-eps closed form of the first adjoint eigenfunction, normalized to max 1.

    With B = b(ell), m_pm = |f'(u_pm)|:
        x <= xi: (1 - e^{-m_+ (B - b(xi))/eps}) (1 - e^{-m_- b(x)/eps})
        x >= xi: (1 - e^{-m_- b(xi)/eps}) (1 - e^{-m_+ (B - b(x))/eps})

    Raises:
        DomainError: For the reaction kind
    """
    if spec.kind != "conservation":
        raise DomainError("adjoint_eigenfunction_limit applies to the conservation kind")
    eps = spec.epsilon
    flux = spec.flux
    m_minus = abs(float(flux.df(flux.u_minus)))
    m_plus = abs(float(flux.df(flux.u_plus)))
    b = b_profile(spec)
    b_ell = float(b[-1])
    b_xi = b_at(spec, xi)
    left_far = -math.expm1(-m_plus * (b_ell - b_xi) / eps)
    right_far = -math.expm1(-m_minus * b_xi / eps)
    left = left_far * -np.expm1(-m_minus * b / eps)
    right = right_far * -np.expm1(-m_plus * (b_ell - b) / eps)
    profile = np.where(spec.nodes <= xi, left, right)
    return profile / np.max(profile)


def check_potential_properties(member: ApproxSteadyState, lam: float) -> PotentialReport:
    """
    Properties of W + eps lam about the interface.

    Monotonicity and the zeros y_pm use the shifted potential; the sign at the
    interface is checked on W itself. The constants are measured: c0 is the
    larger of |y_pm - xi| / eps, and C the minimum of W + eps lam over
    |x - xi| >= 2 c0 eps.

    Args:
        member: Family member U(.; xi)
        lam: Spectral value the potential is shifted by

    Returns:
        PotentialReport: Checks, measured constants and the applicability flag
    """
    spec = member.spec
    eps = spec.epsilon
    xi = member.xi
    potential, _ = potential_and_selfadjoint(member)
    x = potential.nodes
    W = potential.values
    V = W + eps * lam
    flux = spec.flux
    if spec.kind == "conservation":
        alpha0 = min(abs(float(flux.df(flux.u_minus))), abs(float(flux.df(flux.u_plus))))
        applicable = eps * lam > -alpha0 ** 2 / (4.0 * spec.diffusion.beta)
    else:
        alpha0 = float("nan")
        applicable = False

    left, right = x < xi, x > xi
    tol = 1e-12 * float(np.max(np.abs(V)))
    dv_left = np.diff(V[left])
    dv_right = np.diff(V[right])
    worst = max(
        float(np.max(dv_left)) if dv_left.size else -np.inf,
        float(np.max(-dv_right)) if dv_right.size else -np.inf,
    )
    checks = [
        HypothesisCheck.measure(
            "monotone_about_interface",
            tol - worst,
            value=worst,
            threshold=tol,
            detail="W + eps lam decreasing on (-ell, xi), increasing on (xi, ell)",
        ),
        HypothesisCheck.measure(
            "negative_at_interface",
            -float(np.interp(xi, x, W)),
            value=float(np.interp(xi, x, W)),
            threshold=0.0,
            detail="W(xi) < 0",
        ),
    ]
    measured = {"alpha0": alpha0}

    zeros = _sign_changes(x, V)
    y_minus = max((z for z in zeros if z < xi), default=None)
    y_plus = min((z for z in zeros if z > xi), default=None)
    if y_minus is None or y_plus is None:
        checks.append(
            HypothesisCheck(name="zeros_near_interface", status="fail", detail="W + eps lam has no zero on one side")
        )
    else:
        c0 = max(xi - y_minus, y_plus - xi) / eps
        measured.update({"y_minus": y_minus, "y_plus": y_plus, "c0": c0})
        away = np.abs(x - xi) >= 2.0 * c0 * eps
        C = float(np.min(V[away])) if np.any(away) else float("nan")
        measured["C"] = C
        checks += [
            HypothesisCheck.measure(
                "zeros_near_interface",
                ZERO_RADIUS_MAX - c0,
                value=c0,
                threshold=ZERO_RADIUS_MAX,
                detail="|y_pm - xi| <= c0 eps",
            ),
            HypothesisCheck.measure(
                "positive_away",
                C,
                value=C,
                threshold=0.0,
                detail="W + eps lam >= C > 0 for |x - xi| >= 2 c0 eps",
            ),
        ]
    return PotentialReport(lam=lam, applicable=bool(applicable), checks=checks, measured=measured)


def first_eigenvalue_bound(member: ApproxSteadyState) -> float:
    """
    Test-function bound on the first eigenvalue of N.

    The test function is psi0 - K with psi0 = D on the whole grid and K linear
    in b through the boundary values of psi0, so it vanishes at +-ell. For a
    symmetric N some eigenvalue lies within ||N t|| / ||t|| of zero, and with
    a negative spectrum that eigenvalue is mu_1 = eps lambda_1.

    Returns:
        float: Upper bound for |mu_1|
    """
    spec = member.spec
    eps = spec.epsilon
    x = spec.nodes
    a = spec.diffusion.a(x)
    if spec.kind == "conservation":
        c = np.asarray(spec.flux.df(member.profile), dtype=float)
    else:
        c = np.zeros_like(x)
    integrand = c / (2.0 * eps * a)
    S = np.concatenate(([0.0], np.cumsum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(x))))
    S -= np.interp(member.xi, x, S)
    psi0 = np.exp(S)
    b = b_profile(spec)
    K = psi0[0] + (psi0[-1] - psi0[0]) * b / b[-1]
    t = (psi0 - K)[1:-1]
    _, opN = potential_and_selfadjoint(member)
    bound = float(np.linalg.norm(opN.apply(t)) / np.linalg.norm(t))
    logger.debug("First eigenvalue bound", extra={"epsilon": eps, "xi": member.xi, "bound": bound})
    return bound


def adjoint_derivative(spec: ProblemSpec, xi: float, K: int, step: Optional[float] = None) -> np.ndarray:
    """
    d psi_k / d xi for k = 1..K by central differences, as rows.

    Raises:
        DomainError: If xi +- step leaves the admissible band
    """
    step = 1e-3 * spec.ell if step is None else step
    spec.check_xi(xi - step)
    spec.check_xi(xi + step)
    ahead = spectrum_at(spec, xi + step, K).psis
    behind = spectrum_at(spec, xi - step, K).psis
    return (ahead - behind) / (2.0 * step)


def derivative_coupling_series(spec: ProblemSpec, xi: float, K: int) -> np.ndarray:
    """
    Truncated sums S[k, J] = sum_{j <= J+1} <d psi_{k+1} / d xi, phi_j>^2.

    Reported as a diagnostic of how the coupling series accumulates.

    Returns:
        np.ndarray: K x K array of partial sums
    """
    spectrum = spectrum_at(spec, xi, K)
    dpsi = adjoint_derivative(spec, xi, K)
    w = spec.grid.weights
    terms = np.array([[weighted_inner(dpsi[k], spectrum.phis[j], w) ** 2 for j in range(K)] for k in range(K)])
    return np.cumsum(terms, axis=1)
