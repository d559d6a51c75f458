"""
Tests for the linearized operator, its symmetrization and the leading spectrum.
"""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mfront.core.errors import DomainError
from mfront.core.spectral import (
    adjoint_eigenfunction_limit,
    assemble_linearized,
    check_potential_properties,
    check_spectral_hypotheses,
    derivative_coupling_series,
    eigen_leading,
    first_eigenvalue_bound,
    potential_and_selfadjoint,
    spectrum_at,
    symmetrize,
    weighted_inner,
)
from mfront.core.steady_family import build_approx_member, omega_residual
from mfront.models.results import TridiagonalOperator, frozen_array
from tests.conftest import make_spec


def symmetric_operator(diag: np.ndarray, off: np.ndarray, scale: float = 1.0) -> TridiagonalOperator:
    dim = len(diag)
    return TridiagonalOperator(
        provenance="N",
        scale=scale,
        diag=frozen_array(diag),
        lower=frozen_array(off),
        upper=frozen_array(off),
        symmetric=True,
        nodes=frozen_array(np.linspace(-1.0, 1.0, dim + 2)[1:-1]),
        weights=frozen_array(np.full(dim, 2.0 / (dim + 1))),
    )


def sign_changes(values: np.ndarray) -> int:
    significant = values[np.abs(values) > 1e-8 * np.max(np.abs(values))]
    return int(np.count_nonzero(np.diff(np.sign(significant))))


class TestOperator:
    def test_row_sums_approximate_flux_derivative(self, burgers_spec):
        member = build_approx_member(burgers_spec, 0.2)
        op = assemble_linearized(member)
        assert op.provenance == "L"
        assert op.dim == burgers_spec.grid.n - 2
        row_sums = op.apply(np.ones(op.dim))
        expected = -member.profile_deriv[1:-1]
        assert np.max(np.abs(row_sums[1:-1] - expected[1:-1])) <= 1e-2

    def test_symmetrization_is_a_similarity(self, burgers_spec):
        op = assemble_linearized(build_approx_member(burgers_spec, 0.2))
        opN = symmetrize(op, op.dim // 2)
        assert opN.symmetric
        assert np.array_equal(opN.lower, opN.upper)
        assert opN.log_similarity[op.dim // 2] == 0.0
        D = np.exp(opN.log_similarity)
        v = np.sin(np.linspace(0.0, 3.0, op.dim))
        lhs = opN.apply(v)
        rhs = op.scale * op.apply(D * v) / D
        assert np.max(np.abs(lhs - rhs)) <= 1e-9 * np.max(np.abs(lhs))


class TestEigenLeading:
    def test_dirichlet_laplacian(self):
        eps, n = 0.1, 2001
        h = 2.0 / (n - 1)
        dim = n - 2
        op = symmetric_operator(np.full(dim, -2.0 * eps / h ** 2), np.full(dim - 1, eps / h ** 2), scale=eps)
        raw = eigen_leading(op, 3)
        assert raw.values[0] == pytest.approx(-eps * (math.pi / 2.0) ** 2, rel=1e-5)
        assert raw.values[1] == pytest.approx(-eps * math.pi ** 2, rel=1e-5)
        assert np.all(np.diff(raw.values) < 0.0)

    @given(dim=st.integers(min_value=2, max_value=200), seed=st.integers(min_value=0, max_value=2 ** 32 - 1))
    def test_matches_dense_eigensolver(self, dim, seed):
        rng = np.random.default_rng(seed)
        op = symmetric_operator(rng.normal(size=dim), rng.normal(size=dim - 1))
        raw = eigen_leading(op, dim)
        dense = np.linalg.eigvalsh(op.to_dense())[::-1]
        scale = max(1.0, float(np.max(np.abs(dense))))
        assert np.max(np.abs(raw.values - dense)) <= 1e-10 * scale
        assert sum(raw.values) == pytest.approx(float(np.sum(op.diag)), abs=1e-9 * dim * scale)

    def test_first_significant_component_positive(self):
        rng = np.random.default_rng(7)
        op = symmetric_operator(rng.normal(size=50), rng.normal(size=49))
        raw = eigen_leading(op, 5)
        for k in range(5):
            column = raw.vectors[:, k]
            first = column[np.abs(column) > 1e-8 * np.max(np.abs(column))][0]
            assert first > 0.0
            assert np.linalg.norm(column) == pytest.approx(1.0, rel=1e-12)

    @pytest.mark.parametrize("K", [0, 11])
    def test_K_out_of_range(self, K):
        op = symmetric_operator(np.zeros(10), np.ones(9))
        with pytest.raises(DomainError):
            eigen_leading(op, K)


class TestSpectrum:
    def test_burgers_leading_eigenvalues(self, burgers_fine_spec):
        result = spectrum_at(burgers_fine_spec, 0.2, 4)
        lam = result.eigenvalues
        assert lam[0] < 0.0
        assert abs(lam[0]) < 1e-2
        assert -0.35 < 0.1 * lam[1] < -0.2
        assert np.all(np.diff(lam) < 0.0)
        for k in range(4):
            assert result.residuals[k] <= 1e-8 * max(1.0, abs(lam[k]))

    def test_node_counts(self, burgers_fine_spec):
        result = spectrum_at(burgers_fine_spec, 0.2, 4)
        for k in range(4):
            assert sign_changes(result.phis[k][1:-1]) == k

    def test_biorthogonality(self, burgers_fine_spec):
        result = spectrum_at(burgers_fine_spec, 0.2, 4)
        w = burgers_fine_spec.grid.weights
        gram = np.array([[weighted_inner(result.psis[k], result.phis[j], w) for j in range(4)] for k in range(4)])
        assert np.max(np.abs(gram - np.eye(4))) <= 1e-8
        assert weighted_inner(result.phis[0], result.phis[0], w) == pytest.approx(1.0, rel=1e-12)

    @pytest.mark.parametrize("k", range(4))
    def test_rayleigh_quotient_matches_the_surrogate(self, burgers_fine_spec, k):
        result = spectrum_at(burgers_fine_spec, 0.2, 4)
        op = assemble_linearized(build_approx_member(burgers_fine_spec, 0.2))
        phi, psi = result.phis[k][1:-1], result.psis[k][1:-1]
        quotient = weighted_inner(psi, op.apply(phi), op.weights) / weighted_inner(psi, phi, op.weights)
        assert 0.1 * quotient == pytest.approx(result.raw.values[k], rel=1e-6, abs=1e-10)

    def test_eigenfunctions_vanish_at_the_boundary(self, burgers_spec):
        result = spectrum_at(burgers_spec, 0.0, 2)
        assert np.all(result.phis[:, 0] == 0.0)
        assert np.all(result.psis[:, -1] == 0.0)

    def test_reaction_kind_spectrum(self, allen_cahn_spec):
        result = spectrum_at(allen_cahn_spec, 0.0, 2)
        assert result.eigenvalues[0] < 0.0
        assert result.eigenvalues[0] > result.eigenvalues[1]

    def test_adjoint_matches_small_eps_limit(self):
        spec = make_spec(epsilon=0.05, n=2001)
        psi = spectrum_at(spec, 0.0, 1).psis[0]
        psi = psi / psi[np.argmax(np.abs(psi))]
        limit = adjoint_eigenfunction_limit(spec, 0.0)
        assert np.max(np.abs(psi - limit)) <= 0.05

    def test_adjoint_limit_requires_conservation_kind(self, allen_cahn_spec):
        with pytest.raises(DomainError):
            adjoint_eigenfunction_limit(allen_cahn_spec, 0.0)

    def test_first_eigenvalue_bound(self, burgers_fine_spec):
        member = build_approx_member(burgers_fine_spec, 0.2)
        lam1 = spectrum_at(burgers_fine_spec, 0.2, 1).eigenvalues[0]
        assert first_eigenvalue_bound(member) >= abs(0.1 * lam1) * (1.0 - 1e-6)

    def test_coupling_series_accumulates(self, burgers_spec):
        series = derivative_coupling_series(burgers_spec, 0.2, 3)
        assert series.shape == (3, 3)
        assert np.all(np.diff(series, axis=1) >= 0.0)


class TestHypothesisReports:
    def test_spectral_report(self, burgers_fine_spec):
        result = spectrum_at(burgers_fine_spec, 0.2, 4)
        omega = omega_residual(build_approx_member(burgers_fine_spec, 0.2))
        report = check_spectral_hypotheses(result, omega)
        assert report.get("lambda1_negative").status == "pass"
        assert report.get("gap").status == "pass"
        assert report.get("lambda2_scaling").status == "pass"
        assert report.get("h3_ratio").value > 0.0

    def test_single_eigenpair_is_insufficient(self, burgers_spec):
        result = spectrum_at(burgers_spec, 0.2, 1)
        omega = omega_residual(build_approx_member(burgers_spec, 0.2))
        report = check_spectral_hypotheses(result, omega)
        assert report.get("gap").status == "insufficient data"
        assert report.get("lambda2_scaling").status == "insufficient data"

    def test_potential_limits(self, burgers_spec):
        potential, opN = potential_and_selfadjoint(build_approx_member(burgers_spec, 0.0))
        assert opN.provenance == "N"
        assert potential.values[0] == pytest.approx(0.25, abs=1e-2)
        assert potential.values[-1] == pytest.approx(0.25, abs=1e-2)
        assert np.interp(0.0, potential.nodes, potential.values) < 0.0
        assert len(potential.zeros) == 2

    def test_potential_properties_at_zero_shift(self, burgers_spec):
        report = check_potential_properties(build_approx_member(burgers_spec, 0.0), 0.0)
        assert report.applicable
        assert report.passed
        assert report.measured["c0"] == pytest.approx(1.763, rel=0.05)
        assert report.measured["C"] > 0.0

    def test_shift_below_the_continuum_is_not_applicable(self, burgers_spec):
        report = check_potential_properties(build_approx_member(burgers_spec, 0.0), -3.0)
        assert not report.applicable

    def test_second_eigenvalue_lies_below_the_admissible_shift(self, burgers_fine_spec):
        lam2 = spectrum_at(burgers_fine_spec, 0.2, 2).eigenvalues[1]
        report = check_potential_properties(build_approx_member(burgers_fine_spec, 0.2), lam2)
        assert report.lam == lam2
        assert 0.1 * lam2 < -0.25
        assert not report.applicable
        assert report.measured["alpha0"] == pytest.approx(1.0)
