import numpy as np
import pytest

from kernelhm.kernels import (CenteredKernelSystem, KernelSpec,
                              build_weight_matrix, identity_weight)
from kernelhm.kpca import (basis_from_text, basis_to_text,
                           coefficients_from_text, coefficients_to_text,
                           fit_kpca, project, project_many,
                           reconstruction_error_sq, training_coefficients)

from conftest import linear_identity_spec, random_fields, small_linear_system


def mixture_grid_system(l=12, n=8, seed=3, omega=0.4):
    # grid weight so W is not a multiple of the identity
    F = random_fields(l, n, seed)
    w = build_weight_matrix(None, lengths=(1.5,), sigma_eta_sq=0.5,
                            grid_shape=(l, 1, 1))
    spec = KernelSpec(omega=omega, sigma=2.0, delta=3.0, weight=w)
    return F, spec, CenteredKernelSystem.build(spec, F)


def weighted_linear_system(l=9, n=6, seed=5):
    """omega=1 with a dense non-identity W, so features are phi(f) = P^T f."""
    rng = np.random.default_rng(seed + 100)
    B = rng.normal(size=(l, l))
    obs_cov = B @ B.T + l * np.eye(l)
    F = random_fields(l, n, seed)
    w = build_weight_matrix(obs_cov, lengths=(2.0,), sigma_eta_sq=0.3,
                            grid_shape=(l, 1, 1))
    spec = KernelSpec(omega=1.0, sigma=1.0, delta=1.0, weight=w)
    return F, spec, CenteredKernelSystem.build(spec, F)


# -- spectra -------------------------------------------------------------------

def test_eigenvalues_are_squared_singular_values_for_linear_identity():
    l, n = 12, 8
    F = random_fields(l, n, seed=1)
    system = CenteredKernelSystem.build(linear_identity_spec(l), F)
    basis = fit_kpca(system, q=n)

    Ft = F - F.mean(axis=1, keepdims=True)
    sv = np.linalg.svd(Ft, compute_uv=False)
    expected = np.sort(sv[sv > 1e-8] ** 2)[::-1]
    assert basis.q == expected.size
    assert np.allclose(basis.eigenvalues, expected, rtol=1e-10)


def test_training_coefficients_match_pca_scores_up_to_sign():
    l, n = 12, 8
    F = random_fields(l, n, seed=1)
    system = CenteredKernelSystem.build(linear_identity_spec(l), F)
    basis = fit_kpca(system, q=n)
    coeffs = training_coefficients(basis)

    Ft = F - F.mean(axis=1, keepdims=True)
    U, S, Vh = np.linalg.svd(Ft, full_matrices=False)
    scores = (S[:, None] * Vh)[:basis.q]    # q x n, component k per row
    for k in range(basis.q):
        got = coeffs[:, k]
        want = scores[k]
        if np.dot(got, want) < 0:
            want = -want
        assert np.allclose(got, want, rtol=0, atol=1e-8 * np.linalg.norm(want))


def test_eigenvalue_order_and_positivity():
    _, _, system = mixture_grid_system()
    basis = fit_kpca(system, q=6)
    assert np.all(basis.eigenvalues > 0)
    assert np.all(np.diff(basis.eigenvalues) <= 1e-12)


def test_sign_convention_largest_entry_positive():
    _, _, system = mixture_grid_system(seed=9)
    basis = fit_kpca(system, q=5)
    for k in range(basis.q):
        j = int(np.argmax(np.abs(basis.A[:, k])))
        assert basis.A[j, k] > 0


# -- projections ---------------------------------------------------------------

def test_projecting_training_members_reproduces_the_table():
    F, _, system = mixture_grid_system()
    basis = fit_kpca(system, q=4)
    table = training_coefficients(basis)
    for i in range(system.n):
        got = project(basis, F[:, i])
        assert np.allclose(got, table[i], rtol=1e-10, atol=1e-12)


def test_project_many_agrees_with_single_projections():
    F, _, system = mixture_grid_system(seed=4)
    basis = fit_kpca(system, q=3)
    V = random_fields(F.shape[0], 5, seed=40)
    batch = project_many(basis, V)
    assert batch.shape == (3, 5)
    for j in range(5):
        assert np.allclose(batch[:, j], project(basis, V[:, j]), rtol=1e-12)


def test_ensemble_mean_projects_to_zero_for_linear_kernel():
    F, _, system = weighted_linear_system()
    basis = fit_kpca(system, q=4)
    mean = F.mean(axis=1)
    coeffs = project(basis, mean)
    scale = np.abs(training_coefficients(basis)).max()
    assert np.all(np.abs(coeffs) < 1e-9 * scale)
    assert reconstruction_error_sq(basis, mean) < 1e-9


def test_projection_equals_weighted_least_squares_fit():
    # For omega=1 the basis fields are W^-1-orthonormal, so the kernel
    # projection must coincide with the generalized least-squares fit of the
    # centered field onto them.
    F, spec, system = weighted_linear_system()
    basis = fit_kpca(system, q=4)
    Ft = F - F.mean(axis=1, keepdims=True)
    Psi = Ft @ basis.A                     # l x q field-space basis
    Winv = spec.weight.P @ spec.weight.P.T

    v = random_fields(F.shape[0], 1, seed=77)[:, 0]
    resid = v - F.mean(axis=1)
    gram = Psi.T @ Winv @ Psi
    assert np.allclose(gram, np.eye(basis.q), atol=1e-8)
    expected = np.linalg.solve(gram, Psi.T @ Winv @ resid)
    got = project(basis, v)
    assert np.allclose(got, expected, rtol=1e-8, atol=1e-10)


# -- reconstruction error ------------------------------------------------------

def test_reconstruction_error_explicit_feature_oracle():
    F, spec, system = weighted_linear_system()
    basis = fit_kpca(system, q=3)
    P = spec.weight.P
    Ft = F - F.mean(axis=1, keepdims=True)
    Psi_feat = P.T @ (Ft @ basis.A)        # feature-space basis, l x q

    for seed in (11, 12, 13):
        v = random_fields(F.shape[0], 1, seed=seed)[:, 0]
        feat = P.T @ (v - F.mean(axis=1))
        C = project(basis, v)
        expected = float(np.sum((feat - Psi_feat @ C) ** 2))
        got = reconstruction_error_sq(basis, v)
        assert abs(got - expected) <= 1e-8 * (1.0 + expected)


def test_reconstruction_error_nonincreasing_in_q_and_zero_at_full_rank():
    F, _, system = mixture_grid_system(l=10, n=7, seed=6)
    v = random_fields(10, 1, seed=60)[:, 0]
    full = fit_kpca(system, q=system.n)
    errs = [reconstruction_error_sq(fit_kpca(system, q=q), v)
            for q in range(1, full.q + 1)]
    assert all(e >= 0.0 for e in errs)
    assert all(errs[i + 1] <= errs[i] + 1e-12 for i in range(len(errs) - 1))

    for i in range(system.n):
        err = reconstruction_error_sq(full, F[:, i])
        assert err <= 1e-8 * (1.0 + abs(system.self_centered(F[:, i])))


# -- truncation rules ----------------------------------------------------------

def test_default_rank_is_five():
    _, _, system = mixture_grid_system(l=14, n=9, seed=2)
    assert fit_kpca(system).q == 5


def test_rank_capped_at_positive_eigenvalue_count():
    system = small_linear_system(l=7, n=5)
    # centering removes one direction: at most n - 1 positive eigenvalues
    assert fit_kpca(system, q=50).q <= 4


def test_variance_fraction_selects_minimal_rank():
    _, _, system = mixture_grid_system(l=12, n=8, seed=8)
    evals = fit_kpca(system, q=system.n).eigenvalues
    frac = np.cumsum(evals) / evals.sum()
    for target in (0.3, 0.6, 0.9, 1.0):
        expected = int(np.searchsorted(frac, target - 1e-12) + 1)
        expected = min(expected, evals.size)
        got = fit_kpca(system, variance_fraction=target).q
        assert got == expected


def test_variance_fraction_rank_one_ensemble():
    l, n = 8, 5
    g = np.linspace(1.0, 2.0, l)
    scales = np.array([0.5, 1.0, 1.5, 2.0, 2.5])
    F = np.outer(g, scales)
    system = CenteredKernelSystem.build(linear_identity_spec(l), F)
    basis = fit_kpca(system, variance_fraction=0.999)
    assert basis.q == 1


# -- validation ----------------------------------------------------------------

def test_constant_ensemble_rejected():
    F = np.ones((6, 4)) * 2.5
    system = CenteredKernelSystem.build(linear_identity_spec(6), F)
    with pytest.raises(ValueError, match="non-positive"):
        fit_kpca(system)


def test_bad_rank_and_fraction_rejected():
    system = small_linear_system()
    with pytest.raises(ValueError, match="q must be >= 1"):
        fit_kpca(system, q=0)
    with pytest.raises(ValueError, match="variance fraction"):
        fit_kpca(system, variance_fraction=0.0)
    with pytest.raises(ValueError, match="variance fraction"):
        fit_kpca(system, variance_fraction=1.5)


def test_single_member_rejected():
    # build() already refuses single-column inputs, so assemble by hand
    F = random_fields(6, 1, seed=0)
    k = float(F[:, 0] @ F[:, 0])
    system = CenteredKernelSystem(linear_identity_spec(6), F,
                                  np.array([[k]]), np.zeros((1, 1)))
    with pytest.raises(ValueError, match="at least 2"):
        fit_kpca(system)


# -- text documents ------------------------------------------------------------

def test_basis_text_round_trip_is_exact():
    _, _, system = mixture_grid_system(seed=10)
    basis = fit_kpca(system, q=3)
    text = basis_to_text(basis)
    loaded = basis_from_text(text, system)
    assert np.array_equal(loaded.A, basis.A)
    assert np.array_equal(loaded.eigenvalues, basis.eigenvalues)
    assert loaded.q == basis.q
    assert basis_to_text(loaded) == text

    v = random_fields(system.fields.shape[0], 1, seed=99)[:, 0]
    assert np.array_equal(project(loaded, v), project(basis, v))


def test_basis_text_validation():
    _, _, system = mixture_grid_system(seed=10)
    basis = fit_kpca(system, q=3)
    with pytest.raises(ValueError, match="malformed"):
        basis_from_text("q 3\n", system)
    other = small_linear_system()
    with pytest.raises(ValueError, match="does not match"):
        basis_from_text(basis_to_text(basis), other)


def test_coefficient_table_round_trip():
    _, _, system = mixture_grid_system(seed=12)
    basis = fit_kpca(system, q=4)
    coeffs = training_coefficients(basis)
    text = coefficients_to_text(coeffs)
    assert text.splitlines()[0] == "run_index,C1,C2,C3,C4"
    assert np.array_equal(coefficients_from_text(text), coeffs)
