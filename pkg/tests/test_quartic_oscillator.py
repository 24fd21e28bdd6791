import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import trapezoid
from scipy.linalg import eigh_tridiagonal

from engel_spectra.errors import DomainError, TruncationError
from engel_spectra.quartic_oscillator import (
    NumericsSpec,
    QuarticWell,
    RescaledFrequency,
    direct_rescaled_eigenvalues,
    eigenfunction,
    eigenvalues,
    reference_well,
    rescaled_eigenfunction,
    rescaled_energy,
    solve_well,
    spectrum,
    well_eigenpairs,
)

SPEC20 = NumericsSpec(max_index=20)


def finite_difference_ground_energy(n, half_width=6.0):
    """Lowest Dirichlet eigenvalue of ``-d^2 + theta^4/4`` on ``n`` interior nodes."""
    h = 2 * half_width / (n + 1)
    x = -half_width + h * np.arange(1, n + 1)
    return eigh_tridiagonal(
        2 / h**2 + x**4 / 4, np.full(n - 1, -1 / h**2),
        eigvals_only=True, select="i", select_range=(0, 0),
    )[0]


@pytest.fixture(scope="module")
def ground_oracle():
    fine, coarse = finite_difference_ground_energy(16383), finite_difference_ground_energy(8191)
    return (4 * fine - coarse) / 3


def test_oracle_is_second_order():
    e = [finite_difference_ground_energy(n) for n in (1023, 2047, 4095)]
    ratio = (e[0] - e[1]) / (e[1] - e[2])
    assert ratio == pytest.approx(4.0, rel=0.02)


def test_ground_energy_at_zero(ground_oracle):
    assert ground_oracle == pytest.approx(0.667986, abs=1e-6)
    assert eigenvalues(0.0)[0] == pytest.approx(ground_oracle, rel=1e-5)
    # the x^4 oscillator ground level 1.0603620904841828 rescaled by (1/4)^{1/3}
    assert eigenvalues(0.0)[0] == pytest.approx(0.25 ** (1 / 3) * 1.0603620904841828, rel=1e-8)


@pytest.mark.parametrize("mu", [-1.0, -2.0, -5.0, -25.0])
def test_lower_bound_mu_squared(mu):
    energies = eigenvalues(mu, SPEC20)
    assert np.all(energies >= mu * mu)


@pytest.mark.parametrize("mu", [-3.0, 0.0, 3.0])
def test_levels_strictly_increase_and_are_simple(mu):
    spec = NumericsSpec(max_index=20)
    energies = eigenvalues(mu, spec)
    assert np.all(energies > 0)
    assert np.min(np.diff(energies)) > 10 * spec.eig_tol


@pytest.mark.parametrize("mu", [-3.0, 0.0, 3.0, 12.0])
def test_estimated_errors_within_tolerance(mu):
    result = spectrum(mu, SPEC20)
    assert np.all(result.est_errors <= result.energies * SPEC20.eig_tol)


def test_grid_refinement_is_consistent():
    coarse = eigenvalues(1.5, NumericsSpec(grid_size=128))
    fine = eigenvalues(1.5, NumericsSpec(grid_size=512))
    assert np.allclose(coarse, fine, rtol=2e-9)


def test_parity_and_signs():
    phi0 = eigenfunction(0.0, 0)
    phi1 = eigenfunction(0.0, 1)
    assert phi0.parity == "even" and phi1.parity == "odd"
    assert phi0(0.0) > 0
    assert abs(phi1(0.0)) < 1e-12
    assert phi1(1e-3) > 0


def test_opposite_parity_modes_are_orthogonal():
    phi0 = eigenfunction(0.0, 0)
    phi1 = eigenfunction(0.0, 1)
    assert abs(trapezoid(phi0.samples * phi1.samples, dx=phi0.spacing)) < 1e-8


@pytest.mark.parametrize("mu", [-4.0, 0.0, 2.0])
def test_normalization_and_node_counts(mu):
    spec = NumericsSpec(max_index=6)
    for pair in well_eigenpairs(reference_well(mu), 7, spec):
        assert pair.spacing * np.sum(pair.samples**2) == pytest.approx(1.0, abs=1e-10)
        v = pair.samples
        signs = np.sign(v[np.abs(v) > 1e-8 * np.max(np.abs(v))])
        assert np.count_nonzero(np.diff(signs)) == pair.index


@pytest.mark.parametrize("mu", [-2.0, 0.0, 4.0])
def test_residual_on_the_grid(mu):
    spec = NumericsSpec(max_index=8)
    for pair in well_eigenpairs(reference_well(mu), 9, spec):
        v, h, theta = pair.samples, pair.spacing, pair.grid
        hv = (2 * v - np.concatenate([[0.0], v[:-1]]) - np.concatenate([v[1:], [0.0]])) / h**2
        hv += (theta**2 / 2 - mu) ** 2 * v
        grid_energy = float(v @ hv / (v @ v))
        residual = np.linalg.norm(hv - grid_energy * v) / np.linalg.norm(v)
        assert residual <= 10 * spec.eig_tol * grid_energy
        # the returned energy is the extrapolated one, close to the grid value
        assert grid_energy == pytest.approx(pair.energy, rel=1e-3)


def test_eigenfunction_interpolation_matches_samples():
    pair = eigenfunction(1.0, 3)
    inside = np.abs(pair.grid) < pair.half_width - 0.5
    theta = pair.grid[inside][::7]
    samples = pair.samples[inside][::7]
    assert np.max(np.abs(pair(theta) - samples)) < 1e-5
    with pytest.raises(DomainError):
        pair(pair.half_width + 1.0)


def test_reduction_identity():
    for m in range(4):
        assert rescaled_energy((0.7, 1.0), m) == eigenvalues(0.7)[m]


def test_exact_scaling():
    alpha = 1.7
    for m in range(3):
        base = rescaled_energy((0.3, 1.0), m)
        scaled = rescaled_energy((alpha**4 * 0.3, alpha**3), m)
        assert scaled == pytest.approx(alpha**2 * base, rel=1e-12)


@given(st.floats(-5, 5), st.floats(0.1, 10))
@settings(max_examples=15, deadline=None)
def test_energy_is_even_in_lambda(nu, lam):
    assert rescaled_energy((nu, -lam), 2) == rescaled_energy((nu, lam), 2)


def test_rescaled_frequency_rejects_zero_lambda():
    with pytest.raises(DomainError):
        RescaledFrequency(1.0, 0.0)
    with pytest.raises(DomainError):
        direct_rescaled_eigenvalues(1.0, 0.0)


def test_rescaled_eigenfunction_at_unit_lambda():
    theta = np.linspace(-3, 3, 13)
    pair = eigenfunction(0.4, 2)
    assert np.allclose(rescaled_eigenfunction((0.4, 1.0), 2, theta), pair(theta), atol=1e-14)


def test_rescaled_eigenfunction_is_normalized():
    reach = eigenfunction(1.0 / 8 ** (4 / 3), 0).half_width / 2
    theta = np.linspace(-reach, reach, 40001)
    psi = rescaled_eigenfunction((1.0, 8.0), 0, theta)
    assert trapezoid(psi**2, theta) == pytest.approx(1.0, abs=1e-6)


def test_rescaled_eigenfunction_dilation():
    theta = np.linspace(-2, 2, 9)
    psi = rescaled_eigenfunction((0.0, 8.0), 0, theta)
    assert np.allclose(psi, 8 ** (1 / 6) * eigenfunction(0.0, 0)(2 * theta), atol=1e-14)


def test_direct_discretization_agrees():
    assert np.allclose(direct_rescaled_eigenvalues(0.0, 1.0), eigenvalues(0.0), rtol=1e-6)
    assert direct_rescaled_eigenvalues(1.0, 8.0)[0] == pytest.approx(
        rescaled_energy((1.0, 8.0), 0), rel=1e-5
    )
    assert direct_rescaled_eigenvalues(-1.0, 1.0)[0] >= 1.0


def test_monotone_under_potential_ordering():
    # theta^4/4 - 0.1 theta^2 <= theta^4/4 <= (theta^2/2 + 0.1)^2 pointwise
    lower = QuarticWell(beta=0.1, offset=-0.01)
    middle = QuarticWell()
    upper = QuarticWell(beta=-0.1)
    theta = np.linspace(-5, 5, 101)
    assert np.all(lower.potential(theta) <= middle.potential(theta) + 1e-15)
    assert np.all(middle.potential(theta) <= upper.potential(theta))
    e = [solve_well(w, 11).energies for w in (lower, middle, upper)]
    assert np.all(e[0] <= e[1]) and np.all(e[1] <= e[2])


def test_numerics_spec_validation():
    with pytest.raises(DomainError):
        NumericsSpec(eig_tol=0.0)
    with pytest.raises(DomainError):
        NumericsSpec(grid_size=10)
    with pytest.raises(DomainError):
        NumericsSpec(max_index=-1)


def test_small_domain_is_reported():
    with pytest.raises(TruncationError) as info:
        eigenvalues(0.0, NumericsSpec(half_width=3.5))
    assert info.value.achieved > 1e-8
