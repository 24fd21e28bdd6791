import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from engel_spectra.engel_group import (
    IDENTITY,
    GaussHermiteFunction,
    GroupElement,
    dilate,
    group_inverse,
    group_product,
    sublaplacian,
)
from engel_spectra.errors import ConvergenceError, DomainError, ResolutionError
from engel_spectra.frequency_space import (
    BoundaryPoint,
    CoefficientTable,
    CostWarning,
    FourierSpec,
    FrequencyPoint,
    FrequencyWindow,
    completion_limit,
    convolution_transform,
    fourier_matrix,
    fourier_table,
    fourier_transform,
    frequency_distance,
    gaussian_fourier,
    heat_kernel_at,
    inverse_fourier_at,
    plancherel_check,
    translated_transform,
    w_element,
    w_matrix,
)
from engel_spectra.quartic_oscillator import NumericsSpec, eigenvalues, rescaled_energy

SAMPLE_FREQUENCIES = [(0.7, 1.3), (-2.0, 0.5), (3.0, -2.0), (0.0, 0.2)]
SAMPLE_POINTS = [
    GroupElement(0.3, -0.4, 0.2, 0.5),
    GroupElement(-1.0, 0.5, 1.5, -0.7),
    GroupElement(0.0, 0.0, 0.0, 2.0),
]

frequency_values = st.tuples(st.floats(-4, 4), st.floats(0.2, 3), st.sampled_from([1, -1]))
group_points = st.tuples(*(st.floats(-1.5, 1.5),) * 4).map(lambda t: GroupElement(*t))


def hilbert_schmidt_oracle(nu, lam):
    """``sum_{n,m} |F(u)(n, m, nu, lam)|^2`` for ``u = exp(-|x|^2)`` in closed form.

    The transform is the operator with kernel ``K(t, s) = a^-1 u^((s-t)/a; k2, k3, k4)``
    on the mode variable; its squared Hilbert-Schmidt norm reduces to one integral.
    """
    a, s = abs(lam) ** (1 / 3), math.copysign(1.0, lam)

    def f(t):
        return math.exp(-((s * a * t * t / 2 - nu / lam) ** 2) / 2 - a**4 * t * t / 2)

    turn = math.sqrt(max(2 * s * nu / (lam * a), 0.0))
    cuts = [-np.inf, -turn, 0.0, turn, np.inf] if turn > 0 else [-np.inf, 0.0, np.inf]
    total = sum(
        integrate.quad(f, lo, hi, epsabs=0, epsrel=1e-12, limit=200)[0]
        for lo, hi in zip(cuts, cuts[1:])
    )
    return math.pi**3 / a * math.sqrt(math.pi / 2) * math.exp(-lam * lam / 2) * total


# --- frequency points -------------------------------------------------------


def test_frequency_point_validation():
    with pytest.raises(DomainError):
        FrequencyPoint(0, 0, 1.0, 0.0)
    with pytest.raises(DomainError):
        FrequencyPoint(-1, 0, 1.0, 1.0)
    with pytest.raises(DomainError):
        BoundaryPoint(1.0, 0.0, 0.0)
    p = FrequencyPoint(1, 2, 16.0, -8.0)
    assert p.mu == pytest.approx(1.0)
    assert p.dilate(2.0) == FrequencyPoint(1, 2, 256.0, -64.0)


# --- matrix coefficients ----------------------------------------------------


@pytest.mark.parametrize("nu,lam", SAMPLE_FREQUENCIES)
def test_w_at_identity_is_kronecker(nu, lam):
    w, err = w_matrix(nu, lam, IDENTITY, 10)
    assert np.max(np.abs(w - np.eye(10))) <= 1e-8
    assert np.max(err) <= 1e-8


@pytest.mark.parametrize("nu,lam", SAMPLE_FREQUENCIES)
@pytest.mark.parametrize("x", SAMPLE_POINTS)
def test_w_bound_and_column_normalization(nu, lam, x):
    count = 6
    w, _ = w_matrix(nu, lam, x, 4 * count + 20)
    assert np.max(np.abs(w)) <= 1 + 1e-8
    columns = np.sum(np.abs(w[:, :count]) ** 2, axis=0)
    assert np.allclose(columns, 1.0, atol=1e-4)


@given(frequency_values, group_points)
@settings(max_examples=20, deadline=None)
def test_w_lambda_reflection_is_conjugation(freq, x):
    nu, lam, sign = freq
    w_plus, _ = w_matrix(nu, sign * lam, x, 5)
    w_minus, _ = w_matrix(nu, -sign * lam, x, 5)
    assert np.max(np.abs(np.conj(w_plus) - w_minus)) <= 1e-8


@given(frequency_values, group_points)
@settings(max_examples=20, deadline=None)
def test_w_of_inverse_is_adjoint(freq, x):
    nu, lam, sign = freq
    w, _ = w_matrix(nu, sign * lam, x, 5)
    w_inv, _ = w_matrix(nu, sign * lam, group_inverse(x), 5)
    assert np.max(np.abs(w_inv - np.conj(w).T)) <= 1e-8


@given(frequency_values, group_points, st.floats(0.5, 2.0))
@settings(max_examples=20, deadline=None)
def test_w_dilation(freq, x, r):
    nu, lam, sign = freq
    lhs, _ = w_matrix(nu, sign * lam, dilate(r, x), 5)
    rhs, _ = w_matrix(r**4 * nu, sign * r**3 * lam, x, 5)
    assert np.max(np.abs(lhs - rhs)) <= 1e-6


@pytest.mark.parametrize("nu,lam", SAMPLE_FREQUENCIES[:3])
def test_w_is_a_representation(nu, lam):
    x, y = SAMPLE_POINTS[0], SAMPLE_POINTS[1]
    big = 40
    wx, _ = w_matrix(nu, lam, x, big)
    wy, _ = w_matrix(nu, lam, y, big)
    wxy, _ = w_matrix(nu, lam, group_product(x, y), big)
    assert np.max(np.abs((wx @ wy)[:6, :6] - wxy[:6, :6])) <= 1e-8


def test_w_element_matches_matrix():
    p = FrequencyPoint(3, 1, 0.4, -1.1)
    x = SAMPLE_POINTS[1]
    w, _ = w_matrix(p.nu, p.lam, x, 4)
    assert w_element(p, x) == w[3, 1]


def test_w_resolution_limit():
    with pytest.raises(ResolutionError):
        w_matrix(0.5, 1.0, (0.0, 0.0, 200.0, 0.0), 4, FourierSpec(max_nodes=2000))
    with pytest.raises(DomainError):
        FourierSpec(nodes_per_wavelength=4)


# --- Fourier transform ------------------------------------------------------


def test_gaussian_fourier_closed_form():
    k = np.linspace(-3, 3, 7)
    for e in range(4):
        for width in (0.5, 2.0):
            numeric = [
                integrate.quad(lambda y: y**e * math.exp(-width * y * y) * math.cos(kk * y), -np.inf, np.inf)[0]
                + 1j * integrate.quad(lambda y: y**e * math.exp(-width * y * y) * math.sin(kk * y), -np.inf, np.inf)[0]
                for kk in k
            ]
            assert np.allclose(gaussian_fourier(e, width, k), numeric, atol=1e-10)


def test_transform_of_zero():
    zero = GaussHermiteFunction.zero()
    c = fourier_transform(zero, FrequencyPoint(2, 1, 0.3, 1.0))
    assert c.value == 0 and c.abs_error_estimate == 0


@pytest.mark.parametrize("nu,lam", [(0.5, 1.0), (-2.0, 0.5), (3.0, 2.0), (1.0, -0.7)])
def test_hilbert_schmidt_norm(gaussian, nu, lam):
    f, _ = fourier_matrix(gaussian, nu, lam, 40)
    assert np.sum(np.abs(f) ** 2) == pytest.approx(hilbert_schmidt_oracle(nu, lam), rel=1e-6)


@pytest.mark.parametrize("nu,lam", SAMPLE_FREQUENCIES)
def test_coefficients_bounded_by_l1_norm(gaussian, nu, lam):
    f, err = fourier_matrix(gaussian, nu, lam, 8)
    assert np.all(np.abs(f) <= gaussian.l1_bound() + err)


@pytest.mark.parametrize("p", [(0, 0, 0.2, 1.0), (1, 3, -1.5, 0.6), (2, 2, 4.0, -2.5)])
def test_spectral_relation(gaussian, p):
    p = FrequencyPoint(*p)
    count = max(p.n, p.m) + 1
    f, _ = fourier_matrix(gaussian, p.nu, p.lam, count)
    left, _ = fourier_matrix(-1.0 * sublaplacian(gaussian, "left"), p.nu, p.lam, count)
    right, _ = fourier_matrix(-1.0 * sublaplacian(gaussian, "right"), p.nu, p.lam, count)
    energies = [rescaled_energy((p.nu, p.lam), j) for j in range(count)]
    scale = np.max(np.abs(f))
    for n, m in itertools.product(range(count), repeat=2):
        assert abs(left[n, m] - energies[m] * f[n, m]) <= 1e-3 * scale
        assert abs(right[n, m] - energies[n] * f[n, m]) <= 1e-3 * scale


def test_dilation_of_the_function(gaussian):
    r = 2.0
    squeezed = GaussHermiteFunction.gaussian((r**2, r**2, r**4, r**6))
    p = FrequencyPoint(1, 1, 3.0, 2.0)
    lhs = fourier_transform(squeezed, p).value
    rhs = r**-7 * fourier_transform(gaussian, p.dilate(1 / r)).value
    assert abs(lhs - rhs) <= 1e-2 * abs(rhs)


def test_real_function_tables_reflect_in_lambda(gaussian):
    u = GaussHermiteFunction(((1.0, (1, 0, 1, 0)), (0.5, (0, 0, 0, 0))), (1.0, 1.0, 1.0, 1.0))
    f_plus, _ = fourier_matrix(u, 0.8, 1.2, 4)
    f_minus, _ = fourier_matrix(u, 0.8, -1.2, 4)
    assert np.max(np.abs(np.conj(f_plus) - f_minus)) <= 1e-9


def test_tensor_rule_fallback(gaussian):
    p = FrequencyPoint(2, 0, -0.5, 0.8)
    with pytest.warns(CostWarning):
        c = fourier_transform(lambda x: np.exp(-sum(xi * xi for xi in x)), p)
    exact = fourier_transform(gaussian, p).value
    assert abs(c.value - exact) <= c.abs_error_estimate
    assert abs(c.value - exact) <= 1e-3 * abs(exact)


def test_translation_rule(gaussian):
    direct, rule = translated_transform(gaussian, SAMPLE_POINTS[0], 0.6, 1.1, 4, inner=30)
    assert np.max(np.abs(direct - rule)) <= 1e-5 * np.max(np.abs(direct))


def test_convolution_to_product():
    u = GaussHermiteFunction.gaussian()
    v = GaussHermiteFunction.gaussian((1.5, 0.8, 1.2, 1.0), exponents=(1, 0, 0, 0))
    direct, product = convolution_transform(u, v, -0.4, 0.9, 4, inner=30)
    assert np.max(np.abs(direct - product)) <= 1e-5 * np.max(np.abs(direct))


# --- tables, Plancherel, inversion --------------------------------------------


SMALL_WINDOW = FrequencyWindow(modes=4, nu_max=4.0, lam_min=0.2, lam_max=4.0, step=0.15, nu_span=3.0)


@pytest.fixture(scope="module")
def small_table(gaussian):
    return fourier_table(gaussian, SMALL_WINDOW)


def test_table_entries_match_direct_transforms(gaussian, small_table):
    lat = small_table.lattice
    for s_nu, s_lam, i, j in [(1, 1, 3, 2), (-1, -1, 0, 5), (1, -1, lat.u.size - 1, 0)]:
        nu, lam = s_nu * math.exp(4 * lat.u[i]), s_lam * lat.lam[j]
        f, _ = fourier_matrix(gaussian, nu, lam, SMALL_WINDOW.modes + 1)
        assert np.allclose(small_table.values[(s_nu, s_lam)][i, j], f, atol=1e-12)


def test_table_points_iterate_everything(small_table):
    count = sum(1 for _ in small_table.points())
    lat = small_table.lattice
    assert count == 4 * lat.u.size * lat.w.size * (SMALL_WINDOW.modes + 1) ** 2


def test_plancherel_flags_mode_truncation(gaussian, small_table):
    with pytest.raises(ConvergenceError):
        plancherel_check(gaussian, SMALL_WINDOW, table=small_table, shell_tol=1e-6)


def test_inversion_paths_agree(small_table):
    x = GroupElement(0.3, -0.2, 0.25, 0.1)
    result = inverse_fourier_at(small_table, x)
    assert result.path_gap <= 1e-6 * max(abs(result.value), 1e-300)
    assert abs(result.value.imag) <= 1e-6 * abs(result.value)


def test_inversion_of_zero_table():
    result = inverse_fourier_at(CoefficientTable.zeros(SMALL_WINDOW), IDENTITY)
    assert result.value == 0 and result.conjugate_path == 0


@pytest.mark.slow
def test_plancherel_default_window_is_below_one(gaussian, gaussian_table):
    # the window misses the mass at |lambda| < 0.05 and |nu| > 8; see the acceptance test
    result = plancherel_check(gaussian, FrequencyWindow(), table=gaussian_table)
    assert result.quadrature_error < 1e-3 and result.last_shell < 0.01
    assert 0.9 < result.ratio < 1.0


@pytest.mark.slow
def test_inversion_off_origin(gaussian, wide_table):
    x = GroupElement(0.3, -0.2, 0.25, 0.1)
    result = inverse_fourier_at(wide_table, x)
    assert result.path_gap <= 1e-6 * abs(result.value)
    # the truncated window loses a few percent, as at the origin
    assert result.value.real == pytest.approx(gaussian(x), rel=0.05)


# --- heat kernel --------------------------------------------------------------


def test_heat_kernel_domain():
    with pytest.raises(DomainError):
        heat_kernel_at(0.0, IDENTITY)


@pytest.mark.slow
def test_heat_kernel_is_maximal_at_the_identity(heat):
    origin = heat(1.0, (0.0, 0.0, 0.0, 0.0))
    off = heat(1.0, (0.5, 0.0, 0.0, 0.0))
    assert abs(off.value) <= origin.value * (1 + 1e-3)
    assert off.value > 0
    assert abs(off.imaginary_residual) <= 1e-8 * off.value


# --- distance and completion --------------------------------------------------


frequency_points = st.builds(
    FrequencyPoint,
    st.integers(0, 3),
    st.integers(0, 3),
    st.floats(-3, 3),
    st.floats(0.1, 3).flatmap(lambda v: st.sampled_from([v, -v])),
)


def test_distance_to_itself():
    p = FrequencyPoint(1, 2, 0.5, 1.5)
    assert frequency_distance(p, p) == 0.0


@given(frequency_points, frequency_points, frequency_points)
@settings(max_examples=25, deadline=None)
def test_distance_is_a_metric(p, q, r):
    assert frequency_distance(p, q) == pytest.approx(frequency_distance(q, p), abs=1e-12)
    assert frequency_distance(p, r) <= frequency_distance(p, q) + frequency_distance(q, r) + 1e-9


def test_distance_homogeneity():
    p = FrequencyPoint(0, 2, 0.8, 1.3)
    q = FrequencyPoint(1, 1, -0.4, -0.6)
    d = frequency_distance(p, q)
    assert frequency_distance(p.dilate(3.0), q.dilate(3.0)) == pytest.approx(3 * d, rel=1e-9)
    b = BoundaryPoint.harmonic(0, 1, 2.0)
    assert frequency_distance(p.dilate(3.0), b.dilate(3.0)) == pytest.approx(
        3 * frequency_distance(p, b), rel=1e-9
    )


def test_completion_limit():
    target = BoundaryPoint.harmonic(0, 0, 1.0)
    assert target.energy == pytest.approx(math.sqrt(2))
    assert completion_limit(FrequencyPoint(0, 1, 1.0, 1e-3)) == target
    distances = [frequency_distance(FrequencyPoint(0, 0, 1.0, lam), target) for lam in (1e-1, 1e-2, 1e-3)]
    assert distances[0] > distances[1] > distances[2]
    assert rescaled_energy((1.0, 1e-3), 0) / math.sqrt(2) == pytest.approx(1.0, abs=0.05)


def test_completion_pairs_levels():
    # levels 2k and 2k+1 both tend to the harmonic level k
    for j in range(4):
        ratio = rescaled_energy((1.0, 1e-3), j, NumericsSpec(max_index=4)) / math.sqrt(2)
        assert ratio == pytest.approx(2 * (j // 2) + 1, rel=0.05)


def test_energy_ratios_are_dense_witness():
    energies = eigenvalues(0.0, NumericsSpec(max_index=200))
    ratios = energies[:, None] / energies[None, :]
    for target in (0.5, 2.0, math.pi):
        assert np.min(np.abs(ratios - target)) / target <= 0.05
