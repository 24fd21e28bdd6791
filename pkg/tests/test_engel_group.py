import math
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import qmc

from engel_spectra.engel_group import (
    HOMOGENEOUS_DIMENSION,
    IDENTITY,
    GaussHermiteFunction,
    GroupElement,
    apply_field,
    convolve_at,
    dilate,
    group_inverse,
    group_product,
    one_parameter,
    sublaplacian,
)
from engel_spectra.errors import ConvergenceError, DomainError

coords = st.floats(-3, 3, allow_nan=False)
points = st.tuples(coords, coords, coords, coords).map(lambda t: GroupElement(*t))
rationals = st.fractions(min_value=-5, max_value=5, max_denominator=50)
rational_points = st.tuples(rationals, rationals, rationals, rationals)


def close(x, y, tol=1e-9):
    return all(abs(a - b) <= tol * (1 + abs(b)) for a, b in zip(x, y))


def max_coefficient(u):
    return max((abs(c) for c, _ in u.terms), default=0.0)


# --- group law --------------------------------------------------------------


def test_identity_is_neutral():
    y = GroupElement(0.3, -1.2, 2.0, 5.5)
    assert group_product(IDENTITY, y) == y
    assert group_product(y, IDENTITY) == y


def test_product_of_first_two_generators():
    assert group_product((1, 0, 0, 0), (0, 1, 0, 0)) == (1, 1, 1, 0.5)


def test_inverse_examples():
    x = GroupElement(1, 2, 3, 4)
    assert group_product(x, group_inverse(x)) == (0, 0, 0, 0)
    assert group_inverse(IDENTITY) == (0, 0, 0, 0)
    assert group_inverse((1, 1, 1, 1)) == (-1, -1, 0, -0.5)
    y = GroupElement(2, -1, 0.5, 3)
    assert group_inverse(group_inverse(y)) == y


def test_dilation_examples():
    x = GroupElement(1, 1, 1, 1)
    assert dilate(1, x) == x
    assert dilate(2, x) == (2, 2, 4, 8)
    assert dilate(0.5, dilate(3, x)) == dilate(1.5, x)
    assert sum((1, 1, 2, 3)) == HOMOGENEOUS_DIMENSION


@pytest.mark.parametrize("r", [0, -1.0])
def test_dilation_rejects_nonpositive_factor(r):
    with pytest.raises(DomainError):
        dilate(r, IDENTITY)


@given(rational_points, rational_points, rational_points)
def test_associativity_exact(x, y, z):
    assert group_product(group_product(x, y), z) == group_product(x, group_product(y, z))


@given(rational_points)
def test_inverse_exact(x):
    assert group_product(x, group_inverse(x)) == (0, 0, 0, 0)
    assert group_product(group_inverse(x), x) == (0, 0, 0, 0)


@given(st.floats(0.1, 4), points, points)
def test_dilation_is_automorphism(r, x, y):
    lhs = dilate(r, group_product(x, y))
    rhs = group_product(dilate(r, x), dilate(r, y))
    assert close(lhs, rhs)


def test_one_parameter_subgroups_commute_with_themselves():
    for i in (1, 2, 3, 4):
        s, t = 1.0 / 3.0, -5.0 / 7.0
        assert close(group_product(one_parameter(i, s), one_parameter(i, t)), one_parameter(i, s + t))


# --- vector fields ----------------------------------------------------------


def test_x1_of_linear_term_at_origin():
    u = GaussHermiteFunction.gaussian(exponents=(1, 0, 0, 0))
    assert apply_field(1, "left", u)((0, 0, 0, 0)) == pytest.approx(1.0)


@pytest.mark.parametrize("x1", [0.0, 0.5, 1.3, -2.0])
def test_x2_on_fourth_coordinate(x1):
    # X2 = d2 + x1 d3 + (x1^2/2) d4 hits x4 exp(-|x|^2) through d4 only at x2 = x3 = x4 = 0
    u = GaussHermiteFunction.gaussian(exponents=(0, 0, 0, 1))
    value = apply_field(2, "left", u)((x1, 0, 0, 0))
    assert value == pytest.approx(0.5 * x1 * x1 * math.exp(-x1 * x1), abs=1e-15)


def _commutator(i, j, side_i, side_j, u):
    return apply_field(i, side_i, apply_field(j, side_j, u)) - apply_field(
        j, side_j, apply_field(i, side_i, u)
    )


def _basis():
    widths = (1.0, 0.7, 1.3, 0.9)
    out = []
    for e in [(0, 0, 0, 0), (1, 0, 0, 0), (0, 2, 0, 0), (0, 0, 2, 0), (1, 1, 1, 1), (2, 0, 1, 3)]:
        out.append(GaussHermiteFunction.gaussian(widths, exponents=e))
    return out


@pytest.mark.parametrize("u", _basis())
@pytest.mark.parametrize("side", ["left", "right"])
def test_bracket_relations(u, side):
    # right-invariant fields are anti-homomorphic: their brackets flip sign
    sign = 1.0 if side == "left" else -1.0
    assert max_coefficient(_commutator(1, 2, side, side, u) - sign * apply_field(3, side, u)) < 1e-12
    assert max_coefficient(_commutator(1, 3, side, side, u) - sign * apply_field(4, side, u)) < 1e-12
    for i, j in [(2, 3), (1, 4), (2, 4), (3, 4)]:
        assert max_coefficient(_commutator(i, j, side, side, u)) < 1e-12


@pytest.mark.parametrize("u", _basis())
def test_left_and_right_fields_commute(u):
    for i in (1, 2, 3, 4):
        for j in (1, 2, 3, 4):
            assert max_coefficient(_commutator(i, j, "left", "right", u)) < 1e-12


def test_commutator_on_x3_squared():
    u = GaussHermiteFunction.gaussian(exponents=(0, 0, 2, 0))
    assert max_coefficient(_commutator(1, 2, "left", "left", u) - apply_field(3, "left", u)) < 1e-12


@pytest.mark.parametrize("widths", [(1.0, 1.0, 1.0, 1.0), (0.5, 2.0, 1.0, 3.0)])
def test_sublaplacian_of_gaussian_at_origin(widths):
    c = 1.7
    u = GaussHermiteFunction.gaussian(widths, coefficient=c)
    expected = -2.0 * (widths[0] + widths[1]) * c
    assert sublaplacian(u)((0, 0, 0, 0)) == pytest.approx(expected, rel=1e-14)


def test_sublaplacian_is_sum_of_squares():
    u = _basis()[4]
    squares = apply_field(1, "left", apply_field(1, "left", u)) + apply_field(
        2, "left", apply_field(2, "left", u)
    )
    assert max_coefficient(sublaplacian(u) - squares) < 1e-12


def _flow_second_difference(u, x, i, side, step):
    g = one_parameter(i, step)
    g_minus = one_parameter(i, -step)
    if side == "left":
        plus, minus = group_product(x, g), group_product(x, g_minus)
    else:
        plus, minus = group_product(g, x), group_product(g_minus, x)
    return (u(plus) - 2.0 * u(x) + u(minus)) / step**2


@pytest.mark.parametrize("side", ["left", "right"])
def test_sublaplacian_matches_flow_differences(side):
    u = GaussHermiteFunction((( 1.0, (1, 0, 1, 0)), (0.5, (0, 2, 0, 1))), (0.3, 0.4, 0.2, 0.25))
    x = GroupElement(1, 1, 1, 1)
    exact = sublaplacian(u, side)(x)
    errors = []
    for step in (1e-2, 5e-3):
        approx = sum(_flow_second_difference(u, x, i, side, step) for i in (1, 2))
        errors.append(abs(approx - exact))
    assert errors[1] < 1e-4
    # second order: halving the step quarters the error
    assert errors[1] < 0.3 * errors[0]


@given(points, st.sampled_from([1, 2, 3, 4]), st.sampled_from(["left", "right"]))
@settings(max_examples=40, deadline=None)
def test_fields_are_flow_derivatives(x, i, side):
    u = GaussHermiteFunction(((1.0, (1, 1, 0, 0)), (-0.3, (0, 0, 1, 1))), (0.2, 0.3, 0.1, 0.15))
    step = 1e-5
    g, g_minus = one_parameter(i, step), one_parameter(i, -step)
    if side == "left":
        plus, minus = group_product(x, g), group_product(x, g_minus)
    else:
        plus, minus = group_product(g, x), group_product(g_minus, x)
    numeric = (u(plus) - u(minus)) / (2 * step)
    assert apply_field(i, side, u)(x) == pytest.approx(numeric, abs=1e-7)


def test_apply_field_rejects_bad_arguments():
    u = GaussHermiteFunction.gaussian()
    with pytest.raises(DomainError):
        apply_field(5, "left", u)
    with pytest.raises(DomainError):
        apply_field(1, "middle", u)


def test_closed_form_integrals():
    u = GaussHermiteFunction.gaussian((1.0, 2.0, 0.5, 1.0), exponents=(2, 0, 0, 0))
    # int x^2 e^{-x^2} = sqrt(pi)/2
    expected = 0.5 * math.sqrt(math.pi) * math.sqrt(math.pi / 2) * math.sqrt(math.pi / 0.5) * math.sqrt(math.pi)
    assert u.integral() == pytest.approx(expected, rel=1e-14)
    g = GaussHermiteFunction.gaussian()
    assert g.l2_norm_squared() == pytest.approx((math.pi / 2) ** 2, rel=1e-14)


# --- convolution ------------------------------------------------------------


def _monte_carlo_self_convolution_at_origin(samples=2**16):
    # int u(y^-1) u(y) dy with y ~ N(0, 1/2): pi^2 E[u(y^-1)]
    sobol = qmc.Sobol(d=4, scramble=True, seed=7)
    z = qmc.MultivariateNormalQMC(mean=np.zeros(4), cov=0.5 * np.eye(4), engine=sobol).random(samples)
    y = (z[:, 0], z[:, 1], z[:, 2], z[:, 3])
    inv = group_inverse(y)
    return math.pi**2 * float(np.mean(np.exp(-sum(c * c for c in inv))))


@pytest.mark.slow
def test_convolution_against_monte_carlo():
    g = GaussHermiteFunction.gaussian()
    value = convolve_at(g, g, IDENTITY)
    oracle = _monte_carlo_self_convolution_at_origin()
    assert value == pytest.approx(oracle, rel=1e-3)


@pytest.mark.slow
def test_convolution_with_near_delta():
    u = GaussHermiteFunction.gaussian((0.5, 0.5, 0.5, 0.5))
    x = GroupElement(0.4, -0.3, 0.2, 0.1)
    errors = []
    for width in (0.1, 0.05):
        a = 1.0 / (2 * width * width)
        v = GaussHermiteFunction.gaussian((a, a, a, a), coefficient=(a / math.pi) ** 2)
        errors.append(abs(convolve_at(u, v, x) - u(x)))
    assert errors[1] < 1e-2
    assert errors[1] < 0.35 * errors[0]


@pytest.mark.slow
def test_young_bound():
    u = GaussHermiteFunction.gaussian((1.0, 0.5, 1.0, 2.0), exponents=(1, 0, 0, 0))
    v = GaussHermiteFunction.gaussian((2.0, 1.0, 1.0, 1.0))
    bound = u.l1_bound() * v.sup_bound()
    for x in [IDENTITY, GroupElement(1, -1, 0.5, 0.2), GroupElement(-0.5, 0.3, 1.0, -1.0)]:
        assert abs(convolve_at(u, v, x)) <= bound


def test_convolution_follows_the_narrow_factor():
    narrow = GaussHermiteFunction.gaussian((400.0, 400.0, 400.0, 400.0))
    wide = GaussHermiteFunction.gaussian((0.01, 0.01, 0.01, 0.01))
    mass = (math.pi / 400.0) ** 2
    left = convolve_at(narrow, wide, IDENTITY)
    right = convolve_at(wide, narrow, IDENTITY)
    assert left == pytest.approx(mass, rel=1e-3)
    # the identity is fixed by inversion, so both orders agree there
    assert left == pytest.approx(right, rel=1e-12)


def test_convolution_reports_budget_exhaustion():
    g = GaussHermiteFunction.gaussian()
    with pytest.raises(ConvergenceError) as info:
        convolve_at(g, g, GroupElement(3, 3, 3, 3), max_nodes=24)
    assert info.value.achieved > 0
