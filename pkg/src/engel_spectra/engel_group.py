"""Arithmetic of the Engel group in exponential coordinates.

A point ``x = (x1, x2, x3, x4)`` stands for
``exp(x2 X2 + x3 X3 + x4 X4) exp(x1 X1)``, where ``[X1, X2] = X3`` and
``[X1, X3] = X4``.  The product and inverse are polynomial, so they work
unchanged on floats, numpy arrays and ``fractions.Fraction``.

Haar measure is plain Lebesgue measure ``dx1 dx2 dx3 dx4``.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConvergenceError, DomainError

HOMOGENEOUS_DIMENSION = 7
DILATION_WEIGHTS = (1, 1, 2, 3)


class GroupElement(NamedTuple):
    x1: float
    x2: float
    x3: float
    x4: float


IDENTITY = GroupElement(0, 0, 0, 0)


def group_product(x, y):
    x1, x2, x3, x4 = x
    y1, y2, y3, y4 = y
    return GroupElement(
        x1 + y1,
        x2 + y2,
        x3 + y3 + x1 * y2,
        x4 + y4 + x1 * y3 + x1 * x1 * y2 / 2,
    )


def group_inverse(x):
    x1, x2, x3, x4 = x
    return GroupElement(-x1, -x2, -x3 + x1 * x2, -x4 + x1 * x3 - x1 * x1 * x2 / 2)


def dilate(r, x):
    """Anisotropic dilation with weights (1, 1, 2, 3)."""
    if not r > 0:
        raise DomainError("dilation factor must be positive")
    x1, x2, x3, x4 = x
    return GroupElement(r * x1, r * x2, r * r * x3, r * r * r * x4)


def one_parameter(i, t):
    """``exp(t X_i)`` in coordinates; each generator is a coordinate axis."""
    coords = [0.0, 0.0, 0.0, 0.0]
    coords[i - 1] = t
    return GroupElement(*coords)


# ---------------------------------------------------------------------------
# polynomial times Gaussian test functions


def _key(e):
    return tuple(int(k) for k in e)


@dataclass(frozen=True)
class GaussHermiteFunction:
    """``sum_k c_k x^{e_k} exp(-sum_i a_i x_i^2)`` with a shared Gaussian.

    ``terms`` is a tuple of ``(coefficient, (e1, e2, e3, e4))`` pairs.
    """

    terms: tuple
    widths: tuple

    def __post_init__(self):
        if len(self.widths) != 4 or not all(a > 0 for a in self.widths):
            raise DomainError("widths must be four positive numbers")
        merged = {}
        for c, e in self.terms:
            k = _key(e)
            if len(k) != 4 or min(k) < 0:
                raise DomainError("exponents must be four natural numbers")
            merged[k] = merged.get(k, 0.0) + c
        cleaned = tuple(sorted(((c, k) for k, c in merged.items() if c != 0), key=lambda t: t[1]))
        object.__setattr__(self, "terms", cleaned)
        object.__setattr__(self, "widths", tuple(float(a) for a in self.widths))

    @classmethod
    def gaussian(cls, widths=(1.0, 1.0, 1.0, 1.0), coefficient=1.0, exponents=(0, 0, 0, 0)):
        return cls(((coefficient, exponents),), widths)

    @classmethod
    def zero(cls, widths=(1.0, 1.0, 1.0, 1.0)):
        return cls((), widths)

    def _check(self, other):
        if self.widths != other.widths:
            raise DomainError("functions must share the same Gaussian widths")

    def __add__(self, other):
        self._check(other)
        return GaussHermiteFunction(self.terms + other.terms, self.widths)

    def __sub__(self, other):
        return self + (-1.0) * other

    def __rmul__(self, scalar):
        return GaussHermiteFunction(tuple((scalar * c, e) for c, e in self.terms), self.widths)

    def __neg__(self):
        return (-1.0) * self

    @property
    def is_zero(self):
        return not self.terms

    def degree(self, i):
        return max((e[i - 1] for _, e in self.terms), default=0)

    def __call__(self, x):
        """Evaluate at a point or at arrays of points ``(x1, x2, x3, x4)``."""
        x = [np.asarray(c, dtype=float) for c in x]
        gauss = np.exp(-sum(a * c * c for a, c in zip(self.widths, x)))
        poly = np.zeros(np.broadcast(*x).shape)
        for c, e in self.terms:
            term = c
            for xi, ei in zip(x, e):
                if ei:
                    term = term * xi**ei
            poly = poly + term
        out = poly * gauss
        return float(out) if out.ndim == 0 else out

    def partial(self, i):
        """Derivative in the coordinate ``x_i``."""
        k = i - 1
        a = self.widths[k]
        out = []
        for c, e in self.terms:
            if e[k]:
                lower = list(e)
                lower[k] -= 1
                out.append((c * e[k], tuple(lower)))
            upper = list(e)
            upper[k] += 1
            out.append((-2.0 * a * c, tuple(upper)))
        return GaussHermiteFunction(tuple(out), self.widths)

    def times_monomial(self, exponents, coefficient=1.0):
        out = []
        for c, e in self.terms:
            out.append((coefficient * c, tuple(p + q for p, q in zip(e, exponents))))
        return GaussHermiteFunction(tuple(out), self.widths)

    def integral(self):
        """``int u dx`` in closed form."""
        total = 0.0
        for c, e in self.terms:
            total += c * math.prod(_gauss_moment(k, a) for k, a in zip(e, self.widths))
        return total

    def inner(self, other):
        """``int u v dx`` in closed form."""
        widths = tuple(a + b for a, b in zip(self.widths, other.widths))
        total = 0.0
        for c, e in self.terms:
            for d, f in other.terms:
                total += c * d * math.prod(
                    _gauss_moment(p + q, a) for p, q, a in zip(e, f, widths)
                )
        return total

    def l2_norm_squared(self):
        return self.inner(self)

    def l1_bound(self):
        """Upper bound for ``int |u| dx`` (exact for a single term)."""
        return sum(
            abs(c) * math.prod(_abs_gauss_moment(k, a) for k, a in zip(e, self.widths))
            for c, e in self.terms
        )

    def sup_bound(self):
        """Upper bound for ``sup |u|`` (exact for a single term)."""
        total = 0.0
        for c, e in self.terms:
            f = abs(c)
            for k, a in zip(e, self.widths):
                if k:
                    # max of |x|^k exp(-a x^2) sits at x^2 = k/(2a)
                    f *= (k / (2.0 * a)) ** (k / 2.0) * math.exp(-k / 2.0)
            total += f
        return total


def _gauss_moment(k, a):
    """``int x^k exp(-a x^2) dx``."""
    if k % 2:
        return 0.0
    return math.gamma((k + 1) / 2.0) / a ** ((k + 1) / 2.0)


def _abs_gauss_moment(k, a):
    return math.gamma((k + 1) / 2.0) / a ** ((k + 1) / 2.0)


# ---------------------------------------------------------------------------
# invariant vector fields

# each field is a list of (coordinate monomial exponents, coefficient, derivative index)
_LEFT_FIELDS = {
    1: [((0, 0, 0, 0), 1.0, 1)],
    2: [((0, 0, 0, 0), 1.0, 2), ((1, 0, 0, 0), 1.0, 3), ((2, 0, 0, 0), 0.5, 4)],
    3: [((0, 0, 0, 0), 1.0, 3), ((1, 0, 0, 0), 1.0, 4)],
    4: [((0, 0, 0, 0), 1.0, 4)],
}
# right-invariant fields: derivatives of u(exp(t X_i) x) at t = 0
_RIGHT_FIELDS = {
    1: [((0, 0, 0, 0), 1.0, 1), ((0, 1, 0, 0), 1.0, 3), ((0, 0, 1, 0), 1.0, 4)],
    2: [((0, 0, 0, 0), 1.0, 2)],
    3: [((0, 0, 0, 0), 1.0, 3)],
    4: [((0, 0, 0, 0), 1.0, 4)],
}


def apply_field(i, side, u):
    """Apply the left-invariant ``X_i`` or the right-invariant ``X~_i`` to ``u``."""
    if i not in (1, 2, 3, 4):
        raise DomainError("field index must be 1, 2, 3 or 4")
    table = {"left": _LEFT_FIELDS, "right": _RIGHT_FIELDS}.get(side)
    if table is None:
        raise DomainError("side must be 'left' or 'right'")
    out = GaussHermiteFunction.zero(u.widths)
    for mono, coef, k in table[i]:
        out = out + u.partial(k).times_monomial(mono, coef)
    return out


def sublaplacian(u, side="left"):
    """``(X1^2 + X2^2) u`` or its right-invariant counterpart."""
    return apply_field(1, side, apply_field(1, side, u)) + apply_field(
        2, side, apply_field(2, side, u)
    )


# ---------------------------------------------------------------------------
# convolution

_TAIL_LOG = math.log(1e12)


def _box_half_width(a, degree):
    # |x|^k exp(-a x^2) below 1e-12 of its peak scale
    b = math.sqrt(_TAIL_LOG / a)
    for _ in range(5):
        b = math.sqrt((_TAIL_LOG + degree * math.log(max(b, 1.0))) / a)
    return b


def _convolution_sum(f, box, n):
    t, w = np.polynomial.legendre.leggauss(n)
    nodes = [b * t for b in box]
    weights = [b * w for b in box]
    y2, y3, y4 = np.meshgrid(nodes[1], nodes[2], nodes[3], indexing="ij")
    w234 = weights[1][:, None, None] * weights[2][None, :, None] * weights[3][None, None, :]
    total = 0.0
    total_abs = 0.0
    for y1, w1 in zip(nodes[0], weights[0]):
        values = f((np.full_like(y2, y1), y2, y3, y4)) * w234 * w1
        total += float(np.sum(values))
        total_abs += float(np.sum(np.abs(values)))
    return total, total_abs


def _box(u):
    return [_box_half_width(a, u.degree(i + 1)) for i, a in enumerate(u.widths)]


def convolve_at(u, v, x, spec=None, max_nodes=64):
    """``(u * v)(x) = int u(x y^{-1}) v(y) dy`` by tensor Gauss-Legendre quadrature.

    The box follows the Gaussian of the more concentrated factor: either
    ``v`` in the form above, or ``u`` in ``int u(z) v(z^{-1} x) dz``.  The
    node count grows until two successive rules agree to ``spec.quad_tol``
    relative to ``int |f|``.
    """
    tol = getattr(spec, "quad_tol", 1e-10)
    box_u, box_v = _box(u), _box(v)
    if math.prod(box_u) < math.prod(box_v):
        box = box_u

        def f(z):
            return u(z) * v(group_product(group_inverse(z), x))
    else:
        box = box_v

        def f(y):
            return u(group_product(x, group_inverse(y))) * v(y)

    n = 16
    if max_nodes <= n:
        raise DomainError(f"max_nodes must exceed {n}")
    previous, _ = _convolution_sum(f, box, n)
    while True:
        nxt = min(int(n * 1.5), max_nodes)
        value, scale = _convolution_sum(f, box, nxt)
        gap = abs(value - previous)
        if gap <= tol * max(scale, 1e-300):
            return value
        if nxt >= max_nodes:
            raise ConvergenceError(
                f"convolution quadrature did not converge (gap {gap:.3e})", achieved=gap
            )
        n, previous = nxt, value
