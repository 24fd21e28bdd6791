"""Matrix coefficients, the group Fourier transform and integrals over frequencies.

A frequency is ``(n, m, nu, lambda)`` with ``lambda != 0``.  The modes
``psi_m^{nu,lambda}(theta) = a^{1/2} phi_m^mu(a theta)``, ``a = |lambda|^{1/3}``,
``mu = nu/|lambda|^{4/3}``, are handled in the rescaled variable
``t = a theta``, where

    W((n,m,nu,lambda), x) = exp(i(lambda x4 - (nu/lambda) x2))
        int exp(i s (a^2 t x3 + a t^2 x2/2)) phi_m(t + a x1) phi_n(t) dt,

``s = sign(lambda)``.  Fourier coefficients are ``F(u)(n,m) = int W u dx``.
For ``u`` a polynomial times a Gaussian the ``x2, x3, x4`` integrals are
Gaussian Fourier transforms in closed form, which leaves a two-dimensional
quadrature in ``(t, x1)`` written as a matrix product

    F = (h^2/a) Phi^T diag(Q_e1) A_e1 Phi    summed over the x1 exponents e1,

with ``Phi`` the modes sampled on a uniform ``t`` grid and ``A_e1`` a
banded Toeplitz kernel in ``t' - t``.
"""

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import eval_hermite

from . import _lattice
from ._parallel import ordered_map
from .engel_group import (
    IDENTITY,
    GaussHermiteFunction,
    GroupElement,
    group_inverse,
)
from .errors import AccuracyError, ConvergenceError, DomainError, ResolutionError
from .quartic_oscillator import (
    NumericsSpec,
    RescaledFrequency,
    eigenvalues,
    reference_well,
    solve_well,
    well_eigenpairs,
)

# largest |mu| for which eigenpairs are computed inside frequency integrals
MU_LIMIT = 1e6
# rows of a sampled mode table below this fraction of its peak are dropped
_SUPPORT_FLOOR = 1e-18
# the x1 kernel is cut where its Gaussian is below exp(-_KERNEL_REACH)
_KERNEL_REACH = 40.0


class CostWarning(UserWarning):
    """Issued when a transform falls back to full four-dimensional quadrature."""


# ---------------------------------------------------------------------------
# frequency points


@dataclass(frozen=True)
class FrequencyPoint:
    n: int
    m: int
    nu: float
    lam: float

    def __post_init__(self):
        if int(self.n) != self.n or int(self.m) != self.m or self.n < 0 or self.m < 0:
            raise DomainError("n and m must be natural numbers")
        if self.lam == 0:
            raise DomainError("lambda must be nonzero; use BoundaryPoint for lambda = 0")

    @property
    def mu(self):
        return self.nu / abs(self.lam) ** (4.0 / 3.0)

    def dilate(self, r):
        """``(n, m, r^4 nu, r^3 lambda)``."""
        return FrequencyPoint(self.n, self.m, r**4 * self.nu, r**3 * self.lam)


@dataclass(frozen=True)
class BoundaryPoint:
    """A point of the completion at ``lambda = 0``.

    Stored through the limits of its embedding coordinates: the energy,
    the energy difference and ``nu > 0``.
    """

    energy: float
    energy_difference: float
    nu: float

    def __post_init__(self):
        if not self.nu > 0:
            raise DomainError("boundary points need nu > 0")

    @classmethod
    def harmonic(cls, n, m, nu):
        """``((2m+1) sqrt(2nu), 2(m-n) sqrt(2nu), nu)``."""
        root = math.sqrt(2.0 * nu)
        return cls((2 * m + 1) * root, 2 * (m - n) * root, nu)

    def dilate(self, r):
        return BoundaryPoint(r * r * self.energy, r * r * self.energy_difference, r**4 * self.nu)


def completion_limit(p):
    """The boundary point reached by ``p`` as ``lambda -> 0`` at fixed ``nu > 0``.

    Levels of the double well pair up, so index ``j`` tends to the harmonic
    level ``floor(j/2)``.
    """
    return BoundaryPoint.harmonic(p.n // 2, p.m // 2, p.nu)


def _embedding(p, numerics):
    if isinstance(p, BoundaryPoint):
        return p.energy, p.energy_difference, p.nu, 0.0
    freq = RescaledFrequency(p.nu, p.lam)
    top = max(p.n, p.m)
    spec = (numerics or NumericsSpec()).covering(top)
    levels = abs(p.lam) ** (2.0 / 3.0) * eigenvalues(freq.mu, spec)
    return levels[p.m], levels[p.m] - levels[p.n], p.nu, p.lam


def frequency_distance(p, q, numerics=None):
    """``|E_m - E'_m|^{1/2} + |D - D'|^{1/2} + |nu - nu'|^{1/4} + |lambda - lambda'|^{1/3}``.

    ``E_m`` is the energy of ``(n, m, nu, lambda)`` and ``D = E_m - E_n``.
    Either argument may be a :class:`BoundaryPoint`.
    """
    e1, d1, nu1, l1 = _embedding(p, numerics)
    e2, d2, nu2, l2 = _embedding(q, numerics)
    return (
        abs(e1 - e2) ** 0.5
        + abs(d1 - d2) ** 0.5
        + abs(nu1 - nu2) ** 0.25
        + abs(l1 - l2) ** (1.0 / 3.0)
    )


# ---------------------------------------------------------------------------
# settings and results


@dataclass(frozen=True)
class FourierSpec:
    """Quadrature settings for matrix coefficients and transforms.

    ``nodes_per_wavelength`` applies to the phase ``exp(i lambda(theta x3 +
    theta^2 x2/2))`` and to the modes themselves; ``max_nodes`` caps the
    one-dimensional grid and triggers :class:`ResolutionError`.
    ``box`` and ``box_nodes`` set the tensor Gauss-Legendre rule of the
    four-dimensional fallback for callables.
    """

    numerics: NumericsSpec = field(default_factory=lambda: NumericsSpec(eig_tol=1e-9))
    nodes_per_wavelength: int = 8
    max_nodes: int = 1 << 16
    quad_tol: float = 1e-9
    box: float = 6.0
    box_nodes: int = 24

    def __post_init__(self):
        if self.nodes_per_wavelength < 8:
            raise DomainError("at least 8 nodes per wavelength are required")
        if not (self.quad_tol > 0 and self.box > 0):
            raise DomainError("tolerances and box must be positive")


@dataclass(frozen=True)
class FourierCoefficient:
    value: complex
    abs_error_estimate: float


# ---------------------------------------------------------------------------
# modes


class ModeSet:
    """The lowest ``count`` modes of ``P_mu`` with their energies."""

    def __init__(self, mu, count, numerics):
        if abs(mu) > MU_LIMIT:
            raise DomainError(f"|mu| = {abs(mu):.3g} exceeds the supported range {MU_LIMIT:g}")
        pairs = well_eigenpairs(reference_well(mu), count, numerics.covering(count - 1))
        self.mu = mu
        self.count = count
        self.energies = np.array([p.energy for p in pairs])
        self.errors = np.array([p.est_error for p in pairs])
        self._interp = pairs[0]._interp
        # exact support of the interpolated modes: |t| in [inner, half_width]
        ends = [(lo, hi) for lo, hi, _ in self._interp.splines]
        self.half_width = max(hi for _, hi in ends)
        self.inner = max(0.0, min(lo for lo, _ in ends)) if self._interp.inner > 0 else 0.0
        # largest local wavenumber over the support
        floor = mu * mu if mu < 0 else 0.0
        self.wavenumber = math.sqrt(max(self.energies[-1] - floor, 1.0))

    def __call__(self, t):
        return self._interp(t)

    def overlap_segments(self, shift):
        """Intervals where ``phi(t)`` and ``phi(t + shift)`` can both be nonzero."""
        T, c = self.half_width, self.inner
        pieces = [(-T, T)] if c == 0 else [(-T, -c), (c, T)]
        out = []
        for lo1, hi1 in pieces:
            for lo2, hi2 in pieces:
                lo, hi = max(lo1, lo2 - shift), min(hi1, hi2 - shift)
                if hi > lo:
                    out.append((lo, hi))
        return out

    def step(self, nodes_per_wavelength):
        return 2.0 * math.pi / (2.0 * nodes_per_wavelength * self.wavenumber)

    def sample(self, lo, hi, step):
        """Modes on the uniform grid ``lo + k step`` covering ``[lo, hi]``."""
        n = int(math.ceil((hi - lo) / step))
        n += n % 2
        t = lo + step * np.arange(n + 1)
        return t, self(t)


def mode_set(mu, count, numerics):
    """Cached :class:`ModeSet`; ``mu`` is rounded to 12 digits so that nodes
    sharing a diagonal of a log lattice share one solve."""
    return _mode_set(float(f"{mu:.12g}"), int(count), numerics)


@lru_cache(maxsize=4)
def _mode_set(mu, count, numerics):
    return ModeSet(mu, count, numerics)


def _support(values):
    peak = np.max(np.abs(values))
    return np.flatnonzero(np.max(np.abs(values), axis=1) > _SUPPORT_FLOOR * peak)


def _scale(lam):
    return abs(lam) ** (1.0 / 3.0), (1.0 if lam > 0 else -1.0)


# ---------------------------------------------------------------------------
# matrix coefficients


def _w_grid(modes, a, x1, x2, x3, spec):
    """Support segments with their trapezoid grids for the W integrals."""
    shift = a * x1
    for lo, hi in modes.overlap_segments(shift):
        reach = max(abs(lo), abs(hi))
        kappa = a * a * abs(x3) + a * abs(x2) * reach
        step = modes.step(spec.nodes_per_wavelength)
        if kappa > 0:
            step = min(step, 2.0 * math.pi / (spec.nodes_per_wavelength * kappa))
        n = int(math.ceil((hi - lo) / step))
        if n > spec.max_nodes:
            raise ResolutionError(
                f"{n} nodes needed to resolve the phase, more than max_nodes={spec.max_nodes}",
                achieved=n,
            )
        t, right = modes.sample(lo, hi, (hi - lo) / max(n, 2))
        yield t, right, modes(t + shift)


def _w_integrals(modes, a, sign, x1, x2, x3, spec):
    """``int exp(i s(a^2 t x3 + a t^2 x2/2)) phi_m(t + a x1) phi_n(t) dt`` as a matrix.

    Returns the trapezoid value and its nested coarse value.  Each support
    interval gets its own grid, so separated wells cost no nodes in between.
    """
    count = modes.count
    fine = np.zeros((count, count), dtype=complex)
    coarse = np.zeros((count, count), dtype=complex)
    for t, right, left in _w_grid(modes, a, x1, x2, x3, spec):
        h = t[1] - t[0]
        phase = np.exp(1j * sign * (a * a * x3 * t + 0.5 * a * x2 * t * t))
        weighted = right * (phase * h)[:, None]
        fine += weighted.T @ left
        coarse += 2.0 * (weighted[::2].T @ left[::2])
    return fine, coarse


def _w_diagonal_pair(modes, a, x1, x2, x3, spec):
    """Diagonal entries ``W_mm`` without prefactor for ``lambda > 0`` and ``lambda < 0``."""
    plus = np.zeros(modes.count, dtype=complex)
    minus = np.zeros(modes.count, dtype=complex)
    for t, right, left in _w_grid(modes, a, x1, x2, x3, spec):
        h = t[1] - t[0]
        phase = np.exp(1j * (a * a * x3 * t + 0.5 * a * x2 * t * t)) * h
        product = right * left
        plus += phase @ product
        minus += np.conj(phase) @ product
    return plus, minus


def w_matrix(nu, lam, x, count, spec=None):
    """``W((n, m, nu, lambda), x)`` for ``n, m < count`` and an error estimate."""
    if lam == 0:
        raise DomainError("lambda must be nonzero")
    spec = spec or FourierSpec()
    a, sign = _scale(lam)
    modes = mode_set(nu / a**4, count, spec.numerics)
    x1, x2, x3, x4 = (float(c) for c in x)
    fine, coarse = _w_integrals(modes, a, sign, x1, x2, x3, spec)
    prefactor = np.exp(1j * (lam * x4 - nu / lam * x2))
    return prefactor * fine, np.abs(fine - coarse)


def w_element(p, x, spec=None):
    """``W(p, x)`` for a :class:`FrequencyPoint` ``p`` and a group element ``x``."""
    matrix, _ = w_matrix(p.nu, p.lam, x, max(p.n, p.m) + 1, spec)
    return complex(matrix[p.n, p.m])


# ---------------------------------------------------------------------------
# Fourier transform


def gaussian_fourier(e, width, k):
    """``int y^e exp(-width y^2) exp(i k y) dy`` in closed form (Hermite polynomials)."""
    root = math.sqrt(width)
    k = np.asarray(k, dtype=float)
    return (
        math.sqrt(math.pi) / root
        * (0.5j / root) ** e
        * eval_hermite(e, k / (2.0 * root))
        * np.exp(-k * k / (4.0 * width))
    )


def _kernel_factors(u, a, sign, nu, lam, t, b):
    """Per-x1-exponent weights ``Q_e1(t)`` of the separable kernel."""
    b1, b2, b3, b4 = b
    a1, a2, a3, a4 = u.widths
    tb = t + a * b1
    k2 = sign * a * tb * tb / 2.0 - nu / lam
    k3 = sign * a * a * tb
    phase = np.exp(1j * (lam * b4 - nu / lam * b2 + sign * a * a * t * b3 + 0.5 * sign * a * t * t * b2))
    out = {}
    cache = {}

    def g(axis, e, k, width):
        key = (axis, e)
        if key not in cache:
            cache[key] = gaussian_fourier(e, width, k)
        return cache[key]

    for c, (e1, e2, e3, e4) in u.terms:
        term = c * g(2, e2, k2, a2) * g(3, e3, k3, a3) * complex(gaussian_fourier(e4, a4, lam))
        out[e1] = out.get(e1, 0.0) + term
    return {e1: q * phase for e1, q in out.items()}


def _toeplitz_apply(values, kernel, d_lo):
    """``out[j] = sum_q kernel[q] values[j + d_lo + q]``, zero outside the grid."""
    n = values.shape[0]
    full = fftconvolve(values, kernel[::-1, None], mode="full", axes=0)
    idx = np.arange(n) + d_lo + kernel.size - 1
    ok = (idx >= 0) & (idx < full.shape[0])
    out = np.zeros(values.shape, dtype=full.dtype)
    out[ok] = full[idx[ok]]
    return out


def _kernel_step(u, modes, a, b, spec):
    a1, a2, a3, _ = u.widths
    T = modes.half_width + a * abs(b[0])
    widths = [
        a / math.sqrt(a1),
        2.0 * math.sqrt(a3) / (a * a),
        2.0 * math.sqrt(a2) / (a * max(T, 1e-12)),
    ]
    step = min(modes.step(spec.nodes_per_wavelength), min(widths) / 3.0)
    kappa = a * a * abs(b[2]) + a * abs(b[1]) * modes.half_width
    if kappa > 0:
        step = min(step, 2.0 * math.pi / (spec.nodes_per_wavelength * kappa))
    return step


def _separable_matrix(u, modes, a, sign, nu, lam, b, step):
    T = modes.half_width
    t, phi = modes.sample(-T, T, step)
    h = t[1] - t[0]
    rows = _support(phi)
    factors = _kernel_factors(u, a, sign, nu, lam, t[rows], b)
    a1 = u.widths[0]
    total = np.zeros((modes.count, modes.count), dtype=complex)
    for e1, q in factors.items():
        zmax = math.sqrt((_KERNEL_REACH + e1 * 3.0) / a1)
        d_lo = max(int(math.floor((b[0] - zmax) * a / h)), -t.size)
        d_hi = min(int(math.ceil((b[0] + zmax) * a / h)), t.size)
        if d_hi < d_lo:
            continue
        z = np.arange(d_lo, d_hi + 1) * h / a - b[0]
        kernel = z**e1 * np.exp(-a1 * z * z)
        applied = _toeplitz_apply(phi, kernel, d_lo)[rows]
        total += (phi[rows] * q[:, None]).T @ applied
    return total * (h * h / a)


def fourier_matrix(u, nu, lam, count, spec=None, translate=None):
    """``F(u)(n, m, nu, lambda)`` for ``n, m < count`` with an error estimate.

    With ``translate = x`` the transform of ``y -> u(x y)`` is returned.
    The estimate is the gap to the same rule at twice the step; the step
    is halved until that gap is below ``quad_tol`` times ``int |u|``.
    """
    if lam == 0:
        raise DomainError("lambda must be nonzero")
    spec = spec or FourierSpec()
    a, sign = _scale(lam)
    modes = mode_set(nu / a**4, count, spec.numerics)
    if u.is_zero:
        zero = np.zeros((count, count), dtype=complex)
        return zero, np.zeros((count, count))
    b = tuple(float(c) for c in group_inverse(translate)) if translate is not None else (0.0,) * 4
    step = _kernel_step(u, modes, a, b, spec)
    scale = max(u.l1_bound(), 1e-300)
    coarse = _separable_matrix(u, modes, a, sign, nu, lam, b, 2.0 * step)
    for _ in range(4):
        if 2.0 * modes.half_width / step > spec.max_nodes:
            raise ResolutionError("Fourier quadrature grid exceeds max_nodes", achieved=step)
        fine = _separable_matrix(u, modes, a, sign, nu, lam, b, step)
        gap = np.abs(fine - coarse)
        if np.max(gap) <= spec.quad_tol * scale:
            return fine, gap
        coarse, step = fine, step / 2.0
    raise ConvergenceError("Fourier quadrature did not converge", achieved=float(np.max(gap)))


def _tensor_rule(u, modes, a, sign, nu, lam, count, spec, n):
    nodes, weights = np.polynomial.legendre.leggauss(n)
    nodes, weights = spec.box * nodes, spec.box * weights
    total = np.zeros((count, count), dtype=complex)
    x2, x3, x4 = np.meshgrid(nodes, nodes, nodes, indexing="ij")
    w234 = weights[:, None, None] * weights[None, :, None] * weights[None, None, :]
    for x1, w1 in zip(nodes, weights):
        values = u((np.full_like(x2, x1), x2, x3, x4)) * w234 * w1
        # the x4 sum is independent of the mode integrals
        g = (np.exp(1j * lam * x4) * values).sum(axis=2)
        for i, y2 in enumerate(nodes):
            for j, y3 in enumerate(nodes):
                fine, _ = _w_integrals(modes, a, sign, x1, y2, y3, spec)
                total += g[i, j] * np.exp(-1j * nu / lam * y2) * fine
    return total


def _fourier_by_tensor_rule(u, nu, lam, count, spec):
    """Tensor Gauss-Legendre rule and its gap to a rule with two thirds of the nodes."""
    warnings.warn(
        "no closed-form reduction for this function; using a four-dimensional tensor rule",
        CostWarning,
    )
    a, sign = _scale(lam)
    modes = mode_set(nu / a**4, count, spec.numerics)
    fine = _tensor_rule(u, modes, a, sign, nu, lam, count, spec, spec.box_nodes)
    coarse = _tensor_rule(u, modes, a, sign, nu, lam, count, spec, max(2, 2 * spec.box_nodes // 3))
    return fine, np.abs(fine - coarse)


def fourier_transform(u, p, spec=None, translate=None):
    """``F(u)(p) = int W(p, x) u(x) dx`` as a :class:`FourierCoefficient`.

    ``u`` is a :class:`GaussHermiteFunction` (closed-form reduction) or
    any vectorized callable of ``(x1, x2, x3, x4)``, which falls back to a
    tensor Gauss-Legendre rule on ``[-box, box]^4`` with a :class:`CostWarning`.
    """
    spec = spec or FourierSpec()
    count = max(p.n, p.m) + 1
    if isinstance(u, GaussHermiteFunction):
        matrix, gap = fourier_matrix(u, p.nu, p.lam, count, spec, translate)
        return FourierCoefficient(complex(matrix[p.n, p.m]), float(gap[p.n, p.m]))
    if translate is not None:
        raise DomainError("translation is only supported for GaussHermiteFunction inputs")
    matrix, gap = _fourier_by_tensor_rule(u, p.nu, p.lam, count, spec)
    return FourierCoefficient(complex(matrix[p.n, p.m]), float(gap[p.n, p.m]))


def translated_transform(u, x, nu, lam, count, spec=None, inner=None):
    """Both sides of the left-translation rule at one frequency pair.

    Returns ``(direct, rule)`` for ``n, m < count``: ``direct`` is the
    transform of ``y -> u(x y)`` and ``rule`` is
    ``sum_p conj(W((p, n), x)) F(u)(p, m)`` with ``p < inner``.
    """
    inner = inner or 2 * count + 8
    direct, _ = fourier_matrix(u, nu, lam, count, spec, translate=x)
    w, _ = w_matrix(nu, lam, x, inner, spec)
    f, _ = fourier_matrix(u, nu, lam, inner, spec)
    rule = np.conj(w[:, :count]).T @ f[:, :count]
    return direct, rule


def convolution_transform(u, v, nu, lam, count, spec=None, inner=None):
    """Both sides of ``F(u * v) = F(u) F(v)`` at one frequency pair.

    ``direct`` composes the two integral kernels in ``theta`` without any
    mode expansion between them, which is the transform of the convolution
    with the ``x2, x3, x4`` integrals of both factors done in closed form;
    ``product`` is the mode sum ``sum_{p < inner} F(u)(n, p) F(v)(p, m)``.
    """
    spec = spec or FourierSpec()
    inner = inner or 2 * count + 8
    a, sign = _scale(lam)
    modes = mode_set(nu / a**4, count, spec.numerics)
    zero = (0.0,) * 4
    step = min(_kernel_step(u, modes, a, zero, spec), _kernel_step(v, modes, a, zero, spec))
    # the intermediate variable runs over the whole line, not just the mode support
    T = modes.half_width
    reach = a * math.sqrt((_KERNEL_REACH + 10.0) / min(u.widths[0], v.widths[0]))
    t = np.arange(-T - reach, T + reach + step / 2, step)
    h = t[1] - t[0]
    phi = modes(t)

    def kernel(w):
        q = _kernel_factors(w, a, sign, nu, lam, t, zero)
        z = (t[None, :] - t[:, None]) / a
        total = np.zeros((t.size, t.size), dtype=complex)
        for e1, qe in q.items():
            total += qe[:, None] * z**e1 * np.exp(-w.widths[0] * z * z)
        return total

    direct = phi.T @ (kernel(u) @ (kernel(v) @ phi)) * (h**3 / (a * a))
    fu, _ = fourier_matrix(u, nu, lam, inner, spec)
    fv, _ = fourier_matrix(v, nu, lam, inner, spec)
    product = (fu @ fv)[:count, :count]
    return direct, product


# ---------------------------------------------------------------------------
# coefficient tables over a frequency window


@dataclass(frozen=True)
class FrequencyWindow:
    """Truncation of the frequency set: ``n, m <= modes`` and a box in ``(nu, lambda)``.

    The box ``|nu| <= nu_max``, ``lam_min <= |lambda| <= lam_max`` is
    sampled on a log-uniform lattice of step ``step``; ``nu_span`` is the
    extent below ``ln(nu_max)/4`` in the ``u = ln|nu|/4`` variable.
    """

    modes: int = 12
    nu_max: float = 8.0
    lam_min: float = 0.05
    lam_max: float = 8.0
    step: float = 0.05
    nu_span: float = 4.6
    workers: int | None = None

    def __post_init__(self):
        if self.modes < 0 or not (0 < self.lam_min < self.lam_max) or not self.nu_max > 0:
            raise DomainError("empty frequency window")
        if not (self.step > 0 and self.nu_span > 0):
            raise DomainError("lattice step and span must be positive")

    def lattice(self):
        return _lattice.window_lattice(self.nu_max, self.lam_min, self.lam_max, self.step, self.nu_span)


class CoefficientTable:
    """Fourier coefficients ``F(u)(n, m, nu, lambda)`` on a window lattice.

    ``values[(s_nu, s_lam)]`` has shape ``(len(u), len(w), N+1, N+1)``.
    For real ``u`` the ``lambda < 0`` half is the complex conjugate of the
    ``lambda > 0`` half and is not recomputed.
    """

    def __init__(self, window, lattice, values, errors):
        self.window = window
        self.lattice = lattice
        self.values = values
        self.errors = errors

    @classmethod
    def zeros(cls, window):
        lattice = window.lattice()
        shape = (lattice.u.size, lattice.w.size, window.modes + 1, window.modes + 1)
        values = {(s, l): np.zeros(shape, dtype=complex) for s in (1, -1) for l in (1, -1)}
        errors = {k: np.zeros(shape) for k in values}
        return cls(window, lattice, values, errors)

    def points(self):
        """Iterate ``(FrequencyPoint, value)`` over the stored entries."""
        lat = self.lattice
        for (s, l), block in self.values.items():
            nu = lat.nu(s)
            for i in range(lat.u.size):
                for j in range(lat.w.size):
                    for n in range(block.shape[2]):
                        for m in range(block.shape[3]):
                            yield FrequencyPoint(n, m, nu[i], l * lat.lam[j]), block[i, j, n, m]


def _diagonal_jobs(lattice, signs):
    jobs = []
    for s in signs:
        mus = lattice.diagonal_mu(s)
        for k in range(lattice.n_diagonals):
            i, j = lattice.diagonal_nodes(k)
            if i.size:
                jobs.append((s, k, float(mus[k]), i, j))
    return jobs


def fourier_table(u, window=None, spec=None):
    """:class:`CoefficientTable` of ``u`` on the lattice of ``window``."""
    window = window or FrequencyWindow()
    spec = spec or FourierSpec()
    table = CoefficientTable.zeros(window)
    lat = table.lattice
    count = window.modes + 1
    real = all(np.isreal(c) for c, _ in u.terms)
    lam_signs = (1,) if real else (1, -1)

    def job(item):
        s, k, mu, rows, cols = item
        out = []
        for ls in lam_signs:
            for i, j in zip(rows, cols):
                nu = s * math.exp(4.0 * lat.u[i])
                lam = ls * lat.lam[j]
                f, gap = fourier_matrix(u, nu, lam, count, spec)
                out.append((ls, i, j, f, gap))
        return s, out

    for s, out in ordered_map(job, _diagonal_jobs(lat, (1, -1)), window.workers):
        for ls, i, j, f, gap in out:
            table.values[(s, ls)][i, j] = f
            table.errors[(s, ls)][i, j] = gap
    if real:
        for s in (1, -1):
            table.values[(s, -1)] = np.conj(table.values[(s, 1)])
            table.errors[(s, -1)] = table.errors[(s, 1)].copy()
    return table


@dataclass(frozen=True)
class PlancherelResult:
    ratio: float
    quadrature_error: float
    last_shell: float
    frequency_norm: float
    l2_norm: float


def plancherel_check(u, window=None, spec=None, table=None, shell_tol=0.05):
    """``(2pi)^-3 sum_{n,m<=N} int int |F(u)|^2 dnu dlambda / ||u||^2``.

    ``last_shell`` is the share of the sum carried by ``max(n, m) = N``;
    above ``shell_tol`` the mode truncation is not under control and a
    :class:`ConvergenceError` is raised.
    """
    window = window or FrequencyWindow()
    table = table or fourier_table(u, window, spec)
    lat = table.lattice
    jac = lat.jacobian()
    N = window.modes
    shell = np.zeros((N + 1, N + 1), dtype=bool)
    shell[N, :] = shell[:, N] = True
    total = err = last = 0.0
    for block in table.values.values():
        density = np.abs(block) ** 2
        value, gap = lat.integrate(density.sum(axis=(2, 3)) * jac)
        edge, _ = lat.integrate(density[..., shell].sum(axis=-1) * jac)
        total, err, last = total + value, err + gap, last + edge
    norm = u.l2_norm_squared()
    scale = (2.0 * math.pi) ** -3
    result = PlancherelResult(
        ratio=scale * total / norm,
        quadrature_error=scale * err / norm,
        last_shell=last / total if total else 0.0,
        frequency_norm=scale * total,
        l2_norm=norm,
    )
    if result.last_shell > shell_tol:
        raise ConvergenceError(
            f"last mode shell carries {result.last_shell:.2%} of the norm", achieved=result
        )
    return result


@dataclass(frozen=True)
class InversionResult:
    value: complex
    conjugate_path: complex
    quadrature_error: float

    @property
    def path_gap(self):
        return abs(self.value - self.conjugate_path)


def inverse_fourier_at(table, x, spec=None):
    """``(2pi)^-3 sum_{n,m} int int W((n,m), x^-1) F(n,m) dnu dlambda`` over the table.

    The matrix coefficients are evaluated twice, at ``x^-1`` directly and
    as ``conj(W((m, n), x))``; both sums are returned.
    """
    spec = spec or FourierSpec()
    lat = table.lattice
    count = table.window.modes + 1
    x = GroupElement(*x)
    xinv = group_inverse(x)
    if all(block.size == 0 or not np.any(block) for block in table.values.values()):
        return InversionResult(0j, 0j, 0.0)
    direct = {key: np.zeros(block.shape[:2], dtype=complex) for key, block in table.values.items()}
    mirror = {key: np.zeros_like(value) for key, value in direct.items()}

    def job(item):
        s, k, mu, rows, cols = item
        out = []
        for ls in (1, -1):
            block = table.values[(s, ls)]
            for i, j in zip(rows, cols):
                nu = s * math.exp(4.0 * lat.u[i])
                lam = ls * lat.lam[j]
                w_inv, _ = w_matrix(nu, lam, xinv, count, spec)
                w_fwd, _ = w_matrix(nu, lam, x, count, spec)
                f = block[i, j]
                out.append((ls, i, j, np.sum(w_inv * f), np.sum(np.conj(w_fwd).T * f)))
        return s, out

    for s, out in ordered_map(job, _diagonal_jobs(lat, (1, -1)), table.window.workers):
        for ls, i, j, a, b in out:
            direct[(s, ls)][i, j] = a
            mirror[(s, ls)][i, j] = b
    jac = lat.jacobian()
    scale = (2.0 * math.pi) ** -3
    value = conj_value = 0j
    err = 0.0
    for key in direct:
        v, gap = lat.integrate(direct[key] * jac)
        c, _ = lat.integrate(mirror[key] * jac)
        value, conj_value, err = value + v, conj_value + c, err + gap
    return InversionResult(scale * value, scale * conj_value, scale * err)


# ---------------------------------------------------------------------------
# heat kernel


@dataclass(frozen=True)
class HeatKernelValue:
    value: float
    imaginary_residual: float
    quadrature_error: float
    truncation_bound: float


@lru_cache(maxsize=4)
def _levels(mu, count, numerics):
    return solve_well(reference_well(mu), count, numerics.covering(count - 1)).energies


def _energy_floor(nu, lam):
    """Lower bound for ``E_0(nu, lambda)``."""
    floor = _lattice.GROUND_FLOOR * lam ** (2.0 / 3.0)
    if nu > 0:
        return max(floor, _lattice.ROOT_FLOOR * math.sqrt(nu))
    return max(floor, nu * nu / (lam * lam))


def heat_kernel_at(t, x, trunc=None, spec=None, step=0.1, residual_tol=1e-8):
    """``(2pi)^-3 sum_m int int exp(-t E_m) W((m,m), x^-1) dnu dlambda``.

    The ``(nu, lambda)`` integral runs over a log lattice cut where
    ``t E`` exceeds 26; nodes with ``|mu| > MU_LIMIT`` are skipped and
    counted, with the mode truncation at ``trunc.m_max``, in
    ``truncation_bound``.  The imaginary part of the sum must vanish;
    a residual above ``residual_tol`` times the value raises
    :class:`AccuracyError`.
    """
    from .spectral_sums import TruncationSpec

    if not t > 0:
        raise DomainError("t must be positive")
    trunc = trunc or TruncationSpec()
    spec = spec or FourierSpec(numerics=trunc.numerics)
    e_cut = 26.0 / t
    lat = _lattice.cutoff_lattice(e_cut, step)
    xinv = group_inverse(GroupElement(*x))
    at_origin = all(c == 0 for c in xinv)
    jac = lat.jacobian()
    lam = lat.lam
    cap = trunc.m_max + 1

    def node_bound(s, i, j):
        return math.exp(-t * _energy_floor(s * math.exp(4.0 * lat.u[i]), lam[j])) * jac[i, j]

    jobs = _diagonal_jobs(lat, (1, -1))
    bounds = {(s, k): [node_bound(s, i, j) for i, j in zip(rows, cols)] for s, k, _, rows, cols in jobs}
    total_bound = sum(sum(b) for b in bounds.values())

    def job(item):
        s, k, mu, rows, cols = item
        keep = [q for q, b in enumerate(bounds[(s, k)]) if b > 1e-11 * total_bound]
        if not keep:
            return s, [], 0.0
        if abs(mu) > MU_LIMIT:
            return s, [], sum(bounds[(s, k)][q] for q in keep)
        a2_min = min(lam[cols[q]] for q in keep) ** (2.0 / 3.0)
        # semiclassical count of levels below the cutoff, with a margin
        level = e_cut / a2_min
        well = reference_well(mu)
        count = min(cap, int(well.action(level) / math.pi * 1.1) + 4) if level > well.minimum else 1
        if at_origin:
            energies = _levels(float(f"{mu:.12g}"), count, spec.numerics)
        else:
            modes = mode_set(mu, count, spec.numerics)
            energies = modes.energies
        out = []
        skipped = 0.0
        for q in keep:
            i, j = rows[q], cols[q]
            a = lam[j] ** (1.0 / 3.0)
            weights = np.exp(-t * a * a * energies)
            skipped += weights[-1] * jac[i, j]
            if at_origin:
                out.append((i, j, complex(weights.sum()), complex(weights.sum())))
                continue
            nu = s * math.exp(4.0 * lat.u[i])
            plus, minus = _w_diagonal_pair(modes, a, *xinv[:3], spec)
            angle = lam[j] * xinv[3] - nu / lam[j] * xinv[1]
            pair = (
                np.exp(1j * angle) * np.sum(weights * plus),
                np.exp(-1j * angle) * np.sum(weights * minus),
            )
            out.append((i, j, pair[0], pair[1]))
        return s, out, skipped

    plus = {s: np.zeros(jac.shape, dtype=complex) for s in (1, -1)}
    minus = {s: np.zeros(jac.shape, dtype=complex) for s in (1, -1)}
    tail = 0.0
    for s, out, skipped in ordered_map(job, jobs, trunc.workers):
        tail += skipped
        for i, j, p, m in out:
            plus[s][i, j] = p
            minus[s][i, j] = m
    value = 0j
    err = 0.0
    for s in (1, -1):
        v, gap = lat.integrate((plus[s] + minus[s]) * jac)
        value, err = value + v, err + gap
    scale = (2.0 * math.pi) ** -3
    result = HeatKernelValue(
        value=scale * value.real,
        imaginary_residual=scale * abs(value.imag),
        quadrature_error=scale * float(err),
        truncation_bound=scale * tail * lat.step * lat.step,
    )
    if result.imaginary_residual > residual_tol * max(abs(result.value), 1e-300):
        raise AccuracyError(
            f"imaginary residual {result.imaginary_residual:.3e} of a real kernel",
            achieved=result,
        )
    return result
