"""Summability integrals, the dual-sphere constant and the magic formula.

Everything here is an integral of a function of the eigenvalues
``E_m(mu)`` over ``m`` and ``mu``.  A :class:`SpectrumTable` holds those
eigenvalues for ``m <= m_max``: Chebyshev-Lobatto samples on geometric
panels of ``[-M, M]`` and, beyond ``|mu| = M``, semiclassical forms in
``h = |mu|^{-3/2}`` that stay smooth up to ``h = 0``:

* ``mu > M``:  ``E_m(mu) = sqrt(mu) g(h)`` with ``g(0) = sqrt(2)(2 floor(m/2) + 1)``,
* ``mu < -M``: ``E_m(mu) = mu^2 + sqrt|mu| g(h)`` with ``g(0) = 2m + 1``.

``mu``-integrals use Clenshaw-Curtis weights on the same samples, so the
rule with half the points gives an error estimate for free.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, special
from scipy.interpolate import BarycentricInterpolator

from . import _lattice
from ._parallel import ordered_map
from .engel_group import HOMOGENEOUS_DIMENSION
from .errors import ConvergenceError, DomainError
from .quartic_oscillator import NumericsSpec, QuarticWell, reference_well, solve_well

SPHERE_EXPONENT = HOMOGENEOUS_DIMENSION / 2.0
EXTRAPOLATE = "extrapolate"
SEMICLASSICAL = "semiclassical"
TAIL_MODES = (EXTRAPOLATE, SEMICLASSICAL)


def _lobatto(n):
    """Chebyshev-Lobatto points on ``[-1, 1]`` and Clenshaw-Curtis weights."""
    theta = np.pi * np.arange(n + 1) / n
    x = -np.cos(theta)
    w = np.zeros(n + 1)
    v = np.ones(n - 1)
    inner = theta[1:-1]
    if n % 2 == 0:
        w[0] = w[n] = 1.0 / (n * n - 1)
        for k in range(1, n // 2):
            v -= 2.0 * np.cos(2 * k * inner) / (4 * k * k - 1)
        v -= np.cos(n * inner) / (n * n - 1)
    else:
        w[0] = w[n] = 1.0 / (n * n)
        for k in range(1, (n - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * inner) / (4 * k * k - 1)
    w[1:-1] = 2.0 * v / n
    if n % 2 == 0:
        x[n // 2] = 0.0
    return x, w


def _panel_edges(M):
    edges = [0.0]
    e = 1.0
    while e < M * (1 - 1e-12):
        edges.append(e)
        e *= 2.0
    edges.append(float(M))
    positive = np.array(edges)
    return np.concatenate([-positive[:0:-1], positive])


@dataclass(frozen=True)
class Panel:
    lo: float
    hi: float
    index: np.ndarray
    weights: np.ndarray
    half_weights: np.ndarray


@dataclass(frozen=True)
class TruncationSpec:
    """Truncation of the ``(m, mu)`` index set and the quadrature over it.

    ``panel_order`` is the (even) number of Chebyshev intervals per
    ``mu`` panel; panels are ``[0, 1], [1, 2], [2, 4], ...`` up to ``M``
    and mirrored.  ``far_order`` plays the same role for the two
    semiclassical pieces beyond ``|mu| = M``.  ``eps`` and ``mu0`` define
    the regime partition of :func:`summability_integral`.
    """

    m_max: int = 40
    M: float = 40.0
    panel_order: int = 16
    far_order: int = 16
    tail_mode: str = EXTRAPOLATE
    rel_tol: float = 0.01
    eps: float = 0.3
    mu0: float = 10.0
    eig_tol: float = 1e-9
    workers: int | None = None

    def __post_init__(self):
        if self.m_max < 8:
            raise DomainError("m_max must be at least 8")
        if self.M < 10:
            raise DomainError("M must be at least 10")
        if self.panel_order < 4 or self.panel_order % 2 or self.far_order < 4 or self.far_order % 2:
            raise DomainError("panel orders must be even and at least 4")
        if self.tail_mode not in TAIL_MODES:
            raise DomainError(f"tail_mode must be one of {TAIL_MODES}")
        if not (self.rel_tol > 0 and self.eps > 0 and self.mu0 > 0 and self.eig_tol > 0):
            raise DomainError("tolerances and regime parameters must be positive")

    def doubled(self):
        return TruncationSpec(
            m_max=2 * self.m_max, M=2 * self.M, panel_order=self.panel_order,
            far_order=self.far_order, tail_mode=self.tail_mode, rel_tol=self.rel_tol,
            eps=self.eps, mu0=self.mu0, eig_tol=self.eig_tol, workers=self.workers,
        )

    @property
    def mu_grid(self):
        """Distinct ``mu`` nodes on ``[-M, M]`` and the per-panel rules over them."""
        return _mu_grid(float(self.M), self.panel_order)

    @property
    def numerics(self):
        return NumericsSpec(max_index=self.m_max, eig_tol=self.eig_tol)


@lru_cache(maxsize=8)
def _mu_grid(M, order):
    x, w = _lobatto(order)
    xh, wh = _lobatto(order // 2)
    edges = _panel_edges(M)
    raw = []
    for a, b in zip(edges[:-1], edges[1:]):
        raw.append(0.5 * (a + b) + 0.5 * (b - a) * x)
    nodes = np.unique(np.round(np.concatenate(raw), 13))
    panels = []
    for a, b, pts in zip(edges[:-1], edges[1:], raw):
        idx = np.searchsorted(nodes, np.round(pts, 13))
        half = np.zeros(order + 1)
        half[::2] = wh
        panels.append(Panel(a, b, idx, 0.5 * (b - a) * w, 0.5 * (b - a) * half))
    return nodes, tuple(panels)


# ---------------------------------------------------------------------------
# eigenvalue table


def _double_well_limit(m):
    return math.sqrt(2.0) * (2 * (m // 2) + 1)


class SpectrumTable:
    """``E_m(mu)`` for ``m <= m_max`` and every real ``mu``.

    ``energies`` and ``errors`` hold the direct solves at ``nodes``; calling
    the table interpolates.
    """

    def __init__(self, trunc):
        self.m_max = trunc.m_max
        self.M = float(trunc.M)
        count = trunc.m_max + 1
        spec = trunc.numerics
        self.nodes, self.panels = trunc.mu_grid
        rows = ordered_map(
            lambda mu: solve_well(reference_well(mu), count, spec), self.nodes, trunc.workers
        )
        self.energies = np.array([r.energies for r in rows])
        self.errors = np.array([r.est_errors for r in rows])
        self._central = [
            (p.lo, p.hi, BarycentricInterpolator(self.nodes[p.index], self.energies[p.index]))
            for p in self.panels
        ]
        x, _ = _lobatto(trunc.far_order)
        self.h_top = self.M**-1.5
        h = 0.5 * self.h_top * (x + 1.0)
        h[0] = 0.0
        self.far_h = h
        ms = np.arange(count)

        def far(beta):
            def solve(hj):
                return solve_well(QuarticWell(alpha=1.0, beta=beta, hbar=hj), count, spec)

            return ordered_map(solve, h[1:], trunc.workers)

        double = far(1.0)
        single = far(-1.0)
        g_double = np.vstack([[_double_well_limit(m) for m in ms]] + [r.energies / hj for r, hj in zip(double, h[1:])])
        g_single = np.vstack([2.0 * ms + 1.0] + [(r.energies - 1.0) / hj for r, hj in zip(single, h[1:])])
        self.far_double = g_double
        self.far_single = g_single
        self._g_double = BarycentricInterpolator(h, g_double)
        self._g_single = BarycentricInterpolator(h, g_single)

    def __call__(self, mu):
        mu = np.asarray(mu, dtype=float)
        flat = mu.ravel()
        out = np.empty((flat.size, self.m_max + 1))
        for lo, hi, interp in self._central:
            sel = (flat >= lo) & (flat <= hi)
            if np.any(sel):
                out[sel] = interp(flat[sel])
        hi = flat > self.M
        if np.any(hi):
            out[hi] = np.sqrt(flat[hi])[:, None] * self.g_double(flat[hi] ** -1.5)
        lo = flat < -self.M
        if np.any(lo):
            eta = -flat[lo]
            out[lo] = (eta * eta)[:, None] + np.sqrt(eta)[:, None] * self.g_single(eta**-1.5)
        return out.reshape(mu.shape + (self.m_max + 1,))

    def g_double(self, h):
        """``E_m(mu) / sqrt(mu)`` as a function of ``h = mu^{-3/2}``, ``0 <= h <= M^{-3/2}``."""
        return np.atleast_2d(self._g_double(np.asarray(h, dtype=float)))

    def g_single(self, h):
        """``(E_m(mu) - mu^2) / sqrt|mu|`` as a function of ``h = |mu|^{-3/2}``."""
        return np.atleast_2d(self._g_single(np.asarray(h, dtype=float)))


_TABLES = {}


def spectrum_table(trunc):
    """Shared, lazily built :class:`SpectrumTable` for a truncation."""
    key = (trunc.m_max, float(trunc.M), trunc.panel_order, trunc.far_order, trunc.eig_tol)
    table = _TABLES.get(key)
    if table is None:
        table = _TABLES[key] = SpectrumTable(trunc)
    return table


# ---------------------------------------------------------------------------
# mu integrals


def _panel_integrals(values, panels):
    """Per-column integrals over ``[-M, M]`` and a Clenshaw-Curtis error bound."""
    total = np.zeros(values.shape[1])
    error = np.zeros(values.shape[1])
    for p in panels:
        block = values[p.index]
        full = p.weights @ block
        total += full
        error += np.abs(full - p.half_weights @ block)
    return total, error


def _negative_tail_bound(gamma, e_at_zero, M):
    """``sum_m int_{-inf}^{-M} E_m^{-gamma}`` bounded with ``E_m(mu) >= E_m(0) + mu^2``."""
    out = np.empty(e_at_zero.size)
    for m, c in enumerate(e_at_zero):
        out[m] = integrate.quad(lambda s: (c + s * s) ** -gamma, M, np.inf, epsabs=0, epsrel=1e-10)[0]
    return out


def _positive_tail_fit(gamma, mu_pair, e_pair):
    """Tail ``int_M^inf E^{-gamma}`` from two samples at ``mu_1 < M``.

    Returns the estimate of the model ``a sqrt(mu) + b / mu`` and the gap to
    the pure power law ``A mu^p`` through the same two points.
    """
    m1, m2 = mu_pair
    e1, e2 = e_pair
    # a sqrt(mu) + b / mu
    mat = np.array([[math.sqrt(m1), 1.0 / m1], [math.sqrt(m2), 1.0 / m2]])
    a, b = np.linalg.solve(mat, [e1, e2])
    model = integrate.quad(
        lambda mu: (a * math.sqrt(mu) + b / mu) ** -gamma, m2, np.inf, epsabs=0, epsrel=1e-10
    )[0]
    p = math.log(e2 / e1) / math.log(m2 / m1)
    if p * gamma <= 1.0:
        return model, math.inf
    power = e2**-gamma * m2 / (p * gamma - 1.0)
    return model, abs(model - power)


def _positive_tail_semiclassical(gamma, table, order=24):
    """Tail ``int_M^inf E^{-gamma} dmu`` in ``h = mu^{-3/2}`` by Gauss-Jacobi quadrature.

    With ``E = h^{-1/3} g(h)`` the integral is
    ``(2/3) int_0^{h_M} h^{(gamma - 5)/3} g(h)^{-gamma} dh``; the weight is
    integrable exactly when ``gamma > 2``.
    """
    beta = (gamma - 5.0) / 3.0
    if beta <= -1.0:
        n = table.m_max + 1
        return np.full(n, math.inf), np.full(n, math.inf)

    def rule(k):
        x, w = special.roots_jacobi(k, 0.0, beta)
        h = 0.5 * table.h_top * (x + 1.0)
        scale = (0.5 * table.h_top) ** (beta + 1.0)
        return (2.0 / 3.0) * scale * (w @ table.g_double(h) ** -gamma)

    fine = rule(order)
    coarse = rule(order // 2)
    # the interpolant joins the central table at mu = M only to solver accuracy
    junction = np.abs(table.g_double(table.h_top)[0] * math.sqrt(table.M) / table.energies[-1] - 1.0)
    return fine, np.abs(fine - coarse) + gamma * junction * np.abs(fine)


def _pair_tail(per_m, m_max, windows=(4, 8)):
    """Contribution of ``m > m_max`` from a power law fitted to pair sums.

    Levels ``2k`` and ``2k + 1`` merge into tunneling doublets for large
    ``mu``, so the fit runs over ``c_{2k} + c_{2k+1}`` against ``k + 1/2``.
    """
    full = (m_max + 1) // 2
    k = np.arange(full)
    pairs = per_m[0:2 * full:2] + per_m[1:2 * full:2]
    estimates = []
    for width in windows:
        width = min(width, full - 1)
        kk, pp = k[-width:] + 0.5, pairs[-width:]
        slope, intercept = np.polyfit(np.log(kk), np.log(pp), 1)
        p = -slope
        if p <= 1.0:
            return math.inf, math.inf, p
        amp = math.exp(intercept)
        tail = amp * special.zeta(p, full + 0.5)
        if m_max % 2 == 0:
            # pair `full` already has its even member in the sum
            tail -= per_m[m_max]
        estimates.append((tail, p))
    tail, p = estimates[-1]
    return tail, abs(estimates[0][0] - tail), p


@dataclass(frozen=True)
class TailSum:
    """``sum_m int E_m(mu)^{-gamma} dmu`` with its tail budget.

    ``value`` is the best estimate; ``half_width`` bounds the combined
    quadrature error and tail uncertainties.
    """

    gamma: float
    value: float
    half_width: float
    core: float
    quadrature_error: float
    negative_tail: float
    positive_tail: float
    positive_tail_uncertainty: float
    index_tail: float
    index_tail_uncertainty: float
    index_tail_exponent: float
    per_index: np.ndarray = field(repr=False)


def eigenvalue_power_sum(gamma, trunc, table=None):
    """``sum_m int_R E_m(mu)^{-gamma} dmu`` including tail estimates.

    The ``mu < -M`` part is bounded by ``E_m(mu) >= E_m(0) + mu^2`` and
    counted as half its bound with the other half as uncertainty.  The
    ``mu > M`` part follows ``trunc.tail_mode``; the ``m > m_max`` part
    comes from :func:`_pair_tail`.
    """
    if not gamma > 0:
        raise DomainError("gamma must be positive")
    table = table or spectrum_table(trunc)
    core, quad_err = _panel_integrals(table.energies**-gamma, table.panels)
    zero_row = table.energies[np.searchsorted(table.nodes, 0.0)]
    neg_bound = _negative_tail_bound(gamma, zero_row, table.M)
    if trunc.tail_mode == EXTRAPOLATE:
        mu_pair = (table.nodes[-2], table.nodes[-1])
        fits = [
            _positive_tail_fit(gamma, mu_pair, (table.energies[-2, m], table.energies[-1, m]))
            for m in range(trunc.m_max + 1)
        ]
        pos = np.array([f[0] for f in fits])
        pos_unc = np.array([f[1] for f in fits])
    else:
        pos, pos_unc = _positive_tail_semiclassical(gamma, table)
    per_m = core + pos + 0.5 * neg_bound
    m_tail, m_unc, exponent = _pair_tail(per_m, trunc.m_max)
    value = float(np.sum(per_m) + m_tail)
    half = float(np.sum(quad_err) + np.sum(pos_unc) + 0.5 * np.sum(neg_bound) + m_unc)
    return TailSum(
        gamma=gamma, value=value, half_width=half, core=float(np.sum(core)),
        quadrature_error=float(np.sum(quad_err)), negative_tail=float(np.sum(neg_bound)),
        positive_tail=float(np.sum(pos)), positive_tail_uncertainty=float(np.sum(pos_unc)),
        index_tail=float(m_tail), index_tail_uncertainty=float(m_unc),
        index_tail_exponent=float(exponent), per_index=per_m,
    )


@dataclass(frozen=True)
class SphereConstant:
    value: float
    lower: float
    upper: float
    breakdown: TailSum

    @property
    def relative_width(self):
        return (self.upper - self.lower) / self.value


def sphere_constant(trunc=None, table=None):
    """``C_G = 3 sum_m int E_m(mu)^{-7/2} dmu`` with an uncertainty interval.

    Raises :class:`ConvergenceError` carrying the interval when its
    relative width exceeds ``trunc.rel_tol``.
    """
    trunc = trunc or TruncationSpec()
    parts = eigenvalue_power_sum(SPHERE_EXPONENT, trunc, table)
    value = 3.0 * parts.value
    half = 3.0 * parts.half_width
    result = SphereConstant(value=value, lower=value - half, upper=value + half, breakdown=parts)
    if not result.relative_width <= trunc.rel_tol:
        raise ConvergenceError(
            f"sphere constant interval [{result.lower:.6g}, {result.upper:.6g}] is wider "
            f"than rel_tol={trunc.rel_tol}",
            achieved=(result.lower, result.upper),
        )
    return result


# ---------------------------------------------------------------------------
# summability


@dataclass(frozen=True)
class RegimeReport:
    """Split of a truncated ``I_gamma`` and the large-``mu`` trend diagnostic.

    ``zero``, ``minus`` and ``plus`` partition the sampled ``(mu, m)``
    pairs.  ``tail_exponent`` is the fitted log-log slope of
    ``S(mu) = sum_{m <= m_max} E_m(mu)^{-gamma}`` for large ``mu``; the
    label is ``"converging"`` when it is below ``-1``.  This is a trend
    diagnostic on truncated data, not a proof.
    """

    zero: float
    minus: float
    plus: float
    quadrature_error: float
    tail_exponent: float
    label: str


def summability_integral(gamma, trunc=None, table=None):
    """Truncated ``sum_{m <= m_max} int_{-M}^{M} E_m(mu)^{-gamma} dmu`` and its :class:`RegimeReport`."""
    if not gamma > 0:
        raise DomainError("gamma must be positive")
    trunc = trunc or TruncationSpec()
    table = table or spectrum_table(trunc)
    energies = table.energies
    mu = table.nodes[:, None]
    values = energies**-gamma
    central = (np.abs(mu) <= trunc.mu0) | (mu * mu <= trunc.eps**2 * energies)
    masks = {
        "zero": central,
        "minus": ~central & (mu < 0),
        "plus": ~central & (mu > 0),
    }
    # assemble the global weight vector once, then split by mask
    weights = np.zeros(table.nodes.size)
    for p in table.panels:
        np.add.at(weights, p.index, p.weights)
    weighted = weights[:, None] * values
    parts = {k: float(np.sum(weighted[mask])) for k, mask in masks.items()}
    total = float(np.sum(weighted))
    _, quad_err = _panel_integrals(values, table.panels)
    # trend of the mu -> +inf tail on mu in [M, 64 M]
    probe = table.M * np.geomspace(1.0, 64.0, 25)
    trend = np.sum(table(probe) ** -gamma, axis=1)
    slope = float(np.polyfit(np.log(probe), np.log(trend), 1)[0])
    report = RegimeReport(
        zero=parts["zero"], minus=parts["minus"], plus=parts["plus"],
        quadrature_error=float(np.sum(quad_err)), tail_exponent=slope,
        label="converging" if slope < -1.0 else "diverging",
    )
    return total, report


# ---------------------------------------------------------------------------
# radial profiles and the magic formula


EXPONENTIAL = "exponential"
POWER_CUTOFF = "power_cutoff"
TABULATED = "tabulated"


@dataclass(frozen=True)
class RadialProfile:
    """A radial function ``F(r)``, ``r > 0``.

    * ``exponential``: ``r^power exp(-t r)``,
    * ``power_cutoff``: ``r^(-power)`` on ``(0, cutoff]`` and zero beyond,
    * ``tabulated``: linear interpolation of ``values`` at ``radii``, zero outside.
    """

    kind: str
    t: float = 1.0
    power: float = 0.0
    cutoff: float = 1.0
    radii: tuple = ()
    values: tuple = ()

    def __post_init__(self):
        if self.kind == EXPONENTIAL:
            if not self.t > 0 or self.power < 0:
                raise DomainError("exponential profile needs t > 0 and power >= 0")
        elif self.kind == POWER_CUTOFF:
            if not self.cutoff > 0:
                raise DomainError("cutoff must be positive")
            if not self.power < SPHERE_EXPONENT:
                raise DomainError("r^{5/2} r^{-s} is integrable at 0 only for s < 7/2")
        elif self.kind == TABULATED:
            r = np.asarray(self.radii, dtype=float)
            if r.size < 2 or r.size != len(self.values) or np.any(np.diff(r) <= 0) or r[0] < 0:
                raise DomainError("tabulated profile needs increasing radii >= 0 matching values")
            if not np.all(np.isfinite(self.values)):
                raise DomainError("tabulated values must be finite")
        else:
            raise DomainError(f"unknown profile kind {self.kind!r}")

    @classmethod
    def exponential(cls, t=1.0, power=0.0):
        return cls(EXPONENTIAL, t=float(t), power=float(power))

    @classmethod
    def power_cutoff(cls, s, cutoff):
        return cls(POWER_CUTOFF, power=float(s), cutoff=float(cutoff))

    @classmethod
    def tabulated(cls, radii, values):
        return cls(TABULATED, radii=tuple(map(float, radii)), values=tuple(map(float, values)))

    @property
    def is_zero(self):
        return self.kind == TABULATED and not any(self.values)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == EXPONENTIAL:
            return r**self.power * np.exp(-self.t * r)
        if self.kind == POWER_CUTOFF:
            with np.errstate(divide="ignore"):
                return np.where((r > 0) & (r <= self.cutoff), np.abs(r) ** -self.power, 0.0)
        return np.interp(r, self.radii, self.values, left=0.0, right=0.0)

    def energy_cutoff(self):
        """Radius beyond which ``F`` is negligible (below ``1e-17`` of its scale) or zero."""
        if self.kind == EXPONENTIAL:
            r = 40.0 / self.t
            for _ in range(5):
                r = (40.0 + self.power * math.log(max(r * self.t, 1.0))) / self.t
            return r
        if self.kind == POWER_CUTOFF:
            return self.cutoff
        return self.radii[-1]

    def radial_moment(self, weight=2.5):
        """``int_0^inf r^weight F(r) dr``."""
        if self.kind == EXPONENTIAL:
            k = weight + self.power + 1.0
            return math.gamma(k) / self.t**k
        if self.kind == POWER_CUTOFF:
            k = weight - self.power + 1.0
            if not k > 0:
                raise DomainError("radial moment diverges at r = 0")
            return self.cutoff**k / k
        # exact for the piecewise-linear interpolant, segment by segment
        r = np.asarray(self.radii)
        f = np.asarray(self.values)
        lo, hi = r[:-1], r[1:]
        slope = np.diff(f) / np.diff(r)
        p, q = weight + 1.0, weight + 2.0
        return float(np.sum(
            (f[:-1] - slope * lo) * (hi**p - lo**p) / p + slope * (hi**q - lo**q) / q
        ))


def magic_rhs(profile, trunc=None, table=None):
    """``C_G int_0^inf r^{5/2} F(r) dr``."""
    c = sphere_constant(trunc, table).value
    return c * profile.radial_moment()


@dataclass(frozen=True)
class FrequencyIntegral:
    value: float
    error_estimate: float
    boundary_fraction: float


def frequency_lattice(profile, step=0.04):
    """Log-uniform :class:`~engel_spectra._lattice.LogLattice` cut at the profile's energy cutoff.

    With ``nu = +-exp(4u)`` and ``|lambda| = exp(3w)`` on a common step,
    ``mu = nu/|lambda|^{4/3}`` takes only ``len(u) + len(w) - 1`` distinct
    values, so eigen-data are needed per diagonal rather than per node.
    """
    return _lattice.cutoff_lattice(profile.energy_cutoff(), step)


def magic_lhs(profile, trunc=None, table=None, lambda_sign=None, step=0.04):
    """``sum_m int int F(E_m(nu, lambda)) dnu dlambda`` on a log-uniform ``(nu, lambda)`` lattice.

    The integral runs directly over frequencies: each half-plane in ``nu``
    and each sign of ``lambda`` gets a product trapezoid rule in
    ``(ln|nu|, ln|lambda|)``, which converges geometrically for integrands
    decaying at both ends.  ``lambda_sign`` restricts to one sign of
    ``lambda``.  Raises :class:`ConvergenceError` when the integrand has
    not decayed at the lattice boundary.
    """
    trunc = trunc or TruncationSpec()
    if profile.is_zero:
        return FrequencyIntegral(0.0, 0.0, 0.0)
    table = table or spectrum_table(trunc)
    lat = frequency_lattice(profile, step)
    diag = lat.diagonal_index()
    jac = lat.jacobian()
    lam23 = lat.lam ** (2.0 / 3.0)
    signs = (1.0, -1.0) if lambda_sign is None else (float(np.sign(lambda_sign)),)
    total = 0.0
    error = 0.0
    edge = 0.0
    for nu_sign in (1.0, -1.0):
        energies = table(lat.diagonal_mu(nu_sign))
        values = np.zeros(jac.shape)
        for m in range(trunc.m_max + 1):
            values += profile(lam23[None, :] * energies[diag, m])
        values *= jac
        value, err = lat.integrate(values)
        rim = np.concatenate([values[0], values[-1], values[:, 0], values[:, -1]])
        peak = float(np.max(np.abs(values))) or 1.0
        for _ in signs:
            total += value
            error += err
        edge = max(edge, float(np.max(np.abs(rim))) / peak)
    if edge > trunc.rel_tol:
        raise ConvergenceError(
            f"integrand not decayed at the frequency lattice boundary ({edge:.2e})", achieved=edge
        )
    return FrequencyIntegral(float(total), float(error), edge)


def heat_trace_density(t, trunc=None, table=None):
    """``(2 pi)^{-3} C_G Gamma(7/2) t^{-7/2}``, the heat kernel at the identity."""
    if not t > 0:
        raise DomainError("t must be positive")
    c = sphere_constant(trunc, table).value
    return c * math.gamma(SPHERE_EXPONENT) * t**-SPHERE_EXPONENT / (2.0 * math.pi) ** 3
