"""Eigenvalues and eigenfunctions of the quartic oscillator family.

The reference operator is ``P_mu = -d^2/dtheta^2 + (theta^2/2 - mu)^2``.
Every operator handled here has the shape

    -hbar^2 d^2/dtheta^2 + (alpha theta^2 / 2 - beta)^2 + offset

(see :class:`QuarticWell`), which covers ``P_mu``, the two-parameter family
``P_{nu,lambda}`` and the semiclassical single and double wells.

Discretization: cell-centred uniform grid on the half line, three-point
Laplacian, even states with a reflecting ghost node and odd states with an
antisymmetric one.  This is exactly the even/odd splitting of the full-line
uniform grid whose nodes are symmetric about the origin.  Eigenvalues come
from Sturm bisection on three nested grids (n, 2n, 4n) followed by two
Richardson steps; eigenvectors come from inverse iteration.
"""

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from . import tridiagonal
from .errors import ConvergenceError, DomainError, TruncationError, AccuracyError

# amplitude decay exp(-AGMON_DECAY) is required beyond the truncation points
AGMON_DECAY = 36.0
# coarse grid spacing in units of 1/k_max, k_max the largest local wavenumber
BASE_STEP = 0.5
MAX_REFINEMENTS = 3

EVEN = "even"
ODD = "odd"


@dataclass(frozen=True)
class NumericsSpec:
    """Discretization and tolerance settings.

    ``half_width`` and ``grid_size`` default to automatic choices: the
    domain is cut where the top requested state has decayed by
    ``exp(-36)`` (and where the potential exceeds four times its energy),
    and the coarse half-line grid resolves the largest local wavenumber
    with two nodes per radian.  When given, ``grid_size`` is the number
    of coarse half-line nodes.
    """

    half_width: float | None = None
    grid_size: int | None = None
    quad_tol: float = 1e-10
    eig_tol: float = 1e-9
    max_index: int = 10

    def __post_init__(self):
        if self.half_width is not None and not self.half_width > 0:
            raise DomainError("half_width must be positive")
        if self.grid_size is not None and self.grid_size < 64:
            raise DomainError("grid_size must be at least 64")
        if not (self.quad_tol > 0 and self.eig_tol > 0):
            raise DomainError("tolerances must be positive")
        if self.max_index < 0:
            raise DomainError("max_index must be non-negative")

    def covering(self, m):
        """A copy whose ``max_index`` is at least ``m``."""
        if m <= self.max_index:
            return self
        return replace(self, max_index=int(m))


@dataclass(frozen=True)
class QuarticWell:
    """``-hbar^2 d^2 + (alpha theta^2/2 - beta)^2 + offset`` with ``alpha > 0``."""

    alpha: float = 1.0
    beta: float = 0.0
    hbar: float = 1.0
    offset: float = 0.0

    def __post_init__(self):
        if not (self.alpha > 0 and self.hbar > 0):
            raise DomainError("alpha and hbar must be positive")

    def potential(self, theta):
        return (0.5 * self.alpha * np.asarray(theta) ** 2 - self.beta) ** 2 + self.offset

    @property
    def minimum(self):
        if self.beta > 0:
            return self.offset
        return self.beta**2 + self.offset

    @property
    def minimum_location(self):
        return math.sqrt(2.0 * self.beta / self.alpha) if self.beta > 0 else 0.0

    def turning_points(self, energy):
        """Classically allowed interval ``[inner, outer]`` on the half line.

        ``inner`` is 0 when the allowed region contains the origin.
        Returns None below the bottom of the well.
        """
        if energy < self.minimum:
            return None
        s = math.sqrt(max(energy - self.offset, 0.0))
        hi = 2.0 * (self.beta + s) / self.alpha
        lo = 2.0 * (self.beta - s) / self.alpha
        return math.sqrt(max(lo, 0.0)), math.sqrt(max(hi, 0.0))

    def action(self, energy, nodes=256):
        """``int sqrt(energy - V) dtheta`` over the whole line."""
        tp = self.turning_points(energy)
        if tp is None:
            return 0.0
        inner, outer = tp
        t, w = _gauss_legendre(nodes)
        if inner > 0.0 or self.potential(0.0) == energy:
            # both ends are turning points: theta = c - r cos(s), s in (0, pi)
            s = 0.5 * math.pi * (t + 1.0)
            c, r = 0.5 * (outer + inner), 0.5 * (outer - inner)
            theta = c - r * np.cos(s)
            jac = r * np.sin(s) * 0.5 * math.pi
        else:
            # the origin is inside the allowed region: theta = outer sin(s)
            s = 0.25 * math.pi * (t + 1.0)
            theta = outer * np.sin(s)
            jac = outer * np.cos(s) * 0.25 * math.pi
        f = np.sqrt(np.maximum(energy - self.potential(theta), 0.0))
        return 2.0 * float(np.sum(w * f * jac))

    def semiclassical_level(self, count):
        """Energy at which the WKB counting function reaches ``count``."""
        vmin = self.minimum
        target = count * math.pi * self.hbar

        def excess(e):
            return self.action(e) - target

        hi = vmin + max(1.0, self.hbar)
        while excess(hi) < 0:
            hi = vmin + 2.0 * (hi - vmin)
        return brentq(excess, vmin, hi, xtol=1e-12 * (abs(hi) + 1), rtol=1e-12)


@lru_cache(maxsize=8)
def _gauss_legendre(n):
    return np.polynomial.legendre.leggauss(n)


@dataclass(frozen=True)
class RescaledFrequency:
    """A frequency pair ``(nu, lambda)`` with ``lambda != 0``."""

    nu: float
    lam: float

    def __post_init__(self):
        if self.lam == 0:
            raise DomainError("lambda must be nonzero")

    @property
    def mu(self):
        return self.nu / abs(self.lam) ** (4.0 / 3.0)


@dataclass(frozen=True)
class SpectrumResult:
    energies: np.ndarray
    est_errors: np.ndarray
    parities: tuple
    half_width: float
    inner_cut: float
    grid_size: int
    spacing: float


class _ModeInterpolant:
    """Cubic interpolation of all computed modes on the two finest grids.

    Values are combined as ``(4 f_fine - f_mid)/3``, which removes the
    leading second-order discretization error of the eigenvectors.
    """

    def __init__(self, inner, outer, grids, vectors, signs):
        self.inner = inner
        self.outer = outer
        self.signs = np.asarray(signs, dtype=float)
        self.splines = []
        for theta, vec in zip(grids, vectors):
            d = theta[1] - theta[0]
            if inner == 0.0:
                k = min(3, theta.size)
                nodes = np.concatenate([-theta[:k][::-1], theta, [theta[-1] + d]])
                vals = np.vstack([vec[:k][::-1] * self.signs, vec, np.zeros((1, vec.shape[1]))])
            else:
                nodes = np.concatenate([[theta[0] - d], theta, [theta[-1] + d]])
                zero = np.zeros((1, vec.shape[1]))
                vals = np.vstack([zero, vec, zero])
            self.splines.append((nodes[0], nodes[-1], CubicSpline(nodes, vals, axis=0)))
        # the combination of two unit vectors is not quite a unit vector
        self.scale = np.ones(len(self.signs))
        d = (grids[-1][1] - grids[-1][0]) / 4.0
        theta = np.arange(max(inner, 0.0), outer + d / 2, d)
        weights = np.full(theta.size, d)
        weights[[0, -1]] *= 0.5
        self.scale = 1.0 / np.sqrt(2.0 * (weights @ self(theta) ** 2))

    def __call__(self, theta, columns=None):
        theta = np.asarray(theta, dtype=float)
        a = np.abs(theta)
        out = None
        for weight, (lo, hi, spl) in zip((-1.0 / 3.0, 4.0 / 3.0), self.splines):
            inside = (a >= max(lo, 0.0)) & (a <= hi)
            vals = np.zeros(theta.shape + (len(self.signs),))
            if np.any(inside):
                vals[inside] = spl(a[inside])
            out = weight * vals if out is None else out + weight * vals
        sgn = np.where(theta < 0, 1.0, 0.0)[..., None] * (self.signs - 1.0) + 1.0
        out = out * sgn * self.scale
        if columns is not None:
            out = out[..., columns]
        return out


@dataclass(frozen=True)
class EigenPair:
    """One eigenpair on the full-line grid.

    ``samples`` are the finest-grid eigenvector values at the nodes
    ``grid``, normalized in the discrete L2 norm ``spacing * sum(v^2)``.
    Calling the pair evaluates the eigenfunction anywhere by cubic
    interpolation with one Richardson step between the two finest grids.
    """

    index: int
    energy: float
    parity: str
    est_error: float
    grid: np.ndarray
    samples: np.ndarray
    spacing: float
    _interp: _ModeInterpolant
    _column: int

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        if np.any(np.abs(theta) > self._interp.outer):
            raise DomainError("evaluation point outside the sampled domain")
        return self._interp(theta, self._column)

    @property
    def half_width(self):
        return self._interp.outer


# ---------------------------------------------------------------------------
# core solver


def _domain(well, e_cap, spec):
    """Half-line computational interval ``[inner, outer]``."""
    hbar = well.hbar
    tp = well.turning_points(e_cap)
    t_in, t_out = tp
    if spec.half_width is not None:
        outer = float(spec.half_width)
    else:
        need_v = well.minimum + 4.0 * (e_cap - well.minimum)
        step = max(min(t_out - t_in, 1.0), 1e-300) / 512.0
        theta = t_out
        agmon = 0.0
        while True:
            nxt = theta + step
            mid = theta + 0.5 * step
            agmon += step * math.sqrt(max(well.potential(mid) - e_cap, 0.0)) / hbar
            theta = nxt
            if agmon >= AGMON_DECAY and well.potential(theta) >= need_v:
                break
            step *= 1.02
        q = 2.0 ** (math.floor(math.log2(theta - t_in)) - 6)
        outer = math.ceil(theta / q) * q
    inner = 0.0
    if t_in > 0.0:
        n_probe = 2048
        theta = np.linspace(0.0, t_in, n_probe + 1)
        mid = 0.5 * (theta[1:] + theta[:-1])
        dens = np.sqrt(np.maximum(well.potential(mid) - e_cap, 0.0)) / hbar * (t_in / n_probe)
        # cumulative barrier integral measured from the turning point inwards
        from_turn = np.cumsum(dens[::-1])[::-1]
        if from_turn[0] > AGMON_DECAY + 4.0:
            idx = np.nonzero(from_turn >= AGMON_DECAY)[0][-1]
            cut = theta[idx]
            q = 2.0 ** (math.floor(math.log2(t_out - cut)) - 6)
            inner = math.floor(cut / q) * q
    if outer <= inner:
        raise TruncationError("half_width does not reach the classically allowed region")
    return inner, outer


def _block(well, inner, n, spacing, kind):
    theta = inner + (np.arange(n) + 0.5) * spacing
    k = well.hbar**2 / spacing**2
    diag = 2.0 * k + well.potential(theta)
    if kind == EVEN:
        diag[0] -= k
    elif kind == ODD:
        diag[0] += k
    off = np.full(n - 1, -k)
    return theta, diag, off


def _quantize_up(x, steps_per_decade=32):
    return 10.0 ** (math.ceil(steps_per_decade * math.log10(x)) / steps_per_decade)


def _blocks_for(inner):
    # away from the origin the two parities see the same Dirichlet problem
    return (None,) if inner > 0.0 else (EVEN, ODD)


def _levels_per_block(count, kinds):
    if len(kinds) == 1:
        return {None: (count + 1) // 2}
    return {EVEN: (count + 1) // 2, ODD: count // 2}


def _boundary_mass(vec, inner_cut):
    n = vec.shape[0]
    edge = max(2, n // 50)
    total = float(np.sum(vec**2))
    mass = float(np.sum(vec[-edge:] ** 2))
    if inner_cut:
        mass = max(mass, float(np.sum(vec[:edge] ** 2)))
    return mass / total


@lru_cache(maxsize=512)
def _solve(well, count, spec, want_vectors):
    if count < 1:
        raise DomainError("at least one level must be requested")
    vmin = well.minimum
    e_cap = well.semiclassical_level(count + 1)
    e_cap = vmin + 1.15 * (e_cap - vmin)
    for _ in range(4):
        e_cap = vmin + _quantize_up(e_cap - vmin)
        result = _solve_with_cap(well, count, spec, want_vectors, e_cap)
        top = result[0][-1]
        if top <= e_cap:
            return result
        e_cap = vmin + 1.5 * (top - vmin)
    raise ConvergenceError("could not bracket the requested levels", achieved=top)


def _solve_with_cap(well, count, spec, want_vectors, e_cap):
    inner, outer = _domain(well, e_cap, spec)
    kinds = _blocks_for(inner)
    per_block = _levels_per_block(count, kinds)
    k_max = math.sqrt(max(e_cap - well.minimum, 1e-300)) / well.hbar
    if spec.grid_size is not None:
        n = int(spec.grid_size)
    else:
        n = max(64, 8 * math.ceil((outer - inner) * k_max / BASE_STEP / 8))
    # grid eigenvalues by (kind, size); refinement reuses the finer grids
    computed = {}
    grids = {}

    def grid_levels(kind, size):
        key = (kind, size)
        if key not in computed:
            theta, diag, off = _block(well, inner, size, (outer - inner) / size, kind)
            grids[key] = (theta, diag, off)
            half, quarter = computed.get((kind, size // 2)), computed.get((kind, size // 4))
            if half is None:
                computed[key] = tridiagonal.lowest_eigenvalues(diag, off, per_block[kind])
            else:
                if quarter is None:
                    guess, radius = half, 0.1 * np.abs(half - well.minimum)
                else:
                    step = (quarter - half) / 4.0
                    guess, radius = half - step, np.abs(step)
                radius = radius + 1e-9 * (np.abs(guess) + 1.0)
                computed[key] = tridiagonal.refine_eigenvalues(diag, off, guess, radius)
        return computed[key]

    for attempt in range(MAX_REFINEMENTS + 1):
        spacing = (outer - inner) / n
        levels = {}
        for kind in kinds:
            if per_block[kind] == 0:
                continue
            coarse, mid, fine = (grid_levels(kind, f * n) for f in (1, 2, 4))
            r1 = (4.0 * mid - coarse) / 3.0
            r2 = (4.0 * fine - mid) / 3.0
            value = r2 + (r2 - r1) / 15.0
            err = np.abs(r2 - r1) / 15.0 + 1e-14 * np.abs(value)
            levels[kind] = (value, err, fine)
        if attempt == 0 and spec.half_width is not None:
            # a user-chosen domain may cut the states off; report that rather
            # than the non-convergence it causes
            for kind in levels:
                _, diag, off = grids[(kind, n)]
                vec = tridiagonal.eigenvectors(diag, off, computed[(kind, n)][-1:])
                mass = _boundary_mass(vec[:, 0], inner > 0.0)
                if mass > 1e-8:
                    raise TruncationError(
                        "eigenfunction mass at the domain boundary exceeds 1e-8", achieved=mass
                    )
        energies, errors, parities, grid_values, columns = _interleave(levels, kinds, count)
        scale = np.maximum(np.abs(energies), energies - well.minimum)
        worst = np.max(errors / scale)
        if worst <= spec.eig_tol:
            break
        if attempt == MAX_REFINEMENTS:
            raise ConvergenceError(
                f"eigenvalues not converged: relative discrepancy {worst:.3e}", achieved=worst
            )
        n *= 2

    vectors = {}
    for kind in kinds:
        if per_block[kind] == 0:
            continue
        factors = (2, 4) if want_vectors else (1,)
        for factor in factors:
            theta, diag, off = grids[(kind, factor * n)]
            targets = computed[(kind, factor * n)]
            if not want_vectors:
                targets = targets[-1:]
            vec = tridiagonal.eigenvectors(diag, off, targets)
            if _boundary_mass(vec[:, -1], inner > 0.0) > 1e-8:
                raise TruncationError(
                    "eigenfunction mass at the domain boundary exceeds 1e-8",
                    achieved=_boundary_mass(vec[:, -1], inner > 0.0),
                )
            if want_vectors:
                vec = _fix_signs(vec) / math.sqrt(2.0 * spacing / factor)
                for j, target in enumerate(targets):
                    res = tridiagonal.residual_norm(diag, off, target, vec[:, j])
                    res /= math.sqrt(np.sum(vec[:, j] ** 2))
                    if res > 10.0 * spec.eig_tol * max(abs(target), 1e-300):
                        raise AccuracyError("inverse iteration residual too large", achieved=res)
                vectors[(kind, factor)] = (theta, vec)
    result = SpectrumResult(
        energies=energies,
        est_errors=errors,
        parities=tuple(parities),
        half_width=outer,
        inner_cut=inner,
        grid_size=n,
        spacing=spacing,
    )
    interp = None
    if want_vectors:
        interp = _assemble_modes(vectors, kinds, columns, parities, inner, outer)
    return energies, result, interp


def _fix_signs(vec):
    # first clearly nonzero entry positive: value (even) or slope (odd) at 0
    out = vec.copy()
    for j in range(vec.shape[1]):
        col = vec[:, j]
        big = np.max(np.abs(col))
        first = np.nonzero(np.abs(col) > 1e-6 * big)[0][0]
        if col[first] < 0:
            out[:, j] = -col
    return out


def _interleave(levels, kinds, count):
    energies = np.empty(count)
    errors = np.empty(count)
    grid_values = np.empty(count)
    parities = []
    columns = []
    for m in range(count):
        parity = EVEN if m % 2 == 0 else ODD
        kind = kinds[0] if len(kinds) == 1 else parity
        value, err, fine = levels[kind]
        energies[m] = value[m // 2]
        errors[m] = err[m // 2]
        grid_values[m] = fine[m // 2]
        parities.append(parity)
        columns.append((kind, m // 2))
    return energies, errors, parities, grid_values, columns


def _assemble_modes(vectors, kinds, columns, parities, inner, outer):
    grids = []
    stacked = []
    for factor in (2, 4):
        cols = []
        theta = None
        for kind, j in columns:
            theta, vec = vectors[(kind, factor)]
            cols.append(vec[:, j])
        grids.append(theta)
        stacked.append(np.column_stack(cols))
    signs = [1.0 if p == EVEN else -1.0 for p in parities]
    interp = _ModeInterpolant(inner, outer, grids, stacked, signs)
    interp.fine_grid = grids[1]
    interp.fine_vectors = stacked[1]
    return interp


# ---------------------------------------------------------------------------
# public interface


def solve_well(well, count, spec=None):
    """Lowest ``count`` eigenvalues of a :class:`QuarticWell` with error data."""
    spec = spec or NumericsSpec()
    _, result, _ = _solve(well, int(count), spec, False)
    return result


def well_eigenpairs(well, count, spec=None):
    """Lowest ``count`` eigenpairs of a :class:`QuarticWell`."""
    spec = spec or NumericsSpec()
    energies, result, interp = _solve(well, int(count), spec, True)
    theta_half = interp.fine_grid
    spacing = theta_half[1] - theta_half[0]
    grid = np.concatenate([-theta_half[::-1], theta_half])
    pairs = []
    for m in range(int(count)):
        half = interp.fine_vectors[:, m]
        sign = 1.0 if result.parities[m] == EVEN else -1.0
        samples = np.concatenate([sign * half[::-1], half])
        pairs.append(
            EigenPair(
                index=m,
                energy=float(energies[m]),
                parity=result.parities[m],
                est_error=float(result.est_errors[m]),
                grid=grid,
                samples=samples,
                spacing=spacing,
                _interp=interp,
                _column=m,
            )
        )
    return pairs


def reference_well(mu):
    """``P_mu`` as a :class:`QuarticWell`."""
    return QuarticWell(alpha=1.0, beta=float(mu))


def spectrum(mu, spec=None):
    spec = spec or NumericsSpec()
    return solve_well(reference_well(mu), spec.max_index + 1, spec)


def eigenvalues(mu, spec=None):
    """``E_0(mu) < ... < E_{max_index}(mu)``."""
    return spectrum(mu, spec).energies.copy()


def eigenfunction(mu, m, spec=None):
    """Normalized, sign-fixed eigenfunction ``phi_m^mu`` as an :class:`EigenPair`."""
    spec = (spec or NumericsSpec()).covering(m)
    return well_eigenpairs(reference_well(mu), spec.max_index + 1, spec)[m]


def rescaled_energy(freq, m, spec=None):
    """``E_m(nu, lambda) = |lambda|^{2/3} E_m(nu/|lambda|^{4/3})``."""
    if not isinstance(freq, RescaledFrequency):
        freq = RescaledFrequency(*freq)
    spec = (spec or NumericsSpec()).covering(m)
    return abs(freq.lam) ** (2.0 / 3.0) * eigenvalues(freq.mu, spec)[m]


def rescaled_eigenfunction(freq, m, theta, spec=None):
    """``psi_m^{nu,lambda}(theta) = |lambda|^{1/6} phi_m^mu(|lambda|^{1/3} theta)``."""
    if not isinstance(freq, RescaledFrequency):
        freq = RescaledFrequency(*freq)
    a = abs(freq.lam) ** (1.0 / 3.0)
    pair = eigenfunction(freq.mu, m, spec)
    return math.sqrt(a) * pair(a * np.asarray(theta, dtype=float))


def direct_rescaled_eigenvalues(nu, lam, spec=None):
    """Energies of ``-d^2 + ((lambda/2) theta^2 - nu/lambda)^2`` discretized directly."""
    if lam == 0:
        raise DomainError("lambda must be nonzero")
    spec = spec or NumericsSpec()
    well = QuarticWell(alpha=abs(lam), beta=nu / abs(lam))
    return solve_well(well, spec.max_index + 1, spec).energies.copy()
