"""Phase-space volumes, the double-well action function and Weyl-type counts.

Three model potentials appear:

* quartic ``theta^4/4`` (the oscillator at ``mu = 0``),
* single well ``(theta^2/2 + 1)^2`` (large negative ``mu`` after rescaling),
* double well ``(theta^2/2 - 1)^2`` (large positive ``mu`` after rescaling).

Volumes are full phase-space areas ``|{(x, xi): xi^2 + V(x) <= L}|``.
"""

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError
from .quartic_oscillator import NumericsSpec, QuarticWell, reference_well, solve_well

QUARTIC = "quartic"
SINGLE = "single"
DOUBLE = "double"
_BETA = {QUARTIC: 0.0, SINGLE: -1.0, DOUBLE: 1.0}
# splittings below this many ulps of the level are rounding noise
_ROUNDING_UNITS = 64


class SeparatrixWarning(UserWarning):
    """Issued when the action derivative is evaluated close to ``E = 1``."""


@dataclass(frozen=True)
class WellSpec:
    kind: str
    h: float = 1.0

    def __post_init__(self):
        if self.kind not in _BETA:
            raise DomainError(f"unknown well kind {self.kind!r}")
        if not self.h > 0:
            raise DomainError("h must be positive")

    def operator(self, shift=0.0):
        """``-h^2 d^2 + V`` as a :class:`QuarticWell`."""
        return QuarticWell(alpha=1.0, beta=_BETA[self.kind] - shift, hbar=self.h)


def phase_volume(well, level):
    """Area of ``{xi^2 + V(x) <= level}``, i.e. ``int 2 sqrt(level - V) dx``."""
    if not isinstance(well, WellSpec):
        well = WellSpec(well)
    return 2.0 * well.operator().action(level)


# ---------------------------------------------------------------------------
# double-well action


@lru_cache(maxsize=4)
def _nodes(n):
    t, w = np.polynomial.legendre.leggauss(n)
    s = 0.5 * math.pi * (t + 1.0)
    return s, 0.5 * math.pi * w


def _well_coordinates(energy):
    root = math.sqrt(energy)
    x_lo = math.sqrt(2.0 - 2.0 * root)
    x_hi = math.sqrt(2.0 + 2.0 * root)
    return x_lo, x_hi


def _check_energy(energy, allow_zero):
    if not (0.0 <= energy < 1.0) or (energy == 0.0 and not allow_zero):
        raise DomainError("energy must lie in [0, 1)")


def action_phi(energy, nodes=128):
    """``Phi(E) = (1/pi) int_{x_-}^{x_+} sqrt(E - V) dx`` for the double well.

    With ``x = c - r cos s`` the integrand factorizes as
    ``r^2 sin^2 s sqrt((x_+ + x)(x + x_-)) / 2``, which is smooth.
    """
    _check_energy(energy, allow_zero=True)
    if energy == 0.0:
        return 0.0
    x_lo, x_hi = _well_coordinates(energy)
    s, w = _nodes(nodes)
    c, r = 0.5 * (x_hi + x_lo), 0.5 * (x_hi - x_lo)
    x = c - r * np.cos(s)
    f = 0.5 * (r * np.sin(s)) ** 2 * np.sqrt((x_hi + x) * (x + x_lo))
    return float(np.sum(w * f)) / math.pi


def action_phi_derivative(energy, nodes=128):
    """``Phi'(E) = (1/2pi) int_{x_-}^{x_+} dx / sqrt(E - V)``.

    The same substitution removes both inverse-square-root endpoints.  Near
    the separatrix ``E -> 1`` the inner turning point approaches the
    barrier top and accuracy degrades; a :class:`SeparatrixWarning` flags it.
    """
    _check_energy(energy, allow_zero=False)
    if energy > 0.95:
        warnings.warn("action derivative near the separatrix E = 1", SeparatrixWarning)
    x_lo, x_hi = _well_coordinates(energy)
    s, w = _nodes(nodes)
    c = 0.5 * (x_hi + x_lo)
    r = 0.5 * (x_hi - x_lo)
    x = c - r * np.cos(s)
    f = 2.0 / np.sqrt((x_hi + x) * (x + x_lo))
    return float(np.sum(w * f)) / (2.0 * math.pi)


# ---------------------------------------------------------------------------
# counting


def eigenvalues_below(well, level, spec=None):
    """All eigenvalues of a :class:`QuarticWell` up to ``level``."""
    spec = spec or NumericsSpec()
    if level < well.minimum:
        return np.empty(0)
    count = int(well.action(level) / (math.pi * well.hbar) * 1.1) + 6
    while True:
        energies = solve_well(well, count, spec).energies
        if energies[-1] > level:
            return energies[energies <= level]
        count *= 2


def weyl_count(mu, level, spec=None):
    """Exact count of ``E_k(mu) <= level`` and the prediction ``Lambda^{3/4} Vol_1 / 2pi``.

    With ``spec`` given, only its ``max_index + 1`` levels are computed and a
    :class:`DomainError` is raised when they do not exhaust ``[0, level]``.
    """
    if not level > 0:
        raise DomainError("level must be positive")
    prediction = level**0.75 * phase_volume(QUARTIC, 1.0) / (2.0 * math.pi)
    if spec is None:
        energies = eigenvalues_below(reference_well(mu), level)
    else:
        energies = solve_well(reference_well(mu), spec.max_index + 1, spec).energies
        if energies[-1] <= level:
            raise DomainError(
                f"max_index={spec.max_index} does not exhaust [0, {level}]; request more eigenvalues"
            )
    return int(np.sum(energies <= level)), prediction


def single_well_check(mu, level, spec=None):
    """Count of ``E_k(mu) <= level mu^2`` divided by ``|mu|^{3/2} Vol_level / 2pi``."""
    if mu > -5:
        raise DomainError("single-well regime needs mu <= -5")
    if not level > 1:
        raise DomainError("level must exceed the well bottom 1")
    energies = eigenvalues_below(reference_well(mu), level * mu * mu, spec)
    expected = abs(mu) ** 1.5 * phase_volume(SINGLE, level) / (2.0 * math.pi)
    return energies.size / expected


def harmonic_ground_ratio(mu, spec=None):
    """``(E_0(mu) - mu^2) / sqrt|mu|``, close to 1 deep in the single well."""
    e0 = solve_well(reference_well(mu), 1, spec or NumericsSpec()).energies[0]
    return (e0 - mu * mu) / math.sqrt(abs(mu))


def perturbed_quartic_count(h, level, shift, spec=None):
    """Count eigenvalues ``<= level`` of ``-h^2 d^2 + V_shift``.

    ``V_shift = (theta^2/2 + shift)^2`` for ``shift >= 0`` and
    ``theta^4/4 + shift theta^2`` for ``shift < 0``; both bracket
    ``theta^4/4`` pointwise from the corresponding side.
    """
    if shift >= 0:
        well = QuarticWell(alpha=1.0, beta=-shift, hbar=h)
    else:
        well = QuarticWell(alpha=1.0, beta=-shift, hbar=h, offset=-shift * shift)
    return int(eigenvalues_below(well, level, spec).size)


# ---------------------------------------------------------------------------
# double well


@dataclass(frozen=True)
class Doublet:
    k: int
    lower: float
    upper: float
    splitting: float
    resolved: bool


def double_well_lowspec(h, k_max, spec=None):
    """Lowest ``k_max + 1`` tunneling doublets of ``-h^2 d^2 + (theta^2/2 - 1)^2``.

    When the barrier is so thick that the solver treats the wells as
    decoupled, the splitting is reported as zero.  Either way a splitting
    within a few rounding units of the level carries no information and
    is marked ``resolved=False``.
    """
    if not (0 < h <= 0.1 + 1e-12):
        raise DomainError("double-well regime needs 0 < h <= 0.1")
    spec = spec or NumericsSpec()
    result = solve_well(WellSpec(DOUBLE, h).operator(), 2 * (k_max + 1), spec)
    decoupled = result.inner_cut > 0.0
    out = []
    for k in range(k_max + 1):
        lo, hi = result.energies[2 * k], result.energies[2 * k + 1]
        splitting = 0.0 if decoupled else float(hi - lo)
        out.append(
            Doublet(k=k, lower=float(lo), upper=float(hi), splitting=splitting,
                    resolved=splitting > _ROUNDING_UNITS * np.spacing(hi))
        )
    return out


@dataclass(frozen=True)
class BohrSommerfeldEntry:
    j: int
    member: int
    energy: float
    residual: float
    flagged: bool


def bohr_sommerfeld_residuals(h, lower, upper, spec=None):
    """Residuals ``Phi(E) - (j + 1/2) h`` for double-well levels in ``[lower, upper]``.

    Consecutive levels closer than ``h/10`` form a pair; ``j`` is the rank
    of the pair counted from the bottom of the spectrum.  Levels that cannot
    be paired are returned with ``flagged=True``.
    """
    if not upper < 1.0:
        raise DomainError("window must stay below the barrier top 1")
    if upper < lower:
        return []
    well = WellSpec(DOUBLE, h).operator()
    energies = eigenvalues_below(well, upper, spec)
    out = []
    i = 0
    j = 0
    while i < energies.size:
        paired = i + 1 < energies.size and energies[i + 1] - energies[i] < 0.1 * h
        members = energies[i:i + 2] if paired else energies[i:i + 1]
        for member, e in enumerate(members):
            if e >= lower:
                out.append(
                    BohrSommerfeldEntry(
                        j=j, member=member, energy=float(e),
                        residual=action_phi(float(e)) - (j + 0.5) * h,
                        flagged=not paired,
                    )
                )
        i += 2 if paired else 1
        j += 1
    return out
