"""Log-uniform product lattices over frequency half-planes.

A node is ``nu = s exp(4u)``, ``|lambda| = exp(3w)`` with ``u`` and ``w``
on grids of a common step, so ``dnu dlambda = 12 exp(4u + 3w) du dw`` and
``mu = nu/|lambda|^{4/3} = s exp(4(u - w))`` is constant along diagonals
``i - j = const``.  Eigen-data are therefore needed once per diagonal.
"""

import math
from dataclasses import dataclass

import numpy as np

# min over mu of E_0(mu) is about 0.5762
GROUND_FLOOR = 0.55
# E_0(nu, lambda) >= ROOT_FLOOR sqrt|nu| for all lambda
ROOT_FLOOR = 0.7
TRAPEZOID = "trapezoid"
SIMPSON = "simpson"


def _rule_weights(n, step, rule):
    if rule == TRAPEZOID:
        w = np.full(n + 1, step)
        w[[0, -1]] *= 0.5
        return w
    w = np.full(n + 1, 2.0)
    w[1::2] = 4.0
    w[[0, -1]] = 1.0
    return w * step / 3.0


@dataclass(frozen=True)
class LogLattice:
    u: np.ndarray
    w: np.ndarray
    step: float
    rule: str

    @property
    def lam(self):
        return np.exp(3.0 * self.w)

    def nu(self, sign):
        return sign * np.exp(4.0 * self.u)

    @property
    def n_diagonals(self):
        return self.u.size + self.w.size - 1

    def diagonal_index(self):
        """``k[i, j] = i - j + len(w) - 1``."""
        i = np.arange(self.u.size)[:, None]
        j = np.arange(self.w.size)[None, :]
        return i - j + self.w.size - 1

    def diagonal_mu(self, sign):
        k = np.arange(self.n_diagonals)
        return sign * np.exp(4.0 * (self.u[0] - self.w[-1] + self.step * k))

    def diagonal_nodes(self, k):
        """``(i, j)`` index arrays of the nodes on diagonal ``k``."""
        j = np.arange(self.w.size)
        i = k + j - (self.w.size - 1)
        ok = (i >= 0) & (i < self.u.size)
        return i[ok], j[ok]

    def jacobian(self):
        return 12.0 * np.exp(4.0 * self.u[:, None] + 3.0 * self.w[None, :])

    def integrate(self, values):
        """Product rule over the lattice and its nested rule with twice the step.

        Returns ``(value, |value - coarse|)``.  ``values`` must already
        include :meth:`jacobian`.
        """
        wu = _rule_weights(self.u.size - 1, self.step, self.rule)
        ww = _rule_weights(self.w.size - 1, self.step, self.rule)
        fine = wu @ values @ ww
        cu = _rule_weights((self.u.size - 1) // 2, 2 * self.step, self.rule)
        cw = _rule_weights((self.w.size - 1) // 2, 2 * self.step, self.rule)
        coarse = cu @ values[::2, ::2] @ cw
        return fine, np.abs(fine - coarse)


def _count(length, step, multiple):
    n = max(multiple, int(math.ceil(length / step - 1e-9)))
    return n + (-n) % multiple


def cutoff_lattice(e_cut, step, nu_span=math.log(1e5), lam_span=math.log(1e6)):
    """Lattice for integrands negligible once the energy exceeds ``e_cut``.

    The integrand decays like ``|nu|`` and ``|lambda|`` towards the axes,
    so the spans (in ``u`` and ``w``) below the top set the truncation
    there.  Trapezoid rule.
    """
    w_hi = 0.5 * math.log(e_cut / GROUND_FLOOR)
    u_hi = 0.5 * math.log(e_cut / ROOT_FLOOR)
    nw = _count(lam_span, step, 2)
    nu = _count(nu_span, step, 2)
    w = w_hi - step * np.arange(nw + 1)[::-1]
    u = u_hi - step * np.arange(nu + 1)[::-1]
    return LogLattice(u, w, step, TRAPEZOID)


def window_lattice(nu_max, lam_min, lam_max, step, nu_span):
    """Lattice on ``|nu| <= nu_max``, ``lam_min <= |lambda| <= lam_max``.

    The ``w`` range is exact; the step is shrunk to fit it.  ``u`` runs
    ``nu_span`` below ``ln(nu_max)/4``.  Simpson rule, since the window
    edges cut the integrand where it is not small.
    """
    w_lo = math.log(lam_min) / 3.0
    w_hi = math.log(lam_max) / 3.0
    nw = _count(w_hi - w_lo, step, 4)
    step = (w_hi - w_lo) / nw
    nu = _count(nu_span, step, 4)
    w = w_lo + step * np.arange(nw + 1)
    u_hi = math.log(nu_max) / 4.0
    u = u_hi - step * np.arange(nu + 1)[::-1]
    return LogLattice(u, w, step, SIMPSON)
