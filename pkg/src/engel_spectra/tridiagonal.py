"""Symmetric tridiagonal eigensolver: Sturm-sequence bisection and inverse iteration.

The matrices come from three-point discretizations of one-dimensional
Schrodinger operators, so they are diagonally dominant away from the
spectrum of interest and every eigenvalue is simple.
"""

import numpy as np
from numba import njit

_EPS = np.finfo(np.float64).eps


@njit(cache=True, nogil=True)
def sturm_count(diag, off_sq, x):
    """Number of eigenvalues strictly below ``x``.

    ``off_sq`` holds the squared off-diagonal entries.  Uses the LDL^T
    pivot recurrence; a zero pivot is nudged by a tiny amount, which is
    the classical safeguard and does not change the count.
    """
    n = diag.shape[0]
    count = 0
    tiny = 1e-300
    q = diag[0] - x
    if q == 0.0:
        q = -tiny
    if q < 0.0:
        count += 1
    for i in range(1, n):
        q = diag[i] - x - off_sq[i - 1] / q
        if q == 0.0:
            q = -tiny
        if q < 0.0:
            count += 1
    return count


@njit(cache=True, nogil=True)
def gershgorin_bounds(diag, off):
    n = diag.shape[0]
    lo = np.inf
    hi = -np.inf
    for i in range(n):
        r = 0.0
        if i > 0:
            r += abs(off[i - 1])
        if i < n - 1:
            r += abs(off[i])
        lo = min(lo, diag[i] - r)
        hi = max(hi, diag[i] + r)
    return lo, hi


@njit(cache=True, nogil=True)
def lowest_eigenvalues(diag, off, k):
    """The ``k`` smallest eigenvalues by bisection, each to full precision."""
    lo0, hi0 = gershgorin_bounds(diag, off)
    return _bisect(diag, off, k, np.full(k, lo0), np.full(k, hi0))


@njit(cache=True, nogil=True)
def refine_eigenvalues(diag, off, guesses, radii):
    """Like :func:`lowest_eigenvalues`, starting from brackets ``guesses +- radii``.

    Each bracket is verified with two Sturm counts and replaced by the
    Gershgorin interval when it does not contain its eigenvalue.
    """
    k = guesses.shape[0]
    off_sq = off * off
    lo0, hi0 = gershgorin_bounds(diag, off)
    lower = np.empty(k)
    upper = np.empty(k)
    for j in range(k):
        a = guesses[j] - radii[j]
        b = guesses[j] + radii[j]
        lower[j] = a if sturm_count(diag, off_sq, a) <= j else lo0
        upper[j] = b if sturm_count(diag, off_sq, b) > j else hi0
    return _bisect(diag, off, k, lower, upper)


@njit(cache=True, nogil=True)
def _bisect(diag, off, k, lower, upper):
    off_sq = off * off
    lo0, hi0 = gershgorin_bounds(diag, off)
    out = np.empty(k)
    scale = max(abs(lo0), abs(hi0))
    # brackets shared between levels: a probe with c eigenvalues below it
    # bounds every level i < c from above and every level i >= c from below
    for j in range(k):
        for _ in range(200):
            a = lower[j]
            b = upper[j]
            mid = 0.5 * (a + b)
            if b - a <= 2.0 * _EPS * max(abs(a), abs(b)) + 1e-300 * scale:
                break
            if mid <= a or mid >= b:
                break
            c = sturm_count(diag, off_sq, mid)
            for i in range(j, k):
                if i < c:
                    if mid < upper[i]:
                        upper[i] = mid
                elif mid > lower[i]:
                    lower[i] = mid
        out[j] = 0.5 * (lower[j] + upper[j])
    return out


@njit(cache=True, nogil=True)
def _solve_shifted(diag, off, shift, rhs):
    """Solve (T - shift) y = rhs by Gaussian elimination with partial pivoting."""
    n = diag.shape[0]
    # rows are stored as three (or, after a swap, four) band entries
    d = diag - shift
    du = np.zeros(n)
    dl = np.zeros(n)
    du2 = np.zeros(n)
    for i in range(n - 1):
        du[i] = off[i]
        dl[i] = off[i]
    b = rhs.copy()
    tiny = _EPS * (np.max(np.abs(diag)) + abs(shift) + 1.0)
    for i in range(n - 1):
        if abs(d[i]) >= abs(dl[i]):
            if d[i] == 0.0:
                d[i] = tiny
            f = dl[i] / d[i]
            d[i + 1] -= f * du[i]
            b[i + 1] -= f * b[i]
            dl[i] = f
        else:
            f = d[i] / dl[i]
            d[i] = dl[i]
            tmp = d[i + 1]
            d[i + 1] = du[i] - f * tmp
            if i < n - 2:
                du2[i] = du[i + 1]
                du[i + 1] = -f * du2[i]
            du[i] = tmp
            tb = b[i]
            b[i] = b[i + 1]
            b[i + 1] = tb - f * b[i + 1]
            dl[i] = f
    if d[n - 1] == 0.0:
        d[n - 1] = tiny
    y = np.empty(n)
    y[n - 1] = b[n - 1] / d[n - 1]
    if n > 1:
        y[n - 2] = (b[n - 2] - du[n - 2] * y[n - 1]) / d[n - 2]
    for i in range(n - 3, -1, -1):
        y[i] = (b[i] - du[i] * y[i + 1] - du2[i] * y[i + 2]) / d[i]
    return y


@njit(cache=True, nogil=True)
def eigenvectors(diag, off, values):
    """Unit eigenvectors (columns) for the given eigenvalues by inverse iteration.

    Each vector is re-orthogonalised against the previous ones, which only
    matters if two requested eigenvalues are close.
    """
    n = diag.shape[0]
    k = values.shape[0]
    vecs = np.empty((n, k))
    for j in range(k):
        lam = values[j]
        # deterministic start vector with components along every eigenvector
        y = np.empty(n)
        for i in range(n):
            y[i] = 1.0 + 0.5 * np.sin(0.7 * i + 0.3 * j)
        shift = lam + 4.0 * _EPS * max(abs(lam), 1.0)
        for _ in range(3):
            y = _solve_shifted(diag, off, shift, y)
            for p in range(j):
                dot = 0.0
                for i in range(n):
                    dot += vecs[i, p] * y[i]
                for i in range(n):
                    y[i] -= dot * vecs[i, p]
            nrm = np.sqrt(np.sum(y * y))
            y /= nrm
        for i in range(n):
            vecs[i, j] = y[i]
    return vecs


@njit(cache=True, nogil=True)
def residual_norm(diag, off, value, vec):
    n = diag.shape[0]
    r2 = 0.0
    for i in range(n):
        r = (diag[i] - value) * vec[i]
        if i > 0:
            r += off[i - 1] * vec[i - 1]
        if i < n - 1:
            r += off[i] * vec[i + 1]
        r2 += r * r
    return np.sqrt(r2)
