"""Real symmetric eigensolvers.

Tridiagonal eigenvalues come from Sturm-sequence bisection and eigenvectors
from inverse iteration; dense matrices are first reduced to tridiagonal form
by Householder reflections.  Everything is deterministic: start vectors are
fixed quasi-random sequences, never drawn from an RNG.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels
from .errors import ConvergenceError, EmptyInputError, InvalidMatrixError

_EPS = np.finfo(float).eps
_TINY = np.finfo(float).tiny
_GOLDEN = 0.6180339887498949
_SQRT2M1 = 0.4142135623730951


@dataclass(eq=False)
class SymTridiag:
    """Symmetric tridiagonal matrix stored as its diagonal and off-diagonal."""

    diag: np.ndarray
    offdiag: np.ndarray

    def __post_init__(self):
        self.diag = np.ascontiguousarray(self.diag, dtype=float)
        self.offdiag = np.ascontiguousarray(self.offdiag, dtype=float)
        if self.diag.ndim != 1 or self.offdiag.ndim != 1:
            raise InvalidMatrixError("diag and offdiag must be 1-D")
        if self.diag.size and self.offdiag.size != self.diag.size - 1:
            raise InvalidMatrixError(
                f"offdiag has length {self.offdiag.size}, expected {self.diag.size - 1}"
            )
        if not (np.all(np.isfinite(self.diag)) and np.all(np.isfinite(self.offdiag))):
            raise InvalidMatrixError("matrix has non-finite entries")

    @property
    def n(self) -> int:
        return self.diag.size

    def norm(self) -> float:
        """Max-row-sum norm."""
        r = np.abs(self.diag).copy()
        r[:-1] += np.abs(self.offdiag)
        r[1:] += np.abs(self.offdiag)
        return float(r.max()) if r.size else 0.0

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.diag * x
        y[:-1] += self.offdiag * x[1:]
        y[1:] += self.offdiag * x[:-1]
        return y

    def row_sums(self) -> np.ndarray:
        r = self.diag.copy()
        r[:-1] += self.offdiag
        r[1:] += self.offdiag
        return r

    def quadratic_form(self, x: np.ndarray) -> float:
        """``x^T M x`` written as row sums plus squared differences.

        For Laplacian-type matrices the row sums vanish and the result is a sum
        of nonnegative terms, so small eigenvalues keep their relative accuracy.
        """
        dx = np.diff(x)
        return float(np.dot(self.row_sums(), x * x) - np.dot(self.offdiag, dx * dx))

    def add_diagonal(self, values) -> "SymTridiag":
        return SymTridiag(self.diag + values, self.offdiag.copy())

    def to_dense(self) -> np.ndarray:
        a = np.diag(self.diag)
        if self.n > 1:
            i = np.arange(self.n - 1)
            a[i, i + 1] = self.offdiag
            a[i + 1, i] = self.offdiag
        return a


@dataclass(eq=False)
class DenseSym:
    """Dense real symmetric matrix."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.ascontiguousarray(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise InvalidMatrixError(f"expected a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise InvalidMatrixError("matrix has non-finite entries")
        scale = np.abs(a).max() if a.size else 0.0
        if a.size and np.abs(a - a.T).max() > 1e-12 * scale:
            raise InvalidMatrixError("matrix is not symmetric")
        self.entries = a

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def norm(self) -> float:
        return float(np.abs(self.entries).sum(axis=1).max()) if self.n else 0.0

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.entries @ x


@dataclass(eq=False)
class EigenPair:
    value: float
    vector: np.ndarray


def mass_normalize(m: SymTridiag, mass: np.ndarray) -> SymTridiag:
    """Return ``D^-1/2 m D^-1/2`` for the diagonal mass matrix ``D``."""
    s = 1.0 / np.sqrt(mass)
    return SymTridiag(m.diag * s * s, m.offdiag * s[:-1] * s[1:])


def start_vector(n: int, j: int = 0) -> np.ndarray:
    """Fixed, non-symmetric start vector (a Weyl sequence), unit norm."""
    x = np.modf((np.arange(n) + 1.0) * _GOLDEN + j * _SQRT2M1)[0] - 0.45
    return x / np.linalg.norm(x)


def _orient(v: np.ndarray) -> np.ndarray:
    s = v.sum()
    if abs(s) < 1e-8 * np.sqrt(v.size):
        s = v[np.argmax(np.abs(v))]
    return -v if s < 0 else v


def _gershgorin(d, e):
    r = np.zeros_like(d)
    r[:-1] += np.abs(e)
    r[1:] += np.abs(e)
    lo, hi = float(np.min(d - r)), float(np.max(d + r))
    pad = 2.0 * _EPS * max(abs(lo), abs(hi)) + 2.0 * _TINY
    return lo - pad, hi + pad


def _bisect(d, e, indices, tol):
    """Eigenvalues with the given ascending indices, by (multi)section."""
    e2 = e * e
    pivmin = _TINY * max(1.0, float(e2.max()) if e2.size else 1.0)
    glo, ghi = _gershgorin(d, e)
    idx = np.asarray(indices, dtype=np.int64)
    lo = np.full(idx.size, glo)
    hi = np.full(idx.size, ghi)
    # any Rayleigh quotient bounds the lowest eigenvalue from above
    rq = min(float(d.min()), (float(d.sum()) + 2.0 * float(e.sum())) / d.size)
    hi[idx == 0] = min(ghi, rq + 2.0 * _EPS * abs(rq) + _TINY)
    done = np.zeros(idx.size, dtype=bool)
    p = kernels.SHIFTS_PER_SWEEP
    frac = np.arange(1, p + 1) / (p + 1)
    for _ in range(4000):
        active = ~done & (hi - lo > tol)
        if not active.any():
            break
        a = np.flatnonzero(active)
        width = hi[a] - lo[a]
        shifts = lo[a, None] + width[:, None] * frac[None, :]
        counts = kernels.sturm_counts(d, e2, shifts.ravel(), pivmin).reshape(shifts.shape)
        below = counts <= idx[a, None]
        new_lo = np.maximum(np.where(below, shifts, -np.inf).max(axis=1), lo[a])
        new_hi = np.minimum(np.where(below, np.inf, shifts).min(axis=1), hi[a])
        done[a] = (new_hi - new_lo) >= width
        lo[a] = new_lo
        hi[a] = new_hi
    return 0.5 * (lo + hi)


def _inverse_iteration(d, e, lams, norm, first):
    n = d.size
    tiny = _EPS * max(norm, _TINY)
    cluster_tol = 1e-3 * norm
    target = 1e-11 * max(norm, _TINY)
    t = SymTridiag(d, e)
    vecs = []
    for j, lam in enumerate(lams):
        group = [v for l, v in zip(lams[:j], vecs) if abs(l - lam) <= cluster_tol]
        x = start_vector(n, first + j)
        for v in group:
            x = x - np.dot(v, x) * v
        x /= np.linalg.norm(x)
        res = np.inf
        for _ in range(10):
            y = kernels.tridiag_solve(d - lam, e, x, tiny)
            for v in group:
                y -= np.dot(v, y) * v
            ny = np.linalg.norm(y)
            if not np.isfinite(ny) or ny == 0.0:
                raise ConvergenceError(f"inverse iteration broke down at eigenvalue {lam!r}")
            y /= ny
            res = np.linalg.norm(t.matvec(y) - lam * y)
            x = y
            if res <= target:
                break
        if res > 1e-10 * norm:
            raise ConvergenceError(
                f"eigenvector residual {res:.3e} exceeds 1e-10*norm for eigenvalue {lam!r}",
                last=EigenPair(float(lam), x),
            )
        vecs.append(_orient(x))
    return vecs


def _polish(m, v, lam, tol):
    # Rayleigh quotient: second-order accurate in the eigenvector error
    rq = float(np.dot(v, m.matvec(v)))
    return rq if abs(rq - lam) <= tol else float(lam)


def _select(n, k, which):
    if n == 0:
        raise EmptyInputError("matrix has dimension 0")
    if not 0 <= k <= n:
        raise ValueError(f"requested {k} eigenpairs of a {n}x{n} matrix")
    if which == "lowest":
        return np.arange(k)
    if which == "highest":
        return np.arange(n - k, n)
    raise ValueError(f"which must be 'lowest' or 'highest', got {which!r}")


def _zero_pairs(n, idx):
    return [EigenPair(0.0, np.eye(n)[i]) for i in idx]


def tridiag_eigenvalues(m: SymTridiag, k: int, which: str = "lowest") -> np.ndarray:
    """Eigenvalues only (ascending), without the inverse-iteration pass."""
    idx = _select(m.n, k, which)
    if k == 0:
        return np.empty(0)
    return _bisect(m.diag, m.offdiag, idx, 1e-12 * m.norm())


def eig_tridiag(m: SymTridiag, k: int, which: str = "lowest") -> list[EigenPair]:
    """The ``k`` lowest or highest eigenpairs of ``m``, ascending."""
    idx = _select(m.n, k, which)
    if k == 0:
        return []
    norm = m.norm()
    if norm == 0.0:
        return _zero_pairs(m.n, idx)
    tol = 1e-12 * norm
    lams = _bisect(m.diag, m.offdiag, idx, tol)
    vecs = _inverse_iteration(m.diag, m.offdiag, lams, norm, int(idx[0]))
    return [EigenPair(_polish(m, v, l, tol), v) for l, v in zip(lams, vecs)]


def tridiagonalize(a: np.ndarray):
    """Householder reduction ``a = Q T Q^T``.

    Returns ``(d, e, reflectors)``; ``reflectors[j]`` is the unit vector ``v``
    of ``H_j = I - 2 v v^T`` acting on indices ``j+1:`` (or ``None``).
    """
    a = np.array(a, dtype=float, copy=True)
    n = a.shape[0]
    e = np.zeros(max(n - 1, 0))
    refl = []
    for j in range(n - 2):
        x = a[j + 1 :, j]
        tail = np.linalg.norm(x[1:])
        if tail == 0.0:
            e[j] = x[0]
            refl.append(None)
            continue
        alpha = -np.copysign(np.hypot(x[0], tail), x[0])
        v = x.copy()
        v[0] -= alpha
        v /= np.linalg.norm(v)
        sub = a[j + 1 :, j + 1 :]
        p = 2.0 * (sub @ v)
        w = p - np.dot(v, p) * v
        sub -= np.outer(v, w) + np.outer(w, v)
        e[j] = alpha
        refl.append(v)
    if n >= 2:
        e[n - 2] = a[n - 1, n - 2]
    return np.diag(a).copy(), e, refl


def _back_transform(refl, z):
    for j in range(len(refl) - 1, -1, -1):
        v = refl[j]
        if v is None:
            continue
        sub = z[j + 1 :]
        sub -= 2.0 * np.outer(v, v @ sub)
    return z


def eig_dense(m: DenseSym, k: int, which: str = "lowest") -> list[EigenPair]:
    """The ``k`` lowest or highest eigenpairs of a dense symmetric matrix."""
    idx = _select(m.n, k, which)
    if k == 0:
        return []
    if m.norm() == 0.0:
        return _zero_pairs(m.n, idx)
    d, e, refl = tridiagonalize(m.entries)
    t = SymTridiag(d, e)
    norm = max(m.norm(), t.norm())
    tol = 1e-12 * norm
    lams = _bisect(d, e, idx, tol)
    ys = _inverse_iteration(d, e, lams, norm, int(idx[0]))
    z = _back_transform(refl, np.column_stack(ys))
    out = []
    for col, lam in enumerate(lams):
        v = z[:, col]
        v = _orient(v / np.linalg.norm(v))
        res = np.linalg.norm(m.entries @ v - lam * v)
        if res > 1e-10 * norm:
            raise ConvergenceError(
                f"dense eigenvector residual {res:.3e} exceeds 1e-10*norm",
                last=EigenPair(float(lam), v),
            )
        out.append(EigenPair(_polish(m, v, lam, tol), v))
    return out


def count_below(m: SymTridiag | DenseSym, x: float) -> int:
    """Number of eigenvalues strictly below ``x`` (Sturm count)."""
    if isinstance(m, DenseSym):
        d, e, _ = tridiagonalize(m.entries)
    else:
        d, e = m.diag, m.offdiag
    if d.size == 0:
        return 0
    e2 = e * e
    pivmin = _TINY * max(1.0, float(e2.max()) if e2.size else 1.0)
    return int(kernels.sturm_counts(d, e2, np.array([float(x)]), pivmin)[0])


def power_iteration(
    apply: Callable[[np.ndarray], np.ndarray],
    n: int,
    tol: float = 1e-12,
    max_iter: int = 50_000,
    residual_tol: float | None = None,
) -> EigenPair:
    """Dominant eigenpair of a symmetric nonnegative operator.

    Stops once the Rayleigh quotient changes by at most ``tol`` (relative)
    between iterations and, if ``residual_tol`` is given, once
    ``||A x - lam x|| <= residual_tol * lam``.  Starts from the normalised
    all-ones vector; if the Rayleigh quotient is zero there (start vector in
    the kernel) it restarts once from a fixed perturbed vector.
    """
    if n <= 0:
        raise EmptyInputError("operator has dimension 0")
    if not tol > 0:
        raise ValueError("tol must be positive")
    x = np.full(n, 1.0 / np.sqrt(n))
    restarted = False
    lam_prev = None
    lam = 0.0
    for it in range(max_iter):
        y = apply(x)
        lam = float(np.dot(x, y))
        ny = float(np.linalg.norm(y))
        if lam <= 0.0 or ny == 0.0:
            if restarted:
                return EigenPair(max(lam, 0.0), x)
            x = np.ones(n) + 0.5 * start_vector(n, 7) * np.sqrt(n)
            x /= np.linalg.norm(x)
            restarted = True
            lam_prev = None
            continue
        if lam_prev is not None and abs(lam - lam_prev) <= tol * abs(lam):
            if residual_tol is None or np.linalg.norm(y - lam * x) <= residual_tol * lam:
                return EigenPair(lam, _orient(x))
        lam_prev = lam
        x = y / ny
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} iterations",
        last=EigenPair(lam, x),
        iterations=max_iter,
    )


def weighted_lowest(
    stiffness: SymTridiag,
    mass: np.ndarray,
    potential: np.ndarray | None = None,
    k: int = 1,
) -> list[EigenPair]:
    """Lowest eigenpairs of ``(S + diag(p)) u = nu diag(mass) u``.

    Vectors are returned in nodal form, normalised so that
    ``sum(mass * u**2) == 1``.  Each eigenvalue is refined by the Rayleigh
    quotient evaluated in difference form, which keeps eigenvalues close to
    zero accurate far beyond the bisection tolerance of ``||S||``.
    """
    mass = np.asarray(mass, dtype=float)
    p = np.zeros(stiffness.n) if potential is None else np.asarray(potential, dtype=float)
    t = mass_normalize(stiffness.add_diagonal(p), mass)
    out = []
    for pair in eig_tridiag(t, k, "lowest"):
        u = pair.vector / np.sqrt(mass)
        u /= np.sqrt(np.dot(mass, u * u))
        nu = stiffness.quadratic_form(u) + float(np.dot(p, u * u))
        out.append(EigenPair(nu, u))
    return out

