"""Neumann Laplacian on an axis-aligned rectangle.

The 2-D operator is the Kronecker sum of two 1-D ghost-point operators from
:mod:`weakbound.interval`: stiffness ``K = M_y (x) A_x + A_y (x) M_x`` and lumped
mass ``M = M_y (x) M_x``.  Nodes are ordered row-major with x fastest, so a
nodal field is an array of shape ``(ny, nx)``.

Small grids are solved densely; larger ones by shifted inverse iteration with
Jacobi-preconditioned conjugate gradients, never forming the matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import ConvergenceError, InvalidPotentialError
from .interval import Grid1D, assemble_neumann, check_potential
from .linalg import DenseSym, eig_dense

DENSE_MAX = 1024
CG_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class Grid2D:
    gx: Grid1D
    gy: Grid1D

    @property
    def shape(self) -> tuple[int, int]:
        return (self.gy.n, self.gx.n)

    @property
    def size(self) -> int:
        return self.gx.n * self.gy.n

    @property
    def area(self) -> float:
        return self.gx.length * self.gy.length

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.gx.nodes, self.gy.nodes)

    @property
    def quad_weights(self) -> np.ndarray:
        return np.outer(self.gy.quad_weights, self.gx.quad_weights)


@dataclass(frozen=True, eq=False)
class PotentialSamples2D:
    grid: Grid2D
    v: np.ndarray

    def __post_init__(self):
        v = np.array(self.v, dtype=float)
        if v.shape != self.grid.shape:
            raise InvalidPotentialError(
                f"potential has shape {v.shape}, grid has shape {self.grid.shape}"
            )
        X, Y = self.grid.mesh()
        check_potential(v.ravel(), np.column_stack([X.ravel(), Y.ravel()]))
        object.__setattr__(self, "v", v)

    @classmethod
    def from_function(cls, grid: Grid2D, func):
        X, Y = grid.mesh()
        return cls(grid, np.broadcast_to(np.asarray(func(X, Y), dtype=float), grid.shape).copy())


@dataclass(eq=False)
class NeumannOperator2D:
    """Matrix-free 2-D Neumann stiffness with its lumped mass."""

    grid: Grid2D
    mass: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.mass = np.outer(self.grid.gy.mass, self.grid.gx.mass)
        self._ihx2 = 1.0 / self.grid.gx.h**2
        self._ihy2 = 1.0 / self.grid.gy.h**2

    def matvec(self, u: np.ndarray) -> np.ndarray:
        """Stiffness times ``u``; accepts flat or ``(ny, nx)`` input, returns the same."""
        u2 = np.ascontiguousarray(u, dtype=float).reshape(self.grid.shape)
        out = kernels.stencil2d(u2, self.grid.gx.mass, self.grid.gy.mass, self._ihx2, self._ihy2)
        return out.reshape(np.shape(u))

    def diagonal(self) -> np.ndarray:
        ax = assemble_neumann(self.grid.gx).diag
        ay = assemble_neumann(self.grid.gy).diag
        return np.outer(self.grid.gy.mass, ax) + np.outer(ay, self.grid.gx.mass)

    def energy(self, u: np.ndarray) -> float:
        """``u^T K u`` as a sum of squared differences (no cancellation)."""
        u2 = np.asarray(u, dtype=float).reshape(self.grid.shape)
        ex = np.sum(self.grid.gy.mass[:, None] * np.diff(u2, axis=1) ** 2) * self._ihx2
        ey = np.sum(self.grid.gx.mass[None, :] * np.diff(u2, axis=0) ** 2) * self._ihy2
        return float(ex + ey)

    def norm(self) -> float:
        """Max-row-sum norm of the mass-normalised operator (Gershgorin bound)."""
        return float(2.0 * (self.diagonal() / self.mass).max())

    def to_sparse(self) -> sp.csr_matrix:
        """Explicit 5-point stencil as a sparse matrix (stiffness form)."""
        gx, gy = self.grid.gx, self.grid.gy
        Ax = sp.csr_matrix(assemble_neumann(gx).to_dense())
        Ay = sp.csr_matrix(assemble_neumann(gy).to_dense())
        return (sp.kron(sp.diags(gy.mass), Ax) + sp.kron(Ay, sp.diags(gx.mass))).tocsr()

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()


def assemble_neumann_2d(grid: Grid2D) -> NeumannOperator2D:
    return NeumannOperator2D(grid)


def asymptotic_slope_rectangle(V: PotentialSamples2D) -> float:
    """Mean value of ``V`` over the rectangle (tensor trapezoid rule)."""
    return float(np.sum(V.grid.quad_weights * V.v) / V.grid.area)


def _cg(apply, b, precond, rtol, maxiter):
    x = np.zeros_like(b)
    r = b.copy()
    z = precond * r
    p = z.copy()
    rz = np.dot(r, z)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return x, 0
    for it in range(1, maxiter + 1):
        q = apply(p)
        step = rz / np.dot(p, q)
        x += step * p
        r -= step * q
        if np.linalg.norm(r) <= rtol * bnorm:
            return x, it
        z = precond * r
        rz_new = np.dot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceError(
        f"CG did not reach relative residual {rtol:g} in {maxiter} iterations",
        last=x,
        iterations=maxiter,
    )


@dataclass(eq=False)
class Eigen2D:
    values: np.ndarray
    vectors: np.ndarray  # (k, ny, nx), mass-normalised
    residuals: np.ndarray
    method: str


def lowest_eigenpairs_2d(
    A: NeumannOperator2D,
    V: PotentialSamples2D | None,
    alpha: float,
    k: int = 1,
    method: str = "auto",
    max_outer: int = 500,
) -> Eigen2D:
    """Lowest ``k`` eigenpairs of ``A + alpha V``.

    ``method`` is ``"dense"``, ``"cg"`` or ``"auto"`` (dense up to
    ``DENSE_MAX`` nodes).  The CG path runs block inverse iteration with a
    shift below the spectrum, Rayleigh-Ritz on the block, and stops once every
    residual is at most ``1e-8 ||A||``.
    """
    shape = A.grid.shape
    n = A.grid.size
    m = A.mass.ravel()
    pot = np.zeros(n) if V is None else alpha * m * V.v.ravel()
    s = 1.0 / np.sqrt(m)
    norm = A.norm() + abs(alpha) * (0.0 if V is None else float(V.v.max()))
    if method == "auto":
        method = "dense" if n <= DENSE_MAX else "cg"

    def T(y):
        return s * A.matvec(s * y) + (pot / m) * y

    if method == "dense":
        dense = s[:, None] * A.to_dense() * s[None, :] + np.diag(pot / m)
        pairs = eig_dense(DenseSym(0.5 * (dense + dense.T)), k)
        Y = np.column_stack([p.vector for p in pairs])
    elif method == "cg":
        Y = _block_inverse_iteration(T, A, pot, m, s, alpha, V, k, norm, max_outer)
    else:
        raise ValueError(f"unknown method {method!r}")

    values, vecs, res = [], [], []
    for y in Y.T:
        u = s * y
        u /= np.sqrt(np.dot(m, u * u))
        values.append(A.energy(u) + float(np.dot(pot, u * u)))
        res.append(float(np.linalg.norm(T(y) - np.dot(y, T(y)) * y)))
        vecs.append(u.reshape(shape))
    order = np.argsort(values, kind="stable")
    return Eigen2D(
        np.array(values)[order], np.array(vecs)[order], np.array(res)[order], method
    )


def _block_inverse_iteration(T, A, pot, m, s, alpha, V, k, norm, max_outer):
    n = m.size
    vmax = 0.0 if V is None else float(V.v.max())
    lower = min(0.0, alpha * vmax)
    L = max(A.grid.gx.length, A.grid.gy.length)
    sigma = lower - 0.1 * abs(alpha) * vmax - 1e-3 * (np.pi / L) ** 2
    diag = A.diagonal().ravel() / m + pot / m - sigma
    precond = 1.0 / diag
    maxiter = 20 * n

    def shifted(y):
        return T(y) - sigma * y

    block = min(n, k + 2)
    # deterministic start block: smooth cosine modes plus a ramp
    gx, gy = A.grid.gx, A.grid.gy
    X, Y = np.meshgrid((gx.nodes - gx.a) / gx.length, (gy.nodes - gy.a) / gy.length)
    modes = [np.ones_like(X), np.cos(np.pi * X), np.cos(np.pi * Y), np.cos(np.pi * (X + 0.3 * Y))]
    modes += [np.cos(np.pi * (j + 2) * X) * np.cos(np.pi * (j % 3) * Y) for j in range(block)]
    Q = np.linalg.qr(np.column_stack([md.ravel() / s for md in modes[:block]]))[0]

    target = 1e-8 * norm
    prev = None
    for it in range(max_outer):
        Z = np.column_stack([_cg(shifted, Q[:, j], precond, CG_RTOL, maxiter)[0] for j in range(block)])
        Q = np.linalg.qr(Z)[0]
        TQ = np.column_stack([T(Q[:, j]) for j in range(block)])
        H = Q.T @ TQ
        ritz = eig_dense(DenseSym(0.5 * (H + H.T)), block)
        C = np.column_stack([p.vector for p in ritz])
        theta = np.array([p.value for p in ritz])
        Q = Q @ C
        R = TQ @ C - Q * theta
        res = np.linalg.norm(R[:, :k], axis=0)
        settled = prev is not None and np.all(np.abs(theta[:k] - prev) <= 1e-13 * norm)
        if np.all(res <= target) and (settled or np.all(res <= 1e-3 * target)):
            return Q[:, :k]
        prev = theta[:k]
    raise ConvergenceError(
        f"block inverse iteration did not converge in {max_outer} sweeps",
        last=Q[:, :k],
        iterations=max_outer,
    )


def lowest_eigenvalue_perturbed_2d(
    A: NeumannOperator2D, V: PotentialSamples2D, alpha: float, method: str = "auto"
) -> float:
    return float(lowest_eigenpairs_2d(A, V, alpha, 1, method).values[0])
