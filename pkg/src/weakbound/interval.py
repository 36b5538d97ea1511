"""Neumann Laplacian on a finite interval.

Discretisation: vertex-centred finite differences with ghost-point Neumann
closure.  The operator is stored in symmetric "stiffness" form ``A`` (boundary
rows ``(1, -1)/h^2``, interior rows ``(-1, 2, -1)/h^2``) together with the
diagonal mass ``w/h`` taken from the trapezoid weights (1/2 at the ends, 1
inside).  The generalised problem ``A u = nu diag(w/h) u`` is exactly the
ghost-point scheme, second-order accurate, and ``A`` annihilates constants
exactly.

The Birman-Schwinger side uses the closed-form Neumann Green's function and
a Nystrom (trapezoid) discretisation, symmetrised with ``sqrt(w)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .errors import (
    DomainError,
    InvalidPotentialError,
    NoBoundStateError,
    ReconstructionError,
)
from .linalg import (
    DenseSym,
    SymTridiag,
    mass_normalize,
    power_iteration,
    tridiag_eigenvalues,
    weighted_lowest,
)

DEFAULT_N = 2001


@dataclass(frozen=True, eq=False)
class Grid1D:
    """Uniform grid ``x_i = a + i h`` on ``[a, b]`` with ``n`` nodes."""

    a: float
    b: float
    n: int = DEFAULT_N
    h: float = field(init=False)
    nodes: np.ndarray = field(init=False, repr=False)
    quad_weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        a, b, n = float(self.a), float(self.b), int(self.n)
        if not (np.isfinite(a) and np.isfinite(b) and b > a):
            raise ValueError(f"need finite a < b, got a={a}, b={b}")
        if n < 3:
            raise ValueError(f"need at least 3 nodes, got {n}")
        h = (b - a) / (n - 1)
        nodes = a + h * np.arange(n)
        nodes[-1] = b
        w = np.full(n, h)
        w[0] = w[-1] = 0.5 * h
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "quad_weights", w)

    @property
    def length(self) -> float:
        return self.b - self.a

    @property
    def mass(self) -> np.ndarray:
        """Dimensionless lumped mass ``w/h`` (1/2 at the ends, 1 inside)."""
        return self.quad_weights / self.h

    def integrate(self, f: np.ndarray) -> float:
        return float(np.dot(self.quad_weights, f))


@dataclass(frozen=True, eq=False)
class PotentialSamples:
    """Nonnegative, not identically zero potential sampled on a grid."""

    grid: Grid1D
    v: np.ndarray
    sqrt_v: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        v = np.array(self.v, dtype=float)
        if v.shape != (self.grid.n,):
            raise InvalidPotentialError(
                f"potential has shape {v.shape}, grid has {self.grid.n} nodes"
            )
        check_potential(v, self.grid.nodes)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "sqrt_v", np.sqrt(v))

    @classmethod
    def from_function(cls, grid: Grid1D, func: Callable[[np.ndarray], np.ndarray]):
        vals = np.broadcast_to(np.asarray(func(grid.nodes), dtype=float), grid.nodes.shape)
        return cls(grid, vals.copy())


def check_potential(v: np.ndarray, where=None) -> None:
    """Raise unless ``v`` is finite, nonnegative and somewhere positive."""
    bad = ~np.isfinite(v)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise InvalidPotentialError(f"potential is not finite at node {i}{_at(where, i)}")
    neg = v < 0
    if neg.any():
        i = int(np.flatnonzero(neg.ravel())[0])
        raise InvalidPotentialError(
            f"potential is negative ({v.ravel()[i]:.6g}) at node {i}{_at(where, i)}"
        )
    if not (v > 0).any():
        raise InvalidPotentialError("potential vanishes identically")


def _at(where, i):
    if where is None:
        return ""
    pt = np.atleast_1d(np.asarray(where, dtype=float)[i])
    return " (at " + ", ".join(f"{c:.6g}" for c in pt) + ")"


# -- direct discretisation -----------------------------------------------------


def assemble_neumann(grid: Grid1D) -> SymTridiag:
    """Symmetric stiffness form of the Neumann Laplacian (see module docstring)."""
    c = 1.0 / grid.h**2
    diag = np.full(grid.n, 2.0 * c)
    diag[0] = diag[-1] = c
    return SymTridiag(diag, np.full(grid.n - 1, -c))


def apply_operator(A: SymTridiag, grid: Grid1D, f: np.ndarray) -> np.ndarray:
    """Nodal action of the ghost-point operator, ``diag(w/h)^-1 A f``."""
    return A.matvec(f) / grid.mass


def neumann_spectrum(grid: Grid1D, k: int) -> np.ndarray:
    """Lowest ``k`` eigenvalues of the discrete Neumann Laplacian."""
    return tridiag_eigenvalues(mass_normalize(assemble_neumann(grid), grid.mass), k)


def lowest_eigenvalue_perturbed(
    A: SymTridiag, V: PotentialSamples, alpha: float
) -> tuple[float, np.ndarray]:
    """Lowest eigenpair of ``A + alpha V``.

    The eigenfunction is returned as nodal values, positive on average and
    normalised in the trapezoid L2 norm.
    """
    grid = V.grid
    if A.n != grid.n:
        raise ValueError(f"operator has {A.n} rows, potential grid has {grid.n} nodes")
    pair = weighted_lowest(A, grid.mass, alpha * grid.mass * V.v)[0]
    return pair.value, pair.vector / np.sqrt(grid.h)


def asymptotic_slope_interval(V: PotentialSamples) -> float:
    """First-order coefficient: the mean value of ``V`` over the interval."""
    return V.grid.integrate(V.v) / V.grid.length


def perturbed_residual(A: SymTridiag, V: PotentialSamples, alpha: float, nu: float, f) -> float:
    """``||(A + alpha V) f - nu f|| / ||f||`` in the trapezoid norm."""
    g = V.grid
    r = apply_operator(A, g, f) + alpha * V.v * f - nu * f
    return float(np.sqrt(g.integrate(r * r) / g.integrate(f * f)))


# -- Green's function and Birman-Schwinger operator ----------------------------


def _green_factors(nu: float, x: np.ndarray, a: float, b: float):
    if not nu < 0:
        raise DomainError(f"Green's function needs nu < 0, got {nu!r}")
    kappa = np.sqrt(-nu)
    U = 0.5 * (1.0 + np.exp(-2.0 * kappa * (x - a)))
    W = 0.5 * (1.0 + np.exp(-2.0 * kappa * (b - x)))
    c = -2.0 / (kappa * np.expm1(-2.0 * kappa * (b - a)))
    return kappa, U, W, c


def neumann_green(nu: float, x, y, a: float, b: float):
    """Kernel of ``(A_N - nu)^-1`` on ``(a, b)``.

    ``cosh(k(x_< - a)) cosh(k(b - x_>)) / (k sinh(k(b - a)))`` with
    ``k = sqrt(-nu)``, evaluated as ``2 U W exp(-k|x-y|) / (k (1 - exp(-2kL)))``
    where ``U, W`` lie in ``[1/2, 1]``; no intermediate overflows for any ``nu``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lo, hi = np.minimum(x, y), np.maximum(x, y)
    kappa, U, _, c = _green_factors(nu, lo, a, b)
    W = 0.5 * (1.0 + np.exp(-2.0 * kappa * (b - hi)))
    g = c * U * W * np.exp(-kappa * (hi - lo))
    return g if g.ndim else float(g)


def _bs_weights(V: PotentialSamples) -> np.ndarray:
    return np.sqrt(V.grid.quad_weights) * V.sqrt_v


def build_bs_operator(nu: float, V: PotentialSamples) -> DenseSym:
    """Symmetrised Nystrom matrix of ``V^1/2 (A_N - nu)^-1 V^1/2``."""
    g = V.grid
    kappa, U, W, c = _green_factors(nu, g.nodes, g.a, g.b)
    G = kernels.green_dense(g.nodes, U, W, kappa, c)
    s = _bs_weights(V)
    return DenseSym(s[:, None] * G * s[None, :])


def green_matvec(nu: float, grid: Grid1D) -> Callable[[np.ndarray], np.ndarray]:
    """O(n) product with the Green's matrix ``G_ij = G(x_i, x_j)`` (no weights)."""
    kappa, U, W, c = _green_factors(nu, grid.nodes, grid.a, grid.b)
    r = float(np.exp(-kappa * grid.h))
    return lambda x: c * kernels.green_apply(U, W, r, np.ascontiguousarray(x, dtype=float))


def bs_matvec(nu: float, V: PotentialSamples) -> Callable[[np.ndarray], np.ndarray]:
    """O(n) product with the matrix of :func:`build_bs_operator`."""
    G = green_matvec(nu, V.grid)
    s = _bs_weights(V)
    return lambda x: s * G(s * x)


def bs_top(nu: float, V: PotentialSamples, tol: float = 1e-12, residual_tol=None):
    """Largest eigenpair of ``K(nu)`` by power iteration."""
    return power_iteration(bs_matvec(nu, V), V.grid.n, tol=tol, residual_tol=residual_tol)


@dataclass(eq=False)
class NormCurve:
    nus: np.ndarray
    lambda_max: np.ndarray
    increasing: bool

    def __iter__(self):
        return iter(zip(self.nus.tolist(), self.lambda_max.tolist()))


def bs_norm_curve(V: PotentialSamples, nus: Sequence[float], tol: float = 1e-12) -> NormCurve:
    """``||K(nu)||`` over the given ``nu < 0``.

    ``increasing`` is set when the norms increase strictly as ``nu`` moves
    towards zero.
    """
    nus = np.asarray(nus, dtype=float)
    if np.any(nus >= 0):
        raise DomainError("all nu must be negative")
    lam = np.array([bs_top(nu, V, tol).value for nu in nus])
    order = np.argsort(nus)
    increasing = bool(np.all(np.diff(lam[order]) > 0))
    return NormCurve(nus, lam, increasing)


@dataclass(eq=False)
class BsSolveResult:
    nu_alpha: float
    k_alpha: np.ndarray
    f_alpha: np.ndarray
    residual: float
    bracket: tuple[float, float]
    lambda_max: float
    monotone: bool
    evaluations: int


def bs_solve(
    V: PotentialSamples,
    alpha: float,
    tol: float = 1e-10,
    A: SymTridiag | None = None,
) -> BsSolveResult:
    """Negative eigenvalue of ``A + alpha V`` from ``lambda_max(K(nu)) = -1/alpha``.

    ``nu_hi`` starts just below zero, where the norm blow-up guarantees
    ``lambda_max > -1/alpha``; ``nu_lo`` doubles until ``lambda_max`` drops
    below the target; then plain bisection until the bracket is narrower than
    ``tol * max(1, |nu|)``.
    """
    if not alpha < 0:
        raise DomainError(f"bs_solve needs alpha < 0, got {alpha!r}")
    if not tol > 0:
        raise ValueError("tol must be positive")
    target = -1.0 / alpha
    evals = 0

    def lam(nu):
        nonlocal evals
        evals += 1
        return bs_top(nu, V).value

    nu_hi = -tol
    lam_hi = lam(nu_hi)
    for _ in range(60):
        if lam_hi > target:
            break
        nu_hi *= 0.5
        lam_hi = lam(nu_hi)
    else:
        raise NoBoundStateError(f"lambda_max stays below -1/alpha={target:.6g} near nu = 0")

    nu_lo, lam_lo = nu_hi, lam_hi
    for _ in range(60):
        nu_lo *= 2.0
        lam_lo = lam(nu_lo)
        if lam_lo < target:
            break
    else:
        raise NoBoundStateError(
            f"no bracket after 60 doublings (nu_lo={nu_lo:.3e}); is V ~ 0 or alpha pathological?"
        )

    monotone = lam_lo < lam_hi
    while nu_hi - nu_lo > tol * max(1.0, abs(0.5 * (nu_lo + nu_hi))):
        mid = 0.5 * (nu_lo + nu_hi)
        if mid in (nu_lo, nu_hi):
            break
        lm = lam(mid)
        monotone &= lam_lo <= lm <= lam_hi
        if lm > target:
            nu_hi, lam_hi = mid, lm
        else:
            nu_lo, lam_lo = mid, lm

    nu = 0.5 * (nu_lo + nu_hi)
    top = bs_top(nu, V, tol=1e-14, residual_tol=1e-12)
    # unit in the trapezoid norm: sum(w k^2) = |y|^2 = 1
    k = top.vector / np.sqrt(V.grid.quad_weights)
    f = reconstruct_eigenfunction(nu, k, V)
    A = assemble_neumann(V.grid) if A is None else A
    res = perturbed_residual(A, V, alpha, nu, f)
    return BsSolveResult(nu, k, f, res, (nu_lo, nu_hi), top.value, bool(monotone), evals + 1)


def reconstruct_eigenfunction(nu_alpha: float, k_alpha: np.ndarray, V: PotentialSamples) -> np.ndarray:
    """``f = (A - nu)^-1 V^1/2 k`` by trapezoid quadrature of the Green's function."""
    k_alpha = np.asarray(k_alpha, dtype=float)
    g = V.grid
    if k_alpha.shape != (g.n,):
        raise ValueError(f"k_alpha has shape {k_alpha.shape}, grid has {g.n} nodes")
    f = green_matvec(nu_alpha, g)(g.quad_weights * V.sqrt_v * k_alpha)
    fn = np.linalg.norm(f)
    if fn == 0.0 or fn < 1e-12 * np.linalg.norm(k_alpha):
        raise ReconstructionError("reconstructed eigenfunction vanishes")
    return f
