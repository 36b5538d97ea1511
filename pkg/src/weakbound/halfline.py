"""Truncated half-line Schrodinger operator with an explicit zero mode.

The potential

    q(x) = -2/(x^2+1) + 8x^2/(x^2+1)^2 = (6x^2 - 2)/(x^2+1)^2

makes ``f0(x) = (2/sqrt(pi)) / (x^2+1)`` a normalised zero mode of
``-f'' + q f`` with ``f'(0) = 0``.  The operator factorises as ``B B*`` with
``B f = f' + phi f`` and ``phi = f0'/f0 = -2x/(x^2+1)``.

The half-line is truncated to ``[0, L]``.  At ``x = 0`` the closure is the
ghost-point Neumann closure of :mod:`weakbound.interval`.  At ``x = L`` the
default ``"matched"`` closure imposes ``f'(L) = phi(L) f(L)``, the boundary
condition ``f0`` itself satisfies; it keeps the zero-mode residual at
``O(h^2)``.  ``"neumann"`` imposes ``f'(L) = 0`` instead, which leaves an
``O(phi(L)/h)`` defect in the last row.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, TruncationError
from .interval import Grid1D, PotentialSamples, apply_operator, assemble_neumann
from .linalg import SymTridiag, count_below, mass_normalize, weighted_lowest

CLOSURES = ("matched", "neumann")


def q_potential(x):
    x = np.asarray(x, dtype=float)
    return (6.0 * x * x - 2.0) / (x * x + 1.0) ** 2


def zero_mode(x):
    return 2.0 / np.sqrt(np.pi) / (np.asarray(x, dtype=float) ** 2 + 1.0)


def log_derivative(x):
    x = np.asarray(x, dtype=float)
    return -2.0 * x / (x * x + 1.0)


@dataclass(frozen=True, eq=False)
class HalflineModel:
    """Grid and sampled coefficient functions on ``[0, L]``."""

    L: float = 300.0
    h: float = 0.05
    closure: str = "matched"
    grid: Grid1D = field(init=False, repr=False)
    q_samples: np.ndarray = field(init=False, repr=False)
    f0_samples: np.ndarray = field(init=False, repr=False)
    phi_samples: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.L >= 50:
            raise DomainError(f"truncation length must be at least 50, got {self.L!r}")
        if not (self.h > 0 and self.h <= 1):
            raise DomainError(f"spacing must lie in (0, 1], got {self.h!r}")
        if self.closure not in CLOSURES:
            raise DomainError(f"closure must be one of {CLOSURES}, got {self.closure!r}")
        grid = Grid1D(0.0, float(self.L), int(round(self.L / self.h)) + 1)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "q_samples", q_potential(grid.nodes))
        object.__setattr__(self, "f0_samples", zero_mode(grid.nodes))
        object.__setattr__(self, "phi_samples", log_derivative(grid.nodes))

    def potential(self, func) -> PotentialSamples:
        return PotentialSamples.from_function(self.grid, func)


def assemble_halfline(model: HalflineModel) -> SymTridiag:
    """Stiffness form of ``-d^2/dx^2 + q`` on the truncated grid.

    Pair with ``model.grid.mass`` exactly as the interval operator.
    """
    g = model.grid
    A = assemble_neumann(g)
    d = A.diag + g.mass * model.q_samples
    if model.closure == "matched":
        # ghost value from f'(L) = phi(L) f(L), halved by the boundary mass
        d[-1] -= model.phi_samples[-1] / g.h
    return SymTridiag(d, A.offdiag)


def zero_mode_residual(model: HalflineModel, A: SymTridiag | None = None) -> float:
    """``max_i |(A f0)_i|`` in nodal form."""
    A = assemble_halfline(model) if A is None else A
    return float(np.abs(apply_operator(A, model.grid, model.f0_samples)).max())


def lowest_eigenvalue(model: HalflineModel, A: SymTridiag | None = None) -> float:
    A = assemble_halfline(model) if A is None else A
    return weighted_lowest(A, model.grid.mass)[0].value


def lowest_eigenvalue_perturbed_halfline(
    model: HalflineModel, V: PotentialSamples, alpha: float, A: SymTridiag | None = None
) -> float:
    A = assemble_halfline(model) if A is None else A
    g = model.grid
    return weighted_lowest(A, g.mass, alpha * g.mass * V.v)[0].value


# -- factorisation A = B B* ------------------------------------------------------


def quadratic_form(model: HalflineModel, f: np.ndarray, A: SymTridiag | None = None) -> float:
    """``<A f, f>`` in the trapezoid inner product."""
    A = assemble_halfline(model) if A is None else A
    g = model.grid
    # stiffness part in difference form, potential part kept separate
    kinetic = float(np.sum(np.diff(f) ** 2)) / g.h**2
    rest = A.diag - assemble_neumann(g).diag
    return g.h * (kinetic + float(np.dot(rest, f * f)))


def adjoint_form(model: HalflineModel, f: np.ndarray) -> float:
    """``||B* f||^2`` with ``B* f = -f' + phi f`` and forward differences."""
    g = model.grid
    bstar = -np.diff(f) / g.h + model.phi_samples[:-1] * f[:-1]
    return g.h * float(np.dot(bstar, bstar))


def test_family(model: HalflineModel, count: int = 20) -> list[np.ndarray]:
    """Gaussian bumps with centres in ``[3, min(40, L/2)]`` and widths 0.75 to 2.25."""
    x = model.grid.nodes
    centres = np.linspace(3.0, min(40.0, 0.5 * model.L), count)
    widths = 0.75 + 0.5 * (np.arange(count) % 4)
    return [np.exp(-0.5 * ((x - c) / w) ** 2) for c, w in zip(centres, widths)]


@dataclass(eq=False)
class FactorizationReport:
    max_form_error: float
    errors: np.ndarray
    forms: np.ndarray
    zero_mode_form: float


def form_discrepancy(model: HalflineModel, f: np.ndarray, A: SymTridiag | None = None) -> tuple[float, float]:
    """Relative gap between ``<A f, f>`` and ``||B* f||^2``, plus ``<A f, f>``.

    The gap is scaled by ``||f'||^2 + ||sqrt|q| f||^2`` so it is meaningful
    even when the form itself is close to zero.
    """
    g = model.grid
    qa = quadratic_form(model, f, A)
    qb = adjoint_form(model, f)
    scale = float(np.sum(np.diff(f) ** 2)) / g.h + g.integrate(np.abs(model.q_samples) * f * f)
    return abs(qa - qb) / scale, qa


def factorization_check(model: HalflineModel, count: int = 20) -> FactorizationReport:
    """Compare the two quadratic forms over the fixed test family."""
    A = assemble_halfline(model)
    errs, forms = [], []
    for f in test_family(model, count):
        e, qa = form_discrepancy(model, f, A)
        errs.append(e)
        forms.append(qa)
    errs = np.array(errs)
    f0q = quadratic_form(model, model.f0_samples, A)
    return FactorizationReport(float(errs.max()), errs, np.array(forms), f0q)


# -- first-order slope ------------------------------------------------------------


def asymptotic_slope_halfline(V: PotentialSamples) -> float:
    """``(4/pi) * int_0^L V(x) / (x^2+1)^2 dx`` by the trapezoid rule."""
    g = V.grid
    return 4.0 / np.pi * g.integrate(V.v / (g.nodes**2 + 1.0) ** 2)


def slope_tail_bound(V: PotentialSamples) -> float:
    """Bound on the dropped tail, ``(4/pi) ||V||_inf / (3 L^3)``."""
    return 4.0 / np.pi * float(V.v.max()) / (3.0 * V.grid.b**3)


@dataclass(eq=False)
class SlopeFit:
    slope: float
    curvature: float
    alphas: np.ndarray
    nus: np.ndarray
    baseline: float


def slope_fit_halfline(
    model: HalflineModel,
    V: PotentialSamples,
    alphas,
    subtract_baseline: bool = True,
) -> SlopeFit:
    """Least-squares fit ``nu(alpha) - nu(0) = s alpha + c alpha^2``.

    ``nu(0)`` is the lowest eigenvalue of the unperturbed discrete operator,
    which differs from zero by the truncation and discretisation error; it is
    subtracted so that this offset is not attributed to the slope.  Raises
    :class:`TruncationError` if any bound state decays over more than ``L/5``.
    """
    alphas = np.asarray(alphas, dtype=float)
    if alphas.size < 2 or np.any(alphas >= 0):
        raise DomainError("need at least two negative alphas")
    A = assemble_halfline(model)
    nus = np.array([lowest_eigenvalue_perturbed_halfline(model, V, a, A) for a in alphas])
    for a, nu in zip(alphas, nus):
        if not nu < 0 or 1.0 / np.sqrt(-nu) > model.L / 5:
            decay = np.inf if nu >= 0 else 1.0 / np.sqrt(-nu)
            raise TruncationError(
                f"alpha={a:g}: bound state decay length {decay:.3g} exceeds L/5 = {model.L / 5:.3g}; "
                "increase L"
            )
    base = lowest_eigenvalue(model, A) if subtract_baseline else 0.0
    X = np.column_stack([alphas, alphas**2])
    (s, c), *_ = np.linalg.lstsq(X, nus - base, rcond=None)
    return SlopeFit(float(s), float(c), alphas, nus, base)


def weyl_count(model: HalflineModel, energy: float) -> tuple[int, float]:
    """Eigenvalues below ``energy`` against the Weyl estimate ``L sqrt(E) / pi``.

    Informational: the count grows linearly in ``L``, the discrete trace of
    the continuous spectrum above zero.
    """
    if not energy > 0:
        raise DomainError("energy must be positive")
    A = mass_normalize(assemble_halfline(model), model.grid.mass)
    return count_below(A, energy), model.L * np.sqrt(energy) / np.pi
