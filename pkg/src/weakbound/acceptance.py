"""Acceptance suite: twelve end-to-end checks with runtime budgets.

Each ``criterion_*`` function returns a :class:`Criterion`; a criterion passes
when its numerical check holds and it finishes inside its budget.  JIT
compilation is triggered once up front and not charged to any criterion.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import kernels
from .graph import (
    Edge,
    GraphPotential,
    MetricGraph,
    assemble_kirchhoff,
    connected_components,
    graph_spectrum,
    kernel_multiplicity,
    lowest_eigenvalue_perturbed_graph,
    random_graph,
    star_graph,
)
from .halfline import HalflineModel, slope_fit_halfline, zero_mode_residual
from .interval import (
    Grid1D,
    PotentialSamples,
    assemble_neumann,
    bs_norm_curve,
    bs_solve,
    lowest_eigenvalue_perturbed,
    neumann_spectrum,
)
from .rectangle import Grid2D, PotentialSamples2D, assemble_neumann_2d, lowest_eigenvalue_perturbed_2d
from .runner import fit_slope

# (4/pi) * int_0^inf exp(-x) (1+x^2)^-2 dx, evaluated with mpmath at 30 digits
HALFLINE_EXP_SLOPE = 0.614228318041019136573
GRAPH_SEED = 20240601
NONNEG_SEED = 11
INSTABILITY_SEED = 12


@dataclass
class Criterion:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float
    budget: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.number:2d}. {self.name}: {self.detail} ({self.seconds:.2f}s / {self.budget:g}s)"


def _timed(number, name, budget):
    def wrap(fn):
        def run() -> Criterion:
            t0 = time.perf_counter()
            ok, detail = fn()
            dt = time.perf_counter() - t0
            if dt >= budget:
                detail += "; over budget"
            return Criterion(number, name, bool(ok) and dt < budget, detail, dt, budget)

        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        return run

    return wrap


def richardson_trapezoid(f, a: float, b: float, h: float) -> float:
    """Trapezoid rule at ``h`` and ``h/2`` combined as ``(4 T(h/2) - T(h)) / 3``."""

    def trap(step):
        n = int(round((b - a) / step))
        x = np.linspace(a, b, n + 1)
        y = f(x)
        return (b - a) / n * (y.sum() - 0.5 * (y[0] + y[-1]))

    return (4.0 * trap(0.5 * h) - trap(h)) / 3.0


def halfline_exp_slope_oracle(L: float = 60.0, h: float = 0.01) -> float:
    """Independent quadrature for the exponential half-line slope (tail below exp(-L))."""
    return 4.0 / np.pi * richardson_trapezoid(lambda x: np.exp(-x) / (1.0 + x * x) ** 2, 0.0, L, h)


def _interval_x(n=2001):
    g = Grid1D(0.0, 1.0, n)
    return g, PotentialSamples.from_function(g, lambda x: x)


@_timed(1, "shift exactness", 1.0)
def criterion_1():
    g = Grid1D(0.0, 1.0, 2001)
    V = PotentialSamples(g, np.ones(g.n))
    nu, _ = lowest_eigenvalue_perturbed(assemble_neumann(g), V, -0.1)
    err = abs(nu + 0.1)
    return err <= 1e-9, f"|nu + 0.1| = {err:.2e}"


@_timed(2, "interval slope", 5.0)
def criterion_2():
    g, V = _interval_x()
    A = assemble_neumann(g)
    alphas = -0.1 * 2.0 ** -np.arange(5)
    nus = [lowest_eigenvalue_perturbed(A, V, a)[0] for a in alphas]
    s = fit_slope(alphas, nus)
    dev = abs(s / 0.5 - 1)
    return dev <= 0.01, f"fitted slope {s:.6f}, deviation {dev:.2e}"


@_timed(3, "Birman-Schwinger vs direct", 10.0)
def criterion_3():
    g, V = _interval_x()
    A = assemble_neumann(g)
    worst = 0.0
    ok = True
    for a in (-0.5, -0.1, -0.01):
        nu_d = lowest_eigenvalue_perturbed(A, V, a)[0]
        nu_b = bs_solve(V, a, 1e-10, A).nu_alpha
        bound = max(1e-8, 1e-3 * abs(nu_d))
        ok &= abs(nu_b - nu_d) <= bound
        worst = max(worst, abs(nu_b - nu_d) / bound)
    return ok, f"max |nu_bs - nu_direct| / bound = {worst:.2e}"


@_timed(4, "norm blow-up", 10.0)
def criterion_4():
    _, V = _interval_x()
    nus = -(10.0 ** -np.arange(1, 7))
    curve = bs_norm_curve(V, nus)
    prod = 1e-6 * curve.lambda_max[-1]
    dev = abs(prod / 0.5 - 1)
    return curve.increasing and dev <= 0.01, (
        f"increasing={curve.increasing}, |nu| lambda_max(-1e-6) = {prod:.6f}"
    )


@_timed(5, "eigenfunction reconstruction", 2.0)
def criterion_5():
    g, V = _interval_x()
    tol = 1e-10
    res = bs_solve(V, -0.1, tol)
    bound = 10 * g.h**2 + 10 * tol
    return res.residual <= bound, f"residual {res.residual:.2e} <= {bound:.2e}"


@_timed(6, "rectangle slope", 30.0)
def criterion_6():
    g = Grid2D(Grid1D(0.0, 1.0, 80), Grid1D(0.0, 1.0, 80))
    V = PotentialSamples2D.from_function(g, lambda x, y: x + y)
    nu = lowest_eigenvalue_perturbed_2d(assemble_neumann_2d(g), V, -1e-3)
    ratio = nu / -1e-3
    return abs(ratio - 1.0) <= 0.05, f"nu/alpha = {ratio:.6f}"


@_timed(7, "graph kernel multiplicity", 30.0)
def criterion_7():
    rng = np.random.default_rng(GRAPH_SEED)
    mismatches = 0
    for _ in range(50):
        gr = random_graph(rng, max_edges=12)
        mismatches += kernel_multiplicity(assemble_kirchhoff(gr)) != connected_components(gr)
    path = MetricGraph(3, [Edge(0, 1, 1.0), Edge(1, 2, 1.0)])
    ev = graph_spectrum(path, 6)[1:]
    iv = neumann_spectrum(Grid1D(0.0, 2.0, path.dof_count), 6)[1:]
    dev = float(np.max(np.abs(ev / iv - 1)))
    return mismatches == 0 and dev <= 1e-3, (
        f"seed {GRAPH_SEED}: {mismatches}/50 mismatches; path vs interval {dev:.2e}"
    )


@_timed(8, "graph instability", 5.0)
def criterion_8():
    star = star_graph([1.0, 1.0, 1.0])
    op = assemble_kirchhoff(star)
    V = GraphPotential.from_functions(star, {0: lambda x: np.ones_like(x)})
    nus = [lowest_eigenvalue_perturbed_graph(op, V, a) for a in (-1e-1, -1e-2, -1e-3)]
    return all(nu < 0 for nu in nus), "nu = " + ", ".join(f"{nu:.4e}" for nu in nus)


@_timed(9, "half-line zero mode", 5.0)
def criterion_9():
    hs = (0.04, 0.02, 0.01)
    res = [zero_mode_residual(HalflineModel(60.0, h)) for h in hs]
    orders = np.log2(np.array(res[:-1]) / np.array(res[1:]))
    ok = res[-1] <= 1e-3 and np.all(orders >= 1.8)
    return ok, "residuals " + ", ".join(f"{r:.2e}" for r in res) + ", orders " + ", ".join(
        f"{o:.2f}" for o in orders
    )


@_timed(10, "half-line slope", 20.0)
def criterion_10():
    model = HalflineModel(300.0, 0.05)
    V = model.potential(lambda x: np.exp(-x))
    fit = slope_fit_halfline(model, V, [-0.02, -0.04, -0.08, -0.16])
    oracle = halfline_exp_slope_oracle()
    dev = abs(fit.slope / oracle - 1)
    return dev <= 0.05, f"fitted {fit.slope:.6f} vs oracle {oracle:.6f} ({dev:.2e})"


def random_smooth_potential(rng, x):
    """Squared random cosine series plus a random nonnegative offset."""
    k = np.arange(1, 6)
    c = rng.normal(size=k.size) / k
    s = np.cos(np.pi * np.outer(x, k)) @ c
    return s * s + rng.uniform(0.0, 0.5) * rng.integers(0, 2)


def random_step_potential(rng, x):
    """Piecewise constant on 1-10 equal cells, some cells zero, at least one positive."""
    cells = int(rng.integers(1, 11))
    vals = rng.uniform(0.0, 2.0, size=cells) * (rng.uniform(size=cells) < 0.6)
    if not (vals > 0).any():
        vals[int(rng.integers(cells))] = rng.uniform(0.1, 2.0)
    idx = np.minimum((x * cells).astype(int), cells - 1)
    return vals[idx]


@_timed(11, "nonnegativity for alpha >= 0", 20.0)
def criterion_11():
    rng = np.random.default_rng(NONNEG_SEED)
    g = Grid1D(0.0, 1.0, 2001)
    A = assemble_neumann(g)
    norm = (A.diag / g.mass).max() * 2
    worst = np.inf
    for _ in range(100):
        v = random_smooth_potential(rng, g.nodes)
        if not (v > 0).any():
            continue
        V = PotentialSamples(g, v)
        for a in (0.0, 0.1):
            worst = min(worst, lowest_eigenvalue_perturbed(A, V, a)[0] / norm)
    return worst >= -1e-10, f"seed {NONNEG_SEED}: min nu/||A|| = {worst:.2e}"


@_timed(12, "universal instability", 20.0)
def criterion_12():
    rng = np.random.default_rng(INSTABILITY_SEED)
    g = Grid1D(0.0, 1.0, 2001)
    A = assemble_neumann(g)
    largest = -np.inf
    for _ in range(100):
        V = PotentialSamples(g, random_step_potential(rng, g.nodes))
        largest = max(largest, lowest_eigenvalue_perturbed(A, V, -1e-3)[0])
    return largest < 0, f"seed {INSTABILITY_SEED}: max nu = {largest:.3e}"


CRITERIA = (
    criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
    criterion_7, criterion_8, criterion_9, criterion_10, criterion_11, criterion_12,
)


def run_all(numbers=None, echo=None) -> list[Criterion]:
    kernels.warmup()
    out = []
    for i, crit in enumerate(CRITERIA, start=1):
        if numbers and i not in numbers:
            continue
        c = crit()
        if echo is not None:
            echo(c.line())
        out.append(c)
    return out
