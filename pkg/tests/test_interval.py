import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from weakbound.errors import DomainError, InvalidPotentialError, ReconstructionError
from weakbound.interval import (
    Grid1D,
    PotentialSamples,
    assemble_neumann,
    asymptotic_slope_interval,
    bs_norm_curve,
    bs_solve,
    build_bs_operator,
    bs_top,
    green_matvec,
    lowest_eigenvalue_perturbed,
    neumann_green,
    neumann_spectrum,
    reconstruct_eigenfunction,
)
from weakbound.linalg import eig_dense
from weakbound.runner import fit_slope


def linear(n=2001):
    g = Grid1D(0.0, 1.0, n)
    return g, PotentialSamples.from_function(g, lambda x: x)


def test_grid_invariants():
    g = Grid1D(-1.0, 2.5, 101)
    assert abs(g.quad_weights.sum() - 3.5) <= 1e-14 * 3.5
    assert np.all(np.diff(g.nodes) > 0)
    assert g.nodes[-1] == 2.5
    with pytest.raises(ValueError):
        Grid1D(0.0, 1.0, 2)
    with pytest.raises(ValueError):
        Grid1D(1.0, 1.0, 10)


def test_potential_validation():
    g = Grid1D(0.0, 1.0, 11)
    with pytest.raises(InvalidPotentialError, match="vanishes"):
        PotentialSamples(g, np.zeros(11))
    with pytest.raises(InvalidPotentialError, match=r"node 0 \(at 0\)"):
        PotentialSamples.from_function(g, lambda x: x - 2)
    with pytest.raises(InvalidPotentialError, match="shape"):
        PotentialSamples(g, np.ones(5))
    V = PotentialSamples.from_function(g, lambda x: x * x)
    np.testing.assert_allclose(V.sqrt_v**2, V.v, rtol=1e-14)


@given(st.integers(3, 500), st.floats(-10, 10), st.floats(0.01, 100))
def test_constants_in_kernel_exactly(n, a, length):
    g = Grid1D(a, a + length, n)
    assert np.all(assemble_neumann(g).matvec(np.ones(n)) == 0.0)


def test_neumann_spectrum_unit_interval():
    vals = neumann_spectrum(Grid1D(0.0, 1.0, 2000), 4)
    np.testing.assert_allclose(vals[1:], np.pi**2 * np.array([1, 4, 9]), rtol=1e-3)


def test_neumann_spectrum_refinement_order_two():
    exact = (np.pi / 2) ** 2
    errs = [abs(neumann_spectrum(Grid1D(0.0, 2.0, n), 2)[1] - exact) for n in (101, 201, 401)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    np.testing.assert_allclose(orders, 2.0, atol=0.05)
    # Richardson extrapolation removes the h^2 term
    l1, l2 = (neumann_spectrum(Grid1D(0.0, 2.0, n), 2)[1] for n in (201, 401))
    assert abs((4 * l2 - l1) / 3 - exact) < 1e-2 * errs[-1]


def test_shift_and_zero_coupling():
    g = Grid1D(0.0, 1.0, 2001)
    A = assemble_neumann(g)
    nu, _ = lowest_eigenvalue_perturbed(A, PotentialSamples(g, np.ones(g.n)), -0.1)
    assert abs(nu + 0.1) <= 1e-10
    _, V = linear()
    nu, psi = lowest_eigenvalue_perturbed(A, V, 0.0)
    assert abs(nu) <= 1e-12
    np.testing.assert_allclose(psi, psi[0], rtol=1e-8)


def test_small_coupling_slope():
    g, V = linear(2000)
    nu, _ = lowest_eigenvalue_perturbed(assemble_neumann(g), V, -1e-3)
    assert abs(nu / -1e-3 / 0.5 - 1) < 0.02


def test_asymptotic_slope():
    g = Grid1D(0.0, 1.0, 401)
    assert asymptotic_slope_interval(PotentialSamples(g, np.ones(g.n))) == pytest.approx(1.0, rel=1e-14)
    assert asymptotic_slope_interval(PotentialSamples.from_function(g, lambda x: x)) == pytest.approx(0.5, rel=1e-14)
    s = asymptotic_slope_interval(PotentialSamples.from_function(g, lambda x: np.cos(np.pi * x) ** 2))
    assert abs(s - 0.5) <= 10 * g.h**2


def test_green_symmetry_and_row_integral():
    g = Grid1D(0.0, 1.0, 401)
    X, Y = np.meshgrid(g.nodes, g.nodes, indexing="ij")
    for nu in (-0.01, -1.0, -100.0):
        G = neumann_green(nu, X, Y, 0.0, 1.0)
        assert np.array_equal(G, G.T)
        rows = G @ g.quad_weights
        np.testing.assert_allclose(rows, -1.0 / nu, rtol=5 * g.h**2 * max(1.0, -nu))


def test_green_closed_form_and_no_overflow():
    kappa = 2.0
    x, y = 0.3, 0.8
    ref = np.cosh(kappa * x) * np.cosh(kappa * (1 - y)) / (kappa * np.sinh(kappa))
    assert neumann_green(-kappa**2, x, y, 0.0, 1.0) == pytest.approx(ref, rel=1e-14)
    # kappa * L = 1e4: naive cosh/sinh would overflow
    big = neumann_green(-1e8, 0.5, 0.5, 0.0, 1.0)
    assert np.isfinite(big) and big == pytest.approx(1 / (2 * 1e4), rel=1e-12)
    assert neumann_green(-1e8, 0.0, 1.0, 0.0, 1.0) == 0.0
    with pytest.raises(DomainError):
        neumann_green(0.0, 0.1, 0.2, 0.0, 1.0)


def test_green_matches_discrete_resolvent():
    # oracle: dense inverse of the assembled difference operator
    nu = -1.0
    errs = []
    for n in (41, 81, 161):
        g = Grid1D(0.0, 1.0, n)
        A = assemble_neumann(g)
        R = np.linalg.inv(A.to_dense() - nu * np.diag(g.mass)) / g.h
        X, Y = np.meshgrid(g.nodes, g.nodes, indexing="ij")
        errs.append(np.abs(neumann_green(nu, X, Y, 0.0, 1.0) - R).max())
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.9)


def test_bs_operator_single_node_rank_one():
    g = Grid1D(0.0, 1.0, 51)
    v = np.zeros(g.n)
    v[17] = 2.5
    V = PotentialSamples(g, v)
    K = build_bs_operator(-0.3, V)
    assert np.linalg.matrix_rank(K.entries) == 1
    top = eig_dense(K, 1, "highest")[0].value
    expected = 2.5 * g.quad_weights[17] * neumann_green(-0.3, g.nodes[17], g.nodes[17], 0.0, 1.0)
    assert top == pytest.approx(expected, rel=1e-12)


def test_bs_operator_constant_potential_resolvent_oracle():
    g = Grid1D(0.0, 1.0, 2000)
    V = PotentialSamples(g, np.ones(g.n))
    # (A - nu)^-1 restricted to constants gives -1/nu = 1 at nu = -1
    assert abs(bs_top(-1.0, V).value - 1.0) < 1e-3


@given(st.integers(0, 2**32 - 1), st.floats(-50, -1e-4))
def test_bs_operator_nonnegative(seed, nu):
    r = np.random.default_rng(seed)
    g = Grid1D(0.0, 1.0, 60)
    v = r.uniform(0, 2, g.n) * (r.uniform(size=g.n) < 0.7)
    v[0] = 1.0
    K = build_bs_operator(nu, PotentialSamples(g, v))
    assert np.linalg.eigvalsh(K.entries).min() >= -1e-10
    x = r.normal(size=g.n)
    s = np.sqrt(g.quad_weights) * np.sqrt(v)
    np.testing.assert_allclose(s * green_matvec(nu, g)(s * x), K.matvec(x), rtol=1e-9, atol=1e-12)


def test_norm_curve_blow_up():
    _, V = linear()
    nus = -(10.0 ** -np.arange(1, 7))
    curve = bs_norm_curve(V, nus)
    assert curve.increasing
    assert curve.lambda_max[-1] > 1e4
    assert abs(1e-6 * curve.lambda_max[-1] / 0.5 - 1) < 0.01
    assert len(list(curve)) == 6


def test_norm_curve_blows_up_with_partial_support():
    g = Grid1D(0.0, 1.0, 1001)
    V = PotentialSamples.from_function(g, lambda x: (x > 0.6).astype(float))
    curve = bs_norm_curve(V, [-1e-2, -1e-4, -1e-6])
    assert curve.increasing
    mean = asymptotic_slope_interval(V)
    assert abs(1e-6 * curve.lambda_max[-1] / mean - 1) < 0.01
    with pytest.raises(DomainError):
        bs_norm_curve(V, [-1.0, 0.0])


def test_bs_solve_constant_shift():
    g = Grid1D(0.0, 1.0, 501)
    res = bs_solve(PotentialSamples(g, np.ones(g.n)), -0.1, tol=1e-10)
    # the Nystrom operator carries an O(h^2) quadrature error
    assert abs(res.nu_alpha + 0.1) <= 10 * g.h**2 * 0.1
    lo, hi = res.bracket
    assert lo < res.nu_alpha < hi < 0
    # rank-symmetric case: f is a multiple of k
    ratio = res.f_alpha / res.k_alpha
    np.testing.assert_allclose(ratio, ratio[0], rtol=1e-8)


@pytest.mark.parametrize("alpha", [-0.5, -0.1, -0.01])
def test_bs_matches_direct(alpha):
    g, V = linear()
    A = assemble_neumann(g)
    nu_d = lowest_eigenvalue_perturbed(A, V, alpha)[0]
    res = bs_solve(V, alpha, 1e-10, A)
    assert abs(res.nu_alpha - nu_d) <= max(1e-8, 1e-3 * abs(nu_d))
    assert res.monotone
    assert res.lambda_max == pytest.approx(-1 / alpha, rel=1e-8)
    assert abs(np.sqrt(g.integrate(res.k_alpha**2)) - 1) < 1e-12


def test_bs_solve_rejects_nonnegative_alpha():
    _, V = linear(101)
    with pytest.raises(DomainError):
        bs_solve(V, 0.0)


def test_reconstruction_residual_and_collapse():
    g, V = linear()
    tol = 1e-10
    res = bs_solve(V, -0.1, tol)
    assert res.residual <= 10 * g.h**2 + 10 * tol

    def overlap(alpha):
        f = bs_solve(V, alpha, tol).f_alpha
        return abs(g.integrate(f)) / np.sqrt(g.integrate(f * f))

    o1, o3 = overlap(-1e-1), overlap(-1e-3)
    assert o1 < o3 <= 1.0
    assert 1 - o3 < 1e-5
    with pytest.raises(ReconstructionError):
        reconstruct_eigenfunction(-0.1, np.zeros(g.n), V)


def piecewise_constant(seed, n):
    r = np.random.default_rng(seed)
    cells = int(r.integers(1, 9))
    vals = r.uniform(0, 3, cells) * (r.uniform(size=cells) < 0.5)
    vals[int(r.integers(cells))] = r.uniform(0.05, 3)
    x = np.linspace(0, 1, n)
    return vals[np.minimum((x * cells).astype(int), cells - 1)]


@given(st.integers(0, 2**32 - 1), st.sampled_from([-1e-1, -1e-2, -1e-3]))
def test_negative_coupling_always_binds(seed, alpha):
    g = Grid1D(0.0, 1.0, 301)
    V = PotentialSamples(g, piecewise_constant(seed, g.n))
    assert lowest_eigenvalue_perturbed(assemble_neumann(g), V, alpha)[0] < 0


@given(st.integers(0, 2**32 - 1), st.floats(0, 10))
def test_positive_coupling_nonnegative(seed, alpha):
    g = Grid1D(0.0, 1.0, 301)
    A = assemble_neumann(g)
    V = PotentialSamples(g, piecewise_constant(seed, g.n))
    norm = 2 * (A.diag / g.mass).max()
    assert lowest_eigenvalue_perturbed(A, V, alpha)[0] >= -1e-10 * norm


def test_slope_fit_within_one_percent():
    g = Grid1D(0.0, 1.0, 2001)
    A = assemble_neumann(g)
    V = PotentialSamples.from_function(g, lambda x: np.exp(x))
    alphas = -0.1 * 2.0 ** -np.arange(5)
    s = fit_slope(alphas, [lowest_eigenvalue_perturbed(A, V, a)[0] for a in alphas])
    assert abs(s / asymptotic_slope_interval(V) - 1) < 0.01
