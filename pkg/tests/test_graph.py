import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from weakbound.errors import ConfigError, InvalidGraphError, InvalidPotentialError
from weakbound.graph import (
    Edge,
    GraphFile,
    GraphPotential,
    MetricGraph,
    assemble_kirchhoff,
    asymptotic_slope_graph,
    connected_components,
    graph_spectrum,
    kernel_multiplicity,
    lowest_eigenpairs_graph,
    lowest_eigenvalue_perturbed_graph,
    parse_graph,
    random_graph,
    read_graph,
    serialize_graph,
    star_graph,
    vertex_flux,
)
from weakbound.interval import Grid1D, neumann_spectrum

CONFIGS = os.path.join(os.path.dirname(__file__), "..", "configs")


def star_secular_roots(lengths, count, kmax=20.0):
    """Roots of sum_e sin(k l_e) prod_{f != e} cos(k l_f) by scan and bisection."""
    lengths = np.asarray(lengths)

    def D(k):
        c, s = np.cos(k * lengths), np.sin(k * lengths)
        return sum(s[e] * np.prod(np.delete(c, e)) for e in range(lengths.size))

    roots = []
    grid_k = np.linspace(1e-6, kmax, 2001)
    vals = np.array([D(k) for k in grid_k])
    for a, b, fa, fb in zip(grid_k[:-1], grid_k[1:], vals[:-1], vals[1:]):
        if fa * fb < 0:
            roots.append(brentq(D, a, b, xtol=1e-14))
        if len(roots) == count:
            break
    return np.array(roots)


def test_path_graph_matches_interval():
    path = MetricGraph(3, [Edge(0, 1, 1.0), Edge(1, 2, 1.0)])
    ev = graph_spectrum(path, 6)
    iv = neumann_spectrum(Grid1D(0.0, 2.0, path.dof_count), 6)
    assert abs(ev[0]) <= 1e-10
    np.testing.assert_allclose(ev[1:], iv[1:], rtol=1e-8)


def test_loop_spectrum_is_doubled():
    loop = MetricGraph(1, [Edge(0, 0, 1.0)], h=1 / 256)
    ev = graph_spectrum(loop, 5)
    np.testing.assert_allclose(ev[1:], (2 * np.pi) ** 2 * np.array([1, 1, 4, 4]), rtol=1e-3)


def test_equilateral_star_degeneracy():
    ev = graph_spectrum(star_graph([1.0, 1.0, 1.0]), 5)
    np.testing.assert_allclose(ev[1:3], (np.pi / 2) ** 2, rtol=1e-3)
    assert ev[3] == pytest.approx(np.pi**2, rel=1e-3)
    assert abs(ev[1] - ev[2]) <= 1e-9


def test_star_against_secular_equation():
    lengths = [1.0, 1.5, 0.75]
    k = star_secular_roots(lengths, 3)
    assert k[0] == pytest.approx(1.21235129150801, rel=1e-12)
    ev = graph_spectrum(star_graph(lengths, h=1 / 256), 4)
    np.testing.assert_allclose(ev[1:], k**2, rtol=1e-4)


def test_kernel_multiplicity_cases():
    cases = [
        (MetricGraph(4, [Edge(0, 1, 1.0), Edge(2, 3, 2.0)]), 2),
        (MetricGraph(3, [Edge(0, 0, 1.0), Edge(1, 1, 0.5), Edge(2, 2, 2.0)]), 3),
        (MetricGraph(2, [Edge(0, 1, 1.0), Edge(0, 1, 0.3), Edge(1, 1, 0.7)]), 1),
        (star_graph([1.0, 2.0, 3.0, 4.0]), 1),
    ]
    for g, expected in cases:
        assert connected_components(g) == expected
        assert kernel_multiplicity(assemble_kirchhoff(g)) == expected


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1))
def test_kernel_dimension_counts_components(seed):
    g = random_graph(np.random.default_rng(seed), max_edges=12)
    assert kernel_multiplicity(assemble_kirchhoff(g)) == connected_components(g)


def test_kirchhoff_flux_balance():
    g = star_graph([1.0, 1.5, 0.75], h=1 / 128)
    op = assemble_kirchhoff(g)
    eig = lowest_eigenpairs_graph(op, None, 0.0, 3)
    for u in eig.vectors[1:]:
        flux = vertex_flux(op, u)
        # the one-sided difference quotient is O(h) accurate; the lumped mass absorbs it
        assert np.abs(flux).max() <= 2 * g.h * np.abs(u).max() * eig.values.max()


def test_constant_potential_shift():
    g = star_graph([1.0, 2.0])
    op = assemble_kirchhoff(g)
    V = GraphPotential.from_functions(g, {0: np.ones_like, 1: np.ones_like})
    assert lowest_eigenvalue_perturbed_graph(op, V, -0.2) == pytest.approx(-0.2, abs=1e-10)
    assert asymptotic_slope_graph(V) == pytest.approx(1.0, rel=1e-14)


@pytest.mark.parametrize("alpha", [-1e-2, -1e-3])
def test_potential_on_one_edge(alpha):
    g = star_graph([1.0, 1.0, 1.0])
    V = GraphPotential.from_functions(g, {0: np.ones_like})
    slope = asymptotic_slope_graph(V)
    assert slope == pytest.approx(1 / 3, rel=1e-14)
    nu = lowest_eigenvalue_perturbed_graph(assemble_kirchhoff(g), V, alpha)
    assert nu < 0
    assert abs(nu / alpha / slope - 1) < 0.02


def test_two_components_keep_a_zero_mode():
    g = MetricGraph(4, [Edge(0, 1, 1.0), Edge(2, 3, 1.0)])
    V = GraphPotential.from_functions(g, {0: np.ones_like})
    ev = lowest_eigenpairs_graph(assemble_kirchhoff(g), V, -5e-3, 3).values
    assert ev[0] == pytest.approx(-5e-3, abs=1e-10)
    assert abs(ev[1]) <= 1e-9
    assert asymptotic_slope_graph(V) == pytest.approx(1.0)


def test_potential_validation():
    g = star_graph([1.0, 1.0])
    with pytest.raises(InvalidPotentialError, match="vanishes"):
        GraphPotential.from_functions(g, {})
    with pytest.raises(InvalidPotentialError, match="edge 1"):
        GraphPotential.from_functions(g, {0: np.ones_like, 1: lambda x: x - 0.5})
    with pytest.raises(InvalidPotentialError, match="graph has 2"):
        GraphPotential(g, [np.ones(3)])


def test_invalid_graphs():
    with pytest.raises(InvalidGraphError, match="vertex 2 has no incident edge"):
        MetricGraph(3, [Edge(0, 1, 1.0)])
    with pytest.raises(InvalidGraphError, match="references vertex 5"):
        MetricGraph(2, [Edge(0, 5, 1.0)])
    with pytest.raises(InvalidGraphError, match="length"):
        MetricGraph(2, [Edge(0, 1, -1.0)])
    with pytest.raises(InvalidGraphError, match="3 nodes"):
        MetricGraph(2, [Edge(0, 1, 1.0, 2)])
    with pytest.raises(InvalidGraphError):
        MetricGraph(1, [])


def test_graph_file_round_trip():
    gf = read_graph(os.path.join(CONFIGS, "star.txt"))
    text = serialize_graph(gf)
    again = parse_graph(text, gf.base_dir)
    assert serialize_graph(again) == text
    assert [e for e in again.graph.edges] == [e for e in gf.graph.edges]


@given(
    st.lists(
        st.tuples(st.integers(0, 3), st.integers(0, 3), st.floats(0.1, 5), st.one_of(st.none(), st.integers(3, 20))),
        min_size=1,
        max_size=6,
    )
)
def test_serialize_parse_identity(spec):
    used = sorted({v for t, h, *_ in spec for v in (t, h)})
    lab = {v: i for i, v in enumerate(used)}
    edges = [Edge(lab[t], lab[h], l, n) for t, h, l, n in spec]
    gf = GraphFile(MetricGraph(len(used), edges), {0: "1 + x^2"})
    back = parse_graph(serialize_graph(gf))
    assert back.graph.edges == gf.graph.edges
    assert back.potentials == gf.potentials
    np.testing.assert_array_equal(back.graph.node_counts, gf.graph.node_counts)


def test_graph_file_csv_potential(tmp_path):
    (tmp_path / "v.csv").write_text("0,0\n1,2\n")
    (tmp_path / "g.txt").write_text("vertices 2\nedge 0 1 1.0 5\npotential 0 v.csv\n")
    V = read_graph(str(tmp_path / "g.txt")).potential()
    np.testing.assert_allclose(V.values[0], [0, 0.5, 1, 1.5, 2])


@pytest.mark.parametrize(
    "text, message",
    [
        ("edge 0 1 1.0\n", "missing 'vertices'"),
        ("vertices 2\nedge 0 1\n", "<graph>:2"),
        ("vertices 2\nedge 0 1 1.0\nfoo 1\n", "unknown directive 'foo'"),
        ("vertices 2\nedge 0 1 1.0\npotential 3 x\n", "<graph>:3: potential for edge 3"),
        ("vertices 2\nedge 0 1 1.0\npotential 0 x +\n", "<graph>:3"),
        ("vertices 3\nedge 0 1 1.0\n", "vertex 2 has no incident edge"),
        ("vertices 2\nvertices 2\n", "duplicate"),
    ],
)
def test_graph_file_errors(text, message):
    with pytest.raises(ConfigError, match=message):
        parse_graph(text)
