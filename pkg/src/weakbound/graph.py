"""Compact metric graphs with Kirchhoff vertex conditions.

Each edge carries a uniform grid from its tail (local coordinate 0) to its
head (local coordinate ``length``).  Edge-end nodes are merged into a single
degree of freedom per vertex, which enforces continuity; summing the
ghost-point boundary rows of the incident edges into that DoF gives the
flux-balance condition.  In matrix terms the stiffness is
``sum over segments (u_p - u_q)^2 / h_e`` and the lumped mass puts ``h_e/2``
on each segment end, so ``K u = nu M u`` is symmetric, nonnegative and
annihilates every per-component constant exactly.

DoF layout: vertices first (``0 .. vertex_count-1``), then the interior
nodes of each edge in edge order.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, InvalidGraphError, InvalidPotentialError
from .expr import parse_expression
from .interval import Grid1D
from .linalg import DenseSym, SymTridiag, count_below, eig_dense, tridiagonalize

NODES_PER_MIN_EDGE = 64


@dataclass(frozen=True)
class Edge:
    tail: int
    head: int
    length: float
    nodes: int | None = None  # None: derived from the graph spacing


@dataclass(eq=False)
class MetricGraph:
    """Vertices ``0 .. vertex_count-1`` joined by edges of positive length.

    ``h`` is the target spacing used for edges without an explicit node
    count (default: shortest edge / 64).  Self-loops and parallel edges are
    allowed; vertices without incident edges are rejected because they carry
    no mass.
    """

    vertex_count: int
    edges: list[Edge]
    h: float | None = None
    node_counts: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.edges = [e if isinstance(e, Edge) else Edge(*e) for e in self.edges]
        v = int(self.vertex_count)
        if v < 1:
            raise InvalidGraphError("graph needs at least one vertex")
        if not self.edges:
            raise InvalidGraphError("graph needs at least one edge")
        seen = np.zeros(v, dtype=bool)
        for j, e in enumerate(self.edges):
            for end in (e.tail, e.head):
                if not (0 <= end < v):
                    raise InvalidGraphError(f"edge {j} references vertex {end}, graph has {v}")
                seen[end] = True
            if not (np.isfinite(e.length) and e.length > 0):
                raise InvalidGraphError(f"edge {j} has invalid length {e.length!r}")
            if e.nodes is not None and e.nodes < 3:
                raise InvalidGraphError(f"edge {j} needs at least 3 nodes, got {e.nodes}")
        if not seen.all():
            raise InvalidGraphError(f"vertex {int(np.flatnonzero(~seen)[0])} has no incident edge")
        if self.h is None:
            self.h = min(e.length for e in self.edges) / NODES_PER_MIN_EDGE
        elif not self.h > 0:
            raise InvalidGraphError(f"spacing must be positive, got {self.h!r}")
        self.node_counts = np.array(
            [e.nodes if e.nodes is not None else max(3, int(round(e.length / self.h)) + 1) for e in self.edges]
        )

    @property
    def total_length(self) -> float:
        return float(sum(e.length for e in self.edges))

    def edge_grid(self, j: int) -> Grid1D:
        return Grid1D(0.0, self.edges[j].length, int(self.node_counts[j]))

    @property
    def dof_count(self) -> int:
        return int(self.vertex_count + np.sum(self.node_counts - 2))

    def edge_dofs(self, j: int) -> np.ndarray:
        """Global DoF index of every node on edge ``j`` (tail to head)."""
        start = self.vertex_count + int(np.sum(self.node_counts[:j] - 2))
        n = int(self.node_counts[j])
        idx = np.empty(n, dtype=np.int64)
        idx[0] = self.edges[j].tail
        idx[-1] = self.edges[j].head
        idx[1:-1] = np.arange(start, start + n - 2)
        return idx


def connected_components(g: MetricGraph) -> int:
    """Number of connected components (union-find over edges)."""
    parent = list(range(g.vertex_count))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for e in g.edges:
        a, b = find(e.tail), find(e.head)
        if a != b:
            parent[a] = b
    return len({find(i) for i in range(g.vertex_count)})


def component_labels(g: MetricGraph) -> np.ndarray:
    """Component label of every edge, numbered in order of first appearance."""
    labels = -np.ones(g.vertex_count, dtype=np.int64)
    adj: list[list[int]] = [[] for _ in range(g.vertex_count)]
    for e in g.edges:
        adj[e.tail].append(e.head)
        adj[e.head].append(e.tail)
    count = 0
    for s in range(g.vertex_count):
        if labels[s] >= 0:
            continue
        labels[s] = count
        stack = [s]
        while stack:
            u = stack.pop()
            for w in adj[u]:
                if labels[w] < 0:
                    labels[w] = count
                    stack.append(w)
        count += 1
    return np.array([labels[e.tail] for e in g.edges])


@dataclass(eq=False)
class GraphOperator:
    """Kirchhoff Laplacian as stiffness ``K`` and lumped mass ``weights``."""

    graph: MetricGraph
    stiffness: sp.csr_matrix
    weights: np.ndarray
    seg_p: np.ndarray = field(repr=False)
    seg_q: np.ndarray = field(repr=False)
    seg_h: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.weights.size

    def energy(self, u: np.ndarray) -> float:
        """``u^T K u`` as a sum of squared differences."""
        return float(np.sum((u[self.seg_p] - u[self.seg_q]) ** 2 / self.seg_h))

    def normalized_dense(self, potential: np.ndarray | None = None) -> np.ndarray:
        """``M^-1/2 (K + diag(p)) M^-1/2`` as a dense array."""
        s = 1.0 / np.sqrt(self.weights)
        dense = self.stiffness.toarray()
        if potential is not None:
            dense[np.diag_indices_from(dense)] += potential
        return s[:, None] * dense * s[None, :]

    def norm(self) -> float:
        """Max-row-sum norm of the mass-normalised operator."""
        return float(2.0 * (self.stiffness.diagonal() / self.weights).max())


def assemble_kirchhoff(g: MetricGraph) -> GraphOperator:
    ps, qs, hs = [], [], []
    weights = np.zeros(g.dof_count)
    for j in range(len(g.edges)):
        idx = g.edge_dofs(j)
        h = g.edges[j].length / (idx.size - 1)
        ps.append(idx[:-1])
        qs.append(idx[1:])
        hs.append(np.full(idx.size - 1, h))
        np.add.at(weights, idx[:-1], 0.5 * h)
        np.add.at(weights, idx[1:], 0.5 * h)
    p, q, hseg = np.concatenate(ps), np.concatenate(qs), np.concatenate(hs)
    c = 1.0 / hseg
    n = g.dof_count
    rows = np.concatenate([p, q, p, q])
    cols = np.concatenate([p, q, q, p])
    vals = np.concatenate([c, c, -c, -c])
    K = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    K.sum_duplicates()
    return GraphOperator(g, K, weights, p, q, hseg)


def kernel_multiplicity(op: GraphOperator, tol: float | None = None) -> int:
    """Number of eigenvalues below ``tol`` (default ``1e-8 ||op||``)."""
    if tol is None:
        tol = 1e-8 * op.norm()
    if not tol > 0:
        raise ValueError("tol must be positive")
    d, e, _ = tridiagonalize(op.normalized_dense())
    return count_below(SymTridiag(d, e), tol)


@dataclass(eq=False)
class GraphPotential:
    """Per-edge nonnegative samples; ``values[j]`` lives on ``graph.edge_grid(j)``."""

    graph: MetricGraph
    values: list[np.ndarray]

    def __post_init__(self):
        g = self.graph
        if len(self.values) != len(g.edges):
            raise InvalidPotentialError(
                f"potential given on {len(self.values)} edges, graph has {len(g.edges)}"
            )
        vals = []
        for j, v in enumerate(self.values):
            v = np.array(v, dtype=float)
            if v.shape != (int(g.node_counts[j]),):
                raise InvalidPotentialError(
                    f"edge {j}: {v.shape} samples, expected {int(g.node_counts[j])}"
                )
            bad = ~(np.isfinite(v) & (v >= 0))
            if bad.any():
                i = int(np.flatnonzero(bad)[0])
                x = g.edge_grid(j).nodes[i]
                raise InvalidPotentialError(
                    f"edge {j}: potential value {v[i]!r} at node {i} (x={x:.6g}) is not finite and nonnegative"
                )
            vals.append(v)
        if not any((v > 0).any() for v in vals):
            raise InvalidPotentialError("potential vanishes identically")
        self.values = vals

    @classmethod
    def from_functions(cls, graph: MetricGraph, funcs: dict):
        """Build from ``{edge_index: f(local_x)}``; missing edges get zero."""
        vals = []
        for j in range(len(graph.edges)):
            x = graph.edge_grid(j).nodes
            f = funcs.get(j)
            vals.append(np.zeros_like(x) if f is None else np.broadcast_to(f(x), x.shape).astype(float))
        return cls(graph, vals)

    def lumped(self) -> np.ndarray:
        """``diag(M V)`` on the global DoFs (trapezoid rule per edge)."""
        g = self.graph
        out = np.zeros(g.dof_count)
        for j, v in enumerate(self.values):
            np.add.at(out, g.edge_dofs(j), g.edge_grid(j).quad_weights * v)
        return out

    def integrals(self) -> np.ndarray:
        return np.array([self.graph.edge_grid(j).integrate(v) for j, v in enumerate(self.values)])


def asymptotic_slope_graph(V: GraphPotential) -> float:
    """First-order coefficient of the lowest eigenvalue.

    On a connected graph this is the mean of ``V`` over the total length.
    With several components each one contributes its own branch
    ``alpha * mean_C(V)``; the lowest eigenvalue follows the largest mean.
    """
    g = V.graph
    labels = component_labels(g)
    ints = V.integrals()
    lengths = np.array([e.length for e in g.edges])
    means = [ints[labels == c].sum() / lengths[labels == c].sum() for c in np.unique(labels)]
    return float(max(means))


@dataclass(eq=False)
class GraphEigen:
    values: np.ndarray
    vectors: np.ndarray  # (k, dofs), nodal, sum(weights u^2) = 1


def lowest_eigenpairs_graph(
    op: GraphOperator, V: GraphPotential | None = None, alpha: float = 0.0, k: int = 1
) -> GraphEigen:
    """Lowest ``k`` eigenpairs of ``K + alpha M V = nu M``.

    Eigenvalues are refined by the Rayleigh quotient in difference form.
    """
    pot = np.zeros(op.n) if V is None else alpha * V.lumped()
    pairs = eig_dense(DenseSym(op.normalized_dense(pot)), k)
    s = 1.0 / np.sqrt(op.weights)
    vals, vecs = [], []
    for pair in pairs:
        u = s * pair.vector
        u /= np.sqrt(np.dot(op.weights, u * u))
        vals.append(op.energy(u) + float(np.dot(pot, u * u)))
        vecs.append(u)
    return GraphEigen(np.array(vals), np.array(vecs))


def lowest_eigenvalue_perturbed_graph(op: GraphOperator, V: GraphPotential, alpha: float) -> float:
    return float(lowest_eigenpairs_graph(op, V, alpha, 1).values[0])


def graph_spectrum(g: MetricGraph, k: int = 10) -> np.ndarray:
    op = assemble_kirchhoff(g)
    return lowest_eigenpairs_graph(op, None, 0.0, min(k, op.n)).values


def vertex_flux(op: GraphOperator, u: np.ndarray) -> np.ndarray:
    """Sum of outgoing one-sided derivatives at every vertex."""
    g = op.graph
    flux = np.zeros(g.vertex_count)
    for j, e in enumerate(g.edges):
        idx = g.edge_dofs(j)
        h = e.length / (idx.size - 1)
        flux[e.tail] += (u[idx[1]] - u[idx[0]]) / h
        flux[e.head] += (u[idx[-2]] - u[idx[-1]]) / h
    return flux


# -- graph file format -------------------------------------------------------


@dataclass(eq=False)
class GraphFile:
    graph: MetricGraph
    potentials: dict[int, str]  # edge index -> expression or csv path (as written)
    base_dir: str = "."

    def potential(self) -> GraphPotential | None:
        if not self.potentials:
            return None
        vals = []
        for j in range(len(self.graph.edges)):
            x = self.graph.edge_grid(j).nodes
            spec = self.potentials.get(j)
            if spec is None:
                vals.append(np.zeros_like(x))
            elif spec.lower().endswith(".csv"):
                vals.append(_read_edge_csv(os.path.join(self.base_dir, spec), x))
            else:
                vals.append(parse_expression(spec, ("x",))(x=x))
        return GraphPotential(self.graph, vals)


def _read_edge_csv(path: str, x: np.ndarray) -> np.ndarray:
    try:
        data = np.loadtxt(path, delimiter=",", ndmin=2, comments="#")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from None
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if data.shape[1] >= 2:
        xs, vs = data[:, 0], data[:, 1]
        if np.any(np.diff(xs) <= 0):
            raise ConfigError(f"{path}: x column must be strictly increasing")
        return np.interp(x, xs, vs)
    if data.shape[0] != x.size:
        raise ConfigError(f"{path}: {data.shape[0]} samples, edge has {x.size} nodes")
    return data[:, 0].copy()


def parse_graph(text: str, base_dir: str = ".", source: str = "<graph>") -> GraphFile:
    """Parse the line-oriented graph format.

    ::

        vertices <v>
        edge <tail> <head> <length> [nodes]
        potential <edge-index> <expression | file.csv>

    Indices are 0-based; ``#`` starts a comment.
    """
    vertex_count = None
    edges: list[Edge] = []
    pots: dict[int, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}:{lineno}"
        parts = line.split(None, 2)
        key = parts[0]
        try:
            if key == "vertices":
                if vertex_count is not None:
                    raise ConfigError("duplicate 'vertices' line")
                if len(parts) != 2:
                    raise ConfigError("expected 'vertices <count>'")
                vertex_count = int(parts[1])
            elif key == "edge":
                f = line.split()
                if len(f) not in (4, 5):
                    raise ConfigError("expected 'edge <tail> <head> <length> [nodes]'")
                edges.append(Edge(int(f[1]), int(f[2]), float(f[3]), int(f[4]) if len(f) == 5 else None))
            elif key == "potential":
                if len(parts) != 3:
                    raise ConfigError("expected 'potential <edge-index> <expression|file.csv>'")
                j = int(parts[1])
                if j in pots:
                    raise ConfigError(f"duplicate potential for edge {j}")
                spec = parts[2].strip()
                if not spec.lower().endswith(".csv"):
                    parse_expression(spec, ("x",))
                pots[j] = (spec, lineno)
            else:
                raise ConfigError(f"unknown directive {key!r}")
        except ConfigError as exc:
            raise ConfigError(f"{where}: {exc}") from None
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from None
    if vertex_count is None:
        raise ConfigError(f"{source}: missing 'vertices' line")
    try:
        graph = MetricGraph(vertex_count, edges)
    except InvalidGraphError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    for j, (_, lineno) in pots.items():
        if not (0 <= j < len(edges)):
            raise ConfigError(f"{source}:{lineno}: potential for edge {j}, graph has {len(edges)} edges")
    return GraphFile(graph, {j: s for j, (s, _) in sorted(pots.items())}, base_dir)


def read_graph(path: str) -> GraphFile:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from None
    return parse_graph(text, os.path.dirname(os.path.abspath(path)), path)


def serialize_graph(gf: GraphFile) -> str:
    g = gf.graph
    lines = [f"vertices {g.vertex_count}"]
    for e in g.edges:
        tail = f"edge {e.tail} {e.head} {e.length!r}"
        lines.append(tail if e.nodes is None else f"{tail} {e.nodes}")
    lines += [f"potential {j} {spec}" for j, spec in sorted(gf.potentials.items())]
    return "\n".join(lines) + "\n"


# -- seeded random graphs ------------------------------------------------------


def random_graph(rng: np.random.Generator, max_edges: int = 12, nodes: int | None = 9) -> MetricGraph:
    """Random multigraph with loops, possibly disconnected, no isolated vertices."""
    m = int(rng.integers(1, max_edges + 1))
    vcount = int(rng.integers(1, m + 2))
    edges = []
    for _ in range(m):
        a, b = (int(t) for t in rng.integers(0, vcount, size=2))
        edges.append(Edge(a, b, float(rng.uniform(0.5, 2.0)), nodes))
    used = sorted({v for e in edges for v in (e.tail, e.head)})
    relabel = {v: i for i, v in enumerate(used)}
    edges = [Edge(relabel[e.tail], relabel[e.head], e.length, e.nodes) for e in edges]
    return MetricGraph(len(used), edges)


def star_graph(lengths: Sequence[float], h: float | None = None) -> MetricGraph:
    """Star with centre vertex 0 and one pendant vertex per edge."""
    return MetricGraph(len(lengths) + 1, [Edge(0, i + 1, float(l)) for i, l in enumerate(lengths)], h)
