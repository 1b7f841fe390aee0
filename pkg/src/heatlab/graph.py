"""Weighted graphs, canonical families, balls and bounded-geometry certificates.

Vertices are dense integers ``0..n-1``. Infinite families (lattices, regular
trees) are realized as the ball ``B_N`` around a distinguished center and carry
``truncation_radius = N``; vertices at distance ``< N`` from the center are the
interior on which the Laplacian is exact.
"""
from __future__ import annotations

import io
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional, TextIO

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from .errors import (
    Disconnected,
    DuplicateEdge,
    DuplicateVertex,
    InvalidParam,
    NonpositiveWeight,
    ParseError,
    UnknownVertex,
)

FAMILIES = ("path", "cycle", "lattice_Z", "lattice_Z2", "tree_regular")
INFINITE_FAMILIES = ("lattice_Z", "lattice_Z2", "tree_regular")


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """A finite, simple, connected, undirected weighted graph ``(V, E, w, m)``.

    Edges are stored once as ``(u, v)`` with ``u < v``; symmetry of the weight
    follows from the undirected storage. Instances are immutable.
    """

    measure: np.ndarray
    edge_u: np.ndarray
    edge_v: np.ndarray
    edge_w: np.ndarray
    family_tag: Optional[str] = None
    truncation_radius: Optional[int] = None
    center: Optional[int] = None
    adjacency: sp.csr_matrix = field(init=False, repr=False)

    def __post_init__(self):
        m = _frozen(self.measure, float)
        u = np.asarray(self.edge_u, dtype=np.int64)
        v = np.asarray(self.edge_v, dtype=np.int64)
        w = np.asarray(self.edge_w, dtype=float)
        n = m.shape[0]
        if n == 0:
            raise InvalidParam("graph must have at least one vertex")
        if not (u.shape == v.shape == w.shape):
            raise InvalidParam("edge arrays must have equal length")
        if np.any(m <= 0) or not np.all(np.isfinite(m)):
            raise NonpositiveWeight("vertex measures must be positive and finite")
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise NonpositiveWeight("edge weights must be positive and finite")
        if u.size and (min(u.min(), v.min()) < 0 or max(u.max(), v.max()) >= n):
            raise UnknownVertex("edge endpoint outside 0..n-1")
        if np.any(u == v):
            raise InvalidParam("self-loops are not allowed")
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        order = np.lexsort((hi, lo))
        lo, hi, w = lo[order], hi[order], w[order]
        if lo.size > 1:
            dup = (lo[1:] == lo[:-1]) & (hi[1:] == hi[:-1])
            if np.any(dup):
                k = int(np.argmax(dup))
                raise DuplicateEdge(f"edge {{{lo[k]}, {hi[k]}}} listed twice")
        adj = sp.coo_matrix(
            (np.concatenate([w, w]), (np.concatenate([lo, hi]), np.concatenate([hi, lo]))),
            shape=(n, n),
        ).tocsr()
        adj.sort_indices()
        object.__setattr__(self, "measure", m)
        object.__setattr__(self, "edge_u", _frozen(lo, np.int64))
        object.__setattr__(self, "edge_v", _frozen(hi, np.int64))
        object.__setattr__(self, "edge_w", _frozen(w, float))
        object.__setattr__(self, "adjacency", adj)
        ncomp, _ = csgraph.connected_components(adj, directed=False)
        if ncomp != 1:
            raise Disconnected(f"graph has {ncomp} connected components")

    @property
    def vertex_count(self) -> int:
        return int(self.measure.shape[0])

    @property
    def edge_count(self) -> int:
        return int(self.edge_w.shape[0])

    @property
    def degree(self) -> np.ndarray:
        return np.diff(self.adjacency.indptr)

    @property
    def weighted_degree(self) -> np.ndarray:
        """Row sums ``sum_{y~x} w_xy``."""
        return np.asarray(self.adjacency.sum(axis=1)).ravel()

    def neighbors(self, x: int) -> np.ndarray:
        a = self.adjacency
        return a.indices[a.indptr[x]:a.indptr[x + 1]]

    def edges(self):
        """Iterate over ``(u, v, w)`` with ``u < v``."""
        return zip(self.edge_u.tolist(), self.edge_v.tolist(), self.edge_w.tolist())

    def stiffness(self) -> sp.csr_matrix:
        """Symmetric matrix ``L = D - W`` so that ``Delta = -M^{-1} L``."""
        return (sp.diags(self.weighted_degree) - self.adjacency).tocsr()


def from_edges(n, edges, measure=None, **kwargs) -> WeightedGraph:
    edges = list(edges)
    if edges:
        u, v, w = (np.array(c) for c in zip(*edges))
    else:
        u = v = np.zeros(0, dtype=np.int64)
        w = np.zeros(0)
    if measure is None:
        measure = np.ones(n)
    return WeightedGraph(measure, u, v, w, **kwargs)


# ---------------------------------------------------------------------------
# generators


def generate_family(family: str, size_param: int, degree_param: Optional[int] = None) -> WeightedGraph:
    """Build a unit-weight, unit-measure member of a canonical family.

    ``path`` and ``cycle`` have ``size_param`` vertices. The infinite families
    return the ball ``B_N`` with ``N = size_param`` around their center:

    * ``lattice_Z``: vertices ``-N..N`` labeled ``position + N``;
    * ``lattice_Z2``: the L1 ball, labeled in lexicographic order of ``(i, j)``;
    * ``tree_regular``: the ``degree_param``-regular tree, labeled in BFS order
      from the root ``0``.
    """
    if family not in FAMILIES:
        raise InvalidParam(f"unknown family {family!r}; expected one of {FAMILIES}")
    if not isinstance(size_param, (int, np.integer)) or size_param < 1:
        raise InvalidParam("size_param must be a positive integer")
    n = int(size_param)

    if family == "path":
        return from_edges(n, [(i, i + 1, 1.0) for i in range(n - 1)], family_tag="path")

    if family == "cycle":
        if n < 3:
            raise InvalidParam("a simple cycle needs at least 3 vertices")
        return from_edges(n, [(i, (i + 1) % n, 1.0) for i in range(n)], family_tag="cycle")

    if family == "lattice_Z":
        return from_edges(
            2 * n + 1,
            [(i, i + 1, 1.0) for i in range(2 * n)],
            family_tag="lattice_Z",
            truncation_radius=n,
            center=n,
        )

    if family == "lattice_Z2":
        points = [(i, j) for i in range(-n, n + 1) for j in range(-n, n + 1) if abs(i) + abs(j) <= n]
        index = {p: k for k, p in enumerate(points)}
        edges = []
        for (i, j), k in index.items():
            for q in ((i + 1, j), (i, j + 1)):
                if q in index:
                    edges.append((k, index[q], 1.0))
        return from_edges(
            len(points), edges, family_tag="lattice_Z2", truncation_radius=n, center=index[(0, 0)]
        )

    # tree_regular
    if degree_param is None or degree_param < 3:
        raise InvalidParam("tree_regular requires degree_param >= 3")
    d = int(degree_param)
    edges = []
    frontier = [0]
    count = 1
    for level in range(n):
        children = d if level == 0 else d - 1
        nxt = []
        for parent in frontier:
            for _ in range(children):
                edges.append((parent, count, 1.0))
                nxt.append(count)
                count += 1
        frontier = nxt
    return from_edges(count, edges, family_tag=f"tree-{d}", truncation_radius=n, center=0)


# ---------------------------------------------------------------------------
# text format


def load_graph(stream: TextIO | str) -> WeightedGraph:
    """Parse the line-oriented ``graph v1`` format.

    Ids must be dense ``0..n-1``. A ``v <id>`` line without a measure means
    ``m = 1``. Raises ParseError, DuplicateVertex, DuplicateEdge, Disconnected
    or NonpositiveWeight.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    header_seen = False
    measures: dict[int, float] = {}
    edges: dict[tuple[int, int], float] = {}
    for lineno, raw in enumerate(stream, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if not header_seen:
            if line.split() != ["graph", "v1"]:
                raise ParseError("first line must be 'graph v1'", lineno)
            header_seen = True
            continue
        parts = line.split()
        kind = parts[0]
        try:
            if kind == "v" and len(parts) in (2, 3):
                vid = _parse_id(parts[1])
                m = float(parts[2]) if len(parts) == 3 else 1.0
                if vid in measures:
                    raise DuplicateVertex(f"vertex {vid} declared twice", lineno)
                if not m > 0 or not np.isfinite(m):
                    raise NonpositiveWeight(f"line {lineno}: measure must be positive, got {parts[2]}")
                measures[vid] = m
            elif kind == "e" and len(parts) == 4:
                a, b = _parse_id(parts[1]), _parse_id(parts[2])
                w = float(parts[3])
                if a == b:
                    raise ParseError(f"self-loop at vertex {a}", lineno)
                key = (min(a, b), max(a, b))
                if key in edges:
                    raise DuplicateEdge(f"edge {{{a}, {b}}} listed twice", lineno)
                if not w > 0 or not np.isfinite(w):
                    raise NonpositiveWeight(f"line {lineno}: weight must be positive, got {parts[3]}")
                edges[key] = w
            else:
                raise ParseError(f"malformed line {raw.rstrip()!r}", lineno)
        except ValueError as exc:
            if isinstance(exc, (ParseError, NonpositiveWeight)):
                raise
            raise ParseError(f"malformed number in {raw.rstrip()!r}", lineno) from exc
    if not header_seen:
        raise ParseError("empty graph file")
    n = len(measures)
    if sorted(measures) != list(range(n)):
        raise ParseError("vertex ids must be exactly 0..n-1")
    for a, b in edges:
        if b >= n:
            raise ParseError(f"edge references undeclared vertex {b}")
    return from_edges(
        n,
        [(a, b, w) for (a, b), w in edges.items()],
        measure=np.array([measures[i] for i in range(n)]),
        family_tag="custom",
    )


def _parse_id(token: str) -> int:
    vid = int(token)
    if vid < 0:
        raise ValueError(token)
    return vid


def save_graph(g: WeightedGraph, stream: TextIO) -> None:
    stream.write("graph v1\n")
    if g.family_tag:
        stream.write(f"# family {g.family_tag}")
        if g.truncation_radius is not None:
            stream.write(f" radius {g.truncation_radius} center {g.center}")
        stream.write("\n")
    for i, m in enumerate(g.measure.tolist()):
        stream.write(f"v {i} {m:.17g}\n")
    for a, b, w in g.edges():
        stream.write(f"e {a} {b} {w:.17g}\n")


def dumps_graph(g: WeightedGraph) -> str:
    buf = io.StringIO()
    save_graph(g, buf)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# bounded geometry


@dataclass(frozen=True)
class GeometryCertificate:
    """Tight bounded-geometry constant with the vertices/edges attaining it."""

    c0: float
    witness_edge_min: Optional[tuple[int, int]]
    witness_edge_max: Optional[tuple[int, int]]
    witness_measure_min: int
    witness_measure_max: int
    witness_degree_max: int

    def relaxed(self, c0: float) -> "GeometryCertificate":
        """Same witnesses with a looser constant, for sensitivity studies."""
        if c0 < self.c0:
            raise InvalidParam(f"override c0={c0} is below the certified {self.c0}")
        return GeometryCertificate(
            float(c0),
            self.witness_edge_min,
            self.witness_edge_max,
            self.witness_measure_min,
            self.witness_measure_max,
            self.witness_degree_max,
        )


def certify_bounded_geometry(g: WeightedGraph) -> GeometryCertificate:
    m = g.measure
    deg = g.degree
    candidates = [float(m.max()), float(1.0 / m.min()), float(deg.max())]
    emin = emax = None
    if g.edge_count:
        kmin, kmax = int(np.argmin(g.edge_w)), int(np.argmax(g.edge_w))
        emin = (int(g.edge_u[kmin]), int(g.edge_v[kmin]))
        emax = (int(g.edge_u[kmax]), int(g.edge_v[kmax]))
        candidates += [float(g.edge_w[kmax]), float(1.0 / g.edge_w[kmin])]
    return GeometryCertificate(
        c0=max(candidates),
        witness_edge_min=emin,
        witness_edge_max=emax,
        witness_measure_min=int(np.argmin(m)),
        witness_measure_max=int(np.argmax(m)),
        witness_degree_max=int(np.argmax(deg)),
    )


# ---------------------------------------------------------------------------
# balls


@dataclass(frozen=True, eq=False)
class BallDecomposition:
    root: int
    distance: np.ndarray
    spheres: tuple
    max_radius: int

    def ball(self, n: int) -> np.ndarray:
        """Vertex ids of ``B_n(root)`` in increasing order."""
        return np.flatnonzero(self.distance <= n)

    def sphere(self, n: int) -> np.ndarray:
        if n < 0 or n > self.max_radius:
            return np.zeros(0, dtype=np.int64)
        return self.spheres[n]


def decompose_balls(g: WeightedGraph, root: Optional[int] = None) -> BallDecomposition:
    """BFS layers around ``root`` (default: the graph's center, else 0)."""
    if root is None:
        root = g.center if g.center is not None else 0
    if not 0 <= root < g.vertex_count:
        raise UnknownVertex(f"vertex {root} not in graph")
    a = g.adjacency
    dist = np.full(g.vertex_count, -1, dtype=np.int64)
    dist[root] = 0
    queue = deque([root])
    while queue:
        x = queue.popleft()
        for y in a.indices[a.indptr[x]:a.indptr[x + 1]]:
            if dist[y] < 0:
                dist[y] = dist[x] + 1
                queue.append(y)
    dist.setflags(write=False)
    max_r = int(dist.max())
    order = np.argsort(dist, kind="stable")
    bounds = np.searchsorted(dist[order], np.arange(max_r + 2))
    spheres = tuple(_frozen(order[bounds[k]:bounds[k + 1]], np.int64) for k in range(max_r + 1))
    return BallDecomposition(root=int(root), distance=dist, spheres=spheres, max_radius=max_r)


def pairwise_hops(g: WeightedGraph, sources: Iterable[int]) -> np.ndarray:
    """Hop distances from each source to all vertices (rows follow ``sources``)."""
    idx = np.asarray(list(sources), dtype=np.int64)
    d = csgraph.shortest_path(g.adjacency, directed=False, unweighted=True, indices=idx)
    return np.rint(np.atleast_2d(d)).astype(np.int64)


def interior_radius(g: WeightedGraph, balls: BallDecomposition) -> int:
    """Radius ``R`` whose open ball ``B_{R-1}`` is the exact-Laplacian interior."""
    if g.truncation_radius is not None and balls.root == g.center:
        return int(g.truncation_radius)
    return balls.max_radius


__all__ = [
    "FAMILIES",
    "WeightedGraph",
    "GeometryCertificate",
    "BallDecomposition",
    "from_edges",
    "generate_family",
    "load_graph",
    "save_graph",
    "dumps_graph",
    "certify_bounded_geometry",
    "decompose_balls",
    "pairwise_hops",
    "interior_radius",
]
