"""Weighted graph Laplacian, Dirichlet restriction and subharmonicity checks.

Vertex functions are plain 1-D float arrays indexed by vertex id.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .errors import DomainMismatch, NotSubharmonic, RadiusOutOfRange
from .graph import BallDecomposition, WeightedGraph, interior_radius

DEFAULT_TOL = 1e-10


def _as_function(g: WeightedGraph, f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.ndim != 1 or f.shape[0] != g.vertex_count:
        raise DomainMismatch(f"function has shape {f.shape}, graph has {g.vertex_count} vertices")
    return f


def laplacian_matrix(g: WeightedGraph) -> sp.csr_matrix:
    """Sparse matrix of ``Delta`` acting on column vectors."""
    minv = sp.diags(1.0 / g.measure)
    return (minv @ (g.adjacency - sp.diags(g.weighted_degree))).tocsr()


def apply_laplacian(g: WeightedGraph, f) -> np.ndarray:
    r"""Evaluate ``Delta f(x) = sum_{y~x} (w_xy / m_x) (f(y) - f(x))``."""
    f = _as_function(g, f)
    a = g.adjacency
    rows = np.repeat(np.arange(g.vertex_count), np.diff(a.indptr))
    diffs = a.data * (f[a.indices] - f[rows])
    return np.bincount(rows, weights=diffs, minlength=g.vertex_count) / g.measure


@dataclass(frozen=True, eq=False)
class DirichletOperator:
    """``Delta`` restricted to ``interior`` with zero values outside.

    ``matrix`` holds ``Delta_D``; ``stiffness`` is the symmetric ``L_D`` with
    ``-Delta_D = M_D^{-1} L_D``, which is what the solvers factorize.
    """

    interior: np.ndarray
    matrix: sp.csr_matrix
    stiffness: sp.csr_matrix
    measure: np.ndarray
    root: Optional[int] = None
    radius: Optional[int] = None
    boundary_coupling: np.ndarray = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return int(self.interior.shape[0])

    def apply(self, v) -> np.ndarray:
        return self.matrix @ np.asarray(v, dtype=float)

    def entry(self, x: int, y: int) -> float:
        """Matrix entry by global vertex ids (0 if either is outside)."""
        i, j = np.searchsorted(self.interior, [x, y])
        if i >= self.size or j >= self.size or self.interior[i] != x or self.interior[j] != y:
            return 0.0
        return float(self.matrix[i, j])


def dirichlet_operator(g: WeightedGraph, interior, root=None, radius=None) -> DirichletOperator:
    """Dirichlet restriction of ``Delta`` to an arbitrary vertex subset."""
    interior = np.unique(np.asarray(interior, dtype=np.int64))
    if interior.size == 0:
        raise RadiusOutOfRange("interior is empty")
    a = g.adjacency
    inner = a[interior][:, interior].tocsr()
    full_deg = g.weighted_degree[interior]
    m = g.measure[interior]
    stiffness = (sp.diags(full_deg) - inner).tocsr()
    matrix = (-sp.diags(1.0 / m) @ stiffness).tocsr()
    # sum of weights from each interior vertex to the outside
    coupling = full_deg - np.asarray(inner.sum(axis=1)).ravel()
    interior.setflags(write=False)
    return DirichletOperator(
        interior=interior,
        matrix=matrix,
        stiffness=stiffness,
        measure=m,
        root=root,
        radius=radius,
        boundary_coupling=coupling,
    )


def assemble_dirichlet(g: WeightedGraph, balls: BallDecomposition, radius: int) -> DirichletOperator:
    """Dirichlet Laplacian on ``B_{radius-1}(root)``; the sphere at ``radius`` is frozen to 0."""
    if not 1 <= radius <= balls.max_radius:
        raise RadiusOutOfRange(f"radius {radius} outside 1..{balls.max_radius}")
    return dirichlet_operator(g, balls.ball(radius - 1), root=balls.root, radius=radius)


def interior_vertices(g: WeightedGraph, balls: BallDecomposition) -> np.ndarray:
    """Vertices where the Laplacian of a truncation is exact (distance < R)."""
    return np.flatnonzero(balls.distance < interior_radius(g, balls))


@dataclass
class SubharmonicReport:
    ok: bool
    violations: list  # (vertex, Delta f(x)) pairs

    def __bool__(self):
        return self.ok


def is_subharmonic(g: WeightedGraph, f, vertices=None, tol: float = DEFAULT_TOL) -> SubharmonicReport:
    """Check ``Delta f >= -tol`` after scaling ``max|f|`` to 1.

    ``vertices`` restricts the check (default: every vertex of a finite graph,
    interior vertices of a truncation).
    """
    f = _as_function(g, f)
    if vertices is None:
        if g.truncation_radius is not None and g.center is not None:
            vertices = np.flatnonzero(_center_distance(g) < g.truncation_radius)
        else:
            vertices = np.arange(g.vertex_count)
    vertices = np.asarray(vertices, dtype=np.int64)
    scale = np.abs(f).max()
    lap = apply_laplacian(g, f / scale if scale > 0 else f)
    bad = vertices[lap[vertices] < -tol]
    violations = [(int(x), float(lap[x] * (scale if scale > 0 else 1.0))) for x in bad]
    return SubharmonicReport(ok=not violations, violations=violations)


def _center_distance(g: WeightedGraph) -> np.ndarray:
    from .graph import decompose_balls

    return decompose_balls(g, g.center).distance


def check_maximum_principle(g: WeightedGraph, balls: BallDecomposition, f, n: int, tol: float = DEFAULT_TOL) -> bool:
    """True iff ``max_{dB_n} f == max_{B_n} f`` (within ``tol`` after scaling).

    ``f`` must be subharmonic on ``B_{n-1}``; otherwise NotSubharmonic is raised,
    since the statement is then not applicable.
    """
    f = _as_function(g, f)
    if not 0 <= n <= balls.max_radius:
        raise RadiusOutOfRange(f"n={n} outside 0..{balls.max_radius}")
    if g.truncation_radius is not None and balls.root == g.center and n >= g.truncation_radius:
        raise RadiusOutOfRange(f"n={n} must be below the truncation radius {g.truncation_radius}")
    inner = balls.ball(n - 1) if n > 0 else np.zeros(0, dtype=np.int64)
    report = is_subharmonic(g, f, vertices=inner, tol=tol)
    if not report:
        raise NotSubharmonic(f"f is not subharmonic at {report.violations[:5]}")
    scale = np.abs(f).max() or 1.0
    ball_max = f[balls.ball(n)].max()
    sphere_max = f[balls.sphere(n)].max()
    return bool(ball_max - sphere_max <= tol * scale)


__all__ = [
    "apply_laplacian",
    "laplacian_matrix",
    "DirichletOperator",
    "dirichlet_operator",
    "assemble_dirichlet",
    "interior_vertices",
    "is_subharmonic",
    "SubharmonicReport",
    "check_maximum_principle",
]
