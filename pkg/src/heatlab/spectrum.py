"""Bottom of the spectrum of ``-Delta`` by Dirichlet exhaustion."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import ConvergenceFailure, RadiusTooSmall
from .graph import BallDecomposition, WeightedGraph
from .laplacian import DirichletOperator, assemble_dirichlet

EIGEN_TOL = 1e-8
EXHAUSTION_TOL = 1e-4
MAX_ITERATIONS = 2000
DENSE_LIMIT = 2000


def _factorize(matrix: sp.spmatrix, measure: np.ndarray):
    """LU of ``matrix``; falls back to a tiny negative shift if it is singular."""
    a = sp.csc_matrix(matrix)
    try:
        lu = splu(a)
        if np.all(np.isfinite(lu.U.diagonal())) and np.min(np.abs(lu.U.diagonal())) > 0:
            return lu, 0.0
    except RuntimeError:
        pass
    shift = 1e-10 * max(1.0, abs(a).max())
    return splu(sp.csc_matrix(a + shift * sp.diags(measure))), -shift


def dirichlet_bottom_eigenvalue(op: DirichletOperator, tol: float = EIGEN_TOL, max_iterations: int = MAX_ITERATIONS):
    """Smallest eigenvalue of ``-Delta_D`` and its positive eigenvector.

    Inverse iteration on the generalized problem ``L_D v = mu M_D v`` started
    from the all-ones vector, stopped once
    ``||(-Delta_D) v - mu v||_m <= tol ||v||_m``.
    The eigenvector is returned with max-norm 1 and a positive sign.
    """
    if op.size == 0:
        raise RadiusTooSmall("empty interior")
    L = op.stiffness
    m = op.measure
    lu, _ = _factorize(L, m)

    v = np.ones(op.size)
    residual = math.inf
    mu = 0.0
    for _ in range(max_iterations):
        y = lu.solve(m * v)
        if not np.all(np.isfinite(y)):
            raise ConvergenceFailure("inverse iteration produced non-finite values", residual)
        v = y / np.sqrt(np.dot(m * y, y))
        Lv = L @ v
        mu = float(np.dot(v, Lv))  # ||v||_m = 1
        r = Lv / m - mu * v
        residual = float(np.sqrt(np.dot(m * r, r)))
        if residual <= tol:
            break
    else:
        raise ConvergenceFailure(
            f"no convergence after {max_iterations} iterations (residual {residual:.3e})", residual
        )
    if v.sum() < 0:
        v = -v
    v = v / np.abs(v).max()
    return max(mu, 0.0), v


@dataclass(frozen=True)
class SpectrumEstimate:
    lambda1: float
    per_radius: tuple  # ((n, lambda_1^D(B_n)), ...)
    converged: bool
    tol: float

    def rows(self):
        return list(self.per_radius)


def estimate_lambda1_exhaustion(
    g: WeightedGraph,
    balls: BallDecomposition,
    tol: float = EXHAUSTION_TOL,
    eigen_tol: float = EIGEN_TOL,
) -> SpectrumEstimate:
    """Upper bound for ``lambda_1(G)`` from the Dirichlet problems on ``B_n``.

    ``B_n`` ranges over ``n = 2 .. R-1`` where ``R`` is the truncation radius,
    so the last ball is the largest one that does not touch the cut.
    """
    R = g.truncation_radius
    if R is None or R < 3:
        raise RadiusTooSmall("exhaustion needs a truncation with radius >= 3; use bottom_of_spectrum_finite")
    R = min(R, balls.max_radius)
    rows = []
    for n in range(2, R):
        mu, _ = dirichlet_bottom_eigenvalue(assemble_dirichlet(g, balls, n + 1), tol=eigen_tol)
        rows.append((n, mu))
    converged = len(rows) >= 2 and abs(rows[-1][1] - rows[-2][1]) < tol
    return SpectrumEstimate(lambda1=rows[-1][1], per_radius=tuple(rows), converged=converged, tol=tol)


def bottom_of_spectrum_finite(g: WeightedGraph) -> float:
    """Smallest eigenvalue of ``-Delta`` on a finite graph (0 up to rounding)."""
    L = g.stiffness()
    if g.vertex_count <= DENSE_LIMIT:
        vals = scipy.linalg.eigh(L.toarray(), np.diag(g.measure), eigvals_only=True, subset_by_index=[0, 0])
        return max(float(vals[0]), 0.0)
    from scipy.sparse.linalg import eigsh

    vals = eigsh(L, k=1, M=sp.diags(g.measure), sigma=-1e-6, which="LM", return_eigenvectors=False)
    return max(float(vals[0]), 0.0)


__all__ = [
    "SpectrumEstimate",
    "dirichlet_bottom_eigenvalue",
    "estimate_lambda1_exhaustion",
    "bottom_of_spectrum_finite",
]
