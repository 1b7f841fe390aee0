"""Positive generalized eigenfunctions ``Delta w = lambda w`` on ball truncations.

Eigenfunctions are built by exhaustion: solve the boundary-value problem on
``B_{R-1}`` with datum 1 on the sphere ``dB_R``, then rescale so that the root
value is 1. The solve is an M-matrix system whenever ``lambda`` is above
``-lambda_1^D(B_{R-1})``, which makes the solution strictly positive.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import LambdaOutOfRange, NotAdmissible, NotAnEigenfunction, RadiusTooSmall, SolveFailure
from .graph import BallDecomposition, GeometryCertificate, WeightedGraph, interior_radius
from .laplacian import apply_laplacian, assemble_dirichlet
from .spectrum import dirichlet_bottom_eigenvalue

CONSTRUCTION_TOL = 1e-10
ADMISSIBILITY_MARGIN = 1e-6
NONCONSTANT_RATIO = 1 + 1e-8
BOUND_SLACK = 0.05

STRICTLY_POSITIVE = "strictly_positive"
IDENTICALLY_ZERO = "identically_zero"
INDEFINITE = "indefinite"


@dataclass(frozen=True, eq=False)
class Eigenfunction:
    lam: float
    values: np.ndarray  # on every vertex of the truncation
    residual: float  # max_interior |Delta w - lam w| / max w
    positivity: str
    root: int
    radius: int
    interior: np.ndarray
    graph: Optional[WeightedGraph] = field(default=None, repr=False)

    @property
    def interior_values(self) -> np.ndarray:
        return self.values[self.interior]

    def is_nonconstant(self) -> bool:
        vals = self.interior_values
        lo = vals.min()
        return bool(lo <= 0 or vals.max() / lo > NONCONSTANT_RATIO)


def classify_positivity(values: np.ndarray, tol: float = 0.0) -> str:
    scale = np.abs(values).max()
    if scale == 0:
        return IDENTICALLY_ZERO
    if np.all(values > tol * scale):
        return STRICTLY_POSITIVE
    return INDEFINITE


def eigen_residual(g: WeightedGraph, lam: float, values: np.ndarray, interior: np.ndarray) -> float:
    """``max_interior |Delta w - lam w| / max|w|`` (0 for the zero function)."""
    scale = np.abs(values).max()
    if scale == 0:
        return 0.0
    w = values / scale
    r = apply_laplacian(g, w) - lam * w
    return float(np.abs(r[interior]).max())


def as_eigenfunction(g: WeightedGraph, balls: BallDecomposition, lam: float, values, radius: Optional[int] = None) -> Eigenfunction:
    """Wrap an arbitrary field as a candidate eigenfunction with measured residual."""
    R = radius if radius is not None else interior_radius(g, balls)
    interior = np.flatnonzero(balls.distance < R)
    values = np.array(values, dtype=float)
    values.setflags(write=False)
    return Eigenfunction(
        lam=float(lam),
        values=values,
        residual=eigen_residual(g, lam, values, interior),
        positivity=classify_positivity(values[interior]),
        root=balls.root,
        radius=R,
        interior=interior,
        graph=g,
    )


def admissibility_threshold(g: WeightedGraph, balls: BallDecomposition, radius: Optional[int] = None) -> float:
    """``-lambda_1^D(B_{R-1})``: the smallest lambda the truncation can support."""
    R = radius if radius is not None else interior_radius(g, balls)
    mu, _ = dirichlet_bottom_eigenvalue(assemble_dirichlet(g, balls, R))
    return -mu


def construct_positive_eigenfunction(
    g: WeightedGraph,
    balls: BallDecomposition,
    lam: float,
    tol: float = CONSTRUCTION_TOL,
    margin: float = ADMISSIBILITY_MARGIN,
    radius: Optional[int] = None,
) -> Eigenfunction:
    """Positive solution of ``Delta w = lam w`` on ``B_{R-1}`` with ``w(root) = 1``.

    Raises NotAdmissible when ``lam`` is below ``-lambda_1^D(B_{R-1}) + margin``
    or the solve is not positive, SolveFailure when the residual exceeds ``tol``.
    """
    R = radius if radius is not None else interior_radius(g, balls)
    if R < 3 or R > balls.max_radius:
        raise RadiusTooSmall(f"truncation radius must be in 3..{balls.max_radius}, got {R}")
    op = assemble_dirichlet(g, balls, R)
    threshold = admissibility_threshold(g, balls, R)
    if lam < threshold + margin:
        raise NotAdmissible(
            f"lambda={lam} is below the admissible threshold {threshold:.6g} (+ margin {margin:g}); "
            "no positive solution exists on this truncation"
        )

    # (L_D + lam M_D) w = sum of boundary weights, with w = 1 on the sphere dB_R
    system = sp.csc_matrix(op.stiffness + lam * sp.diags(op.measure))
    rhs = op.boundary_coupling.copy()
    try:
        w_int = splu(system).solve(rhs)
    except RuntimeError as exc:
        raise SolveFailure(f"singular system at lambda={lam}") from exc
    if not np.all(np.isfinite(w_int)):
        raise SolveFailure(f"non-finite solution at lambda={lam}")
    if np.min(w_int) <= 0:
        raise NotAdmissible(f"solution at lambda={lam} is not positive")

    # vertices beyond the sphere (when radius < truncation) stay at 0 and are never read
    values = np.zeros(g.vertex_count)
    values[balls.distance == R] = 1.0
    values[op.interior] = w_int
    values /= values[balls.root]
    values.setflags(write=False)

    interior = op.interior
    residual = eigen_residual(g, lam, values, interior)
    if residual > tol:
        raise SolveFailure(f"residual {residual:.3e} exceeds tolerance {tol:.1e}")
    return Eigenfunction(
        lam=float(lam),
        values=values,
        residual=residual,
        positivity=classify_positivity(values[interior]),
        root=balls.root,
        radius=R,
        interior=interior,
        graph=g,
    )


def verify_zero_propagation(g: WeightedGraph, w: Eigenfunction, tol: float = CONSTRUCTION_TOL) -> bool:
    """Check the zero dichotomy on one instance.

    A nonnegative eigenfunction that vanishes at one interior vertex must vanish
    on the whole interior. The residual is recomputed from the values, scaled
    per vertex by the largest value in its closed neighborhood, so a spurious
    zero deep inside a fast-growing field is not hidden by the global maximum.
    A field that does not satisfy the equation raises NotAnEigenfunction.
    """
    residual = local_residual(g, w.lam, w.values)[w.interior].max()
    if residual > tol:
        raise NotAnEigenfunction(f"local residual {residual:.3e} exceeds {tol:.1e}")
    zero = numerically_zero(g, w.values, tol)[w.interior]
    return bool(not zero.any() or zero.all())


def _neighborhood_max(g: WeightedGraph, values: np.ndarray) -> np.ndarray:
    a = g.adjacency
    rows = np.repeat(np.arange(g.vertex_count), np.diff(a.indptr))
    local = np.zeros(g.vertex_count)
    np.maximum.at(local, rows, np.abs(values[a.indices]))
    return local


def local_residual(g: WeightedGraph, lam: float, values: np.ndarray) -> np.ndarray:
    """``|Delta w - lam w|(x)`` divided by ``max |w|`` over ``x`` and its neighbors."""
    scale = np.maximum(_neighborhood_max(g, values), np.abs(values))
    r = np.abs(apply_laplacian(g, values) - lam * values)
    return np.divide(r, scale, out=np.zeros_like(r), where=scale > 0)


def numerically_zero(g: WeightedGraph, values: np.ndarray, tol: float = CONSTRUCTION_TOL) -> np.ndarray:
    """Mask of vertices whose value is ``<= tol`` times the largest neighbor value.

    The comparison is local because positive eigenfunctions span many orders of
    magnitude across a truncation, while the one-step bound keeps neighboring
    values within a fixed factor of each other.
    """
    return values <= tol * _neighborhood_max(g, values)


@dataclass(frozen=True, eq=False)
class GrowthProfile:
    root: int
    M: np.ndarray  # M[n] = max over B_n of w, n = 0..radius
    ratios: np.ndarray  # M[n+1] / M[n]
    rate_upper: float
    rate_lower: float
    tail_start: int
    tail_end: int
    radius: int
    attained_on_sphere: np.ndarray  # bool per n

    @property
    def tail(self) -> range:
        return range(self.tail_start, self.tail_end + 1)


def growth_profile(w: Eigenfunction, balls: BallDecomposition, tail_fraction: float = 0.5) -> GrowthProfile:
    """Ball maxima ``M_n`` and the extreme values of ``ln(M_n)/n`` on the tail.

    The tail is ``[ceil(tail_fraction * R), R - 2]``; the last two layers next
    to the cut are never used.
    """
    if balls.root != w.root:
        raise ValueError("ball decomposition must be rooted at the eigenfunction root")
    if not 0 < tail_fraction < 1:
        raise ValueError("tail_fraction must lie in (0, 1)")
    R = w.radius
    sphere_max = np.array([w.values[balls.sphere(n)].max() for n in range(R + 1)])
    M = np.maximum.accumulate(sphere_max)
    attained = sphere_max >= M * (1 - 1e-12)
    ratios = M[1:] / M[:-1]
    start = max(1, math.ceil(tail_fraction * R))
    end = R - 2
    if end < start:
        raise ValueError(f"tail window [{start}, {end}] is empty for radius {R}")
    n = np.arange(start, end + 1)
    rates = np.log(M[start:end + 1]) / n
    return GrowthProfile(
        root=w.root,
        M=M,
        ratios=ratios,
        rate_upper=float(rates.max()),
        rate_lower=float(rates.min()),
        tail_start=start,
        tail_end=end,
        radius=R,
        attained_on_sphere=attained,
    )


def lower_ratio_bound(lam: float, c0: float) -> float:
    """Per-step growth factor ``(c0^3 + lam) / c0^3`` of ball maxima."""
    return (c0**3 + lam) / c0**3


def one_step_bound(lam: float, c0: float) -> float:
    """``c0^2 (lam + c0^3)``: bound on ``w(y)/w(x)`` across an edge.

    From the eigen-equation at ``x``,
    ``(w_xy/m_x) w(y) <= sum_z (w_xz/m_x) w(z) = (lam + sum_z w_xz/m_x) w(x)``
    with ``w_xy/m_x >= c0^-2`` and ``sum_z w_xz/m_x <= c0^3``.
    """
    return c0**2 * (lam + c0**3)


@dataclass(frozen=True)
class GrowthBoundReport:
    lam: float
    c0: float
    lower_bound: Optional[float]  # ln((c0^3+lam)/c0^3); None when skipped
    upper_bound: float  # ln(c0^2 (lam + c0^3)), derived one-step constant
    lower_ratio: Optional[float]
    upper_ratio: float
    rate_lower: float
    rate_upper: float
    rate_lower_ok: Optional[bool]
    rate_upper_ok: bool
    ratios_ok: Optional[bool]
    ratio_violations: tuple
    slack: float

    @property
    def passed(self) -> bool:
        return all(flag is not False for flag in (self.rate_lower_ok, self.rate_upper_ok, self.ratios_ok))


def check_growth_bounds(
    profile: GrowthProfile,
    lam: float,
    cert: GeometryCertificate,
    slack: float = BOUND_SLACK,
    nonconstant: bool = True,
) -> GrowthBoundReport:
    """Compare measured growth against the lower and upper bounds.

    The lower bound needs ``lam > 0`` and a non-constant eigenfunction; it is
    skipped (flags set to None) otherwise. Every ratio ``M_{n+1}/M_n`` for
    ``n < R`` is checked against ``(c0^3 + lam)/c0^3``.
    """
    if lam < 0:
        raise LambdaOutOfRange(f"growth bounds need lambda >= 0, got {lam}")
    c0 = cert.c0
    up_ratio = one_step_bound(lam, c0)
    upper = math.log(up_ratio)
    rate_upper_ok = profile.rate_upper <= upper + slack

    lower = lo_ratio = rate_lower_ok = ratios_ok = None
    violations = ()
    if lam > 0 and nonconstant:
        lo_ratio = lower_ratio_bound(lam, c0)
        lower = math.log(lo_ratio)
        rate_lower_ok = profile.rate_lower >= lower - slack
        bad = np.flatnonzero(profile.ratios < lo_ratio * (1 - 1e-12))
        violations = tuple((int(n), float(profile.ratios[n])) for n in bad)
        ratios_ok = not violations
    return GrowthBoundReport(
        lam=float(lam),
        c0=float(c0),
        lower_bound=lower,
        upper_bound=upper,
        lower_ratio=lo_ratio,
        upper_ratio=up_ratio,
        rate_lower=profile.rate_lower,
        rate_upper=profile.rate_upper,
        rate_lower_ok=rate_lower_ok,
        rate_upper_ok=bool(rate_upper_ok),
        ratios_ok=ratios_ok,
        ratio_violations=violations,
        slack=slack,
    )


def one_step_harnack_violations(g: WeightedGraph, w: Eigenfunction, c0: float) -> list:
    """Edges ``x ~ y`` with ``x`` interior and ``w(y)/w(x) > c0^2 (lam + c0^3)``."""
    bound = one_step_bound(w.lam, c0)
    a = g.adjacency
    inside = np.zeros(g.vertex_count, dtype=bool)
    inside[w.interior] = True
    rows = np.repeat(np.arange(g.vertex_count), np.diff(a.indptr))
    keep = inside[rows]
    x, y = rows[keep], a.indices[keep]
    ratio = w.values[y] / w.values[x]
    bad = np.flatnonzero(ratio > bound * (1 + 1e-12))
    return [(int(x[k]), int(y[k]), float(ratio[k])) for k in bad]


__all__ = [
    "Eigenfunction",
    "GrowthProfile",
    "GrowthBoundReport",
    "construct_positive_eigenfunction",
    "as_eigenfunction",
    "admissibility_threshold",
    "verify_zero_propagation",
    "growth_profile",
    "check_growth_bounds",
    "lower_ratio_bound",
    "one_step_bound",
    "one_step_harnack_violations",
    "classify_positivity",
    "eigen_residual",
    "numerically_zero",
    "local_residual",
]
