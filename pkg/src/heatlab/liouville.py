"""Growth classification of synthesized ancient solutions and the stationarity audit.

The audit covers the family of finite atomic measures built from exhaustion
eigenfunctions. It checks, row by row, that subexponential growth in space
(and, when the bottom of the spectrum is positive, in backward time) comes
with a measure supported at 0, a time-independent solution and a harmonic
profile, and that every nonzero atom shows up as exponential growth.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .eigenfunctions import construct_positive_eigenfunction, lower_ratio_bound
from .errors import DegenerateWindow, HeatlabError, NotAdmissible
from .graph import BallDecomposition, certify_bounded_geometry, decompose_balls, generate_family
from .heat import AncientSolution, SpectralMeasure, synthesize_ancient
from .spectrum import estimate_lambda1_exhaustion

RATE_TOL = 0.02
VERDICT_TOL = 1e-8
DEFAULT_T_STAR = -1.0
DEFAULT_TIME_GRID = tuple(float(t) for t in range(-40, -9, 5))
TEMPORAL_TAIL_POINTS = 4
TAIL_FRACTION = 0.5
MAX_SWEEP_VERTICES = 200_000
AUTOSCALE_GAIN = 0.01

ONLY_ZERO = "only_zero"
HAS_POSITIVE = "has_positive_atom"
HAS_NEGATIVE = "has_negative_atom"


@dataclass(frozen=True)
class GrowthClassification:
    spatial_rate: float
    temporal_rate: float
    spatial_subexponential: bool
    temporal_subexponential: bool
    t_star: float
    y0: int
    time_grid: tuple
    rate_tol: float


@dataclass(frozen=True)
class LiouvilleVerdict:
    classification: GrowthClassification
    measure_support: str
    has_positive_atom: bool
    has_negative_atom: bool
    stationary: bool
    harmonic: bool
    consistent_with_theorem: bool
    stationarity_gap: float
    harmonic_defect: float


def _slope(x, y) -> float:
    return float(np.polyfit(np.asarray(x, float), np.asarray(y, float), 1)[0])


def classify_growth(
    sol: AncientSolution,
    balls: BallDecomposition,
    t_star: float = DEFAULT_T_STAR,
    time_grid: Optional[Sequence[float]] = None,
    rate_tol: float = RATE_TOL,
    tail_fraction: float = TAIL_FRACTION,
    tail_points: int = TEMPORAL_TAIL_POINTS,
) -> GrowthClassification:
    """Estimate exponential rates of ``u`` in space (at ``t_star``) and backward time.

    The spatial rate is the least-squares slope of ``n -> ln max_{dB_n} u(., t_star)``
    over ``n`` in ``[ceil(tail_fraction R), R - 2]``. The temporal rate is the slope
    of ``-t -> ln u(root, t)`` over the ``tail_points`` most negative grid times.
    """
    grid = tuple(sorted(float(t) for t in (time_grid if time_grid is not None else DEFAULT_TIME_GRID)))
    if t_star >= sol.horizon or grid[-1] >= sol.horizon:
        raise DegenerateWindow("t_star and the time grid must lie below the horizon")
    if grid[0] > -10:
        raise DegenerateWindow("time grid must reach t <= -10")
    if balls.root != sol.root:
        raise ValueError("ball decomposition must be rooted at the solution root")

    R = sol.radius
    start, end = max(1, math.ceil(tail_fraction * R)), R - 2
    if end - start + 1 < 3:
        raise DegenerateWindow(f"spatial tail [{start}, {end}] has fewer than 3 radii")
    u = sol.values(t_star)
    ns = np.arange(start, end + 1)
    log_max = [math.log(u[balls.sphere(n)].max()) for n in ns]
    spatial = _slope(ns, log_max)

    if len(grid) < 2 or tail_points < 2:
        raise DegenerateWindow("temporal tail needs at least 2 times")
    tail_t = np.array(grid[: min(tail_points, len(grid))])
    y0 = sol.root
    log_u = np.log(sol(np.full(tail_t.shape, y0), tail_t))
    temporal = _slope(-tail_t, log_u)

    return GrowthClassification(
        spatial_rate=spatial,
        temporal_rate=temporal,
        spatial_subexponential=bool(spatial <= rate_tol),
        temporal_subexponential=bool(temporal <= rate_tol),
        t_star=float(t_star),
        y0=int(y0),
        time_grid=grid,
        rate_tol=float(rate_tol),
    )


def measure_support(measure: SpectralMeasure) -> tuple:
    """``(label, has_positive, has_negative)``; a positive atom wins the label."""
    pos = any(a.lam > 0 for a in measure.atoms)
    neg = any(a.lam < 0 for a in measure.atoms)
    label = HAS_POSITIVE if pos else HAS_NEGATIVE if neg else ONLY_ZERO
    return label, pos, neg


def render_verdict(sol: AncientSolution, classification: GrowthClassification, tol: float = VERDICT_TOL) -> LiouvilleVerdict:
    """Combine the growth classification with direct stationarity/harmonicity checks.

    Stationarity compares ``u(., t_a)`` and ``u(., t_b)`` on the domain with
    ``t_a`` the earliest grid time and ``t_b = t_star``; harmonicity looks at
    ``Delta u(., t_star)``. Both are relative to ``max u``.
    """
    label, pos, neg = measure_support(sol.measure)
    dom = sol.domain
    t_a, t_b = classification.time_grid[0], classification.t_star
    ua, ub = sol.values(t_a)[dom], sol.values(t_b)[dom]
    scale = max(ua.max(), ub.max())
    gap = float(np.abs(ua - ub).max() / scale)
    lap = sol.laplacian(t_b)[dom]
    defect = float(np.abs(lap).max() / ub.max())
    stationary = gap <= tol
    harmonic = defect <= tol

    c = classification
    both_sub = c.spatial_subexponential and c.temporal_subexponential
    consistent = (
        (not both_sub or (label == ONLY_ZERO and stationary and harmonic))
        and (not pos or not c.spatial_subexponential)
        and (not neg or not c.temporal_subexponential)
    )
    return LiouvilleVerdict(
        classification=c,
        measure_support=label,
        has_positive_atom=pos,
        has_negative_atom=neg,
        stationary=bool(stationary),
        harmonic=bool(harmonic),
        consistent_with_theorem=bool(consistent),
        stationarity_gap=gap,
        harmonic_defect=defect,
    )


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class SweepRow:
    family: str
    lam: float
    radius: int
    verdict: Optional[LiouvilleVerdict] = None
    error: Optional[str] = None
    lambda1: Optional[float] = None
    c0: Optional[float] = None
    residual: Optional[float] = None

    @property
    def ok(self) -> bool:
        return self.verdict is not None


@dataclass
class SweepResult:
    family: str
    degree: Optional[int]
    seed: int
    rate_tol: float
    tol: float
    t_star: float
    rows: list = field(default_factory=list)

    @property
    def all_consistent(self) -> bool:
        """Every row that produced a verdict satisfies the growth/stationarity dichotomy."""
        return all(r.verdict.consistent_with_theorem for r in self.rows if r.verdict is not None)


def _graph_size(family: str, radius: int, degree: Optional[int]) -> int:
    if family == "tree_regular":
        d = degree or 3
        return 1 + d * ((d - 1) ** radius - 1) // (d - 2)
    if family == "lattice_Z2":
        return 2 * radius * (radius + 1) + 1
    return 2 * radius + 1


def dichotomy_sweep(
    family: str,
    lambdas: Sequence[float],
    radius: int,
    seed: int = 0,
    degree: Optional[int] = None,
    t_star: float = DEFAULT_T_STAR,
    time_grid: Optional[Sequence[float]] = None,
    rate_tol: float = RATE_TOL,
    tol: float = VERDICT_TOL,
    horizon: float = 1.0,
    autoscale: bool = True,
) -> SweepResult:
    """Build the single-atom ancient solution for each lambda and render its verdict.

    Rows that cannot be built (inadmissible lambda, solver failure) are kept
    with the error name. For ``lambda > 0`` the radius is enlarged (x1.5) while
    the measured spatial rate stays below ``3 * rate_tol`` and is still rising
    by more than ``AUTOSCALE_GAIN`` relative per step, as long as the
    truncation stays under ``MAX_SWEEP_VERTICES``.

    ``seed`` is recorded for reproducibility; the sweep itself is deterministic.
    """
    result = SweepResult(family, degree, int(seed), rate_tol, tol, t_star)
    cache: dict = {}

    def setup(R):
        if R not in cache:
            g = generate_family(family, R, degree)
            balls = decompose_balls(g)
            est = estimate_lambda1_exhaustion(g, balls)
            cache[R] = (g, balls, est.lambda1, certify_bounded_geometry(g).c0)
        return cache[R]

    for lam in lambdas:
        R = int(radius)
        previous_rate = None
        while True:
            row = SweepRow(family, float(lam), R)
            try:
                g, balls, lambda1, c0 = setup(R)
                row.lambda1, row.c0 = lambda1, c0
                w = construct_positive_eigenfunction(g, balls, lam)
                row.residual = w.residual
                measure = SpectralMeasure.from_atoms([(lam, 1.0, w)], lambda1_reference=lambda1)
                sol = synthesize_ancient(measure, horizon)
                cls = classify_growth(sol, balls, t_star, time_grid, rate_tol)
                row.verdict = render_verdict(sol, cls, tol)
            except NotAdmissible:
                row.error = "NotAdmissible"
            except HeatlabError as exc:
                row.error = type(exc).__name__
            rate = row.verdict.classification.spatial_rate if row.verdict is not None else None
            grow = (
                autoscale
                and rate is not None
                and lam > 0
                and rate < 3 * rate_tol
                and (previous_rate is None or rate > previous_rate * (1 + AUTOSCALE_GAIN))
                and _graph_size(family, int(R * 1.5), degree) <= MAX_SWEEP_VERTICES
            )
            if not grow:
                break
            previous_rate = rate
            R = int(R * 1.5)
        result.rows.append(row)
    return result


def spatial_lower_bound(lam: float, c0: float) -> float:
    return math.log(lower_ratio_bound(lam, c0))


__all__ = [
    "GrowthClassification",
    "LiouvilleVerdict",
    "SweepRow",
    "SweepResult",
    "classify_growth",
    "render_verdict",
    "measure_support",
    "dichotomy_sweep",
    "spatial_lower_bound",
]
