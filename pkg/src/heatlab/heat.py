"""Heat flow on graphs, closed-form ancient solutions and a Harnack audit."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .eigenfunctions import STRICTLY_POSITIVE, Eigenfunction
from .errors import (
    AdmissibilityViolation,
    DomainMismatch,
    MeasureNotNormalized,
    MixedDomains,
    NonpositiveSample,
    OutOfDomain,
    SolveFailure,
    TooLarge,
)
from .graph import BallDecomposition, WeightedGraph, pairwise_hops
from .laplacian import apply_laplacian

SPECTRAL_LIMIT = 2000
NORMALIZATION_TOL = 1e-12
HARNACK_GRID_MAX = 50.0


@dataclass(frozen=True, eq=False)
class HeatState:
    graph: WeightedGraph
    time: float
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.graph.vertex_count,):
            raise DomainMismatch(f"state has shape {v.shape}, graph has {self.graph.vertex_count} vertices")
        if not np.all(np.isfinite(v)):
            raise ValueError("heat state values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def mass(self) -> float:
        return float(np.dot(self.graph.measure, self.values))


class ImplicitHeatSolver:
    """Backward Euler ``(I - tau Delta) u_new = u`` with a cached factorization.

    Multiplying by ``M`` gives the symmetric M-matrix ``M + tau L``, whose
    inverse is entrywise nonnegative, so nonnegative data stays nonnegative.
    """

    def __init__(self, g: WeightedGraph, tau: float):
        if not tau > 0:
            raise ValueError("tau must be positive")
        self.graph = g
        self.tau = float(tau)
        system = sp.diags(g.measure) + self.tau * g.stiffness()
        try:
            self._lu = splu(sp.csc_matrix(system))
        except RuntimeError as exc:
            raise SolveFailure("implicit heat system is singular") from exc

    def solve(self, u: np.ndarray) -> np.ndarray:
        """Advance one step; ``u`` may be a single state or columns of states."""
        u = np.asarray(u, dtype=float)
        rhs = self.graph.measure[:, None] * u if u.ndim == 2 else self.graph.measure * u
        out = self._lu.solve(rhs)
        if not np.all(np.isfinite(out)):
            raise SolveFailure("implicit heat step produced non-finite values")
        return out

    def step(self, state: HeatState) -> HeatState:
        return HeatState(state.graph, state.time + self.tau, self.solve(state.values))


def step_heat_implicit(state: HeatState, tau: float) -> HeatState:
    return ImplicitHeatSolver(state.graph, tau).step(state)


def evolve_implicit(state: HeatState, t: float, steps: int) -> HeatState:
    solver = ImplicitHeatSolver(state.graph, t / steps)
    for _ in range(steps):
        state = solver.step(state)
    return state


def heat_eigendecomposition(g: WeightedGraph):
    """Eigenpairs ``(mu, Phi)`` of ``Delta`` with ``Phi^T M Phi = I``."""
    if g.vertex_count > SPECTRAL_LIMIT:
        raise TooLarge(f"spectral solver is limited to {SPECTRAL_LIMIT} vertices")
    lam, phi = scipy.linalg.eigh(g.stiffness().toarray(), np.diag(g.measure))
    return -lam, phi


def solve_heat_spectral(g: WeightedGraph, u0, t: float) -> HeatState:
    """Exact ``u(t) = sum_i exp(mu_i t) <u0, phi_i>_m phi_i``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != (g.vertex_count,):
        raise DomainMismatch("u0 does not match the graph")
    mu, phi = heat_eigendecomposition(g)
    coeff = phi.T @ (g.measure * u0)
    return HeatState(g, t, phi @ (np.exp(mu * t) * coeff))


# ---------------------------------------------------------------------------
# ancient solutions


@dataclass(frozen=True)
class Atom:
    lam: float
    nu: float
    eigenfunction: Eigenfunction


@dataclass(frozen=True)
class SpectralMeasure:
    """Finitely many atoms ``(lambda_i, nu_i, w_i)`` of a probability measure."""

    atoms: tuple
    lambda1_reference: float

    @classmethod
    def from_atoms(cls, atoms, lambda1_reference: float, drop_zero: bool = True) -> "SpectralMeasure":
        """Build from ``(lam, nu, eigenfunction)`` triples.

        Atoms whose eigenfunction vanishes identically carry no mass in the
        solution and are removed when ``drop_zero`` is set.
        """
        out = []
        for a in atoms:
            a = a if isinstance(a, Atom) else Atom(float(a[0]), float(a[1]), a[2])
            if drop_zero and not np.any(a.eigenfunction.values):
                continue
            out.append(a)
        return cls(tuple(out), float(lambda1_reference))

    @property
    def total_mass(self) -> float:
        return math.fsum(a.nu for a in self.atoms)

    @property
    def support(self) -> tuple:
        return tuple(a.lam for a in self.atoms)


@dataclass(frozen=True, eq=False)
class AncientSolution:
    """``u(x, t) = sum_i nu_i exp(lambda_i t) w_i(x)`` for ``t < horizon``."""

    measure: SpectralMeasure
    horizon: float
    domain: np.ndarray  # interior vertices shared by every atom
    graph: WeightedGraph = field(repr=False)
    _lams: np.ndarray = field(repr=False, default=None)
    _nus: np.ndarray = field(repr=False, default=None)
    _W: np.ndarray = field(repr=False, default=None)  # atoms x vertices
    _LW: np.ndarray = field(repr=False, default=None)  # Laplacian of each atom

    @property
    def root(self) -> int:
        return self.measure.atoms[0].eigenfunction.root

    @property
    def radius(self) -> int:
        return self.measure.atoms[0].eigenfunction.radius

    def _check_time(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t >= self.horizon):
            raise OutOfDomain(f"time {t} is not below the horizon {self.horizon}")
        return t

    def _weights(self, t: float) -> np.ndarray:
        return self._nus * np.exp(self._lams * float(t))

    def values(self, t: float) -> np.ndarray:
        """``u(., t)`` on every vertex of the graph."""
        self._check_time(t)
        return self._weights(t) @ self._W

    def time_derivative(self, t: float) -> np.ndarray:
        """``d/dt u(., t)`` from the closed form."""
        self._check_time(t)
        return (self._weights(t) * self._lams) @ self._W

    def laplacian(self, t: float) -> np.ndarray:
        self._check_time(t)
        return self._weights(t) @ self._LW

    def __call__(self, x, t):
        """Evaluate ``u`` at vertex ids ``x`` and times ``t`` (broadcast)."""
        x = np.asarray(x, dtype=np.int64)
        t = self._check_time(t)
        x, t = np.broadcast_arrays(x, t)
        w = self._nus[:, None] * np.exp(np.outer(self._lams, t.ravel()))
        return np.einsum("ak,ak->k", w, self._W[:, x.ravel()]).reshape(x.shape)


def synthesize_ancient(measure: SpectralMeasure, horizon: float = 1.0) -> AncientSolution:
    """Closed-form ancient solution for a finite atomic spectral measure.

    Raises AdmissibilityViolation if some ``lambda_i < -lambda1_reference``,
    MeasureNotNormalized if the masses do not sum to 1, MixedDomains if the
    eigenfunctions live on different truncations or roots.
    """
    atoms = measure.atoms
    if not atoms:
        raise MeasureNotNormalized("measure has no atoms")
    for a in atoms:
        if a.lam < -measure.lambda1_reference:
            raise AdmissibilityViolation(
                f"atom lambda={a.lam} lies below -lambda_1 = {-measure.lambda1_reference:.6g}"
            )
        if not a.nu > 0:
            raise MeasureNotNormalized(f"atom mass {a.nu} is not positive")
        if a.eigenfunction.positivity != STRICTLY_POSITIVE:
            raise ValueError(f"atom at lambda={a.lam} has a non-positive eigenfunction; drop it first")
    if abs(measure.total_mass - 1.0) > NORMALIZATION_TOL:
        raise MeasureNotNormalized(f"atom masses sum to {measure.total_mass!r}, expected 1")
    first = atoms[0].eigenfunction
    graph = first.graph
    if graph is None:
        raise MixedDomains("eigenfunction carries no graph")
    for a in atoms[1:]:
        ef = a.eigenfunction
        if (
            ef.graph is not graph
            or ef.root != first.root
            or ef.radius != first.radius
            or ef.values.shape != first.values.shape
            or not np.array_equal(ef.interior, first.interior)
        ):
            raise MixedDomains("all eigenfunctions must share graph, root and radius")

    W = np.vstack([a.eigenfunction.values for a in atoms])
    LW = np.vstack([apply_laplacian(graph, w) for w in W])
    return AncientSolution(
        measure=measure,
        horizon=float(horizon),
        domain=first.interior,
        graph=graph,
        _lams=np.array([a.lam for a in atoms]),
        _nus=np.array([a.nu for a in atoms]),
        _W=W,
        _LW=LW,
    )


def heat_residual(sol: AncientSolution, sample_times: Sequence[float], sample_vertices=None) -> float:
    """``max |Delta u - d/dt u|`` over the samples (default vertices: the domain)."""
    if sample_vertices is None:
        sample_vertices = sol.domain
    verts = np.asarray(sample_vertices, dtype=np.int64)
    if not np.all(np.isin(verts, sol.domain)):
        raise OutOfDomain("sample vertices must lie in the solution's interior")
    worst = 0.0
    for t in sample_times:
        r = sol.laplacian(t)[verts] - sol.time_derivative(t)[verts]
        worst = max(worst, float(np.abs(r).max()))
    return worst


# ---------------------------------------------------------------------------
# Harnack audit


@dataclass(frozen=True, eq=False)
class HarnackAudit:
    x: np.ndarray
    y: np.ndarray
    t1: np.ndarray
    t2: np.ndarray
    lhs_log_ratio: np.ndarray
    rho: np.ndarray
    fitted_C1: Optional[float]
    fitted_C2: Optional[float]
    max_violation: float
    seed: int
    window: tuple

    @property
    def sample_count(self) -> int:
        return int(self.x.shape[0])

    def slack(self, C1: float, C2: float) -> np.ndarray:
        """Per-sample ``lhs - C1 dt - C2 rho^2/dt`` (<= 0 means satisfied)."""
        dt = self.t2 - self.t1
        return self.lhs_log_ratio - C1 * dt - C2 * self.rho**2 / dt

    def worst_sample(self) -> dict:
        C1 = self.fitted_C1 if self.fitted_C1 is not None else 0.0
        C2 = self.fitted_C2 if self.fitted_C2 is not None else 0.0
        k = int(np.argmax(self.slack(C1, C2)))
        return {
            "x": int(self.x[k]),
            "y": int(self.y[k]),
            "t1": float(self.t1[k]),
            "t2": float(self.t2[k]),
            "rho": int(self.rho[k]),
            "lhs": float(self.lhs_log_ratio[k]),
        }

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "window": list(self.window),
            "sample_count": self.sample_count,
            "fitted_C1": self.fitted_C1,
            "fitted_C2": self.fitted_C2,
            "max_violation": self.max_violation,
            "worst_sample": self.worst_sample(),
        }


def _min_c2(lhs, dt, rho2, c1):
    """Smallest C2 >= 0 making every sample feasible at this C1 (inf if none)."""
    need = lhs - c1 * dt
    at_zero = rho2 == 0
    if np.any(need[at_zero] > 0):
        return math.inf
    if not np.any(~at_zero):
        return 0.0
    return max(0.0, float(np.max(need[~at_zero] * dt[~at_zero] / rho2[~at_zero])))


def fit_harnack_constants(lhs, dt, rho, grid_max: float = HARNACK_GRID_MAX, points: int = 501, refinements: int = 3):
    """Grid search for the feasible ``(C1, C2)`` in ``[0, grid_max]^2`` with smallest ``C1 + C2``.

    For each ``C1`` on the grid the smallest feasible ``C2`` is exact, so only
    the ``C1`` axis is gridded; it is refined around the best point.
    Returns ``(None, None)`` when no grid point is feasible.
    """
    lhs, dt = np.asarray(lhs, float), np.asarray(dt, float)
    rho2 = np.asarray(rho, float) ** 2
    lo, hi = 0.0, grid_max
    best = None
    for _ in range(refinements + 1):
        grid = np.linspace(lo, hi, points)
        for c1 in grid:
            c2 = _min_c2(lhs, dt, rho2, c1)
            if c2 <= grid_max and (best is None or c1 + c2 < best[0] + best[1]):
                best = (float(c1), c2)
        if best is None:
            return None, None
        step = (hi - lo) / (points - 1)
        lo, hi = max(0.0, best[0] - step), min(grid_max, best[0] + step)
    c1, c2 = best
    # absorb rounding in the last ulp so the fitted pair is feasible as stored
    while np.max(lhs - c1 * dt - c2 * rho2 / dt) > 0:
        c2 = np.nextafter(c2, math.inf) if c2 > 0 else np.finfo(float).tiny
        if c2 > grid_max:
            return None, None
    return c1, float(c2)


def audit_harnack(
    u: Callable,
    g: WeightedGraph,
    balls: BallDecomposition,
    sample_count: int = 1000,
    window: tuple = (-5.0, 0.0),
    seed: int = 0,
    depth: Optional[int] = None,
    min_gap: float = 1e-3,
) -> HarnackAudit:
    """Sample ``ln(u(x,t1)/u(y,t2))`` and fit the smallest Harnack constants.

    ``u(x, t)`` must accept arrays of vertex ids and times. Vertices are drawn
    from the deep interior ``B_depth`` (default: two layers inside the cut),
    times uniformly from ``window`` with ``t1 < t2``.
    """
    rng = np.random.default_rng(seed)
    if depth is None:
        R = g.truncation_radius if g.truncation_radius is not None else balls.max_radius
        depth = R - 2
    pool = balls.ball(depth)
    if pool.size == 0:
        raise ValueError("empty audit domain")
    x = rng.choice(pool, size=sample_count)
    y = rng.choice(pool, size=sample_count)
    a, b = window
    # dt >= min_gap keeps rho^2/dt finite
    t2 = rng.uniform(a + min_gap, b, size=sample_count)
    t1 = a + (t2 - min_gap - a) * rng.uniform(size=sample_count)

    ux, uy = np.asarray(u(x, t1), float), np.asarray(u(y, t2), float)
    if np.any(ux <= 0) or np.any(uy <= 0):
        raise NonpositiveSample("u is not strictly positive on the audited samples")
    lhs = np.log(ux) - np.log(uy)

    sources, inverse = np.unique(x, return_inverse=True)
    hops = pairwise_hops(g, sources)
    rho = hops[inverse, y]

    dt = t2 - t1
    c1, c2 = fit_harnack_constants(lhs, dt, rho)
    if c1 is None:
        violation = float(np.max(lhs - HARNACK_GRID_MAX * dt - HARNACK_GRID_MAX * rho**2 / dt))
    else:
        violation = float(np.max(lhs - c1 * dt - c2 * rho**2 / dt))
    return HarnackAudit(
        x=x, y=y, t1=t1, t2=t2, lhs_log_ratio=lhs, rho=rho,
        fitted_C1=c1, fitted_C2=c2, max_violation=violation,
        seed=int(seed), window=(float(a), float(b)),
    )


__all__ = [
    "HeatState",
    "ImplicitHeatSolver",
    "step_heat_implicit",
    "evolve_implicit",
    "solve_heat_spectral",
    "heat_eigendecomposition",
    "Atom",
    "SpectralMeasure",
    "AncientSolution",
    "synthesize_ancient",
    "heat_residual",
    "HarnackAudit",
    "fit_harnack_constants",
    "audit_harnack",
]
