"""Acceptance criteria, one test each; every test prints a single PASS/FAIL line."""
import math
import time

import numpy as np
import pytest
import scipy.linalg

from heatlab.eigenfunctions import (
    check_growth_bounds,
    construct_positive_eigenfunction,
    growth_profile,
    lower_ratio_bound,
    one_step_harnack_violations,
    verify_zero_propagation,
)
from heatlab.errors import AdmissibilityViolation, NotAdmissible
from heatlab.graph import certify_bounded_geometry, decompose_balls, generate_family
from heatlab.heat import (
    HeatState,
    ImplicitHeatSolver,
    SpectralMeasure,
    audit_harnack,
    solve_heat_spectral,
    synthesize_ancient,
)
from heatlab.laplacian import assemble_dirichlet, check_maximum_principle
from heatlab.liouville import dichotomy_sweep, spatial_lower_bound
from heatlab.spectrum import dirichlet_bottom_eigenvalue, estimate_lambda1_exhaustion

from test_spectrum import dense_dirichlet_bottom

TREE_LAMBDA1 = 3 - 2 * math.sqrt(2)
GOLDEN_RATE = math.log((3 + math.sqrt(5)) / 2)


@pytest.fixture
def verdict(capsys):
    def emit(k, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {k}: {'PASS' if ok else 'FAIL'} - {detail}")
        assert ok, detail
    return emit


def eigenfunction_cases():
    """Positive eigenfunctions used by criteria 3-5 and 10: (label, graph, balls, c0, w)."""
    cases = []
    z = generate_family("lattice_Z", 40)
    tree = generate_family("tree_regular", 10, 3)
    for label, g in (("Z", z), ("tree3", tree)):
        balls = decompose_balls(g)
        c0 = certify_bounded_geometry(g).c0
        for lam in (0.0, 0.5, 1.0):
            cases.append((f"{label} lam={lam}", g, balls, c0, construct_positive_eigenfunction(g, balls, lam)))
    return cases


@pytest.fixture(scope="module")
def cases():
    return eigenfunction_cases()


def test_criterion_1_exhaustion_on_z(verdict):
    start = time.perf_counter()
    g = generate_family("lattice_Z", 100)
    est = estimate_lambda1_exhaustion(g, decompose_balls(g))
    elapsed = time.perf_counter() - start
    vals = [v for _, v in est.per_radius]
    nonincreasing = all(b <= a for a, b in zip(vals, vals[1:]))
    ok = nonincreasing and vals[-1] < 1e-2 and elapsed < 5
    verdict(1, ok, f"final={vals[-1]:.4g} (<1e-2), nonincreasing={nonincreasing}, runtime={elapsed:.2f}s (<5s)")


def test_criterion_2_exhaustion_on_tree(verdict):
    # dense cross-check of the sparse Dirichlet solver where brute force is cheap
    cross = []
    for R in range(3, 9):
        g = generate_family("tree_regular", R, 3)
        balls = decompose_balls(g)
        mu, _ = dirichlet_bottom_eigenvalue(assemble_dirichlet(g, balls, R))
        cross.append(abs(mu - dense_dirichlet_bottom(g, balls.ball(R - 1).tolist())))
    start = time.perf_counter()
    g = generate_family("tree_regular", 12, 3)
    est = estimate_lambda1_exhaustion(g, decompose_balls(g))
    elapsed = time.perf_counter() - start
    err = abs(est.lambda1 - TREE_LAMBDA1)
    ok = err <= 1e-2 and elapsed < 60 and max(cross) <= 1e-8
    verdict(2, ok, f"estimate={est.lambda1:.6f} vs 3-2sqrt2={TREE_LAMBDA1:.6f}, |err|={err:.4f} (<=1e-2), "
                   f"dense cross-check max diff={max(cross):.1e}, runtime={elapsed:.2f}s (<60s)")


def test_criterion_3_growth_on_z(verdict):
    start = time.perf_counter()
    g = generate_family("lattice_Z", 40)
    balls = decompose_balls(g)
    c0 = certify_bounded_geometry(g).c0
    w = construct_positive_eigenfunction(g, balls, 1.0)
    prof = growth_profile(w, balls, 0.5)
    elapsed = time.perf_counter() - start
    rate_err = max(abs(prof.rate_upper - GOLDEN_RATE), abs(prof.rate_lower - GOLDEN_RATE))
    bound = lower_ratio_bound(1.0, c0)
    min_ratio = float(prof.ratios[: w.radius - 1].min())
    ok = rate_err <= 0.05 and min_ratio >= bound and bound == 9 / 8 and elapsed < 5
    verdict(3, ok, f"rates [{prof.rate_lower:.4f}, {prof.rate_upper:.4f}] vs {GOLDEN_RATE:.6f} (+-0.05), "
                   f"min ratio={min_ratio:.4f} >= {bound}, runtime={elapsed:.2f}s (<5s)")


def test_criterion_4_upper_growth_bound(verdict, cases):
    total, bad = 0, []
    for label, g, balls, c0, w in cases:
        violations = one_step_harnack_violations(g, w, c0)
        total += 1
        if violations:
            bad.append((label, len(violations)))
        report = check_growth_bounds(growth_profile(w, balls), w.lam, certify_bounded_geometry(g), nonconstant=w.is_nonconstant())
        if not report.rate_upper_ok:
            bad.append((label, "rate"))
    verdict(4, not bad, f"{total} eigenfunctions on Z and tree3, lam in {{0,0.5,1}}, violations={bad or 0}")


def test_criterion_5_maximum_principle(verdict, cases):
    checked, bad = 0, []
    for label, g, balls, c0, w in cases:
        prof = growth_profile(w, balls)
        for n in range(w.radius):
            checked += 1
            if not (prof.attained_on_sphere[n] and check_maximum_principle(g, balls, w.values, n)):
                bad.append((label, n))
    verdict(5, not bad, f"{checked} (eigenfunction, n) pairs, violations={len(bad)}")


def test_criterion_6_heat_solvers(verdict):
    g = generate_family("path", 2)
    tau, t = 1 / 64, 0.5
    solver = ImplicitHeatSolver(g, tau)
    state = HeatState(g, 0.0, [1.0, 0.0])
    drift = 0.0
    for _ in range(round(t / tau)):
        new = solver.step(state)
        drift = max(drift, abs(new.mass - state.mass) / state.mass)
        state = new
    spectral = solve_heat_spectral(g, [1.0, 0.0], t).values
    target = np.array([0.683940, 0.316060])
    implicit_err = float(np.abs(state.values - target).max())
    spectral_err = float(np.abs(spectral - target).max())
    cross = float(np.abs(state.values - spectral).max())

    rng = np.random.default_rng(0)
    big = generate_family("lattice_Z2", 6)
    nonneg = True
    for graph in (g, big):
        trials = rng.uniform(size=(graph.vertex_count, 1000)) * (rng.uniform(size=(graph.vertex_count, 1000)) < 0.5)
        out = ImplicitHeatSolver(graph, tau).solve(trials)
        nonneg &= bool(np.all(out >= 0))
        mass_in, mass_out = graph.measure @ trials, graph.measure @ out
        drift = max(drift, float(np.max(np.abs(mass_out - mass_in) / np.maximum(mass_in, 1e-300))))
    ok = implicit_err <= 5e-2 and spectral_err <= 5e-2 and cross <= 5e-2 and drift <= 1e-10 and nonneg
    verdict(6, ok, f"implicit err={implicit_err:.2e}, spectral err={spectral_err:.1e}, solver gap={cross:.2e} (<=5e-2), "
                   f"mass drift={drift:.1e} (<=1e-10), nonnegative on 2x1000 random data={nonneg}")


def test_criterion_7_harnack_audit(verdict):
    start = time.perf_counter()
    g = generate_family("lattice_Z", 30)
    balls = decompose_balls(g)
    w = construct_positive_eigenfunction(g, balls, 1.0)
    sol = synthesize_ancient(SpectralMeasure.from_atoms([(1.0, 1.0, w)], 0.0))
    audit = audit_harnack(sol, g, balls, sample_count=1000, seed=0)
    elapsed = time.perf_counter() - start
    finite = audit.fitted_C1 is not None and math.isfinite(audit.fitted_C1) and math.isfinite(audit.fitted_C2)
    ok = finite and audit.max_violation <= 0 and audit.sample_count == 1000 and elapsed < 10
    verdict(7, ok, f"C1={audit.fitted_C1}, C2={audit.fitted_C2}, max_violation={audit.max_violation:.3g} (<=0), "
                   f"runtime={elapsed:.2f}s (<10s)")


def test_criterion_8_dichotomy_sweep(verdict):
    start = time.perf_counter()
    sweeps = [
        dichotomy_sweep("lattice_Z", [0.0, 0.5, 1.0], 40),
        dichotomy_sweep("tree_regular", [-0.1, 0.0, 1.0], 10, degree=3, seed=7),
    ]
    elapsed = time.perf_counter() - start
    problems = []
    for sweep in sweeps:
        for row in sweep.rows:
            v = row.verdict
            tag = f"{sweep.family} lam={row.lam}"
            if v is None:
                problems.append(f"{tag}: {row.error}")
                continue
            c = v.classification
            if not v.consistent_with_theorem:
                problems.append(f"{tag}: inconsistent")
            if row.lam == 0 and not (v.stationary and v.harmonic):
                problems.append(f"{tag}: not stationary/harmonic")
            if row.lam > 0 and c.spatial_rate < spatial_lower_bound(row.lam, row.c0) - 0.05:
                problems.append(f"{tag}: spatial rate {c.spatial_rate:.4f}")
            if row.lam == -0.1 and abs(c.temporal_rate - 0.1) > 0.02:
                problems.append(f"{tag}: temporal rate {c.temporal_rate:.4f}")
    ok = not problems and elapsed < 120
    verdict(8, ok, f"{sum(len(s.rows) for s in sweeps)} rows, problems={problems or 0}, runtime={elapsed:.2f}s (<120s)")


def test_criterion_9_admissibility_gate(verdict):
    g = generate_family("lattice_Z", 40)
    balls = decompose_balls(g)
    est = estimate_lambda1_exhaustion(g, balls)
    w = construct_positive_eigenfunction(g, balls, 0.0)
    outcomes = []
    try:
        synthesize_ancient(SpectralMeasure.from_atoms([(-0.5, 1.0, w)], est.lambda1))
        outcomes.append("synthesis accepted lam=-0.5")
    except AdmissibilityViolation:
        pass
    try:
        construct_positive_eigenfunction(g, balls, -0.1)
        outcomes.append("construction accepted lam=-0.1")
    except NotAdmissible:
        pass
    verdict(9, not outcomes, "AdmissibilityViolation at -0.5, NotAdmissible at -0.1" if not outcomes else "; ".join(outcomes))


def test_criterion_10_zero_propagation(verdict, cases):
    fields = [(label, g, w) for label, g, _, _, w in cases]
    g = generate_family("tree_regular", 10, 3)
    fields.append(("tree3 lam=-0.1", g, construct_positive_eigenfunction(g, decompose_balls(g), -0.1)))
    z = generate_family("lattice_Z", 100)
    for lam in (0.01, 2.0, 5.0):
        fields.append((f"Z100 lam={lam}", z, construct_positive_eigenfunction(z, decompose_balls(z), lam)))
    counterexamples = [label for label, g, w in fields if not verify_zero_propagation(g, w)]
    verdict(10, not counterexamples, f"{len(fields)} eigenfunctions checked, counterexamples={counterexamples or 0}")
