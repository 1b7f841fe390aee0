import math

import numpy as np
import pytest

from heatlab.eigenfunctions import as_eigenfunction, construct_positive_eigenfunction
from heatlab.errors import DegenerateWindow
from heatlab.graph import decompose_balls, generate_family
from heatlab.heat import SpectralMeasure, synthesize_ancient
from heatlab.liouville import (
    HAS_NEGATIVE,
    HAS_POSITIVE,
    ONLY_ZERO,
    classify_growth,
    dichotomy_sweep,
    render_verdict,
    spatial_lower_bound,
)

GOLDEN_RATE = math.log((3 + math.sqrt(5)) / 2)


def single_atom(g, balls, lam, lambda1=0.0):
    w = construct_positive_eigenfunction(g, balls, lam)
    return synthesize_ancient(SpectralMeasure.from_atoms([(lam, 1.0, w)], lambda1))


def test_constant_atom(z40):
    g, balls = z40
    ones = as_eigenfunction(g, balls, 0.0, np.ones(g.vertex_count))
    sol = synthesize_ancient(SpectralMeasure.from_atoms([(0.0, 1.0, ones)], 0.0))
    c = classify_growth(sol, balls)
    assert c.spatial_rate == pytest.approx(0, abs=1e-12) and c.temporal_rate == pytest.approx(0, abs=1e-12)
    assert c.spatial_subexponential and c.temporal_subexponential
    v = render_verdict(sol, c)
    assert v.measure_support == ONLY_ZERO and v.stationary and v.harmonic and v.consistent_with_theorem


def test_positive_atom_on_z(z40):
    g, balls = z40
    sol = single_atom(g, balls, 1.0)
    c = classify_growth(sol, balls)
    assert abs(c.spatial_rate - GOLDEN_RATE) <= 0.02
    assert not c.spatial_subexponential
    # u(y0, t) = e^t decays backward, so its rate is -1
    assert c.temporal_rate == pytest.approx(-1.0, abs=1e-9) and c.temporal_subexponential
    assert c.y0 == g.center and c.t_star == -1.0


def test_negative_atom_on_tree(tree10):
    g, balls = tree10
    sol = single_atom(g, balls, -0.1, lambda1=0.18)
    c = classify_growth(sol, balls)
    assert c.temporal_rate == pytest.approx(0.1, abs=1e-9)
    assert not c.temporal_subexponential
    v = render_verdict(sol, c)
    assert v.measure_support == HAS_NEGATIVE and not v.stationary and v.consistent_with_theorem


def test_two_atom_verdict(z40):
    g, balls = z40
    w1 = construct_positive_eigenfunction(g, balls, 1.0)
    w0 = construct_positive_eigenfunction(g, balls, 0.0)
    sol = synthesize_ancient(SpectralMeasure.from_atoms([(1.0, 0.5, w1), (0.0, 0.5, w0)], 0.0))
    v = render_verdict(sol, classify_growth(sol, balls))
    assert v.measure_support == HAS_POSITIVE
    assert not v.classification.spatial_subexponential
    assert not v.stationary and v.consistent_with_theorem


def test_absurd_tolerance_is_flagged(z40):
    g, balls = z40
    sol = single_atom(g, balls, 1.0)
    v = render_verdict(sol, classify_growth(sol, balls, rate_tol=10.0))
    assert v.classification.spatial_subexponential
    assert v.consistent_with_theorem is False


def test_window_guards(z40):
    g, balls = z40
    sol = single_atom(g, balls, 1.0)
    with pytest.raises(DegenerateWindow):
        classify_growth(sol, balls, time_grid=[-5.0, -2.0])
    with pytest.raises(DegenerateWindow):
        classify_growth(sol, balls, t_star=2.0)
    g5 = generate_family("lattice_Z", 5)
    b5 = decompose_balls(g5)
    with pytest.raises(DegenerateWindow):
        classify_growth(single_atom(g5, b5, 1.0), b5)


def test_sweep_on_z():
    res = dichotomy_sweep("lattice_Z", [0.0, 0.5, 1.0], 40)
    assert [r.lam for r in res.rows] == [0.0, 0.5, 1.0]
    assert all(r.ok for r in res.rows) and res.all_consistent
    zero, half, one = (r.verdict for r in res.rows)
    assert zero.stationary and zero.harmonic and zero.measure_support == ONLY_ZERO
    rates = [v.classification.spatial_rate for v in (zero, half, one)]
    assert rates == sorted(rates)
    for row in res.rows[1:]:
        assert row.verdict.classification.spatial_rate >= spatial_lower_bound(row.lam, 2.0) - 0.05
    # mu(lambda) = (2 + lambda + sqrt((2 + lambda)^2 - 4)) / 2
    mu_half = (2.5 + math.sqrt(2.5**2 - 4)) / 2
    assert abs(half.classification.spatial_rate - math.log(mu_half)) <= 0.02


def test_sweep_on_tree():
    res = dichotomy_sweep("tree_regular", [-0.1, 0.0, 1.0], 10, degree=3, seed=7)
    neg, zero, pos = (r.verdict for r in res.rows)
    assert res.all_consistent and res.seed == 7
    assert abs(neg.classification.temporal_rate - 0.1) <= 0.02 and not neg.classification.temporal_subexponential
    assert zero.stationary and zero.harmonic
    assert not pos.classification.spatial_subexponential
    assert pos.classification.spatial_rate >= spatial_lower_bound(1.0, 3.0) - 0.05


def test_sweep_records_inadmissible_row():
    res = dichotomy_sweep("lattice_Z", [-0.5, 1.0], 20)
    assert res.rows[0].error == "NotAdmissible" and res.rows[0].verdict is None
    assert res.rows[1].ok and res.all_consistent


def test_sweep_autoscales_small_lambda():
    # true rate ln mu(0.001) ~ 0.0316; at radius 20 the cut flattens it below rate_tol
    fixed = dichotomy_sweep("lattice_Z", [0.001], 20, autoscale=False).rows[0]
    assert fixed.verdict.classification.spatial_subexponential
    assert not fixed.verdict.consistent_with_theorem
    row = dichotomy_sweep("lattice_Z", [0.001], 20).rows[0]
    assert row.radius > 20
    mu = (2.001 + math.sqrt(2.001**2 - 4)) / 2
    assert row.verdict.classification.spatial_rate == pytest.approx(math.log(mu), rel=0.05)
    assert row.verdict.consistent_with_theorem


@pytest.mark.parametrize("family,degree,radius", [("lattice_Z", None, 30), ("tree_regular", 3, 9), ("lattice_Z2", None, 12)])
def test_spatial_rate_monotone_and_stationarity_equivalence(family, degree, radius):
    res = dichotomy_sweep(family, [0.0, 0.25, 0.5, 1.0, 2.0], radius, degree=degree, autoscale=False)
    rates = [r.verdict.classification.spatial_rate for r in res.rows]
    assert all(b >= a for a, b in zip(rates, rates[1:]))
    for r in res.rows:
        assert r.verdict.stationary == (r.verdict.measure_support == ONLY_ZERO)
