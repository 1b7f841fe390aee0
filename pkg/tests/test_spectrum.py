import math

import numpy as np
import pytest
import scipy.linalg

from heatlab.errors import ConvergenceFailure, RadiusTooSmall
from heatlab.graph import decompose_balls, from_edges, generate_family
from heatlab.laplacian import assemble_dirichlet, dirichlet_operator
from heatlab.spectrum import bottom_of_spectrum_finite, dirichlet_bottom_eigenvalue, estimate_lambda1_exhaustion

from conftest import weighted_p3


def dense_dirichlet_bottom(g, interior):
    """Brute-force oracle: dense symmetric eigensolver on M^{-1/2} L_D M^{-1/2}."""
    interior = sorted(interior)
    pos = {x: i for i, x in enumerate(interior)}
    n = len(interior)
    L = np.zeros((n, n))
    for a, b, w in g.edges():
        for x, y in ((a, b), (b, a)):
            if x in pos:
                L[pos[x], pos[x]] += w
                if y in pos:
                    L[pos[x], pos[y]] -= w
    s = 1 / np.sqrt(g.measure[interior])
    return scipy.linalg.eigvalsh(s[:, None] * L * s[None, :])[0]


def test_single_interior_vertex():
    g = generate_family("lattice_Z", 1)
    mu, v = dirichlet_bottom_eigenvalue(assemble_dirichlet(g, decompose_balls(g), 1))
    assert mu == pytest.approx(2.0, abs=1e-12)
    assert v.tolist() == [1.0]


@pytest.mark.parametrize("interior_size", [2, 3])
def test_path_interiors(interior_size):
    g = generate_family("path", interior_size + 2)
    op = dirichlet_operator(g, range(1, interior_size + 1))
    oracle = dense_dirichlet_bottom(g, range(1, interior_size + 1))
    assert oracle == pytest.approx({2: 1.0, 3: 2 - math.sqrt(2)}[interior_size], abs=1e-14)
    mu, v = dirichlet_bottom_eigenvalue(op)
    assert mu == pytest.approx(oracle, abs=1e-10)
    assert np.all(v > 0) and v.max() == 1.0


def test_residual_contract_weighted():
    g = from_edges(5, [(0, 1, 2.0), (1, 2, 0.5), (2, 3, 3.0), (3, 4, 1.0), (1, 3, 0.7)],
                   measure=np.array([1.0, 2.0, 0.5, 1.5, 1.0]))
    op = dirichlet_operator(g, [1, 2, 3])
    mu, v = dirichlet_bottom_eigenvalue(op, tol=1e-10)
    r = -op.apply(v) - mu * v
    assert math.sqrt(np.dot(op.measure * r, r)) <= 1e-10 * math.sqrt(np.dot(op.measure * v, v))
    assert mu == pytest.approx(dense_dirichlet_bottom(g, [1, 2, 3]), abs=1e-9)


def test_convergence_failure_reports_residual():
    g = generate_family("tree_regular", 5, 3)
    op = assemble_dirichlet(g, decompose_balls(g), 5)
    with pytest.raises(ConvergenceFailure) as info:
        dirichlet_bottom_eigenvalue(op, tol=1e-30, max_iterations=3)
    assert info.value.residual is not None


@pytest.mark.parametrize("radius", [3, 5, 8])
def test_tree_dirichlet_matches_dense(radius):
    g = generate_family("tree_regular", radius, 3)
    balls = decompose_balls(g)
    interior = balls.ball(radius - 1)
    mu, v = dirichlet_bottom_eigenvalue(assemble_dirichlet(g, balls, radius))
    assert mu == pytest.approx(dense_dirichlet_bottom(g, interior.tolist()), abs=1e-8)
    assert np.all(v > 0)


def test_exhaustion_on_z():
    g = generate_family("lattice_Z", 100)
    est = estimate_lambda1_exhaustion(g, decompose_balls(g), tol=1e-3)
    values = [v for _, v in est.per_radius]
    assert [n for n, _ in est.per_radius] == list(range(2, 100))
    assert all(b <= a for a, b in zip(values, values[1:]))
    # B_n in Z is a path of 2n+1 vertices
    for n, v in est.per_radius[::10]:
        assert v == pytest.approx(2 * (1 - math.cos(math.pi / (2 * n + 2))), rel=1e-7)
    assert est.lambda1 < 1e-2 and est.converged


def test_exhaustion_on_tree_is_an_upper_bound_decreasing():
    g = generate_family("tree_regular", 8, 3)
    est = estimate_lambda1_exhaustion(g, decompose_balls(g))
    values = [v for _, v in est.per_radius]
    assert all(b <= a for a, b in zip(values, values[1:]))
    assert all(v > 3 - 2 * math.sqrt(2) for v in values)
    assert not est.converged


def test_exhaustion_guards():
    with pytest.raises(RadiusTooSmall):
        estimate_lambda1_exhaustion(generate_family("cycle", 6), decompose_balls(generate_family("cycle", 6)))
    g = generate_family("lattice_Z", 2)
    with pytest.raises(RadiusTooSmall):
        estimate_lambda1_exhaustion(g, decompose_balls(g))


@pytest.mark.parametrize("g", [generate_family("cycle", 4), generate_family("path", 3), weighted_p3((0.3, 7.0), (2.0, 0.1, 5.0))])
def test_finite_bottom_is_zero(g):
    assert bottom_of_spectrum_finite(g) == pytest.approx(0.0, abs=1e-12)


def test_finite_bottom_sparse_path():
    g = generate_family("lattice_Z2", 35)
    assert g.vertex_count > 2000
    assert bottom_of_spectrum_finite(g) == pytest.approx(0.0, abs=1e-8)
