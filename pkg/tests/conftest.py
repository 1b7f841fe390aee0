import numpy as np
import pytest
from hypothesis import strategies as st

from heatlab.graph import decompose_balls, from_edges, generate_family


@pytest.fixture(scope="session")
def z40():
    g = generate_family("lattice_Z", 40)
    return g, decompose_balls(g)


@pytest.fixture(scope="session")
def z30():
    g = generate_family("lattice_Z", 30)
    return g, decompose_balls(g)


@pytest.fixture(scope="session")
def tree10():
    g = generate_family("tree_regular", 10, 3)
    return g, decompose_balls(g)


def weighted_p3(weights=(2.0, 1.0), measure=(1.0, 2.0, 1.0)):
    return from_edges(3, [(0, 1, weights[0]), (1, 2, weights[1])], measure=np.array(measure))


@st.composite
def connected_graphs(draw, max_vertices=12):
    """Random connected weighted graphs: a random spanning tree plus extra edges."""
    n = draw(st.integers(min_value=1, max_value=max_vertices))
    positive = st.floats(min_value=0.1, max_value=10.0, allow_nan=False)
    edges = {}
    for v in range(1, n):
        parent = draw(st.integers(min_value=0, max_value=v - 1))
        edges[(parent, v)] = draw(positive)
    extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=2 * n))
    for a, b in extra:
        if a != b:
            edges.setdefault((min(a, b), max(a, b)), draw(positive))
    measure = np.array(draw(st.lists(positive, min_size=n, max_size=n)))
    return from_edges(n, [(a, b, w) for (a, b), w in edges.items()], measure=measure)
