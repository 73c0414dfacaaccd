import numpy as np
import pytest

from formsim import Framework, ReferenceShape, SensingGraph

SQUARE_EDGES = ((1, 2), (2, 3), (3, 1), (4, 3), (4, 1))
SQUARE_POINTS = np.array([[0.0, 0.0], [15.0, 0.0], [15.0, 15.0], [0.0, 15.0]])

TETRA_EDGES = ((1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4))
TETRA_POINTS = np.array([
    [0.0, 0.0, 0.0],
    [1.0, 0.0, 0.0],
    [0.5, np.sqrt(3.0) / 2.0, 0.0],
    [0.5, np.sqrt(3.0) / 6.0, np.sqrt(2.0 / 3.0)],
])

# Offset patterns that spin and scale the unit-diagonal square; both are
# hand-checkable against the induced per-agent velocities.
SPIN_PATTERN = np.array([-1.0, -1.0, 0.0, 1.0, -1.0,
                         -1.0, -1.0, 0.0, 1.0, -1.0])
SCALE_PATTERN = np.array([1.0, 1.0, 0.0, 1.0, 1.0,
                          -1.0, -1.0, 0.0, -1.0, -1.0])


@pytest.fixture(scope="session")
def square_graph():
    return SensingGraph(4, SQUARE_EDGES)


@pytest.fixture(scope="session")
def square_framework(square_graph):
    return Framework.from_points(square_graph, SQUARE_POINTS)


@pytest.fixture(scope="session")
def square_ref(square_framework):
    return ReferenceShape(square_framework)


@pytest.fixture(scope="session")
def square_spaces(square_ref):
    return square_ref.spaces


@pytest.fixture(scope="session")
def tetra_graph():
    return SensingGraph(4, TETRA_EDGES)


@pytest.fixture(scope="session")
def tetra_framework(tetra_graph):
    return Framework.from_points(tetra_graph, TETRA_POINTS)


@pytest.fixture(scope="session")
def tetra_ref(tetra_framework):
    return ReferenceShape(tetra_framework)


def random_planar_framework(rng, vertex_count=4):
    """Non-degenerate random framework over the square's topology."""
    graph = SensingGraph(4, SQUARE_EDGES)
    while True:
        points = rng.uniform(-5.0, 5.0, (vertex_count, 2))
        diffs = points[:, None, :] - points[None, :, :]
        dists = np.linalg.norm(diffs, axis=2) + np.eye(vertex_count)
        if dists.min() > 0.5:
            return Framework.from_points(graph, points)
