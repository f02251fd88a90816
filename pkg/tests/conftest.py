import numpy as np
import pytest

from shapescene import build_database
from shapescene.toys import make_box, toy_shape_set


def _toy_shapes():
    return [(0 if cls == "box" else 1, mesh) for cls, mesh in toy_shape_set()]


@pytest.fixture(scope="session")
def toy_db():
    """2 classes x 5 exemplars from the bundled parametric toy set."""
    return build_database(_toy_shapes(), k_per_class=5, seed=42,
                          classes=["box", "cylinder"])


@pytest.fixture(scope="session")
def toy_db_dense():
    """Same database with a denser surface sampling for collision tests."""
    return build_database(_toy_shapes(), k_per_class=5, seed=42,
                          classes=["box", "cylinder"], points_per_entry=2048)


@pytest.fixture(scope="session")
def cube_db():
    """Single-class database whose only exemplar is an exact unit cube, so
    analytic containment tests can serve as independent occupancy oracles."""
    return build_database([(0, make_box())], k_per_class=1, seed=0,
                          classes=["box"])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
