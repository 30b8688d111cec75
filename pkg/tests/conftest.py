import sys
import warnings
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gelflow.mesh import gen_ellipse_mesh, gen_rect_mesh  # noqa: E402
from gelflow.model import BoundaryLoad, InitialData, MaterialParams  # noqa: E402
from gelflow.scheme import Discretization, MeshConstraintWarning  # noqa: E402

CONFIG_DIR = Path(__file__).resolve().parents[1] / "src" / "gelflow" / "configs"


@pytest.fixture(scope="session")
def pnipa():
    return MaterialParams.pnipa()


@pytest.fixture(scope="session")
def square35():
    return gen_rect_mesh(35, 35)


@pytest.fixture(scope="session")
def ellipse_mesh():
    return gen_ellipse_mesh(0.4, 0.2, 15, 80)


@pytest.fixture(scope="session")
def disc35(square35, pnipa):
    return Discretization(square35, pnipa)


@pytest.fixture
def quiet():
    """Silence the theta warning for runs that deliberately use large steps."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MeshConstraintWarning)
        yield


def load_test1():
    return BoundaryLoad.tangential(0.1)


def load_test2():
    return BoundaryLoad.per_tag({1: (0.5, 0.0), 2: (-0.5, 0.0)})


def dilation(c, center=(0.5, 0.5)):
    """u0 = (c/2)(x - center), with div u0 = c."""
    center = np.asarray(center, dtype=float)
    return InitialData(lambda x: 0.5 * c * (np.atleast_2d(x) - center),
                       lambda x: np.full(len(np.atleast_2d(x)), float(c)),
                       lambda x: np.tile(0.5 * c * np.eye(2), (len(np.atleast_2d(x)), 1, 1)))
