import sys
from pathlib import Path

import numpy as np
import pytest

from optidesign import model

sys.path.insert(0, str(Path(__file__).parent))

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def p1_pool() -> model.Pool:
    """Scalar two-experiment pool with hand-checkable arithmetic.

    p = 1, unit prior, identity target. Experiment 1 contributes two unit
    observations (information increment 2), experiment 2 one (increment 1).
    """
    return model.load_pool(DATA / "p1.json")


@pytest.fixture(scope="session")
def pool2d() -> model.Pool:
    """Two-dimensional pool with one row per experiment and a 1x2 target."""
    experiments = [
        model.make_experiment(0, np.array([[1.0, 0.0]]), np.array([[1.0]])),
        model.make_experiment(1, np.array([[0.0, 1.0]]), np.array([[0.5]])),
        model.make_experiment(2, np.array([[1.0, 1.0]]), np.array([[2.0]])),
    ]
    return model.Pool(
        experiments=experiments,
        prior_mean=np.zeros(2),
        prior_cov=np.eye(2),
        target=np.array([[1.0, 1.0]]),
    )
