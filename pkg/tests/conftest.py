import os

import numpy as np
import pytest

import netconsist as nc

DATA_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "data")
SMOKING_DATA = os.path.join(DATA_DIR, "smoking.csv")
SMOKING_COV = os.path.join(DATA_DIR, "smoking_cov.csv")
ERECTILE_DATA = os.path.join(DATA_DIR, "erectile.csv")


def smoking_available() -> bool:
    return os.path.exists(SMOKING_DATA) and os.path.exists(SMOKING_COV)


def erectile_available() -> bool:
    return os.path.exists(ERECTILE_DATA)


requires_smoking = pytest.mark.skipif(not smoking_available(),
                                      reason="smoking-cessation fixture not present")
requires_erectile = pytest.mark.skipif(not erectile_available(),
                                       reason="erectile-dysfunction fixture not present")


@pytest.fixture(scope="session")
def smoking_network():
    if not smoking_available():
        pytest.skip("smoking-cessation fixture not present")
    net = nc.read_network(SMOKING_DATA, SMOKING_COV, reference="A")
    net, removed = nc.prune_disconnected(net)
    assert removed == ()
    return net


def triangle_rows(b_true=0.0, seed=7, se=0.1, n_per=4, mu=(0.5, 0.2)):
    """Two-arm triangle data: AB, AC and BC studies with known truth."""
    rng = np.random.default_rng(seed)
    rows = []
    k = 0
    means = {("A", "B"): mu[0], ("A", "C"): mu[1], ("B", "C"): mu[1] - mu[0] + b_true}
    for pair, mean in means.items():
        for _ in range(n_per):
            k += 1
            rows.append({"study": f"s{k:02d}", "t1": pair[0], "t2": pair[1],
                         "y": mean + se * rng.standard_normal(), "se": se})
    return rows


@pytest.fixture
def triangle_network():
    return nc.load_network(triangle_rows(), reference="A")


def k4_rows(seed=3, se=0.2):
    """Complete two-arm network on four treatments."""
    rng = np.random.default_rng(seed)
    mu = {"A": 0.0, "B": 0.4, "C": -0.2, "D": 0.7}
    rows = []
    k = 0
    pairs = [("A", "B"), ("A", "C"), ("A", "D"), ("B", "C"), ("B", "D"), ("C", "D")]
    for t1, t2 in pairs:
        for _ in range(2):
            k += 1
            rows.append({"study": f"k{k:02d}", "t1": t1, "t2": t2,
                         "y": mu[t2] - mu[t1] + se * rng.standard_normal(), "se": se})
    return rows


@pytest.fixture
def k4_network():
    return nc.load_network(k4_rows(), reference="A")
