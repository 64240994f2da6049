import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

DATA_DIR = os.path.join(os.path.dirname(__file__), "..", "data", "uci")


@pytest.fixture(scope="session")
def uci_dir():
    if not os.path.exists(os.path.join(DATA_DIR, "adult.data")):
        pytest.skip("UCI data files not present under data/uci/")
    return DATA_DIR


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_mixture():
    from arlkit import datasets

    return datasets.gaussian_mixture(1200, 400, seed=0)
