import os
from pathlib import Path

import numpy as np
import pytest

from ihgnn.examples.fixtures import fixture_graphs
from ihgnn.graph import Graph


def pytest_addoption(parser):
    parser.addoption(
        "--repeat", action="store", help="Number of times to repeat each test"
    )


def pytest_generate_tests(metafunc):
    if metafunc.config.option.repeat:
        count = int(metafunc.config.option.repeat)
    else:
        count = 100

    if "random_graph" in metafunc.fixturenames:
        if "tmp_ct" not in metafunc.fixturenames:
            metafunc.fixturenames.append("tmp_ct")
        metafunc.parametrize("tmp_ct", range(count))

    if "fixture_graph" in metafunc.fixturenames:
        metafunc.parametrize("fixture_graph", fixture_graphs)


@pytest.fixture(scope="function")
def random_graph(tmp_ct) -> Graph:
    rng = np.random.default_rng(tmp_ct)
    return Graph.random(int(rng.integers(1, 9)), 0.4, 3, rng)


@pytest.fixture(scope="session")
def datasets_dir() -> Path:
    """Directorio con los datasets reales; los tests que lo usan se saltan sin él."""
    root = os.environ.get("IHGNN_DATASETS")
    if not root or not Path(root).is_dir():
        pytest.skip("IHGNN_DATASETS no apunta a un directorio")
    return Path(root)
