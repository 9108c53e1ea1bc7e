import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)


def pytest_addoption(parser):
    parser.addoption(
        "--skip-slow-acceptance",
        action="store_true",
        default=False,
        help="skip the long end-to-end acceptance criteria (8 and 9)",
    )
