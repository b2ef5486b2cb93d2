import sys

import numpy as np
import pytest
from hypothesis import settings

from rootcp.bench import SyntheticSpec, generate_table

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def ridge_instance(seed, n=60, p=8, noise=1.0, informative=None):
    """Standardized hold-out instance: (Dataset, held-out centered response)."""
    spec = SyntheticSpec(n=n, p=p, n_informative=informative, noise_sd=noise, seed=seed)
    data, y_true, _ = generate_table(spec).holdout()
    return data, y_true


@pytest.fixture
def small_data():
    return ridge_instance(0)[0]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(mod.RESULTS):
        terminalreporter.write_line(line)
