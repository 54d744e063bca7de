import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    deadline=None,
    max_examples=int(os.environ.get("HYPOTHESIS_EXAMPLES", "40")),
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

# filled by tests/test_acceptance.py, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_spd(rng, dim, size=None, log_range=3.0):
    """SPD matrices with eigenvalues spread over ``10**[-log_range, log_range]``."""
    shape = (() if size is None else (size,))
    a = rng.standard_normal(shape + (dim, dim))
    q, _ = np.linalg.qr(a)
    w = 10.0 ** rng.uniform(-log_range, log_range, shape + (dim,))
    return np.einsum("...ik,...k,...jk->...ij", q, w, q)
