import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("lab", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("lab")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def smooth_static_fields(t, x):
    """Divergence-free, bounded test fields used by several integrator checks."""
    x = np.asarray(x)
    E = 0.3 * np.stack([np.sin(x[:, 1]), np.cos(x[:, 2]), np.sin(x[:, 0])], axis=1)
    B = 0.5 * np.stack([np.cos(x[:, 2]), np.sin(x[:, 0]), np.cos(x[:, 1])], axis=1)
    return E, B


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
