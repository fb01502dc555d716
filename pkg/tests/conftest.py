import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: acceptance criteria runs")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_sym(rng, p, scale=1.0):
    a = rng.standard_normal((p, p)) * scale
    return 0.5 * (a + a.T)


def random_frame(rng, p):
    q, r = np.linalg.qr(rng.standard_normal((p, p)))
    return q * np.sign(np.diag(r))
