import numpy as np
import pytest

from randprod import kernels


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    previous = kernels.set_backend(request.param)
    yield request.param
    kernels.set_backend(previous)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def near_identity(rng, k, size, radius):
    """Random matrices I + y with ||y||_F = radius * u, u uniform in (0, 1)."""
    y = rng.normal(size=(size, k, k))
    y *= (radius * rng.uniform(size=size) / np.linalg.norm(y, axis=(1, 2)))[:, None, None]
    return np.eye(k) + y


def pytest_terminal_summary(terminalreporter):
    lines = []
    for key in ("passed", "failed"):
        for rep in terminalreporter.stats.get(key, []):
            if getattr(rep, "when", "call") == "call":
                lines += [v for k, v in getattr(rep, "user_properties", []) if k == "criterion"]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
