import numpy as np
import pytest

from flexpool import kernels

BACKENDS = sorted(kernels.available_backends())


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Route every hot kernel through one backend for the duration of a test."""
    mod = kernels.available_backends()[request.param]
    for name in ("aggregate_eval", "distribute_fill", "pe_project_newton", "pe_dykstra"):
        monkeypatch.setattr(kernels, name, getattr(mod, name))
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
