from dataclasses import replace

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dlgp import model as dl
from dlgp import net
from dlgp.data_io import Standardizer, TrainingDataset
from dlgp.gp_core import KernelHyper

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_model(rng, N=6, p=3, q=2, d=2, mode="full", hidden=4):
    """Small model with every parameter perturbed away from its initial value."""
    data = TrainingDataset(rng.normal(size=(N, d)), rng.normal(size=(N, p)))
    specs = [(d, hidden, "tanh"), (hidden, q, "tanh")]
    m = dl.init_model(data, specs, seed=int(rng.integers(1 << 30)), mode=mode)
    m = replace(
        m,
        mixture=rng.normal(size=(p, q)),
        bias=0.3 * rng.normal(size=p),
        noise_sd=0.5 * np.exp(0.3 * rng.normal(size=p)),
        kernels=[KernelHyper(float(np.exp(rng.normal(scale=0.3))), float(np.exp(rng.uniform(-6, -1))))
                 for _ in range(q)],
    )
    return m, data


def identity_model(p, q, d=1, **fields):
    """Model with identity input/output scaling and a single identity layer."""
    layer = net.Layer(np.eye(q, d), np.zeros(q), net.Activation.IDENTITY)
    base = dict(network=net.NetworkParams([layer]), mixture=np.ones((p, q)), bias=np.zeros(p),
                noise_sd=np.full(p, 0.1), kernels=[KernelHyper(1.0, 0.0) for _ in range(q)],
                input_stats=Standardizer.identity(d), output_stats=Standardizer.identity(p))
    base.update(fields)
    return dl.DlgpModel(**base)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
