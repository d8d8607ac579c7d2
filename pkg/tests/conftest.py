import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from swerom.experiments import offline_compress, offline_generate
from swerom.fom import RunConfig
from swerom.sampling import ParameterGrid

settings.register_profile(
    "repo", max_examples=100, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("repo")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_config():
    return RunConfig(Nx=80, T=0.6, n_snapshots=21)


@pytest.fixture(scope="session")
def small_store(tmp_path_factory, small_config):
    """A compressed 4x5 Chebyshev store on a coarse grid, shared across tests."""
    root = tmp_path_factory.mktemp("store") / "train"
    grid = ParameterGrid.build(4, 5)
    store = offline_generate(root, grid, small_config)
    offline_compress(store, 1e-6, 1e-6)
    return store


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import VERDICTS

    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(VERDICTS):
        ok, detail = VERDICTS[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
