import numpy as np
import pytest

from xvaboundary.config import load_config, shipped_config
from xvaboundary.ratesim import CirParams, LmmParams, simulate_paths
from xvaboundary.runner import simulate

REF_SEED = 20150731


@pytest.fixture(scope="session")
def ref_cfg():
    cfg, _, _ = load_config(shipped_config("case1_unsecured"))
    return cfg


@pytest.fixture(scope="session")
def ref_params(ref_cfg):
    return ref_cfg.model.params()


@pytest.fixture(scope="session")
def ref_paths(ref_cfg):
    """Reference pack: 4096 paths, monthly to 10y."""
    return simulate(ref_cfg)


def flat_params(rate=0.02, tenor_step=1.0, horizon=10.0, vol=0.0, eta=0.0, shift=0.0):
    tenor = np.arange(0.0, horizon + 1e-9, tenor_step)
    n = tenor.size - 1
    loads = np.column_stack([np.full(n, vol), np.zeros(n)])
    return LmmParams(tenor, np.full(n, rate), shift, loads, CirParams(1.0, eta))


def flat_paths(rate=0.02, tenor_step=1.0, horizon=10.0, steps_per_year=12, n_paths=8, seed=1, **kw):
    params = flat_params(rate, tenor_step, horizon, **kw)
    grid = np.linspace(0.0, horizon, int(round(horizon * steps_per_year)) + 1)
    return simulate_paths(params, grid, n_paths, seed)


@pytest.fixture
def flat2():
    """Zero-vol flat 2% annual curve on a monthly grid."""
    return flat_paths()


ACCEPTANCE_LINES = []


def record(criterion: int, ok: bool, detail: str) -> bool:
    line = f"acceptance {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
