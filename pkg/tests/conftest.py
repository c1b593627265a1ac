import time

import pytest

from shev_mompc import bundled_cycle, compute_metrics, default_config, run_closed_loop
from shev_mompc.powertrain import VehicleState


@pytest.fixture(scope="session")
def run_config():
    return default_config()


@pytest.fixture(scope="session")
def plant(run_config):
    return run_config.plant


@pytest.fixture(scope="session")
def udds_cycle():
    return bundled_cycle("udds")


@pytest.fixture(scope="session")
def synthetic_cycle():
    return bundled_cycle("synthetic")


@pytest.fixture(scope="session")
def udds_run(run_config, udds_cycle):
    """One full UDDS closed loop shared by every test that needs it."""
    start = time.perf_counter()
    log = run_closed_loop(
        udds_cycle, run_config.controller, run_config.plant,
        initial_state=VehicleState(run_config.initial.position,
                                   run_config.initial.velocity),
        initial_soc=run_config.initial.soc)
    elapsed = time.perf_counter() - start
    metrics = compute_metrics(log, run_config.battery)
    return {"log": log, "metrics": metrics, "elapsed": elapsed}
