import numpy as np
import pytest

from modetomo import (Boxcar, SimConfig, SystemParams, TemporalFilter,
                      evolve_cascaded, partial_trace)
from modetomo.spaces import truncate_mode_levels
from modetomo.units import mhz_to_angular, ns_to_seconds

GAMMA = float(mhz_to_angular(8.0))
RABI = 4.04 * GAMMA
T0 = float(ns_to_seconds(200.0))
T_BOX = float(ns_to_seconds(100.0))


@pytest.fixture(scope="session")
def params():
    return SystemParams(gamma=GAMMA, rabi=RABI)


@pytest.fixture(scope="session")
def sim_config():
    return SimConfig(fock_cutoff=6, t0=T0)


def sideband_filters(delta1=-RABI, delta2=RABI, phase=0.0, delay=0.0):
    f1 = TemporalFilter(Boxcar(), detuning=delta1, phase=phase, start=T0, duration=T_BOX)
    f2 = TemporalFilter(Boxcar(), detuning=delta2, phase=phase, start=T0,
                        duration=T_BOX, delay=delay)
    return f1, f2


@pytest.fixture(scope="session")
def sideband_capture(params, sim_config):
    """Joint capture at the opposite Mollow sidebands (the workhorse state)."""
    f1, f2 = sideband_filters()
    return evolve_cascaded(params, f1, f2, sim_config)


@pytest.fixture(scope="session")
def sideband_modes(sideband_capture):
    """Two-mode reduced state at the opposite sidebands, cutoff 6."""
    return partial_trace(sideband_capture.state, [1, 2])


@pytest.fixture(scope="session")
def sideband_modes_n5(sideband_modes):
    """Same state truncated to 5 levels per mode (tomography cutoff)."""
    return truncate_mode_levels(sideband_modes, 5)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(987654321)
