import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gridstates import peaks, protocol
from gridstates.hilbert import FockSpace

settings.register_profile(
    "suite",
    max_examples=20,
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")

R25 = peaks.input_r_for_db(25.0)


@pytest.fixture(scope="session")
def run25():
    """Protocol outputs at 25 dB input for N = 1..3 (infinite-squeezing proxy).

    Returns ({n: state}, {n: build_seconds}) so tests can check runtime bounds.
    """
    states, times = {}, {}
    for n in (1, 2, 3):
        t0 = time.monotonic()
        states[n] = protocol.run(protocol.build_schedule(n), R25)
        times[n] = time.monotonic() - t0
    return states, times


@pytest.fixture(scope="session")
def run25_n4():
    # the one long cell: dim ~3200; returns (state, build_seconds)
    t0 = time.monotonic()
    state = protocol.run(protocol.build_schedule(4), R25)
    return state, time.monotonic() - t0


@pytest.fixture(scope="session")
def marked_runs():
    """The two marked states: N=2 at 11.5 dB and N=3 at 16.6 dB."""
    out = {}
    for n, db in ((2, 11.5), (3, 16.6)):
        out[(n, db)] = protocol.run(protocol.build_schedule(n), peaks.input_r_for_db(db))
    return out


@pytest.fixture()
def small_space():
    return FockSpace(60)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(7)
