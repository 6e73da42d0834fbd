import numpy as np
import pytest

from risloc.channel import build_channels, default_arrays
from risloc.geometry import Scenario
from risloc.sounding import design_frames

# reference deployment used across the suite
P_BS = (0.0, 0.0, 26.0)
P_RIS = (0.0, 0.5, 25.5)
P_UE = (2.0, 2.0, 24.0)
P_DRONE = (3.0, 3.0, 30.0)


def reference_scenario(**kw) -> Scenario:
    return Scenario(P_BS, P_RIS, P_UE, P_DRONE, **kw)


@pytest.fixture
def scenario():
    return reference_scenario()


@pytest.fixture
def arrays(scenario):
    return default_arrays(scenario.lam)


@pytest.fixture
def channels(scenario, arrays):
    return build_channels(scenario, arrays)


@pytest.fixture
def frames60(scenario, arrays):
    return design_frames(scenario, arrays, 60, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_scenario(rng, **kw) -> Scenario:
    """Random non-degenerate deployment with the drone above every anchor."""
    while True:
        p_b = np.array([0.0, 0.0, 26.0]) + rng.uniform(-2, 2, 3)
        p_r = p_b + rng.uniform([-1, 0.2, -1], [1, 1.5, 0])
        p_u = np.array([2.0, 2.0, 24.0]) + rng.uniform(-2, 2, 3)
        p_d = np.array([3.0, 3.0, 30.0]) + rng.uniform([-3, -3, -2], [3, 3, 5])
        try:
            s = Scenario(p_b, p_r, p_u, p_d, zeta=complex(*rng.normal(size=2)), **kw)
        except ValueError:
            continue
        # keep every drone link away from the vertical so azimuths are well defined
        if all(np.hypot(*(p_d - a)[:2]) > 0.3 for a in (p_b, p_r, p_u)):
            return s


def fd_columns(fun, x, h=1e-6):
    """Central differences of a vector function, one column per entry of x."""
    x = np.asarray(x, dtype=float)
    cols = []
    for n in range(x.size):
        e = np.zeros_like(x)
        e[n] = h
        cols.append((fun(x + e) - fun(x - e)) / (2 * h))
    return np.stack(cols, axis=-1)
