import numpy as np
import pytest

from qubotrack.config import RunConfig
from qubotrack.geometry import build_geometry
from qubotrack.pipeline import simulate_events


@pytest.fixture(scope="session")
def geometry():
    return build_geometry()


@pytest.fixture(scope="session")
def desk_config():
    """20 events x 100 positrons, default physics, fixed seed."""
    cfg = RunConfig().with_seed(20240811)
    d = cfg.to_dict()
    d["sim"]["mean_multiplicity"] = 100.0
    return RunConfig.from_dict(d)


@pytest.fixture(scope="session")
def desk_events(desk_config):
    return simulate_events(desk_config, 20)


def random_qubo(rng: np.random.Generator, n: int, coupling_prob: float = 0.4,
                paper_like: bool = False):
    """Random objective; paper_like restricts couplings to {1} u [-1, -0.9]."""
    from qubotrack.qubo import Qubo
    linear = rng.uniform(-1, 1, n)
    quadratic = {}
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < coupling_prob:
                if paper_like:
                    value = 1.0 if rng.random() < 0.5 else float(rng.uniform(-1, -0.9))
                else:
                    value = float(rng.uniform(-1, 1))
                quadratic[(i, j)] = value
    return Qubo(n=n, linear=linear, quadratic=quadratic)


def brute_force_minimum(qubo):
    """Independent enumeration oracle: bit i of the state index is T_i."""
    best_state, best_value = 0, None
    for state in range(2 ** qubo.n):
        bits = [(state >> i) & 1 for i in range(qubo.n)]
        value = sum(qubo.linear[i] * bits[i] for i in range(qubo.n))
        for (i, j), b in qubo.quadratic.items():
            value += b * bits[i] * bits[j]
        if best_value is None or value < best_value:
            best_state, best_value = state, value
    bits = np.array([(best_state >> i) & 1 for i in range(qubo.n)], dtype=np.int8)
    return bits, best_value


def brute_force_objective(qubo, bits):
    value = 0.0
    for i in range(qubo.n):
        value += qubo.linear[i] * bits[i]
    for (i, j), b in qubo.quadratic.items():
        value += b * bits[i] * bits[j]
    return value
