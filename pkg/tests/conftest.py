import copy

import numpy as np
import pytest

import floquetprobe as fp
from floquetprobe.model import build_model

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib


@pytest.fixture(scope="session")
def table1_tree():
    with open(fp.bundled_config_path(), "rb") as fh:
        return tomllib.load(fh)


@pytest.fixture(scope="session")
def table1(table1_tree):
    model, _run = build_model(copy.deepcopy(table1_tree))
    return model


def two_level_tree(delta_p=0.4, gamma=3.6, rabi=10.0, omega_p0=0.0):
    """Config tree for a two-level probe model (GHz units, no coupling)."""
    return {
        "states": [
            {"index": 0, "group": "A", "delta_omega": 0.0},
            {"index": 1, "group": "B", "detuning_p": delta_p,
             "gamma_total": gamma},
        ],
        "channels": [{"from": 1, "to": 0, "rate": gamma}],
        "drive": {
            "omega_c": 1.0,
            "omega_p0": omega_p0,
            "rabi_p": [{"i": 1, "j": 0, "value": rabi}],
            "dipole_scale": [{"i": 1, "j": 0, "value": 1.0e-6}],
        },
        "run": {"n_min": -2, "n_max": 2, "initial_populations": {"0": 1.0}},
    }


def make_two_level(**kwargs):
    model, _run = build_model(two_level_tree(**kwargs))
    return model


def random_zero_coupling_tree(rng: np.random.Generator):
    """Random multi-level probe-only model; omega_p0 = 0 for exact offsets."""
    n_b = int(rng.integers(1, 4))
    states = [{"index": 0, "group": "A", "delta_omega": float(rng.uniform(-1, 1))}]
    channels = []
    rabi = []
    scale = []
    for k in range(n_b):
        i = k + 1
        gamma = float(rng.uniform(0.05, 5.0))
        states.append({"index": i, "group": "B",
                       "detuning_p": float(rng.uniform(-5, 5)),
                       "gamma_total": gamma})
        channels.append({"from": i, "to": 0, "rate": gamma})
        rabi.append({"i": i, "j": 0,
                     "value": [float(rng.uniform(-10, 10)),
                               float(rng.uniform(-10, 10))]})
        scale.append({"i": i, "j": 0, "value": float(rng.uniform(0.1, 2.0)) * 1e-6})
    return {
        "states": states,
        "channels": channels,
        "drive": {"omega_c": float(rng.uniform(0.5, 3.0)), "omega_p0": 0.0,
                  "rabi_p": rabi, "dipole_scale": scale},
        "run": {"n_min": -3, "n_max": 3, "initial_populations": {"0": 1.0}},
    }
