"""Built-in scenario configurations (plain dictionaries in the harness schema)."""
from __future__ import annotations

import copy

_BASE = {
    "schema_version": 1,
    "physics": {"mu": 1.0, "rho0": 1.0},
    "seed": 0,
}


def _make(**parts):
    cfg = copy.deepcopy(_BASE)
    cfg.update(copy.deepcopy(parts))
    return cfg


BUILTIN = {
    # Plane slider pad: gap 1.5 - 0.5 xi1, lower wall sliding along xi1; the
    # side edges carry the one-dimensional solution so the field is uniform in xi2.
    "slider": _make(
        name="slider",
        model="lubrication",
        chart={"name": "plane", "params": {}},
        gap={"name": "linear", "params": {"h0": 1.5, "g1": -0.5}},
        regime={"kind": "velocity", "V": [1.0, 0.0], "W": [0.0, 0.0], "pressure": "plane_slider"},
        eps=[0.1],
        grid={"n1": 129, "n2": 129},
        time={"t0": 0.0, "dt": 0.01, "T": 0.01},
    ),
    # Shear flow between parallel planes.
    "couette": _make(
        name="couette",
        model="new_model",
        chart={"name": "plane", "params": {}},
        gap={"name": "constant", "params": {"h0": 1.0}},
        regime={"kind": "velocity", "V": [0.0, 0.0], "W": [1.0, 0.0], "pressure": 0.0},
        eps=[0.1],
        grid={"n1": 17, "n2": 17},
        time={"t0": 0.0, "dt": 0.01, "T": 1.0},
    ),
    # Uniform sliding layer with constant wall pressure and no friction.
    "traction_uniform": _make(
        name="traction_uniform",
        model="new_model",
        chart={"name": "plane", "params": {}},
        gap={"name": "constant", "params": {"h0": 1.0}},
        regime={"kind": "traction", "pi0": 0.3, "friction": 0.0, "s0": -1, "inflow": [0.4, -0.2]},
        eps=[0.1],
        grid={"n1": 17, "n2": 17},
        time={"t0": 0.0, "dt": 0.01, "T": 1.0},
    ),
    # Uniform layer braked by quadratic wall friction.
    "traction_decay": _make(
        name="traction_decay",
        model="shallow_water",
        chart={"name": "plane", "params": {}},
        gap={"name": "constant", "params": {"h0": 1.0}},
        regime={
            "kind": "traction",
            "pi0": 0.0,
            "friction": 0.5,
            "s0": -1,
            "inflow": [1.0, 0.0],
            "edges": {"left": "neumann", "right": "neumann", "bottom": "neumann", "top": "neumann"},
        },
        eps=[0.1],
        grid={"n1": 9, "n2": 9},
        time={"t0": 0.0, "dt": 0.01, "T": 1.0},
    ),
    # Pressure-driven regime on a fixed cylinder with a gap tapering around it.
    "velocity_sweep": _make(
        name="velocity_sweep",
        model="new_model",
        chart={"name": "cylinder", "params": {"radius": 2.0, "radius_rate": 0.0}},
        gap={"name": "linear", "params": {"h0": 1.5, "g1": 0.0, "g2": -0.5}},
        regime={"kind": "velocity", "V": [0.0, 1.0], "W": [0.0, 0.0], "pressure": 0.0},
        eps=[0.2, 0.1, 0.05],
        grid={"n1": 65, "n2": 65},
        time={"t0": 0.0, "dt": 0.005, "T": 0.005},
        options={"form": "lubric"},
    ),
    # Shear-driven regime on a breathing cylinder whose gap shrinks to conserve volume.
    "traction_sweep": _make(
        name="traction_sweep",
        model="new_model",
        chart={"name": "cylinder", "params": {"radius": 2.0, "radius_rate": 0.2}},
        gap={"name": "constant", "params": {"h0": 1.0, "decay_rate": 0.1}},
        regime={
            "kind": "traction",
            "pi0": 0.5,
            "friction": 0.5,
            "s0": -1,
            "edges": {"bottom": "neumann", "top": "neumann"},
            "inflow": {"name": "modulated", "params": {"base": [0.0, 1.0], "amplitude": 0.5, "k1": 1.0}},
        },
        eps=[0.2, 0.1, 0.05],
        grid={"n1": 33, "n2": 33},
        time={"t0": 0.0, "dt": 0.0025, "T": 0.5},
    ),
}


def builtin(name):
    """Deep copy of a built-in configuration."""
    from .errors import ConfigInvalid

    if name not in BUILTIN:
        raise ConfigInvalid(f"unknown scenario {name!r}; choose from {sorted(BUILTIN)}", "name")
    return copy.deepcopy(BUILTIN[name])
