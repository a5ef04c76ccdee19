"""Built-in model documents used by the demos."""

from __future__ import annotations

import copy

__all__ = ["PRESETS", "preset"]

PRESETS = {
    "vortex-gaussian": {
        "name": "vortex-gaussian",
        "domain": {"type": "full", "d": 2},
        "kernel": {"family": "log"},
        "potential": {"family": "zero"},
        "prior": {"family": "gaussian", "params": {"sigma": 1.0}},
        "N": 8,
        "seed": 20240611,
    },
    "vortex-disc": {
        "name": "vortex-disc",
        "domain": {"type": "ball", "d": 2, "R": 1.0},
        "kernel": {"family": "log", "regularization": {"scheme": "shift", "delta": 0.1}},
        "potential": {"family": "zero"},
        "prior": {"family": "uniform"},
        "N": 8,
        "seed": 20240612,
    },
    "catastrophe": {
        "name": "catastrophe",
        "domain": {"type": "ball", "d": 2, "R": 1.0},
        "kernel": {"family": "inverse_power", "params": {"alpha": 1.0}},
        "potential": {"family": "zero"},
        "prior": {"family": "uniform"},
        "N": 4,
        "seed": 20240613,
    },
    "born-mayer": {
        "name": "born-mayer",
        # radius 1/(2a): distances stay below 1/a, where exp(-a e^t) is concave in t
        "domain": {"type": "ball", "d": 2, "R": 0.5},
        "kernel": {"family": "exponential", "params": {"a": 1.0}},
        "potential": {"family": "zero"},
        "prior": {"family": "uniform"},
        "N": 4,
        "seed": 20240614,
    },
}


def preset(name, **overrides):
    """A fresh copy of a preset document with top-level keys replaced."""
    if name not in PRESETS:
        from .errors import ConfigError

        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}", "preset")
    doc = copy.deepcopy(PRESETS[name])
    doc.update(overrides)
    return doc
