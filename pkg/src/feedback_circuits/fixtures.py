"""Reference-series fixtures produced by the exact channel engine.

The channel engine is the ground truth for trajectory averaging, so its
output on small frozen specs is stored and regenerated to guard against
regressions in any of the shared circuit machinery.
"""

from __future__ import annotations

import json
from pathlib import Path

from .channel_oracle import evolve_channel
from .circuit_model import Architecture, CircuitSpec, InitialState

FIXTURE_SEED = 1234


def fixture_specs() -> dict[str, CircuitSpec]:
    init = InitialState(kind="center_block", count=2)
    return {
        "cond_x_L6": CircuitSpec(
            L=6, depth=5, architecture=Architecture.COND_X, g=0.05,
            init=init, master_seed=FIXTURE_SEED,
        ),
        "cond_swap_L6": CircuitSpec(
            L=6, depth=5, architecture=Architecture.COND_SWAP, p_swap=0.3,
            init=init, master_seed=FIXTURE_SEED,
        ),
    }


def generate_channel_fixtures() -> dict:
    out = {}
    for name, spec in fixture_specs().items():
        series = evolve_channel(spec, realization=0)
        out[name] = {
            "architecture": spec.architecture.value,
            "L": spec.L,
            "depth": spec.depth,
            "g": spec.g,
            "p_swap": spec.p_swap,
            "master_seed": spec.master_seed,
            "values": series.values.tolist(),
        }
    return out


def write_channel_fixtures(path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(generate_channel_fixtures(), fh, indent=2, sort_keys=True)
    return path
