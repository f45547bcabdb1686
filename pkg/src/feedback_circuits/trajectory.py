"""Record keeping and the shared measurement loop for trajectory engines.

The statevector and MPS engines must consume random numbers identically so
that equal seeds give equal outcome sequences.  Both therefore run their
mid-circuit measurements through ``measure_layer``: one vectorized draw for
the participation mask, then one uniform per measured unit in sweep order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Protocol

import numpy as np

from .circuit_model import (
    CircuitSpec, FeedbackRule, MeasurementEvent, participation_mask,
)
from .errors import ZeroProbabilityBranch

#: outcome probabilities below this signal numerical corruption
PROB_FLOOR = 1e-14


class MeasurementRecord(NamedTuple):
    site: int
    measured: bool
    outcome: int  # -1 when not measured
    feedback_applied: bool


@dataclass
class TrajectoryRecord:
    """One stochastic history: outcomes per layer plus the density curve."""

    master_seed: int
    realization: int
    trajectory: int
    events: list[list[MeasurementRecord]] = field(default_factory=list)
    densities: np.ndarray | None = None  # (depth+1, L)
    discarded_weight: list[float] | None = None  # per layer, MPS only

    def feedback_consistent(self) -> bool:
        """Feedback only ever follows a recorded outcome 0."""
        for layer in self.events:
            for rec in layer:
                if rec.feedback_applied and not (rec.measured and rec.outcome == 0):
                    return False
        return True


class MonitoredState(Protocol):
    """State interface the measurement loop drives."""

    def prob_zero(self, site: int) -> float: ...
    def project(self, site: int, outcome: int, prob: float) -> None: ...
    def apply_x(self, site: int) -> None: ...
    def apply_swap(self, bond: tuple[int, int]) -> None: ...


def measure_layer(
    state: MonitoredState,
    spec: CircuitSpec,
    event: MeasurementEvent,
    realization: int,
    layer_index: int,
    rng: np.random.Generator,
) -> list[MeasurementRecord]:
    """Measure one layer's units in sweep order, applying conditional actions.

    Earlier outcomes condition later Born probabilities within the layer.
    """
    units = event.units(spec.L)
    mask = participation_mask(spec, event, realization, layer_index, rng)
    records = []
    for (site, _), selected in zip(units, mask):
        if not selected:
            records.append(MeasurementRecord(site, False, -1, False))
            continue
        p0 = state.prob_zero(site)
        outcome = 0 if rng.random() < p0 else 1
        p_out = p0 if outcome == 0 else 1.0 - p0
        if p_out < PROB_FLOOR:
            raise ZeroProbabilityBranch(
                f"outcome {outcome} at site {site} had probability {p_out}"
            )
        state.project(site, outcome, p_out)
        feedback = False
        if outcome == 0 and event.rule is FeedbackRule.COND_X:
            state.apply_x(site)
            feedback = True
        elif outcome == 0 and event.rule is FeedbackRule.COND_SWAP:
            state.apply_swap((site, site + 1))
            feedback = True
        records.append(MeasurementRecord(site, True, outcome, feedback))
    return records
