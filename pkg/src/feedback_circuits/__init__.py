"""Feedback-directed monitored random circuit simulators.

Interchangeable engines for one circuit family (scrambling layers plus
mid-circuit measurement and conditional feedback): an exact density-matrix
channel, statevector and MPS trajectory samplers, and a classical Markov
bitstring model, with shared deterministic seeding, transport observables,
continuum-model fits and hardware budget estimates.
"""

__version__ = "0.1.0"

from .circuit_model import (  # noqa: F401
    Architecture, CircuitSpec, FeedbackRule, InitialState, MeasurementProfile,
    build_program, compile_swap_native, derive_stream_seed,
)
from .observables import (  # noqa: F401
    DensitySeries, ScalarSeries, aggregate_realizations, center_of_mass,
    com_shift, polarization,
)
