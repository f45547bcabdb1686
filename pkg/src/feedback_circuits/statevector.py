"""Pure-state trajectory engine on the full 2^L statevector.

Unitary scrambling layers, Born-rule mid-circuit measurements and
outcome-conditioned feedback, sampled per trajectory from the deterministic
per-(realization, trajectory, layer) seed streams.
"""

from __future__ import annotations

import numpy as np

from . import circuit_model as cm
from .circuit_model import (
    CZ_MATRIX, PAULI_X, SWAP_MATRIX, CircuitProgram, CircuitSpec, RandomLayer,
    rx_matrix, stream_rng,
)
from .errors import DimensionMismatch, TooLarge
from .observables import DensitySeries
from .trajectory import TrajectoryRecord, measure_layer

#: default cap on sites for the dense statevector engine
STATEVECTOR_SITE_CAP = 26


class StateVector:
    """Complex amplitudes over the computational basis; site 0 is the most
    significant bit."""

    def __init__(self, amplitudes: np.ndarray, L: int):
        if amplitudes.size != 2**L:
            raise DimensionMismatch(f"{amplitudes.size} amplitudes for L={L}")
        self.psi = np.asarray(amplitudes, dtype=complex).reshape(-1)
        self.L = L

    @classmethod
    def from_bits(cls, bits: np.ndarray) -> "StateVector":
        bits = np.asarray(bits, dtype=np.uint8)
        L = bits.size
        index = 0
        for b in bits:
            index = (index << 1) | int(b)
        psi = np.zeros(2**L, dtype=complex)
        psi[index] = 1.0
        return cls(psi, L)

    def norm(self) -> float:
        return float(np.linalg.norm(self.psi))

    def _view(self) -> np.ndarray:
        return self.psi.reshape((2,) * self.L)

    def apply_1q(self, site: int, U: np.ndarray) -> None:
        t = np.tensordot(U, self._view(), axes=([1], [site]))
        self.psi = np.moveaxis(t, 0, site).reshape(-1)

    def apply_2q(self, bond: tuple[int, int], U: np.ndarray) -> None:
        x, y = bond
        t = np.tensordot(U.reshape(2, 2, 2, 2), self._view(), axes=([2, 3], [x, y]))
        self.psi = np.moveaxis(t, (0, 1), (x, y)).reshape(-1)

    def apply_cz(self, bond: tuple[int, int]) -> None:
        t = self._view().copy()
        sl = [slice(None)] * self.L
        sl[bond[0]], sl[bond[1]] = 1, 1
        t[tuple(sl)] *= -1.0
        self.psi = t.reshape(-1)

    def apply_x(self, site: int) -> None:
        self.psi = np.flip(self._view(), axis=site).reshape(-1)

    def apply_swap(self, bond: tuple[int, int]) -> None:
        self.psi = np.swapaxes(self._view(), bond[0], bond[1]).reshape(-1)

    def prob_zero(self, site: int) -> float:
        t = self._view()
        sl = [slice(None)] * self.L
        sl[site] = 0
        return float(np.sum(np.abs(t[tuple(sl)]) ** 2))

    def project(self, site: int, outcome: int, prob: float) -> None:
        t = self._view().copy()
        sl = [slice(None)] * self.L
        sl[site] = 1 - outcome
        t[tuple(sl)] = 0.0
        self.psi = (t / np.sqrt(prob)).reshape(-1)

    def occupations(self) -> np.ndarray:
        p = (np.abs(self.psi) ** 2).reshape((2,) * self.L)
        occ = np.empty(self.L)
        for x in range(self.L):
            axes = tuple(a for a in range(self.L) if a != x)
            occ[x] = p.sum(axis=axes)[0]
        return occ


def apply_layer_unitary(state: StateVector, layer: RandomLayer, cz_first: bool = False) -> None:
    """One rotation per qubit, then the CZ brickwork (or CZ stage first)."""
    if layer.L != state.L:
        raise DimensionMismatch(f"layer has {layer.L} angles for {state.L} sites")

    def rotations():
        for x, theta in enumerate(layer.angles):
            state.apply_1q(x, rx_matrix(theta))

    def cz_stage():
        for sublayer in layer.sublayers():
            for bond in sublayer:
                state.apply_cz(bond)

    if cz_first:
        cz_stage()
        rotations()
    else:
        rotations()
        cz_stage()


def run_trajectory(
    spec: CircuitSpec,
    realization: int,
    trajectory_index: int,
    program: CircuitProgram | None = None,
    site_cap: int = STATEVECTOR_SITE_CAP,
) -> TrajectoryRecord:
    """One stochastic history; deterministic in (spec, realization, trajectory)."""
    spec.validate()
    if spec.L > site_cap:
        raise TooLarge(f"statevector engine capped at L <= {site_cap}, got {spec.L}")
    if program is None:
        program = cm.build_program(spec, realization)
    state = StateVector.from_bits(spec.init.basis_bits(spec.L))
    densities = np.empty((spec.depth + 1, spec.L))
    densities[0] = state.occupations()
    record = TrajectoryRecord(
        master_seed=spec.master_seed, realization=realization,
        trajectory=trajectory_index,
    )
    for layer_index, (layer, event) in enumerate(program.layers):
        rng = stream_rng(spec.master_seed, realization, trajectory_index, layer_index)
        apply_layer_unitary(state, layer, cz_first=program.cz_first)
        if event.empty:
            record.events.append([])
        else:
            record.events.append(
                measure_layer(state, spec, event, realization, layer_index, rng)
            )
        densities[layer_index + 1] = state.occupations()
    record.densities = densities
    return record


def average_trajectories(
    spec: CircuitSpec, realization: int, n_trajectories: int | None = None
) -> DensitySeries:
    """Trajectory-mean densities for one realization, with binomial stderr."""
    M = spec.trajectories if n_trajectories is None else n_trajectories
    program = cm.build_program(spec, realization)
    total = np.zeros((spec.depth + 1, spec.L))
    total_sq = np.zeros_like(total)
    for t in range(M):
        d = run_trajectory(spec, realization, t, program=program).densities
        total += d
        total_sq += d * d
    mean = total / M
    var = np.maximum(total_sq / M - mean**2, 0.0)
    stderr = np.sqrt(var / M) if M > 1 else np.zeros_like(mean)
    return DensitySeries(
        engine="statevector", L=spec.L, depth=spec.depth,
        values=mean, stderr=stderr,
    )
