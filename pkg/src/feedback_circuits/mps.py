"""Matrix-product-state trajectory engine.

Mixed-canonical MPS with an explicit orthogonality center moved by QR
sweeps.  Two-site gates go through an SVD with relative discarded-weight
truncation and a hard bond-dimension cap; single-site gates are absorbed
into the local tensor.  Measurements sample the local Z expectation and
project, sharing the measurement loop (and therefore the RNG streams) with
the statevector engine.
"""

from __future__ import annotations

import numpy as np

from . import circuit_model as cm
from .circuit_model import (
    PAULI_X, PAULI_Z, SWAP_MATRIX, CircuitProgram, CircuitSpec, RandomLayer,
    rx_matrix, stream_rng,
)
from .errors import DimensionMismatch, OutOfRange, RankCollapse
from .observables import DensitySeries
from .trajectory import TrajectoryRecord, measure_layer

DEFAULT_CHI_MAX = 64
DEFAULT_TRUNC_TOL = 1e-10


class MpsState:
    """Open-chain MPS; tensors are (chi_left, 2, chi_right)."""

    def __init__(self, tensors: list[np.ndarray], chi_max: int = DEFAULT_CHI_MAX,
                 trunc_tol: float = DEFAULT_TRUNC_TOL):
        self.tensors = tensors
        self.L = len(tensors)
        self.chi_max = chi_max
        self.trunc_tol = trunc_tol
        self.center = 0
        self.discarded_total = 0.0
        self.truncation_events: list[tuple[int, float]] = []

    @classmethod
    def from_bits(cls, bits: np.ndarray, chi_max: int = DEFAULT_CHI_MAX,
                  trunc_tol: float = DEFAULT_TRUNC_TOL) -> "MpsState":
        tensors = []
        for b in np.asarray(bits, dtype=np.uint8):
            t = np.zeros((1, 2, 1), dtype=complex)
            t[0, int(b), 0] = 1.0
            tensors.append(t)
        return cls(tensors, chi_max=chi_max, trunc_tol=trunc_tol)

    # -- canonical form ----------------------------------------------------

    def _shift_right(self) -> None:
        i = self.center
        t = self.tensors[i]
        cl, d, cr = t.shape
        q, r = np.linalg.qr(t.reshape(cl * d, cr))
        self.tensors[i] = q.reshape(cl, d, -1)
        self.tensors[i + 1] = np.tensordot(r, self.tensors[i + 1], axes=([1], [0]))
        self.center = i + 1

    def _shift_left(self) -> None:
        i = self.center
        t = self.tensors[i]
        cl, d, cr = t.shape
        # LQ via QR of the transpose: rows of q.T are orthonormal
        q, r = np.linalg.qr(t.reshape(cl, d * cr).T)
        self.tensors[i] = q.T.reshape(-1, d, cr)
        self.tensors[i - 1] = np.tensordot(self.tensors[i - 1], r.T, axes=([2], [0]))
        self.center = i - 1

    def move_center(self, site: int) -> None:
        if not 0 <= site < self.L:
            raise OutOfRange(f"site {site} outside chain of length {self.L}")
        while self.center < site:
            self._shift_right()
        while self.center > site:
            self._shift_left()

    def norm(self) -> float:
        return float(np.linalg.norm(self.tensors[self.center]))

    def renormalize(self) -> None:
        self.tensors[self.center] /= self.norm()

    # -- gates ---------------------------------------------------------------

    def apply_1q(self, site: int, U: np.ndarray) -> None:
        t = np.tensordot(U, self.tensors[site], axes=([1], [1]))
        self.tensors[site] = np.moveaxis(t, 0, 1)

    def apply_2q(self, bond: tuple[int, int], U: np.ndarray) -> None:
        """Contiguous two-site update with SVD truncation at the bond."""
        x, y = bond
        if y != x + 1 or y >= self.L:
            raise OutOfRange(f"bond {bond} not nearest-neighbour on the chain")
        if self.center < x:
            self.move_center(x)
        elif self.center > y:
            self.move_center(y)
        theta = np.tensordot(self.tensors[x], self.tensors[y], axes=([2], [0]))
        theta = np.tensordot(U.reshape(2, 2, 2, 2), theta, axes=([2, 3], [1, 2]))
        theta = np.moveaxis(theta, (0, 1), (1, 2))  # (cl, 2, 2, cr)
        cl, _, _, cr = theta.shape
        u, s, vh = np.linalg.svd(theta.reshape(cl * 2, 2 * cr), full_matrices=False)
        total = float(s @ s)
        if total <= 0.0 or not np.isfinite(total):
            raise RankCollapse("all singular values vanished in two-site update")
        keep = int(np.sum(s > 0.0))
        if self.trunc_tol > 0.0:
            cumulative = np.cumsum(s**2)
            # smallest rank whose discarded weight is within tolerance
            ok = cumulative >= total * (1.0 - self.trunc_tol)
            keep = min(keep, int(np.argmax(ok)) + 1)
        keep = max(1, min(keep, self.chi_max))
        discarded = 1.0 - float(s[:keep] @ s[:keep]) / total
        if discarded > 0.0:
            self.discarded_total += discarded
            if discarded > self.trunc_tol:
                self.truncation_events.append((x, discarded))
        s_kept = s[:keep]
        s_kept = s_kept * (np.sqrt(total) / np.linalg.norm(s_kept))
        self.tensors[x] = u[:, :keep].reshape(cl, 2, keep)
        self.tensors[y] = (s_kept[:, None] * vh[:keep, :]).reshape(keep, 2, cr)
        self.center = y

    def apply_x(self, site: int) -> None:
        self.apply_1q(site, PAULI_X)

    def apply_swap(self, bond: tuple[int, int]) -> None:
        self.apply_2q(bond, SWAP_MATRIX)

    # -- measurement ---------------------------------------------------------

    def local_z_expectation(self, site: int) -> float:
        """<Z> at a site from the orthogonality-center tensor."""
        self.move_center(site)
        t = self.tensors[site]
        w0 = float(np.sum(np.abs(t[:, 0, :]) ** 2))
        w1 = float(np.sum(np.abs(t[:, 1, :]) ** 2))
        return (w0 - w1) / (w0 + w1)

    def prob_zero(self, site: int) -> float:
        return 0.5 * (1.0 + self.local_z_expectation(site))

    def project(self, site: int, outcome: int, prob: float) -> None:
        self.move_center(site)
        t = self.tensors[site].copy()
        t[:, 1 - outcome, :] = 0.0
        self.tensors[site] = t / np.sqrt(prob)

    def occupations(self) -> np.ndarray:
        return np.array(
            [0.5 * (1.0 + self.local_z_expectation(x)) for x in range(self.L)]
        )

    def bond_dimensions(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    def pop_discarded(self) -> float:
        w, self.discarded_total = self.discarded_total, 0.0
        return w

    def to_statevector(self) -> np.ndarray:
        """Dense amplitudes (small chains only)."""
        acc = self.tensors[0]
        for t in self.tensors[1:]:
            acc = np.tensordot(acc, t, axes=([acc.ndim - 1], [0]))
        return acc.reshape(-1)


def apply_layer_unitary_mps(state: MpsState, layer: RandomLayer, cz_first: bool = False) -> None:
    """Same layer structure as the statevector engine: rotations, then CZs."""
    if layer.L != state.L:
        raise DimensionMismatch(f"layer has {layer.L} angles for {state.L} sites")

    def rotations():
        for x, theta in enumerate(layer.angles):
            state.apply_1q(x, rx_matrix(theta))

    def cz_stage():
        for sublayer in layer.sublayers():
            for bond in sublayer:
                state.apply_2q(bond, cm.CZ_MATRIX)

    if cz_first:
        cz_stage()
        rotations()
    else:
        rotations()
        cz_stage()


def measure_site(state: MpsState, site: int, rng: np.random.Generator) -> tuple[MpsState, int]:
    """Projective Z measurement: p[0] = (1 + <Z>)/2, project and renormalize."""
    p0 = state.prob_zero(site)
    outcome = 0 if rng.random() < p0 else 1
    prob = p0 if outcome == 0 else 1.0 - p0
    state.project(site, outcome, prob)
    return state, outcome


def run_trajectory_mps(
    spec: CircuitSpec,
    realization: int,
    trajectory_index: int,
    program: CircuitProgram | None = None,
    chi_max: int = DEFAULT_CHI_MAX,
    trunc_tol: float = DEFAULT_TRUNC_TOL,
) -> TrajectoryRecord:
    """Same record contract as the statevector engine, plus truncation stats."""
    spec.validate()
    if program is None:
        program = cm.build_program(spec, realization)
    state = MpsState.from_bits(spec.init.basis_bits(spec.L), chi_max=chi_max,
                               trunc_tol=trunc_tol)
    densities = np.empty((spec.depth + 1, spec.L))
    densities[0] = state.occupations()
    record = TrajectoryRecord(
        master_seed=spec.master_seed, realization=realization,
        trajectory=trajectory_index, discarded_weight=[],
    )
    for layer_index, (layer, event) in enumerate(program.layers):
        rng = stream_rng(spec.master_seed, realization, trajectory_index, layer_index)
        apply_layer_unitary_mps(state, layer, cz_first=program.cz_first)
        if event.empty:
            record.events.append([])
        else:
            record.events.append(
                measure_layer(state, spec, event, realization, layer_index, rng)
            )
        densities[layer_index + 1] = state.occupations()
        record.discarded_weight.append(state.pop_discarded())
    record.densities = densities
    return record


def average_trajectories_mps(
    spec: CircuitSpec,
    realization: int,
    n_trajectories: int | None = None,
    chi_max: int = DEFAULT_CHI_MAX,
    trunc_tol: float = DEFAULT_TRUNC_TOL,
) -> DensitySeries:
    """Trajectory-mean densities for one realization."""
    M = spec.trajectories if n_trajectories is None else n_trajectories
    program = cm.build_program(spec, realization)
    total = np.zeros((spec.depth + 1, spec.L))
    total_sq = np.zeros_like(total)
    for t in range(M):
        d = run_trajectory_mps(
            spec, realization, t, program=program,
            chi_max=chi_max, trunc_tol=trunc_tol,
        ).densities
        total += d
        total_sq += d * d
    mean = total / M
    var = np.maximum(total_sq / M - mean**2, 0.0)
    stderr = np.sqrt(var / M) if M > 1 else np.zeros_like(mean)
    return DensitySeries(
        engine="mps", L=spec.L, depth=spec.depth, values=mean, stderr=stderr,
    )
