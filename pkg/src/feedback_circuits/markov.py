"""Effective classical stochastic model on bitstrings.

Scrambling is a brickwork of two-bit transition matrices obtained from the
computational-basis transition probabilities of the bond block (rotations
plus CZ); feedback is a per-site reset kernel (conditional-X counterpart)
or a left-conditioned exchange kernel (conditional-SWAP counterpart).
Occupation is the probability of bit value 0.

Two execution modes: trajectory sampling over W bitstrings (any L) and
exact distribution propagation (L <= 12), the latter serving as the test
oracle for the former.
"""

from __future__ import annotations

import numpy as np

from . import circuit_model as cm
from .circuit_model import (
    CZ_MATRIX, CircuitSpec, ENSEMBLE_STREAM, FeedbackRule, RandomLayer,
    rx_matrix, stream_rng,
)
from .errors import DimensionMismatch, TooLarge
from .observables import DensitySeries

EXACT_SITE_CAP = 12


def transition_matrix(theta_a: float, theta_b: float, cz_first: bool = False) -> np.ndarray:
    """Row-stochastic 4x4 bond kernel T[(a,b) -> (c,d)].

    Entries are the squared basis matrix elements of the bond block; the CZ
    only contributes a sign on basis states, so both gate orders give the
    same kernel and T factorizes over the two bits.
    """
    rot = np.kron(rx_matrix(theta_a), rx_matrix(theta_b))
    U = rot @ CZ_MATRIX if not cz_first else CZ_MATRIX @ rot
    return np.abs(U.T) ** 2


def _pair_kernel_swap(p: float) -> np.ndarray:
    """Exchange kernel on (b_x, b_{x+1}): swap with prob p when b_x = 0."""
    T = np.eye(4)
    T[1, 1], T[1, 2] = 1.0 - p, p
    return T


def _layer_bond_angles(layer: RandomLayer) -> list[tuple[tuple[int, int], tuple[float, float]]]:
    """Bond sweep with each qubit's rotation assigned to the first bond
    touching it; later bonds see angle 0.  This mirrors the quantum layer,
    where every qubit is rotated exactly once."""
    used: set[int] = set()
    out = []
    for sublayer in layer.sublayers():
        for x, y in sublayer:
            ta = layer.angles[x] if x not in used else 0.0
            tb = layer.angles[y] if y not in used else 0.0
            used.update((x, y))
            out.append(((x, y), (ta, tb)))
    return out


def _site_kernel_reset(f: float) -> np.ndarray:
    """Reset kernel on one bit: b -> 1 with prob f."""
    return np.array([[1.0 - f, f], [0.0, 1.0]])


# ---------------------------------------------------------------------------
# sampled mode


def ensemble_from_spec(spec: CircuitSpec, W: int | None = None) -> np.ndarray:
    """W copies of the initial bitstring, as uint8[W, L]."""
    W = spec.trajectories if W is None else W
    bits = spec.init.basis_bits(spec.L)
    return np.tile(bits, (W, 1))


def _sample_rows(T: np.ndarray, states: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    cum = np.cumsum(T, axis=1)
    u = rng.random(states.size)
    out = (u[:, None] >= cum[states]).sum(axis=1)
    return np.minimum(out, T.shape[1] - 1)


def scramble_step(
    bits: np.ndarray, layer: RandomLayer, rng: np.random.Generator,
    cz_first: bool = False,
) -> None:
    """Resample every covered bond's bit pair from its transition-matrix row."""
    W, L = bits.shape
    if layer.L != L:
        raise DimensionMismatch(f"layer has {layer.L} angles for {L} sites")
    for (x, y), (ta, tb) in _layer_bond_angles(layer):
        T = transition_matrix(ta, tb, cz_first)
        states = (bits[:, x].astype(np.int64) << 1) | bits[:, y]
        out = _sample_rows(T, states, rng)
        bits[:, x] = (out >> 1).astype(np.uint8)
        bits[:, y] = (out & 1).astype(np.uint8)


def feedback_step_x(bits: np.ndarray, profile, rng: np.random.Generator) -> None:
    """Independently per site, reset the bit to 1 with probability f(x)."""
    probs = np.asarray(getattr(profile, "probs", profile), dtype=float)
    if probs.size != bits.shape[1]:
        raise DimensionMismatch("profile length does not match chain")
    reset = rng.random(bits.shape) < probs[None, :]
    bits[reset] = 1


def feedback_step_swap(bits: np.ndarray, p_swap: float, rng: np.random.Generator) -> None:
    """Brickwork exchange: swap each covered bond with prob p if the left bit is 0."""
    W, L = bits.shape
    for x, y in cm.odd_bonds(L) + cm.even_bonds(L):
        do = (rng.random(W) < p_swap) & (bits[:, x] == 0)
        left = bits[do, x].copy()
        bits[do, x] = bits[do, y]
        bits[do, y] = left


# ---------------------------------------------------------------------------
# exact mode


class ExactDistribution:
    """Full probability tensor over bitstrings, shape (2,)*L."""

    def __init__(self, P: np.ndarray):
        self.P = P
        self.L = P.ndim

    @classmethod
    def from_spec(cls, spec: CircuitSpec) -> "ExactDistribution":
        if spec.L > EXACT_SITE_CAP:
            raise TooLarge(f"exact mode capped at L <= {EXACT_SITE_CAP}")
        P = np.zeros((2,) * spec.L)
        P[tuple(int(b) for b in spec.init.basis_bits(spec.L))] = 1.0
        return cls(P)

    def _apply_site(self, M: np.ndarray, x: int) -> None:
        # P'(out) = sum_in P(in) M[in, out]
        t = np.tensordot(self.P, M, axes=([x], [0]))
        self.P = np.moveaxis(t, -1, x)

    def _apply_bond(self, T: np.ndarray, x: int, y: int) -> None:
        P = np.moveaxis(self.P, (x, y), (self.L - 2, self.L - 1))
        shape = P.shape
        P = P.reshape(-1, 4) @ T
        self.P = np.moveaxis(P.reshape(shape), (self.L - 2, self.L - 1), (x, y))

    def scramble(self, layer: RandomLayer, cz_first: bool = False) -> None:
        for (x, y), (ta, tb) in _layer_bond_angles(layer):
            self._apply_bond(transition_matrix(ta, tb, cz_first), x, y)

    def feedback_x(self, profile) -> None:
        probs = np.asarray(getattr(profile, "probs", profile), dtype=float)
        for x, f in enumerate(probs):
            if f > 0.0:
                self._apply_site(_site_kernel_reset(f), x)

    def feedback_swap(self, p_swap: float) -> None:
        T = _pair_kernel_swap(p_swap)
        for x, y in cm.odd_bonds(self.L) + cm.even_bonds(self.L):
            self._apply_bond(T, x, y)

    def occupations(self) -> np.ndarray:
        occ = np.empty(self.L)
        for x in range(self.L):
            axes = tuple(a for a in range(self.L) if a != x)
            occ[x] = self.P.sum(axis=axes)[0]
        return occ

    def total(self) -> float:
        return float(self.P.sum())


# ---------------------------------------------------------------------------
# layer loop


def _apply_feedback_sampled(bits, event, rng) -> None:
    if event.rule is FeedbackRule.COND_X:
        feedback_step_x(bits, event.profile, rng)
    elif event.rule is FeedbackRule.COND_SWAP:
        feedback_step_swap(bits, event.profile.probs[0], rng)
    # measurement without feedback does not change classical bits


def run_markov(
    spec: CircuitSpec, realization: int = 0, exact: bool = False,
    W: int | None = None,
) -> DensitySeries:
    """Per-layer occupation means of the classical model for one realization.

    Sampled mode averages W bitstring trajectories (spec.trajectories by
    default) and reports the standard error across them; exact mode
    propagates the full distribution.  Angles are shared with the quantum
    engines of the same realization.
    """
    spec.validate()
    program = cm.build_program(spec, realization)
    depth, L = spec.depth, spec.L

    if exact:
        dist = ExactDistribution.from_spec(spec)
        values = [dist.occupations()]
        for layer, event in program.layers:
            dist.scramble(layer, cz_first=program.cz_first)
            if event.rule is FeedbackRule.COND_X:
                dist.feedback_x(event.profile)
            elif event.rule is FeedbackRule.COND_SWAP:
                dist.feedback_swap(event.profile.probs[0])
            values.append(dist.occupations())
        values = np.asarray(values)
        return DensitySeries(engine="markov_exact", L=L, depth=depth,
                             values=values, stderr=np.zeros_like(values))

    bits = ensemble_from_spec(spec, W)
    n_traj = bits.shape[0]
    values = np.empty((depth + 1, L))
    stderr = np.zeros((depth + 1, L))
    occ = (bits == 0)
    values[0] = occ.mean(axis=0)
    for layer_index, (layer, event) in enumerate(program.layers):
        rng = stream_rng(spec.master_seed, realization, ENSEMBLE_STREAM, layer_index)
        scramble_step(bits, layer, rng, cz_first=program.cz_first)
        _apply_feedback_sampled(bits, event, rng)
        occ = (bits == 0)
        values[layer_index + 1] = occ.mean(axis=0)
        if n_traj > 1:
            stderr[layer_index + 1] = occ.std(axis=0, ddof=1) / np.sqrt(n_traj)
    return DensitySeries(engine="markov", L=L, depth=depth,
                         values=values, stderr=stderr)
