"""Exact density-matrix evolution of the full measurement/feedback channels.

All Kraus branches are summed, so a single run reproduces the trajectory
average exactly.  Dense 2^L x 2^L matrices cap the engine at small chains;
it exists as the ground-truth oracle for the sampling engines and for the
closed-form occupation-update identities of the conditional channels.
"""

from __future__ import annotations

import numpy as np

from . import circuit_model as cm
from .circuit_model import (
    CZ_MATRIX, PAULI_X, SWAP_MATRIX, CircuitSpec, FeedbackRule,
    MeasurementEvent, RandomLayer, rx_matrix,
)
from .errors import DimensionMismatch, TooLarge
from .observables import DensitySeries

#: default cap on sites for the dense channel engine
CHANNEL_SITE_CAP = 12


def _n_sites(rho: np.ndarray) -> int:
    dim = rho.shape[0]
    L = dim.bit_length() - 1
    if rho.shape != (dim, dim) or 2**L != dim:
        raise DimensionMismatch(f"density matrix shape {rho.shape} is not 2^L x 2^L")
    return L


def initial_density(bits: np.ndarray) -> np.ndarray:
    """Pure product state |b><b|; site 0 is the most significant bit."""
    bits = np.asarray(bits, dtype=np.uint8)
    L = bits.size
    index = 0
    for b in bits:
        index = (index << 1) | int(b)
    rho = np.zeros((2**L, 2**L), dtype=complex)
    rho[index, index] = 1.0
    return rho


def site_occupations(rho: np.ndarray) -> np.ndarray:
    """<n_x> = Tr[|0><0|_x rho] for every site."""
    L = _n_sites(rho)
    diag = np.real(np.diag(rho)).reshape((2,) * L)
    occ = np.empty(L)
    for x in range(L):
        axes = tuple(a for a in range(L) if a != x)
        occ[x] = diag.sum(axis=axes)[0]
    return occ


def bond_correlator(rho: np.ndarray, x: int) -> float:
    """<n_x n_{x+1}>."""
    L = _n_sites(rho)
    diag = np.real(np.diag(rho)).reshape((2,) * L)
    axes = tuple(a for a in range(L) if a not in (x, x + 1))
    block = diag.sum(axis=axes) if axes else diag
    return float(block[0, 0])


def apply_operator(rho: np.ndarray, K: np.ndarray, sites: tuple[int, ...]) -> np.ndarray:
    """K rho K^dagger with K acting on the given sites."""
    L = _n_sites(rho)
    k = len(sites)
    if K.shape != (2**k, 2**k):
        raise DimensionMismatch(f"operator shape {K.shape} for {k} sites")
    t = rho.reshape((2,) * (2 * L))
    K_t = K.reshape((2,) * (2 * k))
    in_axes = tuple(range(k, 2 * k))
    # row side
    t = np.tensordot(K_t, t, axes=(in_axes, sites))
    t = np.moveaxis(t, range(k), sites)
    # column side, conjugate
    col_sites = tuple(L + s for s in sites)
    t = np.tensordot(np.conj(K_t), t, axes=(in_axes, col_sites))
    t = np.moveaxis(t, range(k), col_sites)
    return t.reshape(rho.shape)


def apply_scrambling(rho: np.ndarray, layer: RandomLayer, cz_first: bool = False) -> np.ndarray:
    """Conjugate by one scrambling layer.

    One rotation per qubit, then the CZ brickwork (odd bonds before even);
    cz_first applies the CZ stage before the rotations.
    """
    L = _n_sites(rho)
    if layer.L != L:
        raise DimensionMismatch(f"layer has {layer.L} angles for {L} sites")

    def rotations(r):
        for x, theta in enumerate(layer.angles):
            r = apply_operator(r, rx_matrix(theta), (x,))
        return r

    def cz_stage(r):
        for sublayer in layer.sublayers():
            for bond in sublayer:
                r = apply_operator(r, CZ_MATRIX, bond)
        return r

    return rotations(cz_stage(rho)) if cz_first else cz_stage(rotations(rho))


def apply_pure_measure(rho: np.ndarray, profile) -> np.ndarray:
    """Dephase each site with its probability f(x); occupations are untouched."""
    probs = np.asarray(getattr(profile, "probs", profile), dtype=float)
    L = _n_sites(rho)
    if probs.size != L:
        raise DimensionMismatch(f"profile length {probs.size} != L = {L}")
    t = rho.reshape((2,) * (2 * L)).copy()
    for x, f in enumerate(probs):
        if f == 0.0:
            continue
        for rb, cb in ((0, 1), (1, 0)):
            sl = [slice(None)] * (2 * L)
            sl[x], sl[L + x] = rb, cb
            t[tuple(sl)] *= 1.0 - f
    return t.reshape(rho.shape)


def apply_cond_x(rho: np.ndarray, profile) -> np.ndarray:
    """Measure with prob f(x) and flip measured |0> outcomes to |1>."""
    probs = np.asarray(getattr(profile, "probs", profile), dtype=float)
    L = _n_sites(rho)
    if probs.size != L:
        raise DimensionMismatch(f"profile length {probs.size} != L = {L}")
    t = rho.reshape((2,) * (2 * L)).copy()

    def block(rb, cb):
        sl = [slice(None)] * (2 * L)
        sl[x], sl[L + x] = rb, cb
        return tuple(sl)

    for x, f in enumerate(probs):
        if f == 0.0:
            continue
        r00 = t[block(0, 0)].copy()
        t[block(1, 1)] += f * r00
        t[block(0, 0)] = (1.0 - f) * r00
        t[block(0, 1)] *= 1.0 - f
        t[block(1, 0)] *= 1.0 - f
    return t.reshape(rho.shape)


def cond_swap_kraus(p: float) -> list[np.ndarray]:
    """Kraus set of the bond channel: measure left qubit, swap on outcome 0."""
    I4 = np.eye(4, dtype=complex)
    P0_left = np.kron(cm.P0, np.eye(2))
    P1_left = np.kron(cm.P1, np.eye(2))
    return [
        np.sqrt(p) * SWAP_MATRIX @ P0_left,
        np.sqrt(p) * P1_left,
        np.sqrt(1.0 - p) * I4,
    ]


def apply_cond_swap_bond(rho: np.ndarray, bond: tuple[int, int], p: float) -> np.ndarray:
    out = np.zeros_like(rho)
    for K in cond_swap_kraus(p):
        out += apply_operator(rho, K, bond)
    return out


def apply_cond_swap(rho: np.ndarray, p: float) -> np.ndarray:
    """Brickwork conditional-SWAP layer: odd-bond sublayer, then even."""
    L = _n_sites(rho)
    for bond in cm.odd_bonds(L) + cm.even_bonds(L):
        rho = apply_cond_swap_bond(rho, bond, p)
    return rho


def apply_measurement_event(rho: np.ndarray, event: MeasurementEvent) -> np.ndarray:
    if event.empty:
        return rho
    if event.rule is FeedbackRule.COND_SWAP:
        return apply_cond_swap(rho, event.profile.probs[0])
    if event.rule is FeedbackRule.COND_X:
        return apply_cond_x(rho, event.profile)
    return apply_pure_measure(rho, event.profile)


def site_kraus(rule: FeedbackRule, f: float) -> list[np.ndarray]:
    """Kraus set of the single-site measurement channels."""
    I2 = np.eye(2, dtype=complex)
    if rule is FeedbackRule.COND_X:
        branch0 = PAULI_X @ cm.P0
    else:
        branch0 = cm.P0
    return [np.sqrt(f) * branch0, np.sqrt(f) * cm.P1, np.sqrt(1.0 - f) * I2]


def evolve_channel(
    spec: CircuitSpec, realization: int, site_cap: int = CHANNEL_SITE_CAP
) -> DensitySeries:
    """Exact occupation series <n_x(i)> for i = 0..depth."""
    spec.validate()
    if spec.L > site_cap:
        raise TooLarge(f"channel engine capped at L <= {site_cap}, got {spec.L}")
    program = cm.build_program(spec, realization)
    rho = initial_density(spec.init.basis_bits(spec.L))
    values = [site_occupations(rho)]
    for layer, event in program.layers:
        rho = apply_scrambling(rho, layer, cz_first=program.cz_first)
        rho = apply_measurement_event(rho, event)
        values.append(site_occupations(rho))
    values = np.asarray(values)
    return DensitySeries(
        engine="channel", L=spec.L, depth=spec.depth,
        values=values, stderr=np.zeros_like(values),
    )


def check_density(rho: np.ndarray, tol: float = 1e-12, psd_floor: float = -1e-10) -> None:
    """Debug-mode validation: hermitian, unit trace, positive semidefinite."""
    if abs(np.trace(rho) - 1.0) > tol:
        raise ValueError(f"trace deviates by {abs(np.trace(rho) - 1.0)}")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise ValueError("density matrix is not hermitian")
    if np.linalg.eigvalsh(rho).min() < psd_floor:
        raise ValueError("density matrix has a negative eigenvalue")
