import numpy as np
import pytest

from feedback_circuits import circuit_model as cm


def random_density(L: int, rng: np.random.Generator) -> np.ndarray:
    """Random full-rank density matrix."""
    dim = 2**L
    A = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = A @ A.conj().T
    return rho / np.trace(rho)


def random_pure_density(L: int, rng: np.random.Generator) -> np.ndarray:
    dim = 2**L
    psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    psi /= np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def embed_operator(op: np.ndarray, sites: tuple[int, ...], L: int) -> np.ndarray:
    """Dense 2^L embedding of a k-site operator; independent of the engines'
    tensor contractions (kron plus an explicit basis permutation)."""
    k = len(sites)
    rest = [s for s in range(L) if s not in sites]
    order = list(sites) + rest
    full = np.kron(op, np.eye(2 ** (L - k)))
    # permutation matrix mapping site order (sites + rest) back to 0..L-1
    perm = np.zeros((2**L, 2**L))
    for idx in range(2**L):
        bits = [(idx >> (L - 1 - s)) & 1 for s in range(L)]
        permuted = [bits[s] for s in order]
        src = 0
        for b in permuted:
            src = (src << 1) | b
        perm[src, idx] = 1.0
    return perm.T @ full @ perm


def dense_layer_unitary(layer: cm.RandomLayer, L: int, cz_first: bool = False) -> np.ndarray:
    """Full 2^L scrambling-layer unitary, built by dense embedding only."""
    rot = np.eye(2**L, dtype=complex)
    for x, theta in enumerate(layer.angles):
        rot = embed_operator(cm.rx_matrix(theta), (x,), L) @ rot
    cz = np.eye(2**L, dtype=complex)
    for sub in layer.sublayers():
        for bond in sub:
            cz = embed_operator(cm.CZ_MATRIX, bond, L) @ cz
    return rot @ cz if cz_first else cz @ rot


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
