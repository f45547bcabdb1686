"""Circuit specifications shared by every engine.

Defines the chain architectures (plain scrambling, measurement-only,
conditional-X feedback, conditional-SWAP feedback), random-angle sampling,
measurement profiles, deterministic seed derivation and the native-gate
accounting for SWAP compilation.

Conventions used throughout the package:

* sites are 0-based, ``x = 0 .. L-1`` on an open chain;
* "occupied" means the local basis state ``|0>`` (bit value 0);
* "odd bonds" are ``(j, j+1)`` with j odd, "even bonds" have j even;
  within a layer the odd sublayer is applied before the even sublayer;
* a scrambling layer applies one rotation per qubit and then the CZ
  brickwork (``cz_first=True`` swaps the two stages; the induced classical
  transition matrix is identical either way).
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .errors import InvalidSpec, OutOfRange

# Reserved trajectory indices for auxiliary seed streams.  Real trajectory
# counts stay far below 2**48, so these cannot collide with sampling streams.
ANGLE_STREAM = 2**48
PATTERN_STREAM = 2**48 + 1
ENSEMBLE_STREAM = 2**48 + 2

_MASK64 = (1 << 64) - 1


class Architecture(str, Enum):
    UNITARY = "unitary"
    PURE_MEASURE = "pure_measure"
    COND_X = "cond_x"
    COND_SWAP = "cond_swap"


class FeedbackRule(str, Enum):
    NONE = "none"
    COND_X = "cond_x"
    COND_SWAP = "cond_swap"


# ---------------------------------------------------------------------------
# gates

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
SQRT_X = 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]])
P0 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
P1 = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)
CZ_MATRIX = np.diag([1.0, 1.0, 1.0, -1.0]).astype(complex)
SWAP_MATRIX = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)


def rx_matrix(theta: float) -> np.ndarray:
    """Rotation exp(-i theta X / 2)."""
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    return np.array([[c, -1j * s], [-1j * s, c]])


def odd_bonds(L: int) -> list[tuple[int, int]]:
    return [(j, j + 1) for j in range(1, L - 1, 2)]


def even_bonds(L: int) -> list[tuple[int, int]]:
    return [(j, j + 1) for j in range(0, L - 1, 2)]


def brickwork_bonds(L: int) -> list[tuple[int, int]]:
    """All bonds in application order: odd sublayer first, then even."""
    return odd_bonds(L) + even_bonds(L)


# ---------------------------------------------------------------------------
# seeds


def derive_stream_seed(
    master_seed: int, realization: int, trajectory: int, layer: int
) -> int:
    """Derive a stable 64-bit seed for the (realization, trajectory, layer) stream.

    SHA-256 over the packed index tuple; identical on every platform and
    collision-free over practical index ranges.
    """
    if realization < 0 or trajectory < 0 or layer < 0:
        raise ValueError("stream indices must be non-negative")
    payload = struct.pack(
        ">QQQQ", master_seed & _MASK64, realization & _MASK64,
        trajectory & _MASK64, layer & _MASK64,
    )
    digest = hashlib.sha256(payload).digest()
    return int.from_bytes(digest[:8], "big")


def stream_rng(master_seed: int, realization: int, trajectory: int, layer: int):
    return np.random.default_rng(
        derive_stream_seed(master_seed, realization, trajectory, layer)
    )


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class InitialState:
    """Initial product state; occupied sites are in ``|0>``.

    kind: "center_block", "right_edge_block" or "explicit".
    """

    kind: str = "center_block"
    count: int = 6
    bits: tuple[int, ...] = ()

    def basis_bits(self, L: int) -> np.ndarray:
        """Local basis labels per site (0 = occupied), as uint8[L]."""
        if self.kind == "explicit":
            if len(self.bits) != L:
                raise InvalidSpec(f"explicit bits need length {L}, got {len(self.bits)}")
            if any(b not in (0, 1) for b in self.bits):
                raise InvalidSpec("explicit bits must be 0 or 1")
            return np.asarray(self.bits, dtype=np.uint8)
        if self.count < 0 or self.count > L:
            raise InvalidSpec(f"block count {self.count} outside [0, {L}]")
        bits = np.ones(L, dtype=np.uint8)
        if self.kind == "center_block":
            start = L // 2 - self.count // 2
        elif self.kind == "right_edge_block":
            start = L - self.count
        else:
            raise InvalidSpec(f"unknown initial-state kind {self.kind!r}")
        bits[start : start + self.count] = 0
        return bits

    def occupations(self, L: int) -> np.ndarray:
        return (self.basis_bits(L) == 0).astype(float)


@dataclass(frozen=True)
class MeasurementProfile:
    """Per-site measurement probabilities f(x)."""

    probs: tuple[float, ...]
    kind: str = "explicit"

    def __post_init__(self):
        arr = np.asarray(self.probs, dtype=float)
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise InvalidSpec("measurement probabilities must lie in [0, 1]")

    @classmethod
    def linear_gradient(cls, L: int, g: float) -> "MeasurementProfile":
        """f(x) = (L - x) * g, decreasing toward the right edge."""
        if g < 0:
            raise InvalidSpec("gradient g must be non-negative")
        if g * L >= 1.0:
            raise InvalidSpec(f"g*L = {g * L} >= 1: f(0) would leave [0, 1)")
        probs = tuple((L - x) * g for x in range(L))
        return cls(probs=probs, kind="linear_gradient")

    @classmethod
    def uniform(cls, L: int, p: float) -> "MeasurementProfile":
        if not 0.0 <= p <= 1.0:
            raise InvalidSpec(f"uniform probability {p} outside [0, 1]")
        return cls(probs=(p,) * L, kind="uniform")

    @classmethod
    def zeros(cls, L: int) -> "MeasurementProfile":
        return cls(probs=(0.0,) * L, kind="uniform")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)


@dataclass(frozen=True)
class RandomLayer:
    """One scrambling layer: a rotation angle per qubit plus the brickwork order."""

    angles: tuple[float, ...]

    @property
    def L(self) -> int:
        return len(self.angles)

    def sublayers(self) -> list[list[tuple[int, int]]]:
        """Bond sublayers in application order (odd bonds, then even bonds)."""
        return [odd_bonds(self.L), even_bonds(self.L)]


@dataclass(frozen=True)
class MeasurementEvent:
    """Measurement block of one layer: profile plus conditional action.

    For COND_SWAP the measured units are bonds in brickwork order (odd
    sublayer then even sublayer) and the participation probability of bond
    (x, x+1) is ``profile.probs[x]``; site L-1 has no right neighbour and is
    never a bond head.
    """

    profile: MeasurementProfile
    rule: FeedbackRule

    def units(self, L: int) -> list[tuple[int, float]]:
        """Measured units in sweep order as (site, participation prob)."""
        probs = self.profile.probs
        if len(probs) != L:
            raise InvalidSpec(f"profile length {len(probs)} != L = {L}")
        if self.rule is FeedbackRule.COND_SWAP:
            return [(x, probs[x]) for x, _ in brickwork_bonds(L)]
        return [(x, probs[x]) for x in range(L)]

    @property
    def empty(self) -> bool:
        return all(p == 0.0 for p in self.profile.probs) and self.rule is FeedbackRule.NONE


@dataclass(frozen=True)
class CircuitProgram:
    """Fully sampled program for one realization: deterministic and immutable."""

    L: int
    depth: int
    architecture: Architecture
    cz_first: bool
    layers: tuple[tuple[RandomLayer, MeasurementEvent], ...]

    def __post_init__(self):
        if len(self.layers) != self.depth:
            raise InvalidSpec("layer count must equal depth")


@dataclass(frozen=True)
class CircuitSpec:
    """Parameters of one experiment family (before realization sampling).

    trajectories doubles as the ensemble size W for the Markov engine.
    """

    L: int
    depth: int
    architecture: Architecture
    theta_max: float = 1.0
    g: float = 0.0
    p_swap: float = 0.0
    init: InitialState = field(default_factory=InitialState)
    master_seed: int = 0
    realizations: int = 10
    trajectories: int = 200
    cz_first: bool = False
    freeze_patterns: bool = False

    def validate(self) -> None:
        if self.L < 2:
            raise InvalidSpec(f"need at least 2 sites, got L={self.L}")
        if self.depth < 0:
            raise InvalidSpec("depth must be >= 0")
        if self.theta_max <= 0:
            raise InvalidSpec("theta_max must be positive")
        if not 0.0 <= self.p_swap <= 1.0:
            raise InvalidSpec("p_swap must lie in [0, 1]")
        if self.realizations < 1 or self.trajectories < 1:
            raise InvalidSpec("realizations and trajectories must be >= 1")
        if self.architecture in (Architecture.PURE_MEASURE, Architecture.COND_X):
            if self.g * self.L >= 1.0:
                raise InvalidSpec(
                    f"g*L = {self.g * self.L} >= 1 with a gradient profile"
                )
        self.init.basis_bits(self.L)

    def measurement_event(self) -> MeasurementEvent:
        if self.architecture is Architecture.UNITARY:
            return MeasurementEvent(MeasurementProfile.zeros(self.L), FeedbackRule.NONE)
        if self.architecture is Architecture.PURE_MEASURE:
            return MeasurementEvent(
                MeasurementProfile.linear_gradient(self.L, self.g), FeedbackRule.NONE
            )
        if self.architecture is Architecture.COND_X:
            return MeasurementEvent(
                MeasurementProfile.linear_gradient(self.L, self.g), FeedbackRule.COND_X
            )
        return MeasurementEvent(
            MeasurementProfile.uniform(self.L, self.p_swap), FeedbackRule.COND_SWAP
        )

    def with_architecture(self, architecture: Architecture) -> "CircuitSpec":
        return replace(self, architecture=architecture)


def build_program(spec: CircuitSpec, realization: int) -> CircuitProgram:
    """Sample the program for one realization; pure in (spec, realization).

    Angles are uniform on [0, theta_max], independent per qubit and layer,
    drawn from the per-layer angle stream so any engine can rebuild them.
    """
    spec.validate()
    if realization < 0:
        raise InvalidSpec("realization index must be >= 0")
    event = spec.measurement_event()
    layers = []
    for layer_index in range(spec.depth):
        rng = stream_rng(spec.master_seed, realization, ANGLE_STREAM, layer_index)
        angles = tuple(rng.random(spec.L) * spec.theta_max)
        layers.append((RandomLayer(angles=angles), event))
    return CircuitProgram(
        L=spec.L,
        depth=spec.depth,
        architecture=spec.architecture,
        cz_first=spec.cz_first,
        layers=tuple(layers),
    )


def participation_mask(
    spec: CircuitSpec,
    event: MeasurementEvent,
    realization: int,
    layer_index: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Bernoulli mask over the layer's measured units, in sweep order.

    Default mode draws from the caller's per-trajectory stream; with
    freeze_patterns the mask comes from a per-(realization, layer) stream so
    every trajectory of a realization measures the same sites.
    """
    units = event.units(spec.L)
    probs = np.array([p for _, p in units])
    if spec.freeze_patterns:
        rng = stream_rng(spec.master_seed, realization, PATTERN_STREAM, layer_index)
    return rng.random(len(units)) < probs


# ---------------------------------------------------------------------------
# native-gate compilation accounting


@dataclass(frozen=True)
class NativeGateSequence:
    """Sequence of native gates, applied left to right."""

    ops: tuple[tuple[str, tuple[int, ...]], ...]

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for name, _ in self.ops:
            out[name] = out.get(name, 0) + 1
        return out

    def unitary(self) -> np.ndarray:
        """Composed 4x4 matrix on the bond's two qubits (x = qubit 0)."""
        U = np.eye(4, dtype=complex)
        for name, qubits in self.ops:
            if name == "cz":
                g = CZ_MATRIX
            elif name in ("sx", "x"):
                one_q = SQRT_X if name == "sx" else PAULI_X
                local = qubits[0]
                g = np.kron(one_q, np.eye(2)) if local == 0 else np.kron(np.eye(2), one_q)
            else:
                raise ValueError(f"unknown native gate {name!r}")
            U = g @ U
        return U


def compile_swap_native(bond: tuple[int, int], L: int | None = None) -> NativeGateSequence:
    """Compile SWAP on a bond into natives: [CZ, sqrtX x sqrtX] three times.

    The composed unitary equals SWAP up to a global phase; gate budget is
    3 CZ + 6 sqrtX per SWAP.
    """
    x, y = bond
    if y != x + 1 or x < 0 or (L is not None and y >= L):
        raise OutOfRange(f"bond {bond} not a nearest-neighbour pair on the chain")
    ops = []
    for _ in range(3):
        ops.append(("cz", (0, 1)))
        ops.append(("sx", (0,)))
        ops.append(("sx", (1,)))
    return NativeGateSequence(ops=tuple(ops))


def idle_identity_padding(sites: list[int]) -> NativeGateSequence:
    """Identity insertions X*X on sites idle during a SWAP sublayer."""
    ops = []
    for s in sites:
        ops.append(("x", (s,)))
        ops.append(("x", (s,)))
    return NativeGateSequence(ops=tuple(ops))
