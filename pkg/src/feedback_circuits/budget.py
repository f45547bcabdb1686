"""Calibration-based time, error and fidelity budgets for feedback circuits.

Per-layer wall-clock time combines the two CZ sublayers, two rotation
layers, one mid-circuit measurement round and the conditional pulse.  The
per-layer error buckets the L-1 brickwork CZ gates, the expected p*L
mid-circuit measurements and idle dephasing tau_layer/T2; the survival
proxy after n layers is exp(-n * eps_layer).  Median device values only;
T1 is stored for reference but does not enter the error model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

from .circuit_model import FeedbackRule, compile_swap_native
from .errors import EmptyPool, ParseError

_CALIB_FIELDS = ("T1_us", "T2_us", "tau_1q_ns", "tau_2q_ns", "tau_m_ns", "r_2q", "r_m")


@dataclass(frozen=True)
class CalibrationData:
    """Median device calibration: times in the units of the field names."""

    T1_us: float
    T2_us: float
    tau_1q_ns: float
    tau_2q_ns: float
    tau_m_ns: float
    r_2q: float
    r_m: float

    def validate(self) -> None:
        for name in _CALIB_FIELDS:
            if getattr(self, name) <= 0:
                raise ParseError(f"calibration field {name} must be positive")
        for name in ("r_2q", "r_m"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ParseError(f"calibration field {name} must lie in (0, 1)")


def load_calibration(path: str | Path) -> CalibrationData:
    """Parse a key = value calibration file; unknown keys are rejected."""
    values: dict[str, float] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _CALIB_FIELDS:
            raise ParseError(f"{path}:{lineno}: unknown calibration key {key!r}")
        if key in values:
            raise ParseError(f"{path}:{lineno}: duplicate key {key!r}")
        try:
            values[key] = float(value.strip())
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: bad number for {key!r}") from exc
    missing = [k for k in _CALIB_FIELDS if k not in values]
    if missing:
        raise ParseError(f"{path}: missing calibration keys {missing}")
    calib = CalibrationData(**values)
    calib.validate()
    return calib


@dataclass(frozen=True)
class BudgetReport:
    feedback: str
    L: int
    p: float
    depth: int
    tau_U_ns: float
    tau_cond_ns: float
    tau_layer_us: float
    n_2q_per_layer: int
    n_meas_per_layer: float
    eps_layer: float
    survival_fidelity: float
    t1_unused: bool = True  # T1 is reported but not part of the error model

    def as_dict(self) -> dict:
        return {
            "feedback": self.feedback,
            "L": self.L,
            "p": self.p,
            "depth": self.depth,
            "tau_U_ns": self.tau_U_ns,
            "tau_cond_ns": self.tau_cond_ns,
            "tau_layer_us": self.tau_layer_us,
            "n_2q_per_layer": self.n_2q_per_layer,
            "n_meas_per_layer": self.n_meas_per_layer,
            "eps_layer": self.eps_layer,
            "survival_fidelity": self.survival_fidelity,
        }


def conditional_pulse_ns(calib: CalibrationData, feedback: FeedbackRule) -> float:
    """Conditional-pulse duration: one rotation for X, the compiled SWAP cost
    (3 CZ + 6 sqrtX) for SWAP feedback."""
    if feedback is FeedbackRule.COND_SWAP:
        counts = compile_swap_native((0, 1)).counts()
        return counts["cz"] * calib.tau_2q_ns + counts["sx"] * calib.tau_1q_ns
    if feedback is FeedbackRule.COND_X:
        return calib.tau_1q_ns
    return 0.0


def layer_duration(
    calib: CalibrationData, feedback: FeedbackRule = FeedbackRule.COND_X
) -> tuple[float, float]:
    """(tau_U in ns, tau_layer in us) for one scrambling+feedback layer."""
    tau_U = 2.0 * calib.tau_2q_ns + 2.0 * calib.tau_1q_ns
    tau_layer = tau_U + calib.tau_m_ns + conditional_pulse_ns(calib, feedback)
    return tau_U, tau_layer / 1000.0


def two_qubit_gates_per_layer(L: int) -> int:
    """Brickwork CZ count on an open chain: floor(L/2) + floor((L-1)/2) = L-1."""
    return L - 1


def expected_measurements_per_layer(L: int, p: float) -> float:
    return p * L


def layer_error(
    calib: CalibrationData, L: int, p: float,
    feedback: FeedbackRule = FeedbackRule.COND_X,
) -> float:
    """eps_layer = (L-1) r_2q + p L r_m + tau_layer / T2."""
    if L < 2:
        raise ValueError("need at least 2 sites")
    if not 0.0 <= p <= 1.0:
        raise ValueError("measurement probability must lie in [0, 1]")
    _, tau_layer_us = layer_duration(calib, feedback)
    return (
        two_qubit_gates_per_layer(L) * calib.r_2q
        + expected_measurements_per_layer(L, p) * calib.r_m
        + tau_layer_us / calib.T2_us
    )


def survival_fidelity(
    n: int, L: int, p: float, calib: CalibrationData,
    feedback: FeedbackRule = FeedbackRule.COND_X,
) -> float:
    """Conservative survival proxy F(n, L) = exp(-n * eps_layer)."""
    if n < 0:
        raise ValueError("layer count must be non-negative")
    return math.exp(-n * layer_error(calib, L, p, feedback))


def budget_report(
    calib: CalibrationData, L: int, p: float, depth: int,
    feedback: FeedbackRule = FeedbackRule.COND_X,
) -> BudgetReport:
    tau_U, tau_layer_us = layer_duration(calib, feedback)
    eps = layer_error(calib, L, p, feedback)
    return BudgetReport(
        feedback=feedback.value,
        L=L,
        p=p,
        depth=depth,
        tau_U_ns=tau_U,
        tau_cond_ns=conditional_pulse_ns(calib, feedback),
        tau_layer_us=tau_layer_us,
        n_2q_per_layer=two_qubit_gates_per_layer(L),
        n_meas_per_layer=expected_measurements_per_layer(L, p),
        eps_layer=eps,
        survival_fidelity=math.exp(-depth * eps),
    )


def format_budget_report(report: BudgetReport) -> str:
    rows = [
        ("feedback", report.feedback),
        ("L", str(report.L)),
        ("p", f"{report.p:g}"),
        ("depth", str(report.depth)),
        ("tau_U", f"{report.tau_U_ns:g} ns"),
        ("tau_cond", f"{report.tau_cond_ns:g} ns"),
        ("tau_layer", f"{report.tau_layer_us:g} us"),
        ("CZ gates / layer", str(report.n_2q_per_layer)),
        ("measurements / layer", f"{report.n_meas_per_layer:g}"),
        ("eps_layer", f"{report.eps_layer:.6g}"),
        ("survival F(depth, L)", f"{report.survival_fidelity:.6g}"),
        ("note", "T1 stored but unused by the error model"),
    ]
    width = max(len(name) for name, _ in rows)
    return "\n".join(f"{name:<{width}}  {value}" for name, value in rows)


def select_measurement_pattern(
    candidates: list[list[set[int]]] | list[list[list[int]]],
    readout_errors: dict[int, float] | list[float],
) -> int:
    """Index of the candidate minimizing total expected readout error.

    A candidate schedules one site set per layer; its cost is the sum of the
    scheduled sites' readout errors.  Ties break toward the lowest index.
    """
    if not candidates:
        raise EmptyPool("no measurement-pattern candidates")
    if not isinstance(readout_errors, dict):
        readout_errors = {i: e for i, e in enumerate(readout_errors)}
    best_index, best_cost = 0, None
    for i, candidate in enumerate(candidates):
        cost = sum(readout_errors[s] for layer in candidate for s in layer)
        if best_cost is None or cost < best_cost:
            best_index, best_cost = i, cost
    return best_index
