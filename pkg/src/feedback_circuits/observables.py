"""Diagnostics computed from density series.

Per-site occupations feed three scalars: the normalized center of mass
N^c(i), the net center-of-mass shift dN^c(i) = L*(N^c(i) - N^c(1)) measured
from layer 1, and the end-to-end polarization J^c(i) comparing the two
boundary occupations.  Scalars are computed per realization and aggregated
afterwards; the center of mass is a nonlinear function of the profile, so
averaging profiles first would bias it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatch, VanishingDensity

#: total-occupation floor below which normalized observables are undefined
DENSITY_FLOOR = 1e-9


@dataclass
class DensitySeries:
    """Per-layer, per-site occupation means; layer 0 is the initial state."""

    engine: str
    L: int
    depth: int
    values: np.ndarray  # (depth+1, L)
    stderr: np.ndarray  # (depth+1, L)
    n_realizations: int = 1

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.stderr = np.asarray(self.stderr, dtype=float)
        expected = (self.depth + 1, self.L)
        if self.values.shape != expected or self.stderr.shape != expected:
            raise ShapeMismatch(
                f"series shape {self.values.shape} != {(self.depth + 1, self.L)}"
            )

    def validate_range(self, slack: float = 1e-9) -> None:
        if self.values.min() < -slack or self.values.max() > 1.0 + slack:
            raise ValueError("occupations must lie in [0, 1]")


@dataclass
class ScalarSeries:
    """Per-layer scalar observable with dispersion across realizations."""

    name: str
    values: np.ndarray
    std_dev: np.ndarray
    mean_abs_dev: np.ndarray
    n_realizations: int

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.std_dev = np.asarray(self.std_dev, dtype=float)
        self.mean_abs_dev = np.asarray(self.mean_abs_dev, dtype=float)


def center_of_mass(densities: np.ndarray, floor: float = DENSITY_FLOOR) -> float:
    """Occupation-weighted mean position, sum_x x*n_x / sum_x n_x."""
    n = np.asarray(densities, dtype=float)
    total = n.sum()
    if total <= floor:
        raise VanishingDensity(f"total occupation {total} below {floor}")
    return float(np.arange(n.size) @ n / total)


def polarization(densities: np.ndarray, floor: float = DENSITY_FLOOR) -> float:
    """Boundary imbalance (n_{L-1} - n_0) / sum_x n_x."""
    n = np.asarray(densities, dtype=float)
    total = n.sum()
    if total <= floor:
        raise VanishingDensity(f"total occupation {total} below {floor}")
    return float((n[-1] - n[0]) / total)


def com_series(series: DensitySeries) -> np.ndarray:
    return np.array([center_of_mass(row) for row in series.values])


def polarization_series(series: DensitySeries) -> np.ndarray:
    return np.array([polarization(row) for row in series.values])


def com_shift(series: DensitySeries) -> np.ndarray:
    """Net shift dN^c(i) = L*(N^c(i) - N^c(1)); layer 1 is the reference."""
    if series.depth < 1:
        raise ShapeMismatch("center-of-mass shift needs depth >= 1")
    com = com_series(series)
    return series.L * (com - com[1])


@dataclass
class RealizationBundle:
    """Aggregate over realizations: mean profile plus per-scalar statistics."""

    densities: DensitySeries
    scalars: dict[str, ScalarSeries] = field(default_factory=dict)


def aggregate_realizations(series_list: list[DensitySeries]) -> RealizationBundle:
    """Mean/std across realizations; scalars are averaged per realization."""
    if not series_list:
        raise ShapeMismatch("no series to aggregate")
    head = series_list[0]
    for s in series_list[1:]:
        if (s.L, s.depth) != (head.L, head.depth):
            raise ShapeMismatch("series disagree on (L, depth)")
    stack = np.stack([s.values for s in series_list])
    R = stack.shape[0]
    mean = stack.mean(axis=0)
    std = stack.std(axis=0, ddof=1) if R > 1 else np.zeros_like(mean)
    densities = DensitySeries(
        engine=head.engine, L=head.L, depth=head.depth,
        values=mean, stderr=std, n_realizations=R,
    )

    scalars: dict[str, ScalarSeries] = {}
    per_real = {
        "N_c": np.stack([com_series(s) for s in series_list]),
        "J_c": np.stack([polarization_series(s) for s in series_list]),
    }
    if head.depth >= 1:
        per_real["delta_N_c"] = np.stack([com_shift(s) for s in series_list])
    for name, rows in per_real.items():
        mean_row = rows.mean(axis=0)
        std_row = rows.std(axis=0, ddof=1) if R > 1 else np.zeros_like(mean_row)
        mad_row = np.abs(rows - mean_row).mean(axis=0)
        scalars[name] = ScalarSeries(
            name=name, values=mean_row, std_dev=std_row,
            mean_abs_dev=mad_row, n_realizations=R,
        )
    return RealizationBundle(densities=densities, scalars=scalars)
