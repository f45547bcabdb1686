"""Experiment orchestration: deterministic parallel runs and persistence.

Work is split into fixed-size units (one realization for the exact engines,
fixed trajectory chunks for the sampling engines) whose results are reduced
in unit order, so outputs are byte-identical for any worker count.  A run
directory always contains a manifest; it is written marked incomplete
before any compute and finalized with per-file checksums afterwards.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from . import channel_oracle, markov, mps, statevector
from .config import ExperimentConfig, config_as_dict
from .errors import ShapeMismatch
from .observables import (
    DensitySeries, RealizationBundle, aggregate_realizations, com_series,
)
from .trajectory import TrajectoryRecord

#: trajectories per work unit; fixed so chunking is worker-count independent
TRAJECTORY_CHUNK = 32

DENSITY_HEADER = "engine,realization,layer,site,density,stderr"
SCALAR_HEADER = "engine,layer,observable,value,std_dev,mean_abs_dev,n_realizations"
TRAJECTORY_HEADER = "realization,trajectory,layer,site,measured,outcome,feedback_applied"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _run_trajectory_chunk(config: ExperimentConfig, realization: int,
                          t_start: int, t_stop: int, collect_events: bool):
    """Worker body: sum and sum-of-squares over one trajectory chunk."""
    spec = config.spec
    total = np.zeros((spec.depth + 1, spec.L))
    total_sq = np.zeros_like(total)
    records: list[TrajectoryRecord] = []
    for t in range(t_start, t_stop):
        if config.engine == "mps":
            rec = mps.run_trajectory_mps(
                spec, realization, t, chi_max=config.chi_max,
                trunc_tol=config.trunc_tol,
            )
        else:
            rec = statevector.run_trajectory(spec, realization, t)
        total += rec.densities
        total_sq += rec.densities**2
        if collect_events:
            records.append(rec)
    return realization, t_start, total, total_sq, t_stop - t_start, records


def _run_exact_unit(config: ExperimentConfig, realization: int):
    if config.engine == "channel":
        series = channel_oracle.evolve_channel(config.spec, realization)
    else:
        series = markov.run_markov(config.spec, realization)
    return realization, series


@dataclass
class RunResult:
    per_realization: list[DensitySeries]
    bundle: RealizationBundle
    records: list[TrajectoryRecord]
    manifest: dict


def _worker_count(config: ExperimentConfig) -> int:
    if config.workers > 0:
        return config.workers
    return os.cpu_count() or 1


def run_series(config: ExperimentConfig, collect_events: bool = False):
    """Compute per-realization density series (and optional trajectory records)."""
    config.validate()
    spec = config.spec
    workers = _worker_count(config)
    records: list[TrajectoryRecord] = []

    if config.engine in ("channel", "markov"):
        units = [(r,) for r in range(spec.realizations)]
        if workers == 1 or len(units) == 1:
            results = [_run_exact_unit(config, r) for (r,) in units]
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(_run_exact_unit, config, r) for (r,) in units]
                results = [f.result() for f in futures]
        results.sort(key=lambda item: item[0])
        per_real = [series for _, series in results]
        return per_real, records

    # sampling engines: fixed-size trajectory chunks, reduced in chunk order
    chunks = []
    for r in range(spec.realizations):
        for t0 in range(0, spec.trajectories, TRAJECTORY_CHUNK):
            chunks.append((r, t0, min(t0 + TRAJECTORY_CHUNK, spec.trajectories)))
    if workers == 1 or len(chunks) == 1:
        raw = [
            _run_trajectory_chunk(config, r, t0, t1, collect_events)
            for r, t0, t1 in chunks
        ]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_run_trajectory_chunk, config, r, t0, t1, collect_events)
                for r, t0, t1 in chunks
            ]
            raw = [f.result() for f in futures]
    raw.sort(key=lambda item: (item[0], item[1]))

    per_real = []
    M = spec.trajectories
    for r in range(spec.realizations):
        total = np.zeros((spec.depth + 1, spec.L))
        total_sq = np.zeros_like(total)
        for item in raw:
            if item[0] != r:
                continue
            total += item[2]
            total_sq += item[3]
            records.extend(item[5])
        mean = total / M
        var = np.maximum(total_sq / M - mean**2, 0.0)
        stderr = np.sqrt(var / M) if M > 1 else np.zeros_like(mean)
        per_real.append(DensitySeries(
            engine=config.engine, L=spec.L, depth=spec.depth,
            values=mean, stderr=stderr,
        ))
    records.sort(key=lambda rec: (rec.realization, rec.trajectory))
    return per_real, records


# ---------------------------------------------------------------------------
# persistence


def write_density_csv(path, per_real: list[DensitySeries], aggregate: DensitySeries) -> None:
    """Per-realization rows plus aggregate rows under realization = -1
    (density = mean across realizations, stderr = their standard deviation)."""
    lines = [DENSITY_HEADER]
    for r, series in enumerate(per_real):
        for layer in range(series.depth + 1):
            for site in range(series.L):
                lines.append(
                    f"{series.engine},{r},{layer},{site},"
                    f"{_fmt(series.values[layer, site])},{_fmt(series.stderr[layer, site])}"
                )
    for layer in range(aggregate.depth + 1):
        for site in range(aggregate.L):
            lines.append(
                f"{aggregate.engine},-1,{layer},{site},"
                f"{_fmt(aggregate.values[layer, site])},{_fmt(aggregate.stderr[layer, site])}"
            )
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def write_scalar_csv(path, bundle: RealizationBundle, engine: str) -> None:
    lines = [SCALAR_HEADER]
    for name, series in bundle.scalars.items():
        for layer, (v, sd, mad) in enumerate(
            zip(series.values, series.std_dev, series.mean_abs_dev)
        ):
            lines.append(
                f"{engine},{layer},{name},{_fmt(v)},{_fmt(sd)},{_fmt(mad)},"
                f"{series.n_realizations}"
            )
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def write_trajectory_csv(path, records: list[TrajectoryRecord], engine: str) -> None:
    """Event rows per measured unit; the MPS engine appends a per-layer
    discarded-weight column."""
    with_truncation = engine == "mps"
    header = TRAJECTORY_HEADER + (",discarded_weight" if with_truncation else "")
    lines = [header]
    for rec in records:
        for layer, events in enumerate(rec.events):
            for ev in events:
                row = (
                    f"{rec.realization},{rec.trajectory},{layer},{ev.site},"
                    f"{int(ev.measured)},{ev.outcome},{int(ev.feedback_applied)}"
                )
                if with_truncation:
                    row += f",{_fmt(rec.discarded_weight[layer])}"
                lines.append(row)
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def read_density_csv(path) -> dict[int, np.ndarray]:
    """Realization -> (depth+1, L) array; -1 holds the aggregate."""
    rows = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != DENSITY_HEADER:
            raise ShapeMismatch(f"unexpected density header {header!r}")
        for line in fh:
            engine, r, layer, site, density, stderr = line.strip().split(",")
            rows.append((int(r), int(layer), int(site), float(density)))
    out: dict[int, np.ndarray] = {}
    for r in sorted({row[0] for row in rows}):
        sel = [row for row in rows if row[0] == r]
        depth = max(row[1] for row in sel)
        L = max(row[2] for row in sel) + 1
        arr = np.zeros((depth + 1, L))
        for _, layer, site, density in sel:
            arr[layer, site] = density
        out[r] = arr
    return out


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            h.update(block)
    return h.hexdigest()


def run_experiment(config: ExperimentConfig) -> RunResult:
    """Execute a configured run and persist its outputs.

    Identical config and seed give byte-identical CSV files regardless of
    worker count.
    """
    config.validate()
    out_dir = config.output_dir
    os.makedirs(out_dir, exist_ok=True)
    manifest_path = os.path.join(out_dir, "manifest.json")
    manifest = {
        "version": __version__,
        "engine": config.engine,
        "master_seed": config.spec.master_seed,
        "config": config_as_dict(config),
        "complete": False,
        "outputs": {},
    }
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)

    collect_events = "trajectories" in config.emit and config.engine in ("statevector", "mps")
    per_real, records = run_series(config, collect_events=collect_events)
    bundle = aggregate_realizations(per_real)

    outputs = {}
    if "densities" in config.emit:
        path = os.path.join(out_dir, "densities.csv")
        write_density_csv(path, per_real, bundle.densities)
        outputs["densities.csv"] = _sha256(path)
    if "scalars" in config.emit:
        path = os.path.join(out_dir, "scalars.csv")
        write_scalar_csv(path, bundle, config.engine)
        outputs["scalars.csv"] = _sha256(path)
    if collect_events:
        path = os.path.join(out_dir, "trajectories.csv")
        write_trajectory_csv(path, records, config.engine)
        outputs["trajectories.csv"] = _sha256(path)
    if "fits" in config.emit:
        from . import continuum
        from .circuit_model import Architecture

        data = bundle.densities.values
        if config.spec.architecture is Architecture.COND_SWAP:
            result = continuum.fit_drift_diffusion(data, k=4, dt=1.0, dx=1.0)
            title = "drift-diffusion fit (site units)"
        else:
            result = continuum.fit_decay_diffusion(data, dt=1.0)
            title = "decay-diffusion fit (u = x/L units)"
        path = os.path.join(out_dir, "fit_report.txt")
        with open(path, "w", newline="") as fh:
            fh.write(continuum.format_fit_report(result, title=title) + "\n")
        outputs["fit_report.txt"] = _sha256(path)

    manifest["outputs"] = outputs
    manifest["complete"] = True
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return RunResult(per_realization=per_real, bundle=bundle, records=records,
                     manifest=manifest)


# ---------------------------------------------------------------------------
# engine comparison


def compare_engines(
    base_config: ExperimentConfig,
    engines: list[str],
    density_tol: float = np.inf,
    com_tol: float = np.inf,
) -> dict:
    """Cross-engine comparison on a shared spec.

    Returns per-layer max |density difference| and |center-of-mass
    difference| for every engine pair, with pass/fail against the given
    tolerances.
    """
    if len(engines) < 2:
        raise ValueError("need at least two engines to compare")
    bundles = {}
    for engine in engines:
        cfg = base_config.with_engine(engine)
        per_real, _ = run_series(cfg)
        bundles[engine] = aggregate_realizations(per_real)

    pairs = []
    for i, a in enumerate(engines):
        for b in engines[i + 1:]:
            va, vb = bundles[a].densities.values, bundles[b].densities.values
            if va.shape != vb.shape:
                raise ShapeMismatch(f"{a} and {b} series have different shapes")
            density_diff = np.abs(va - vb).max(axis=1)
            com_diff = np.abs(
                com_series(bundles[a].densities) - com_series(bundles[b].densities)
            )
            pairs.append({
                "engines": (a, b),
                "max_density_diff": density_diff,
                "max_com_diff": com_diff,
                "density_pass": bool(density_diff.max() <= density_tol),
                "com_pass": bool(com_diff.max() <= com_tol),
            })
    return {"engines": engines, "pairs": pairs,
            "passed": all(p["density_pass"] and p["com_pass"] for p in pairs)}


def format_comparison(report: dict) -> str:
    lines = []
    for pair in report["pairs"]:
        a, b = pair["engines"]
        lines.append(f"{a} vs {b}")
        lines.append(f"  max |density diff| per layer: "
                     + " ".join(f"{d:.3e}" for d in pair["max_density_diff"]))
        lines.append(f"  |center-of-mass diff| per layer: "
                     + " ".join(f"{d:.3e}" for d in pair["max_com_diff"]))
        lines.append(f"  density within tolerance: {pair['density_pass']}")
        lines.append(f"  center of mass within tolerance: {pair['com_pass']}")
    lines.append(f"overall: {'PASS' if report['passed'] else 'FAIL'}")
    return "\n".join(lines)
