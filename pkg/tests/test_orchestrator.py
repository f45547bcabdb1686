import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from feedback_circuits import orchestrator as orch
from feedback_circuits.circuit_model import Architecture, CircuitSpec, InitialState
from feedback_circuits.config import ExperimentConfig


def small_config(engine="statevector", out="out", **spec_kw):
    base = dict(
        L=5, depth=3, architecture=Architecture.COND_X, g=0.08,
        init=InitialState(kind="center_block", count=2),
        master_seed=42, realizations=2, trajectories=48,
    )
    base.update(spec_kw)
    return ExperimentConfig(
        spec=CircuitSpec(**base), engine=engine, workers=1, output_dir=out,
        emit=("densities", "scalars", "trajectories"),
    )


def file_hash(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class TestRunSeries:
    def test_statevector_two_realizations(self):
        per_real, records = orch.run_series(small_config(), collect_events=True)
        assert len(per_real) == 2
        assert per_real[0].values.shape == (4, 5)
        assert len(records) == 2 * 48
        # records arrive ordered by (realization, trajectory)
        keys = [(r.realization, r.trajectory) for r in records]
        assert keys == sorted(keys)

    def test_markov_engine(self):
        per_real, _ = orch.run_series(small_config(engine="markov"))
        assert len(per_real) == 2
        assert per_real[0].engine == "markov"

    def test_channel_engine(self):
        per_real, _ = orch.run_series(small_config(engine="channel"))
        assert np.all(per_real[0].stderr == 0.0)


class TestPersistence:
    def test_run_experiment_outputs_and_manifest(self, tmp_path):
        config = small_config(out=str(tmp_path / "run"))
        result = orch.run_experiment(config)
        out = tmp_path / "run"
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["complete"] is True
        for name, digest in manifest["outputs"].items():
            assert file_hash(out / name) == digest
        with open(out / "densities.csv") as fh:
            assert fh.readline().strip() == orch.DENSITY_HEADER
        with open(out / "scalars.csv") as fh:
            assert fh.readline().strip() == orch.SCALAR_HEADER
        with open(out / "trajectories.csv") as fh:
            assert fh.readline().strip() == orch.TRAJECTORY_HEADER

    def test_density_roundtrip(self, tmp_path):
        config = small_config(out=str(tmp_path / "run"))
        result = orch.run_experiment(config)
        series = orch.read_density_csv(tmp_path / "run" / "densities.csv")
        assert set(series) == {-1, 0, 1}
        # 17 significant digits survive the round trip exactly
        assert np.array_equal(series[0], result.per_realization[0].values)
        assert np.array_equal(series[-1], result.bundle.densities.values)

    def test_mps_trajectory_csv_has_truncation_column(self, tmp_path):
        config = small_config(engine="mps", out=str(tmp_path / "run"))
        orch.run_experiment(config)
        with open(tmp_path / "run" / "trajectories.csv") as fh:
            header = fh.readline().strip()
        assert header.endswith(",discarded_weight")

    def test_incomplete_manifest_written_first(self, tmp_path, monkeypatch):
        config = small_config(out=str(tmp_path / "run"))

        def boom(*a, **kw):
            raise RuntimeError("engine exploded")

        monkeypatch.setattr(orch, "run_series", boom)
        with pytest.raises(RuntimeError):
            orch.run_experiment(config)
        manifest = json.loads((tmp_path / "run" / "manifest.json").read_text())
        assert manifest["complete"] is False


class TestDeterminism:
    @pytest.mark.parametrize("engine", ["statevector", "markov"])
    def test_byte_identical_across_worker_counts(self, tmp_path, engine):
        digests = set()
        for workers in (1, 4):
            config = small_config(engine=engine, out=str(tmp_path / f"w{workers}"))
            config = ExperimentConfig(
                spec=config.spec, engine=engine, workers=workers,
                output_dir=config.output_dir, emit=("densities", "scalars"),
            )
            orch.run_experiment(config)
            digests.add(
                (file_hash(tmp_path / f"w{workers}" / "densities.csv"),
                 file_hash(tmp_path / f"w{workers}" / "scalars.csv"))
            )
        assert len(digests) == 1

    def test_repeat_run_identical_checksums(self, tmp_path):
        hashes = []
        for tag in ("a", "b"):
            config = small_config(engine="markov", out=str(tmp_path / tag))
            result = orch.run_experiment(config)
            hashes.append(tuple(sorted(result.manifest["outputs"].items())))
        assert hashes[0] == hashes[1]


class TestCompareEngines:
    def test_channel_vs_statevector_within_tolerance(self):
        config = small_config(trajectories=600)
        report = orch.compare_engines(
            config, ["channel", "statevector"], density_tol=0.08, com_tol=0.35
        )
        assert report["passed"]

    def test_same_engine_agrees_exactly(self):
        config = small_config(engine="markov")
        report = orch.compare_engines(config, ["markov", "markov"],
                                      density_tol=1e-15, com_tol=1e-12)
        assert report["passed"]

    def test_format_report(self):
        config = small_config(engine="markov")
        report = orch.compare_engines(config, ["markov", "channel"])
        text = orch.format_comparison(report)
        assert "markov vs channel" in text
