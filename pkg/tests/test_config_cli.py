import json

import pytest

from feedback_circuits import cli
from feedback_circuits.circuit_model import Architecture
from feedback_circuits.config import parse_config
from feedback_circuits.errors import ParseError, ValidationError

MINIMAL = """
[circuit]
architecture = cond_x
L = 20
depth = 10
g = 0.01

[engine]
engine = mps
"""

CALIB_TEXT = """
T1_us = 142.5
T2_us = 95.1
tau_1q_ns = 24
tau_2q_ns = 68
tau_m_ns = 1560
r_2q = 2.6e-3
r_m = 9.4e-3
"""


def write(tmp_path, text, name="exp.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestParseConfig:
    def test_minimal_config_fills_documented_defaults(self, tmp_path):
        config = parse_config(write(tmp_path, MINIMAL))
        spec = config.spec
        assert spec.architecture is Architecture.COND_X
        assert (spec.L, spec.depth, spec.g) == (20, 10, 0.01)
        assert spec.theta_max == 1.0
        assert spec.trajectories == 200
        assert spec.realizations == 10
        assert config.engine == "mps"
        assert config.chi_max == 64
        assert spec.init.kind == "center_block" and spec.init.count == 6

    def test_unknown_key_named_in_error(self, tmp_path):
        path = write(tmp_path, MINIMAL + "gg = 3\n")
        with pytest.raises(ParseError, match="gg"):
            parse_config(path)

    def test_unknown_section_rejected(self, tmp_path):
        path = write(tmp_path, MINIMAL + "\n[plotting]\ncolor = red\n")
        with pytest.raises(ParseError, match="plotting"):
            parse_config(path)

    def test_gradient_bound_validation(self, tmp_path):
        bad = MINIMAL.replace("g = 0.01", "g = 0.06")
        with pytest.raises(ValidationError, match="g\\*L"):
            parse_config(write(tmp_path, bad))

    def test_channel_size_cap_validated_before_compute(self, tmp_path):
        bad = MINIMAL.replace("engine = mps", "engine = channel")
        with pytest.raises(ValidationError, match="capped"):
            parse_config(write(tmp_path, bad))

    def test_explicit_init_parsed(self, tmp_path):
        text = MINIMAL + "\n".join([
            "", "[output]", "directory = results", "emit = densities",
        ])
        text = text.replace("g = 0.01", "g = 0.01\ninit = explicit:" + "0" * 6 + "1" * 14)
        config = parse_config(write(tmp_path, text))
        assert config.spec.init.kind == "explicit"
        assert config.output_dir == "results"
        assert config.emit == ("densities",)

    def test_missing_required_key(self, tmp_path):
        with pytest.raises(ParseError, match="depth"):
            parse_config(write(tmp_path, "[circuit]\narchitecture = cond_x\nL = 4\n"))

    def test_bad_architecture(self, tmp_path):
        with pytest.raises(ParseError, match="architecture"):
            parse_config(write(tmp_path, MINIMAL.replace("cond_x", "banana")))


class TestCliBudget:
    def test_budget_text_output(self, tmp_path, capsys):
        calib = write(tmp_path, CALIB_TEXT, name="calib.txt")
        rc = cli.main(["budget", "--calib", str(calib), "--L", "50",
                       "--p", "0.01", "--depth", "10"])
        out = capsys.readouterr().out
        assert rc == 0
        assert "184" in out and "1.768" in out

    def test_budget_json_output(self, tmp_path, capsys):
        calib = write(tmp_path, CALIB_TEXT, name="calib.txt")
        rc = cli.main(["budget", "--calib", str(calib), "--L", "100",
                       "--p", "0.1", "--depth", "5", "--json"])
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["eps_layer"] == pytest.approx(0.370, abs=0.002)

    def test_bad_calibration_exit_code_one(self, tmp_path, capsys):
        calib = write(tmp_path, "nonsense = 1\n", name="calib.txt")
        rc = cli.main(["budget", "--calib", str(calib), "--L", "50",
                       "--p", "0.01", "--depth", "10"])
        assert rc == 1
        assert "error" in capsys.readouterr().err


class TestCliRunAndFit:
    def test_run_fit_and_fixtures(self, tmp_path, capsys):
        config_text = """
[circuit]
architecture = cond_swap
L = 16
depth = 6
p_swap = 0.3
theta_max = 0.25
init = explicit:1111001100110011
master_seed = 77
realizations = 3
trajectories = 400

[engine]
engine = markov

[output]
directory = {out}
emit = densities,scalars
""".format(out=tmp_path / "run")
        config = write(tmp_path, config_text)
        assert cli.main(["run", "--config", str(config)]) == 0
        densities = tmp_path / "run" / "densities.csv"
        assert densities.exists()
        manifest = json.loads((tmp_path / "run" / "manifest.json").read_text())
        assert manifest["complete"] is True
        assert "densities.csv" in manifest["outputs"]

        assert cli.main(["fit", "--densities", str(densities),
                         "--model", "drift_diffusion"]) == 0
        out = capsys.readouterr().out
        assert "v " in out or "v  " in out

        fx = tmp_path / "fixtures.json"
        assert cli.main(["fixtures", "--out", str(fx)]) == 0
        data = json.loads(fx.read_text())
        assert "cond_x_L6" in data and "cond_swap_L6" in data

    def test_invalid_config_exit_code(self, tmp_path, capsys):
        config = write(tmp_path, MINIMAL.replace("g = 0.01", "g = 0.06"))
        assert cli.main(["run", "--config", str(config)]) == 1

    def test_compare_subcommand(self, tmp_path, capsys):
        config_text = """
[circuit]
architecture = cond_x
L = 6
depth = 3
g = 0.05
init = center_block:2
master_seed = 4
realizations = 2
trajectories = 300

[engine]
engine = statevector
"""
        config = write(tmp_path, config_text)
        rc = cli.main(["compare", "--config", str(config),
                       "--engines", "channel,statevector",
                       "--tol-density", "0.1", "--tol-com", "0.5"])
        out = capsys.readouterr().out
        assert rc == 0
        assert "channel vs statevector" in out
        assert "PASS" in out
