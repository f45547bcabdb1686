"""Experiment configuration: strict INI-style parsing with per-module sections.

Unknown sections or keys are parse errors; semantic violations (engine size
caps, profile bounds) are validation errors.  Defaults: theta_max = 1.0,
trajectories (W) = 200, realizations = 10, chi_max = 64.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, replace
from pathlib import Path

from .circuit_model import Architecture, CircuitSpec, InitialState
from .errors import InvalidSpec, ParseError, ValidationError

ENGINES = ("channel", "statevector", "mps", "markov")
EMIT_FLAGS = ("densities", "scalars", "trajectories", "fits")
OUTPUT_DIR_ENV = "FBCIRC_OUTPUT_DIR"

#: engine size caps checked before any compute
ENGINE_SITE_CAPS = {"channel": 12, "statevector": 26, "mps": None, "markov": None}

_CIRCUIT_KEYS = {
    "architecture", "l", "depth", "g", "p_swap", "theta_max", "init",
    "master_seed", "realizations", "trajectories", "cz_first", "freeze_patterns",
}
_ENGINE_KEYS = {"engine", "chi_max", "trunc_tol", "workers"}
_OUTPUT_KEYS = {"directory", "emit"}
_SECTIONS = {"circuit": _CIRCUIT_KEYS, "engine": _ENGINE_KEYS, "output": _OUTPUT_KEYS}


@dataclass(frozen=True)
class ExperimentConfig:
    spec: CircuitSpec
    engine: str = "markov"
    chi_max: int = 64
    trunc_tol: float = 1e-10
    workers: int = 0  # 0 = use available parallelism
    output_dir: str = "out"
    emit: tuple[str, ...] = ("densities", "scalars")

    def validate(self) -> None:
        if self.engine not in ENGINES:
            raise ValidationError(f"unknown engine {self.engine!r}; choose from {ENGINES}")
        cap = ENGINE_SITE_CAPS[self.engine]
        if cap is not None and self.spec.L > cap:
            raise ValidationError(
                f"engine {self.engine!r} is capped at L <= {cap}, got L = {self.spec.L}"
            )
        if self.chi_max < 1:
            raise ValidationError("chi_max must be >= 1")
        if self.trunc_tol < 0:
            raise ValidationError("trunc_tol must be >= 0")
        if self.workers < 0:
            raise ValidationError("workers must be >= 0")
        for flag in self.emit:
            if flag not in EMIT_FLAGS:
                raise ValidationError(f"unknown emit flag {flag!r}")
        try:
            self.spec.validate()
        except InvalidSpec as exc:
            raise ValidationError(str(exc)) from exc

    def with_engine(self, engine: str) -> "ExperimentConfig":
        return replace(self, engine=engine)


def _parse_init(text: str) -> InitialState:
    kind, _, arg = text.partition(":")
    kind = kind.strip()
    if kind in ("center_block", "right_edge_block"):
        try:
            count = int(arg)
        except ValueError as exc:
            raise ParseError(f"init {text!r}: block size must be an integer") from exc
        return InitialState(kind=kind, count=count)
    if kind == "explicit":
        bits = arg.strip()
        if not bits or any(c not in "01" for c in bits):
            raise ParseError(f"init {text!r}: explicit pattern must be a 0/1 string")
        return InitialState(kind="explicit", bits=tuple(int(c) for c in bits))
    raise ParseError(f"init {text!r}: unknown kind {kind!r}")


def _get(parser, section, key, cast, default):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key)
    try:
        if cast is bool:
            lowered = raw.strip().lower()
            if lowered in ("true", "yes", "1", "on"):
                return True
            if lowered in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        return cast(raw)
    except (ValueError, ParseError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"[{section}] {key} = {raw!r}: not a valid {cast.__name__}") from exc


def parse_config(path: str | Path) -> ExperimentConfig:
    """Parse and validate an experiment config file."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except FileNotFoundError:
        raise
    except (configparser.Error, UnicodeDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc

    for section in parser.sections():
        if section not in _SECTIONS:
            raise ParseError(f"{path}: unknown section [{section}]")
        for key in parser.options(section):
            if key not in _SECTIONS[section]:
                raise ParseError(f"{path}: unknown key {key!r} in section [{section}]")

    if not parser.has_section("circuit"):
        raise ParseError(f"{path}: missing required section [circuit]")
    for key in ("architecture", "l", "depth"):
        if not parser.has_option("circuit", key):
            raise ParseError(f"{path}: missing required key {key!r} in [circuit]")

    arch_raw = parser.get("circuit", "architecture").strip().lower()
    try:
        architecture = Architecture(arch_raw)
    except ValueError as exc:
        raise ParseError(
            f"{path}: unknown architecture {arch_raw!r}; choose from "
            f"{[a.value for a in Architecture]}"
        ) from exc

    spec = CircuitSpec(
        L=_get(parser, "circuit", "l", int, None),
        depth=_get(parser, "circuit", "depth", int, None),
        architecture=architecture,
        theta_max=_get(parser, "circuit", "theta_max", float, 1.0),
        g=_get(parser, "circuit", "g", float, 0.0),
        p_swap=_get(parser, "circuit", "p_swap", float, 0.0),
        init=_get(parser, "circuit", "init", _parse_init, InitialState()),
        master_seed=_get(parser, "circuit", "master_seed", int, 0),
        realizations=_get(parser, "circuit", "realizations", int, 10),
        trajectories=_get(parser, "circuit", "trajectories", int, 200),
        cz_first=_get(parser, "circuit", "cz_first", bool, False),
        freeze_patterns=_get(parser, "circuit", "freeze_patterns", bool, False),
    )

    engine = "markov"
    chi_max, trunc_tol, workers = 64, 1e-10, 0
    if parser.has_section("engine"):
        engine = _get(parser, "engine", "engine", str, engine).strip().lower()
        chi_max = _get(parser, "engine", "chi_max", int, chi_max)
        trunc_tol = _get(parser, "engine", "trunc_tol", float, trunc_tol)
        workers = _get(parser, "engine", "workers", int, workers)

    output_dir = os.environ.get(OUTPUT_DIR_ENV, "out")
    emit: tuple[str, ...] = ("densities", "scalars")
    if parser.has_section("output"):
        output_dir = _get(parser, "output", "directory", str, output_dir)
        emit_raw = _get(parser, "output", "emit", str, None)
        if emit_raw is not None:
            emit = tuple(part.strip() for part in emit_raw.split(",") if part.strip())

    config = ExperimentConfig(
        spec=spec, engine=engine, chi_max=chi_max, trunc_tol=trunc_tol,
        workers=workers, output_dir=output_dir, emit=emit,
    )
    config.validate()
    return config


def config_as_dict(config: ExperimentConfig) -> dict:
    spec = config.spec
    return {
        "circuit": {
            "architecture": spec.architecture.value,
            "L": spec.L,
            "depth": spec.depth,
            "theta_max": spec.theta_max,
            "g": spec.g,
            "p_swap": spec.p_swap,
            "init": {
                "kind": spec.init.kind,
                "count": spec.init.count,
                "bits": list(spec.init.bits),
            },
            "master_seed": spec.master_seed,
            "realizations": spec.realizations,
            "trajectories": spec.trajectories,
            "cz_first": spec.cz_first,
            "freeze_patterns": spec.freeze_patterns,
        },
        "engine": {
            "engine": config.engine,
            "chi_max": config.chi_max,
            "trunc_tol": config.trunc_tol,
            "workers": config.workers,
        },
        "output": {
            "directory": config.output_dir,
            "emit": list(config.emit),
        },
    }
