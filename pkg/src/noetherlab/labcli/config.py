"""Strict TOML experiment configuration.

Every key is validated against a fixed schema; unknown keys are errors so
that misspelled physics parameters fail loudly. Defaults reproduce the
shipped demonstration scenario geometry (2D box, open time axis of extent
3*pi/2, periodic space of extent 4*pi, metric (+1, -1)).
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import numpy as np

from ..dynamics import INITIAL_PRESETS, LagrangianSpec
from ..lattice import Lattice
from ..noether import TransformationSpec
from ..presets import LAGRANGIAN_PRESETS, NONLOCAL_PRESET, u1_generators
from ..symlang import ParseError, conj_of, parse


class ConfigError(ValueError):
    pass


DEFAULT_TIME_EXTENT = 1.5 * np.pi
DEFAULT_SPACE_EXTENT = 4.0 * np.pi

_INITIAL_ARGS = {
    "zero": set(),
    "plane_wave": {"k", "mode", "amplitude", "axis"},
    "k0_mode": {"amplitude"},
    "gaussian_packet": {"center", "width", "k", "amplitude", "axis"},
}

_RUN_MODES = ("derive", "simulate", "verify", "all")


@dataclass
class Thresholds:
    zero_mean: float = 1e-10
    reality: float = 1e-12
    contradiction_ratio: float = 100.0
    onshell_rms: float = 0.05
    balance_order: float = 1.5
    action_identity: float = 1e-12
    invariance: float = 1e-12
    gauge_round_trip: float = 1e-12
    convergence_floor: float = 1e-12


@dataclass
class OutputConfig:
    directory: str = "out"
    formats: tuple[str, ...] = ("json", "csv")
    dump_fields: bool = False


@dataclass
class ExperimentConfig:
    shape: tuple[int, ...]
    extents: tuple[float, ...]
    periodic: tuple[bool, ...]
    signature: tuple[int, ...]
    lagrangian_preset: Optional[str]
    lagrangian_dsl: Optional[str]
    field_names: tuple[str, ...]
    parameters: dict[str, float]
    local_factor: Optional[float]  # None = auto (1 - lambda)
    transformation_preset: Optional[str]
    generator_sources: dict[str, str]
    epsilon: float
    initial_preset: str
    initial_args: dict[str, Any]
    run: str
    refinement: tuple[int, ...]
    output: OutputConfig
    thresholds: Thresholds
    seed: int
    echo: dict = dataclass_field(default_factory=dict)

    # -- builders ---------------------------------------------------------

    def build_lattice(self, n: Optional[int] = None) -> Lattice:
        shape = self.shape if n is None else tuple(n for _ in self.shape)
        return Lattice.from_extents(shape, self.extents, self.periodic, self.signature)

    def build_spec(self) -> LagrangianSpec:
        params = {k: complex(v) for k, v in self.parameters.items()}
        if self.lagrangian_preset is not None:
            return LAGRANGIAN_PRESETS[self.lagrangian_preset](self.signature, params)
        try:
            expr = parse(self.lagrangian_dsl, fields=self.field_names, params=params.keys())
        except ParseError as e:
            raise ConfigError(f"lagrangian.dsl: {e}") from None
        return LagrangianSpec(
            name="inline",
            fields=self.field_names,
            params=params,
            signature=self.signature,
            lagrangian=expr,
        )

    def build_transform(self) -> TransformationSpec:
        if self.transformation_preset == "u1":
            return TransformationSpec(u1_generators(self.field_names[0]), epsilon=self.epsilon)
        generators = {}
        params = self.parameters.keys()
        for var, source in self.generator_sources.items():
            try:
                generators[var] = parse(source, fields=self.field_names, params=params)
            except ParseError as e:
                raise ConfigError(f"transformation.generators.{var}: {e}") from None
        for name in self.field_names:
            conj_name = name + "*"
            if name in generators and conj_name not in generators:
                generators[conj_name] = conj_of(generators[name])
        return TransformationSpec(generators, epsilon=self.epsilon)

    def build_initial(self, lattice: Lattice) -> tuple[np.ndarray, np.ndarray]:
        builder = INITIAL_PRESETS[self.initial_preset]
        return builder(lattice, self.parameters, **self.initial_args)

    @property
    def lam(self) -> float:
        return float(self.parameters.get("lambda", 0.0))

    @property
    def coupling(self) -> float:
        return float(self.parameters.get("e", 1.0))

    def resolved_local_factor(self) -> float:
        if self.local_factor is None:
            return 1.0 - self.lam
        return self.local_factor


# ---------------------------------------------------------------------------
# loading and validation
# ---------------------------------------------------------------------------


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


def _typed(section: dict, section_name: str, key: str, types, default):
    value = section.get(key, default)
    if value is default and key not in section:
        return default
    if not isinstance(value, types):
        raise ConfigError(f"{section_name}.{key}: expected {types}, got {value!r}")
    return value


def _check_keys(section: dict, section_name: str, allowed: set[str]) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section_name}]: {sorted(unknown)}")


def _float_list(section: dict, section_name: str, key: str, default: list) -> list[float]:
    value = section.get(key, default)
    if not isinstance(value, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        raise ConfigError(f"{section_name}.{key}: expected a list of numbers")
    return [float(v) for v in value]


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as f:
            raw = tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from None
    return parse_config(raw)


def parse_config(raw: dict) -> ExperimentConfig:
    _check_keys(
        raw,
        "root",
        {"lattice", "lagrangian", "parameters", "transformation", "initial", "pipeline", "output", "thresholds"},
    )

    # [lattice]
    lat = raw.get("lattice", {})
    _check_keys(lat, "lattice", {"shape", "extent", "spacing", "periodic", "signature"})
    shape = lat.get("shape", [128, 128])
    _require(isinstance(shape, list) and all(isinstance(n, int) for n in shape), "lattice.shape: expected a list of integers")
    k = len(shape)
    _require(k >= 2, "lattice.shape: need at least a time and one space axis")
    periodic = lat.get("periodic", [False] + [True] * (k - 1))
    _require(
        isinstance(periodic, list) and len(periodic) == k and all(isinstance(p, bool) for p in periodic),
        "lattice.periodic: expected a list of booleans matching shape",
    )
    _require(not periodic[0], "lattice.periodic: the time axis (entry 0) must be open")
    signature = lat.get("signature", [1] + [-1] * (k - 1))
    _require(
        isinstance(signature, list) and len(signature) == k and all(s in (1, -1) for s in signature),
        "lattice.signature: expected a list of +1/-1 matching shape",
    )
    _require(not ("extent" in lat and "spacing" in lat), "lattice: give extent or spacing, not both")
    if "spacing" in lat:
        spacing = _float_list(lat, "lattice", "spacing", None)
        _require(len(spacing) == k, "lattice.spacing: length must match shape")
        extents = [
            h * (n if per else n - 1) for h, n, per in zip(spacing, shape, periodic)
        ]
    else:
        extents = _float_list(
            lat, "lattice", "extent", [DEFAULT_TIME_EXTENT] + [DEFAULT_SPACE_EXTENT] * (k - 1)
        )
        _require(len(extents) == k, "lattice.extent: length must match shape")
    _require(all(e > 0 for e in extents), "lattice.extent: extents must be positive")

    # [lagrangian]
    lag = raw.get("lagrangian", {})
    _check_keys(lag, "lagrangian", {"preset", "dsl", "fields"})
    preset = lag.get("preset")
    dsl = lag.get("dsl")
    _require(not (preset and dsl), "lagrangian: give preset or dsl, not both")
    if preset is None and dsl is None:
        preset = NONLOCAL_PRESET
    if preset is not None:
        _require(preset in LAGRANGIAN_PRESETS, f"lagrangian.preset: unknown preset {preset!r}")
    fields = lag.get("fields", ["phi"])
    _require(
        isinstance(fields, list) and fields and all(isinstance(f, str) for f in fields),
        "lagrangian.fields: expected a nonempty list of names",
    )

    # [parameters]
    par = raw.get("parameters", {})
    _check_keys(par, "parameters", {"m", "lambda", "g_quartic", "e", "local_factor"})
    parameters = {}
    for key, default in (("m", 1.0), ("lambda", 0.0), ("g_quartic", 0.0), ("e", 1.0)):
        value = par.get(key, default)
        _require(
            isinstance(value, (int, float)) and not isinstance(value, bool),
            f"parameters.{key}: expected a real number, got {value!r}",
        )
        parameters[key] = float(value)
    _require(parameters["m"] >= 0, "parameters.m: must be nonnegative")
    _require(parameters["e"] != 0, "parameters.e: must be nonzero")
    local_factor_raw = par.get("local_factor", "auto")
    if local_factor_raw == "auto":
        local_factor = None
    else:
        _require(
            isinstance(local_factor_raw, (int, float)) and not isinstance(local_factor_raw, bool),
            "parameters.local_factor: expected a number or 'auto'",
        )
        _require(local_factor_raw != 0, "parameters.local_factor: must be nonzero")
        local_factor = float(local_factor_raw)

    # [transformation]
    tr = raw.get("transformation", {})
    _check_keys(tr, "transformation", {"preset", "generators", "epsilon"})
    tr_preset = tr.get("preset")
    generators = tr.get("generators", {})
    _require(not (tr_preset and generators), "transformation: give preset or generators, not both")
    if tr_preset is None and not generators:
        tr_preset = "u1"
    if tr_preset is not None:
        _require(tr_preset == "u1", f"transformation.preset: unknown preset {tr_preset!r}")
    _require(
        isinstance(generators, dict) and all(isinstance(v, str) for v in generators.values()),
        "transformation.generators: expected a table of DSL strings",
    )
    epsilon = _typed(tr, "transformation", "epsilon", (int, float), 1e-3)
    _require(0 < float(epsilon) <= 0.1, "transformation.epsilon: must lie in (0, 0.1]")

    # [initial]
    init = raw.get("initial", {})
    init_preset = init.get("preset", "k0_mode")
    _require(init_preset in INITIAL_PRESETS, f"initial.preset: unknown preset {init_preset!r}")
    _check_keys(init, "initial", {"preset"} | _INITIAL_ARGS[init_preset])
    init_args = {key: value for key, value in init.items() if key != "preset"}
    for key, value in init_args.items():
        _require(
            isinstance(value, (int, float)) and not isinstance(value, bool),
            f"initial.{key}: expected a number, got {value!r}",
        )

    # [pipeline]
    pipe = raw.get("pipeline", {})
    _check_keys(pipe, "pipeline", {"run", "refinement"})
    run = pipe.get("run", "all")
    _require(run in _RUN_MODES, f"pipeline.run: expected one of {_RUN_MODES}, got {run!r}")
    refinement = pipe.get("refinement", [64, 128, 256])
    _require(
        isinstance(refinement, list) and all(isinstance(n, int) for n in refinement),
        "pipeline.refinement: expected a list of integers",
    )
    _require(
        all(a < b for a, b in zip(refinement, refinement[1:])),
        "pipeline.refinement: levels must be strictly increasing",
    )

    # [output]
    out = raw.get("output", {})
    _check_keys(out, "output", {"directory", "formats", "dump_fields"})
    directory = _typed(out, "output", "directory", str, "out")
    formats_raw = out.get("formats", ["json", "csv"])
    if formats_raw == "both":
        formats_raw = ["json", "csv"]
    _require(
        isinstance(formats_raw, list) and all(f in ("json", "csv") for f in formats_raw),
        "output.formats: expected a list drawn from ['json', 'csv'] or 'both'",
    )
    dump_fields = _typed(out, "output", "dump_fields", bool, False)

    # [thresholds]
    th = raw.get("thresholds", {})
    defaults = Thresholds()
    _check_keys(th, "thresholds", set(vars(defaults)))
    thresholds = Thresholds(
        **{
            key: float(_typed(th, "thresholds", key, (int, float), getattr(defaults, key)))
            for key in vars(defaults)
        }
    )

    cfg = ExperimentConfig(
        shape=tuple(shape),
        extents=tuple(extents),
        periodic=tuple(periodic),
        signature=tuple(signature),
        lagrangian_preset=preset,
        lagrangian_dsl=dsl,
        field_names=tuple(fields),
        parameters=parameters,
        local_factor=local_factor,
        transformation_preset=tr_preset,
        generator_sources=dict(generators),
        epsilon=float(epsilon),
        initial_preset=init_preset,
        initial_args=init_args,
        run=run,
        refinement=tuple(refinement),
        output=OutputConfig(directory=directory, formats=tuple(formats_raw), dump_fields=dump_fields),
        thresholds=thresholds,
        seed=0,
    )
    cfg.echo = _echo_dict(cfg)

    # fail early on unparsable inline sources
    cfg.build_spec()
    cfg.build_transform()
    return cfg


def _echo_dict(cfg: ExperimentConfig) -> dict:
    return {
        "lattice": {
            "shape": list(cfg.shape),
            "extent": list(cfg.extents),
            "periodic": list(cfg.periodic),
            "signature": list(cfg.signature),
        },
        "lagrangian": {
            "preset": cfg.lagrangian_preset,
            "dsl": cfg.lagrangian_dsl,
            "fields": list(cfg.field_names),
        },
        "parameters": {**cfg.parameters, "local_factor": "auto" if cfg.local_factor is None else cfg.local_factor},
        "transformation": {
            "preset": cfg.transformation_preset,
            "generators": dict(cfg.generator_sources),
            "epsilon": cfg.epsilon,
        },
        "initial": {"preset": cfg.initial_preset, **cfg.initial_args},
        "pipeline": {"run": cfg.run, "refinement": list(cfg.refinement)},
        "output": {
            "directory": cfg.output.directory,
            "formats": list(cfg.output.formats),
            "dump_fields": cfg.output.dump_fields,
        },
        "thresholds": dict(vars(cfg.thresholds)),
    }
