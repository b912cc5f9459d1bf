"""Run configuration: defaults, TOML files and dotted command-line overrides.

Precedence is defaults < config file < ``--section.key=value`` flags.  The
resolved configuration is written next to every command's outputs and can be
fed back in with ``--config`` to replay a run.
"""

from __future__ import annotations

import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import InvalidInputError
from .objective import LossWeights
from .ordinality import EdgeClassifierConfig, PairClassifierConfig
from .simulate import SpectralConfig, ThermalSceneParams
from .solver import SOLVER_EDGE_DEFAULTS, SolverConfig

OUTPUT_ENV = "THERMIID_OUTPUT_DIR"
DEFAULT_OUTPUT = "thermiid_out"


class ConfigError(InvalidInputError):
    """Unknown key or ill-typed value in a config file or override."""


@dataclass
class RunSection:
    seed: int = 0
    output_dir: str = ""
    figures: bool = True


@dataclass
class SceneSection:
    kind: str = "checker_shadow"
    height: int = 128
    width: int = 128
    channels: int = 3
    gain: float = 1.0
    noise_stddev: float = 0.0
    irradiance_scale: float = 100.0
    broadband: bool = False


@dataclass
class SpectralSection:
    albedo_infrared: float = 1.0
    intensity_ratio: float = 0.0


@dataclass
class ThermalSection:
    convection_coeff: float = 10.0
    air_temp: float = 300.0
    surround_temp: float = 300.0
    emissivity: float = 0.95
    conductivity: float = 0.0
    heat_capacity: float = 1.0e4
    response_gain: float = 1.0
    response_offset: float = 0.0


@dataclass
class SolverSection:
    iterations: int = 2000
    learning_rate: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    resample_interval: int = 100
    pair_radius: float = 0.0  # 0 picks a radius from the image size


@dataclass
class WeightsSection:
    lambda_recon: float = 1.0
    lambda_edge: float = 1.0
    lambda_ord: float = 1.0
    lambda_nonneg: float = 10.0
    margin: float = 0.01


@dataclass
class EdgesSection:
    mag_threshold: float = SOLVER_EDGE_DEFAULTS["mag_threshold"]
    cos_threshold: float = SOLVER_EDGE_DEFAULTS["cos_threshold"]
    thermal_blur_sigma: float = SOLVER_EDGE_DEFAULTS["thermal_blur_sigma"]


@dataclass
class PairsSection:
    diff_threshold: float = 0.05
    count: int = 20  # pairs kept by label-pairs; negative keeps every sampled pair
    radius: float = 0.0


@dataclass
class EvaluateSection:
    max_si_mse_albedo: float = math.inf
    max_si_mse_shading: float = math.inf
    min_ordinal_accuracy: float = 0.0


@dataclass
class GradcheckSection:
    height: int = 16
    width: int = 16
    trials: int = 200
    max_rel_error: float = 1e-4


@dataclass
class IoSection:
    input: str = ""  # scene bundle directory
    truth: str = ""  # directory with truth_*.pfm; defaults to input
    estimate: str = ""  # directory with albedo.pfm / shading.pfm for evaluate
    thermal_file: str = "thermal.pfm"


@dataclass
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    scene: SceneSection = field(default_factory=SceneSection)
    spectral: SpectralSection = field(default_factory=SpectralSection)
    thermal: ThermalSection = field(default_factory=ThermalSection)
    solver: SolverSection = field(default_factory=SolverSection)
    weights: WeightsSection = field(default_factory=WeightsSection)
    edges: EdgesSection = field(default_factory=EdgesSection)
    pairs: PairsSection = field(default_factory=PairsSection)
    evaluate: EvaluateSection = field(default_factory=EvaluateSection)
    gradcheck: GradcheckSection = field(default_factory=GradcheckSection)
    io: IoSection = field(default_factory=IoSection)

    # -- conversions to library objects ---------------------------------------

    def output_dir(self) -> Path:
        return Path(self.run.output_dir or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT)

    def thermal_params(self) -> ThermalSceneParams:
        return ThermalSceneParams(**asdict(self.thermal))

    def spectral_config(self) -> SpectralConfig | None:
        if not self.scene.broadband:
            return None
        return SpectralConfig(**asdict(self.spectral))

    def solver_config(self) -> SolverConfig:
        s = self.solver
        return SolverConfig(
            iterations=s.iterations,
            learning_rate=s.learning_rate,
            moment_decays=(s.beta1, s.beta2),
            resample_interval=s.resample_interval,
            pair_radius=s.pair_radius or None,
            seed=self.run.seed,
            weights=LossWeights(**asdict(self.weights)),
            edge_cfg=EdgeClassifierConfig(**asdict(self.edges)),
            pair_cfg=PairClassifierConfig(self.pairs.diff_threshold),
        )

    def to_dict(self) -> dict:
        return asdict(self)

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())


def _coerce(value, typ, where):
    if typ is bool:
        if isinstance(value, bool):
            return value
    elif typ is int:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
    elif typ is float:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    elif typ is str:
        if isinstance(value, str):
            return value
    raise ConfigError(f"{where}: expected {typ.__name__}, got {value!r}")


_TYPES = {"int": int, "float": float, "bool": bool, "str": str}


def _apply(cfg: RunConfig, section: str, key: str, value, where: str, raw: str | None = None):
    sec = getattr(cfg, section, None)
    names = {f.name: f for f in fields(RunConfig)}
    if section not in names or sec is None:
        raise ConfigError(f"{where}: unknown section [{section}]")
    sec_fields = {f.name: f for f in fields(sec)}
    if key not in sec_fields:
        raise ConfigError(f"{where}: unknown key {section}.{key}")
    typ = sec_fields[key].type
    typ = _TYPES.get(typ, typ) if isinstance(typ, str) else typ
    if typ is str and raw is not None:
        value = raw  # paths like 007 or true stay literal
    setattr(sec, key, _coerce(value, typ, f"{where} {section}.{key}"))


def merge(cfg: RunConfig, data: dict, where: str = "config") -> RunConfig:
    for section, table in data.items():
        if not isinstance(table, dict):
            raise ConfigError(f"{where}: top-level key {section!r} must be a table")
        for key, value in table.items():
            _apply(cfg, section, key, value, where)
    return cfg


def load_file(path, cfg: RunConfig | None = None) -> RunConfig:
    cfg = cfg or RunConfig()
    p = Path(path)
    try:
        data = tomllib.loads(p.read_text())
    except FileNotFoundError:
        raise InvalidInputError(f"config file not found: {p}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{p}: {exc}") from None
    return merge(cfg, data, str(p))


def parse_value(text: str):
    """Interpret an override value as a TOML scalar, falling back to a bare string."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(cfg: RunConfig, overrides) -> RunConfig:
    """Apply ``section.key=value`` strings in order."""
    for item in overrides:
        name, sep, text = item.partition("=")
        section, dot, key = name.partition(".")
        if not sep or not dot or not key:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        _apply(cfg, section, key, parse_value(text), f"--{name}", raw=text)
    return cfg


def resolve(config_path=None, overrides=()) -> RunConfig:
    cfg = RunConfig()
    if config_path:
        load_file(config_path, cfg)
    return apply_overrides(cfg, overrides)
