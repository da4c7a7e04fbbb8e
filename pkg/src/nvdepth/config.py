"""Run configuration: schema, loading and hashing.

Every length, field and time carries its unit in the key name
(``depth_nm``, ``b0_gauss``, ``t2n_star_us``). Unknown keys are rejected.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .core import MAGIC_ANGLE, PROTON_GAMMA, NuclearSample, SemiInfinite, Slab, gauss_to_tesla

__all__ = [
    "ConfigError",
    "SampleConfig",
    "NvConfig",
    "TauGrid",
    "TraceConfig",
    "FitOptions",
    "OracleConfig",
    "LinewidthConfig",
    "RunConfig",
    "load_config",
    "config_hash",
]


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SemiInfiniteConfig(_Strict):
    kind: Literal["semi_infinite"] = "semi_infinite"


class SlabConfig(_Strict):
    kind: Literal["slab"]
    z1_nm: float = Field(ge=0)
    z2_nm: float

    @model_validator(mode="after")
    def _order(self):
        if not self.z2_nm > self.z1_nm:
            raise ValueError("slab requires z1_nm < z2_nm")
        return self


class SampleConfig(_Strict):
    preset: Optional[Literal["immersion_oil"]] = None
    rho_per_nm3: float = Field(default=68.0, ge=0)
    gamma_n: float = Field(default=PROTON_GAMMA, gt=0)
    t2n_star_us: Optional[float] = Field(default=None, gt=0)
    geometry: Union[SemiInfiniteConfig, SlabConfig] = Field(default_factory=SemiInfiniteConfig,
                                                            discriminator="kind")

    def build(self) -> NuclearSample:
        geom = (SemiInfinite() if isinstance(self.geometry, SemiInfiniteConfig)
                else Slab(self.geometry.z1_nm * 1e-9, self.geometry.z2_nm * 1e-9))
        t2 = math.inf if self.t2n_star_us is None else self.t2n_star_us * 1e-6
        if self.preset == "immersion_oil":
            return NuclearSample.immersion_oil(t2n_star=t2, geometry=geom)
        return NuclearSample(rho=self.rho_per_nm3 * 1e27, gamma_n=self.gamma_n, t2n_star=t2, geometry=geom)


class NvConfig(_Strict):
    depth_nm: Optional[float] = Field(default=None, gt=0)
    alpha_deg: float = Field(default=math.degrees(MAGIC_ANGLE), ge=0, le=90)
    depth_bounds_nm: tuple[float, float] = (1.0, 100.0)

    @field_validator("depth_bounds_nm")
    @classmethod
    def _bounds(cls, v):
        if not 0 < v[0] < v[1]:
            raise ValueError("depth bounds must satisfy 0 < lo < hi")
        return v

    @property
    def alpha(self) -> float:
        return math.radians(self.alpha_deg)


class TauGrid(_Strict):
    start_ns: float = Field(gt=0)
    stop_ns: float = Field(gt=0)
    num: int = Field(ge=2)

    @model_validator(mode="after")
    def _order(self):
        if not self.stop_ns > self.start_ns:
            raise ValueError("stop_ns must exceed start_ns")
        return self


class TraceConfig(_Strict):
    label: str = ""
    nv_id: str = ""
    sample_id: str = ""
    n_pulses: int = Field(ge=1)
    b0_gauss: float = Field(gt=0)
    family: Literal["XY8", "CPMG"] = "XY8"
    tau: Optional[TauGrid] = None
    noise: float = Field(default=0.0, ge=0)
    depth_nm: Optional[float] = Field(default=None, gt=0)
    output_kind: Literal["normalized", "raw"] = "normalized"
    counts: float = Field(default=1e6, gt=0)
    shot_noise: bool = True
    background_amplitude: float = Field(default=0.3, gt=0, le=1)
    background_t2_us: float = Field(default=100.0, gt=0)
    background_p: float = Field(default=1.5, gt=0.5, le=4)

    @property
    def b0(self) -> float:
        return gauss_to_tesla(self.b0_gauss)


class FitOptions(_Strict):
    t2n_mode: Literal["finite", "infinite", "auto"] = "auto"
    joint: bool = False
    omega_policy: Literal["free", "fixed"] = "free"
    omega_window: float = Field(default=0.05, gt=0, lt=1)
    rho_sigma_per_nm3: float = Field(default=0.0, ge=0)
    window_half_width_ns: Optional[float] = Field(default=None, gt=0)


class OracleConfig(_Strict):
    depth_nm: float = Field(default=10.0, gt=0)
    rho_per_nm3: float = Field(default=68.0, gt=0)
    r_max_nm: float = Field(default=100.0, gt=0)
    tolerance: float = Field(default=0.01, gt=0)
    pseudospin_configs: int = Field(default=5, ge=0)
    pseudospin_rho_per_nm3: float = Field(default=0.05, gt=0)
    pseudospin_tolerance: float = Field(default=0.01, gt=0)


class LinewidthConfig(_Strict):
    d_min_nm: float = Field(default=2.0, gt=0)
    d_max_nm: float = Field(default=30.0, gt=0)
    num: int = Field(default=57, ge=2)
    diffusion_m2_per_s: Optional[float] = Field(default=None, gt=0)
    dynamic_viscosity_pa_s: Optional[float] = Field(default=None, gt=0)
    kinematic_viscosity_cst: Optional[float] = Field(default=450.0, gt=0)
    mass_density_kg_m3: Optional[float] = Field(default=900.0, gt=0)
    hydrodynamic_radius_nm: float = Field(default=1.0, gt=0)
    temperature_k: float = Field(default=293.0, gt=0)

    @model_validator(mode="after")
    def _range(self):
        if not self.d_max_nm > self.d_min_nm:
            raise ValueError("d_max_nm must exceed d_min_nm")
        return self


class RunConfig(_Strict):
    sample: SampleConfig = Field(default_factory=SampleConfig)
    nv: NvConfig = Field(default_factory=NvConfig)
    traces: list[TraceConfig] = Field(default_factory=list)
    fit: FitOptions = Field(default_factory=FitOptions)
    oracle: OracleConfig = Field(default_factory=OracleConfig)
    linewidth: LinewidthConfig = Field(default_factory=LinewidthConfig)
    seed: int = Field(default=0, ge=0)
    output_dir: str = "out"


def _format_errors(exc: ValidationError, source) -> str:
    lines = [f"invalid configuration {source}:"]
    for e in exc.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"  {loc}: {e['msg']}")
    return "\n".join(lines)


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Read a JSON or YAML config (``.yaml``/``.yml``); ``None`` gives the defaults."""
    data: dict = {}
    source = "<defaults>"
    if path is not None:
        path = Path(path)
        source = str(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if path.suffix.lower() in (".yaml", ".yml"):
            try:
                import yaml
            except ImportError as exc:  # pragma: no cover
                raise ConfigError("YAML configs need the optional 'pyyaml' package") from exc
            try:
                data = yaml.safe_load(text) or {}
            except yaml.YAMLError as exc:
                mark = getattr(exc, "problem_mark", None)
                where = f":{mark.line + 1}" if mark is not None else ""
                raise ConfigError(f"{path}{where}: {exc}") from exc
        else:
            try:
                data = json.loads(text) if text.strip() else {}
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
    data = {**data, **(overrides or {})}
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc, source)) from exc


def config_hash(cfg: RunConfig) -> str:
    """Short SHA-256 of the canonical JSON form of the validated config.

    The output directory is left out: where results go does not change them.
    """
    blob = json.dumps(cfg.model_dump(mode="json", exclude={"output_dir"}), sort_keys=True,
                      separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
