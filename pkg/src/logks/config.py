"""Scenario and sweep documents (YAML or JSON) and their schema.

Every solver and monitor knob is reachable from here; unknown keys are
rejected so a typo never silently falls back to a default.
"""
from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Annotated, List, Literal, Optional, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import sources
from .grid import DEFAULT_FLOOR, GridSpec
from .model import ModelParams, MonitorSettings, Scenario, SolverSettings, chi_threshold

SCHEMA_VERSION = 1
MONITOR_NAMES = ("mass_ledger", "v_lower_bound", "z_bound", "barrier", "asymptotics")
_AUTO = re.compile(r"^auto:threshold\*([0-9.eE+-]+)$")


class ConfigError(ValueError):
    """Raised for any schema or consistency problem in a config document."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ConstantCfg(_Strict):
    kind: Literal["constant"]
    value: float


class GaussianCfg(_Strict):
    kind: Literal["gaussian_bump"]
    background: float = 0.0
    amplitude: float
    center: List[float]
    width: float = Field(gt=0)


class CosineCfg(_Strict):
    kind: Literal["cosine_mode"]
    mean: float
    amplitude: float
    modes: List[int]


class DecayCfg(_Strict):
    kind: Literal["separable_time_decay"]
    base: Annotated[Union[ConstantCfg, GaussianCfg, CosineCfg], Field(discriminator="kind")]
    target: float = Field(ge=0)
    rate: float = Field(ge=0)


SourceCfg = Annotated[Union[ConstantCfg, GaussianCfg, CosineCfg, DecayCfg],
                      Field(discriminator="kind")]


class GridCfg(_Strict):
    dimension: Literal[1, 2]
    lengths: List[float]
    cells: List[int]

    @model_validator(mode="after")
    def _axes(self):
        if len(self.lengths) != self.dimension or len(self.cells) != self.dimension:
            raise ValueError("lengths and cells need one entry per dimension")
        return self


class ParamsCfg(_Strict):
    chi: Union[float, str]
    sigma: float = Field(ge=0)
    lambda_: float = Field(ge=0, le=1, alias="lambda")

    @field_validator("chi")
    @classmethod
    def _chi(cls, v):
        if isinstance(v, str) and not _AUTO.match(v.strip()):
            raise ValueError('chi must be a number or "auto:threshold*<factor>"')
        if not isinstance(v, str) and v < 0:
            raise ValueError("chi must be >= 0")
        return v


class SourcesCfg(_Strict):
    u0: SourceCfg
    v0: SourceCfg
    phi: SourceCfg
    psi: SourceCfg
    psi_inf: Optional[SourceCfg] = None


class SolverCfg(_Strict):
    dt_max: float = Field(1e-2, gt=0)
    dt_min: float = Field(1e-12, ge=0)
    safety: float = Field(0.5, gt=0, le=1)
    u_blow: float = Field(1e8, ge=0)
    floor: float = Field(DEFAULT_FLOOR, gt=0)
    cg_tol: float = Field(1e-10, gt=0)
    cg_maxiter: int = Field(10_000, gt=0)
    preconditioner: bool = False
    max_steps: int = Field(10_000_000, gt=0)
    fixed_dt: Optional[float] = Field(None, gt=0)


class MonitorsCfg(_Strict):
    attach: List[Literal[MONITOR_NAMES]] = ["mass_ledger", "v_lower_bound", "z_bound", "barrier"]
    ledger_residual_tol: float = 1e-10
    l1_bound_tol: float = 1e-8
    v_lower_rel_tol: float = 1e-3
    z_growth_slack: float = 10.0
    plateau_factor: float = 1.05
    z_tol_h2: float = 10.0
    z_tol_dt: float = 10.0
    asymptotics_eps_u: float = 1e-3
    asymptotics_eps_v: float = 1e-4
    transient_fraction: float = Field(0.25, ge=0, lt=1)
    gronwall_rel_tol: float = 0.05


class OutputsCfg(_Strict):
    snapshot_every: int = Field(0, ge=0)
    snapshot_format: Literal["csv", "binary"] = "binary"
    directory: Optional[str] = None


class ConvergenceCfg(_Strict):
    regime: Literal["diffusion", "upwind"] = "diffusion"
    levels: int = Field(3, ge=3)
    base_dt: float = Field(1e-3, gt=0)
    spatial_order_min: Optional[float] = None
    temporal_order_min: float = 0.9


class ScenarioCfg(_Strict):
    schema_version: Literal[1]
    name: str
    grid: GridCfg
    params: ParamsCfg
    sources: SourcesCfg
    horizon: float = Field(ge=0)
    solver: SolverCfg = SolverCfg()
    monitors: MonitorsCfg = MonitorsCfg()
    outputs: OutputsCfg = OutputsCfg()
    convergence: ConvergenceCfg = ConvergenceCfg()


class SweepCellCfg(_Strict):
    dimension: Literal[1, 2]
    lambda_: float = Field(ge=0, le=1, alias="lambda")
    sigma: float = Field(ge=0)
    data_scale: float = Field(1.0, gt=0)


class SweepCfg(_Strict):
    schema_version: Literal[1]
    name: str
    base: Union[str, ScenarioCfg]
    cells: List[SweepCellCfg]
    chi_lo: float = Field(ge=0)
    chi_hi: float = Field(gt=0)
    resolution: float = Field(gt=0)
    horizon: float = Field(gt=0)
    grid_cells: Optional[int] = Field(None, ge=4)


def resolve_chi(chi, d: int, lam: float) -> float:
    if isinstance(chi, str):
        factor = float(_AUTO.match(chi.strip()).group(1))
        return chi_threshold(d, lam) * factor
    return float(chi)


def read_document(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        if path.suffix == ".json":
            data = json.loads(text)
        else:
            data = yaml.safe_load(text)
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: parse error: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def parse_scenario(data: dict) -> ScenarioCfg:
    try:
        return ScenarioCfg.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format(exc)) from exc


def _format(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(x) for x in err["loc"])
        lines.append(f"{loc}: {err['msg']}")
    return "schema error:\n  " + "\n  ".join(lines)


def _source(cfg, lengths) -> sources.SourceSpec:
    return sources.from_dict(cfg.model_dump(), lengths)


def build_scenario(cfg: ScenarioCfg) -> Scenario:
    try:
        grid = GridSpec(tuple(cfg.grid.lengths), tuple(cfg.grid.cells))
        d = grid.dimension
        params = ModelParams(resolve_chi(cfg.params.chi, d, cfg.params.lambda_),
                             cfg.params.sigma, cfg.params.lambda_)
        L = grid.lengths
        src = cfg.sources
        for name in ("u0", "v0", "phi", "psi", "psi_inf"):
            spec = getattr(src, name)
            if spec is not None and getattr(spec, "kind", None) == "gaussian_bump" \
                    and len(spec.center) != d:
                raise ValueError(f"sources.{name}.center needs {d} entries")
            if spec is not None and getattr(spec, "kind", None) == "cosine_mode" \
                    and len(spec.modes) != d:
                raise ValueError(f"sources.{name}.modes needs {d} entries")
        return Scenario(
            name=cfg.name, grid=grid, params=params,
            u0=_source(src.u0, L), v0=_source(src.v0, L),
            phi=_source(src.phi, L), psi=_source(src.psi, L),
            psi_inf=_source(src.psi_inf, L) if src.psi_inf is not None else None,
            horizon=cfg.horizon,
            solver=SolverSettings(**cfg.solver.model_dump()),
            monitors=MonitorSettings(**{**cfg.monitors.model_dump(),
                                        "attach": tuple(cfg.monitors.attach)}),
            snapshot_every=cfg.outputs.snapshot_every,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_scenario(path) -> Tuple[ScenarioCfg, Scenario]:
    cfg = parse_scenario(read_document(path))
    return cfg, build_scenario(cfg)


def load_sweep(path) -> Tuple[SweepCfg, ScenarioCfg]:
    path = Path(path)
    data = read_document(path)
    try:
        cfg = SweepCfg.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format(exc)) from exc
    if isinstance(cfg.base, str):
        base = parse_scenario(read_document(path.parent / cfg.base))
    else:
        base = cfg.base
    if cfg.chi_hi <= cfg.chi_lo:
        raise ConfigError("chi_hi must exceed chi_lo")
    return cfg, base
