"""Declarative experiment configuration.

A config is one JSON document. ``beta`` may be a number, a symbolic
threshold such as ``"beta_vee+0.5"`` or a list of either; lists expand into
one sub-experiment per value for the simulation experiments.
"""
from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, ValidationError, field_validator

from ._rng import derive_seed
from .errors import BuildError, ConfigError
from .landscape import Landscape, Well, build_euclidean_landscape, build_torus_landscape, load_landscape
from .spectral import Spectrum, beta_thresholds, beta_zero

OUTPUT_ENV = "FRAUDSIM_OUTPUT_DIR"
DEFAULT_OUTPUT = "fraudsim-output"

EXPERIMENTS = ("lyapunov", "selection", "invariant", "critical", "sphere", "spectral", "inequality", "verify")
SIMULATED = ("lyapunov", "selection", "invariant", "critical", "verify")

_SYMBOLIC = re.compile(r"^\s*(beta_zero|beta_vee|beta_wedge)\s*(?:([+-])\s*([0-9.eE+-]+))?\s*$")

BetaValue = Union[float, str]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class WellSpec(_Strict):
    position: list[float]
    curvature: list[float]


class LandscapeSpec(_Strict):
    domain: Literal["flat_torus", "euclidean"] = "flat_torus"
    wells: list[WellSpec]
    target_exact: bool = False
    period: Optional[list[float]] = None
    r: Optional[float] = None
    beta_range: Optional[tuple[float, float]] = None


class SimSpec(_Strict):
    dt: float = 1e-3
    horizon: float = 40.0
    n_paths: int = 1
    record_stride: int = 1
    seed: int = 0
    floor_distance: float = 1e-12
    burn_in: float = 0.0
    workers: int = 1
    start: Literal["uniform", "point", "shell"] = "uniform"
    x0: Optional[list[float]] = None
    shell_factor: float = 5.0

    @field_validator("dt", "horizon", "floor_distance", "shell_factor")
    @classmethod
    def _positive(cls, v):
        if not v > 0:
            raise ValueError("must be positive")
        return v

    @field_validator("n_paths", "record_stride", "workers")
    @classmethod
    def _at_least_one(cls, v):
        if v < 1:
            raise ValueError("must be >= 1")
        return v

    @field_validator("seed")
    @classmethod
    def _seed_range(cls, v):
        if not 0 <= v < 2 ** 64:
            raise ValueError("must be a 64-bit unsigned integer")
        return v


class AnalysisSpec(_Strict):
    bins: int = 64
    tail_fraction: float = 0.5
    u0: float = 0.1
    budget: Optional[int] = None
    method: Literal["auto", "quadrature", "monte_carlo"] = "auto"
    confidence: float = 0.95
    rate_tolerance: float = 0.15
    slack: float = 0.85
    one_sided_min: float = 0.95
    symmetric: bool = False
    tv_max: float = 0.05
    rel_err_max: float = 0.10
    ergodic_tol: float = 0.03
    tv_times: Optional[list[float]] = None
    tv_bins: int = 8
    occupation_min: float = 0.9
    compare_horizon: Optional[float] = None
    sphere_tol: float = 0.02
    two_point_fraction: float = 0.15
    grid_resolution: Optional[int] = None
    write_paths: bool = False

    @field_validator("tail_fraction")
    @classmethod
    def _fraction(cls, v):
        if not 0 < v <= 1:
            raise ValueError("must lie in (0, 1]")
        return v

    @field_validator("bins", "tv_bins")
    @classmethod
    def _bins(cls, v):
        if v < 1:
            raise ValueError("must be >= 1")
        return v

    @field_validator("u0")
    @classmethod
    def _u0(cls, v):
        if not v > 0:
            raise ValueError("must be positive")
        return v

    @field_validator("budget")
    @classmethod
    def _budget(cls, v):
        if v is not None and v <= 0:
            raise ValueError("must be positive")
        return v


class TwoPointSpec(_Strict):
    lambda_minus: float
    lambda_plus: float
    dims: list[int]


class ExperimentConfig(_Strict):
    experiment: Literal["lyapunov", "selection", "invariant", "critical", "sphere", "spectral", "inequality", "verify"]
    landscape: Optional[Union[LandscapeSpec, str]] = None
    beta: Union[BetaValue, list[BetaValue]] = 0.0
    sim: SimSpec = SimSpec()
    analysis: AnalysisSpec = AnalysisSpec()
    spectra: Optional[list[list[float]]] = None
    two_point: Optional[TwoPointSpec] = None
    theta0: Optional[list[float]] = None
    output_dir: Optional[str] = None

    def echo(self):
        """JSON-ready dict; parsing it again gives an equal config."""
        return self.model_dump(mode="json")

    @classmethod
    def json_schema(cls):
        return cls.model_json_schema()


@dataclass
class ResolvedExperiment:
    """One runnable unit: a config with a single numeric beta and its seed."""
    config: ExperimentConfig
    landscape: Optional[Landscape]
    beta: float
    seed: int
    index: int
    label: str


@dataclass
class Plan:
    config: ExperimentConfig
    landscape: Optional[Landscape]
    runs: list = field(default_factory=list)
    betas: list = field(default_factory=list)


def _errors_from_pydantic(exc):
    out = []
    for e in exc.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        out.append((loc, e["msg"]))
    return out


def parse_config(doc, base_dir=None):
    """Parse a dict, JSON string or file path into an ``ExperimentConfig``.

    Relative landscape paths are resolved against ``base_dir`` (the config
    file's directory when a path is given).
    """
    if isinstance(doc, (str, os.PathLike)) and not str(doc).lstrip().startswith("{"):
        path = Path(doc)
        if not path.is_file():
            raise ConfigError([("<file>", f"config file {str(path)!r} does not exist")])
        base_dir = path.parent if base_dir is None else base_dir
        doc = path.read_text(encoding="utf-8")
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise ConfigError([("<json>", str(exc))]) from None
    try:
        cfg = ExperimentConfig.model_validate(doc)
    except ValidationError as exc:
        raise ConfigError(_errors_from_pydantic(exc)) from None
    if isinstance(cfg.landscape, str) and base_dir is not None and not Path(cfg.landscape).is_absolute():
        cfg = cfg.model_copy(update={"landscape": str(Path(base_dir) / cfg.landscape)})
    return cfg


def build_landscape(spec, beta_range=None):
    if isinstance(spec, str):
        return load_landscape(spec)
    wells = [Well(w.position, w.curvature) for w in spec.wells]
    if spec.domain == "flat_torus":
        return build_torus_landscape(wells, target_exact=spec.target_exact, period=spec.period)
    return build_euclidean_landscape(wells, beta_range=spec.beta_range or beta_range, r=spec.r)


def resolve_beta(value, spectra, m):
    """Numeric beta from a number or an expression such as ``beta_vee+0.5``."""
    if not isinstance(value, str):
        return float(value)
    match = _SYMBOLIC.match(value)
    if not match:
        raise ValueError(f"cannot parse beta {value!r}; use a number or beta_zero/beta_vee/beta_wedge[+-c]")
    name, sign, num = match.groups()
    if name == "beta_zero":
        base = beta_zero(m)
    else:
        if not spectra:
            raise ValueError(f"{name} needs well spectra")
        th = beta_thresholds(spectra)
        base = th.beta_vee if name == "beta_vee" else th.beta_wedge
    off = float(num) if num else 0.0
    return base - off if sign == "-" else base + off


def _regime_errors(experiment, beta, m, loc):
    b0 = beta_zero(m)
    if experiment == "invariant" and not beta < b0:
        return [(loc, f"C_beta infinite for beta={beta:g}, m={m}: U^(-1-beta) is integrable "
                      f"if and only if 2(beta+1) < m (beta < beta0 = {b0:g})")]
    if experiment in ("lyapunov", "selection") and not beta > b0:
        return [(loc, f"{experiment} needs the attractive regime beta > beta0 = {b0:g}, got {beta:g}")]
    if experiment == "critical" and beta != b0:
        return [(loc, f"critical experiment runs at beta = beta0 = {b0:g}, got {beta:g}")]
    return []


def plan_experiment(cfg):
    """Validate ``cfg`` semantically and expand it into runnable units.

    Everything that can be checked without simulating is checked here:
    required fields, file references, landscape construction and the beta
    regime of each sweep value.
    """
    errors = []
    exp = cfg.experiment
    land = None
    raw = cfg.beta if isinstance(cfg.beta, list) else [cfg.beta]
    if not raw:
        errors.append(("beta", "beta list is empty"))
    if exp in SIMULATED:
        if cfg.landscape is None:
            errors.append(("landscape", f"{exp} experiment needs a landscape"))
        elif isinstance(cfg.landscape, str) and not Path(cfg.landscape).is_file():
            errors.append(("landscape", f"landscape file {cfg.landscape!r} does not exist"))
        if errors:
            raise ConfigError(errors)
        try:
            land = build_landscape(cfg.landscape)
        except (ValueError, BuildError) as exc:
            raise ConfigError([("landscape", str(exc))]) from None
        if exp == "invariant" and not land.is_torus:
            errors.append(("landscape.domain", "invariant experiment needs a flat_torus landscape"))
        if cfg.sim.start == "point":
            if cfg.sim.x0 is None:
                errors.append(("sim.x0", "start='point' needs x0"))
            elif len(cfg.sim.x0) != land.m:
                errors.append(("sim.x0", f"x0 has {len(cfg.sim.x0)} coordinates, landscape has m={land.m}"))
        if cfg.sim.start == "shell" and land.is_torus:
            errors.append(("sim.start", "shell starts need a euclidean landscape"))
    else:
        if exp in ("sphere", "inequality") and not cfg.spectra:
            errors.append(("spectra", f"{exp} experiment needs a list of spectra"))
        if exp == "spectral" and not cfg.spectra and cfg.two_point is None:
            errors.append(("spectra", "spectral experiment needs spectra or two_point"))
    spectra = []
    for i, s in enumerate(cfg.spectra or []):
        try:
            spectra.append(Spectrum(s))
        except ValueError as exc:
            errors.append((f"spectra.{i}", str(exc)))
    if cfg.theta0 is not None and spectra and any(len(cfg.theta0) != s.m for s in spectra):
        errors.append(("theta0", "theta0 length must match every spectrum dimension"))
    if cfg.two_point is not None:
        tp = cfg.two_point
        if not 0 < tp.lambda_minus < tp.lambda_plus:
            errors.append(("two_point", "needs 0 < lambda_minus < lambda_plus"))
        if any(m < 2 for m in tp.dims):
            errors.append(("two_point.dims", "every dimension must be >= 2"))
    if cfg.analysis.compare_horizon is not None and not 0 < cfg.analysis.compare_horizon < cfg.sim.horizon:
        errors.append(("analysis.compare_horizon", "must lie strictly between 0 and sim.horizon"))
    betas = []
    for k, b in enumerate(raw):
        loc = "beta" if not isinstance(cfg.beta, list) else f"beta.{k}"
        try:
            if land is not None:
                val = resolve_beta(b, land.achieved_spectra, land.m)
            else:
                if isinstance(b, str) and b.strip().startswith(("beta_vee", "beta_wedge")) and len(spectra) != 1:
                    raise ValueError("symbolic beta_vee/beta_wedge without a landscape needs exactly one spectrum")
                ms = {s.m for s in spectra} or {2}
                if isinstance(b, str) and len(ms) > 1:
                    raise ValueError("symbolic beta with spectra of mixed dimension is ambiguous")
                val = resolve_beta(b, spectra, ms.pop())
        except ValueError as exc:
            errors.append((loc, str(exc)))
            continue
        betas.append(val)
        if land is not None:
            errors.extend(_regime_errors(exp, val, land.m, loc))
    if errors:
        raise ConfigError(errors)
    plan = Plan(config=cfg, landscape=land, betas=betas)
    if exp in SIMULATED:
        sweep = len(betas) > 1
        for k, b in enumerate(betas):
            seed = derive_seed(cfg.sim.seed, k) if sweep else cfg.sim.seed
            label = f"beta_{k:02d}" if sweep else ""
            plan.runs.append(ResolvedExperiment(cfg, land, b, seed, k, label))
    return plan


def validate_config(doc, base_dir=None):
    """Parse and plan; raises ``ConfigError`` listing field paths on failure."""
    cfg = parse_config(doc, base_dir)
    return plan_experiment(cfg)


def default_output_dir(cfg):
    if cfg.output_dir:
        return Path(cfg.output_dir)
    return Path(os.environ.get(OUTPUT_ENV, DEFAULT_OUTPUT))
