"""Experiment configuration: strict schema, YAML/JSON loading, defaults.

A config file looks like::

    seed: 20240611
    samples: 10000
    workers: 1
    potential:
      dim: 1
      entries:
        - {site: [0], value: 1.0}
    density: {kind: uniform, a: 0.0, b: 1.0}
    wegner:
      sizes: [5, 10, 20]
      widths: [0.001, 0.01, 0.1]

Unknown keys anywhere are errors.  Complex spectral parameters are written
as ``[re, im]`` pairs.
"""

from __future__ import annotations

import json
import warnings
from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .densities import Density, make_density
from .errors import AlloyError, ConfigurationError
from .lattice import SingleSitePotential


class HypothesisWarning(UserWarning):
    pass


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


def _check_s(v: float) -> float:
    if not 0.0 < v < 1.0:
        raise ValueError("s must lie strictly between 0 and 1")
    return v


def _check_z(zs):
    for z in zs:
        if z[1] == 0.0:
            raise ValueError(f"spectral parameter {z} has zero imaginary part")
    return zs


class PotentialEntry(Strict):
    site: list[int]
    value: float


class PotentialSpec(Strict):
    dim: int = Field(1, ge=1)
    entries: list[PotentialEntry] = Field(default_factory=lambda: [PotentialEntry(site=[0], value=1.0)])

    @model_validator(mode="after")
    def _dims(self):
        for e in self.entries:
            if len(e.site) != self.dim:
                raise ValueError(f"site {e.site} does not have dimension {self.dim}")
        return self

    def build(self) -> SingleSitePotential:
        return SingleSitePotential(self.dim, {tuple(e.site): e.value for e in self.entries})


class DensitySpec(Strict):
    kind: Literal["uniform", "triangular", "smooth-bump", "piecewise-linear"] = "uniform"
    a: Optional[float] = None
    b: Optional[float] = None
    peak: Optional[float] = None
    knots: Optional[list[float]] = None
    values: Optional[list[float]] = None

    def build(self) -> Density:
        params = {k: v for k, v in self.model_dump(exclude={"kind"}).items() if v is not None}
        return make_density(self.kind, **params)


class WegnerSpec(Strict):
    sizes: list[int] = [5, 10, 20]
    energies: Optional[list[float]] = None
    n_energies: int = Field(9, ge=1)
    widths: list[float] = [1e-3, 1e-2, 1e-1]
    mode: Literal["auto", "bound", "shape"] = "auto"
    r2_min: float = 0.99

    @field_validator("widths")
    @classmethod
    def _positive(cls, v):
        if not v or any(not w > 0 for w in v):
            raise ValueError("widths must be positive")
        return sorted(v)

    @field_validator("sizes")
    @classmethod
    def _sizes(cls, v):
        if not v or any(L < 1 for L in v):
            raise ValueError("box sizes must be >= 1")
        return v


def _default_moment_z():
    return [(0.5, 10.0 ** e) for e in (-3.0, -2.25, -1.5, -0.75, 0.0)]


def _default_pairs():
    return [(0, 0), (10, 10), (25, 25), (0, 1), (24, 25), (10, 20), (20, 10),
            (5, 45), (45, 5), (0, 49)]


class MomentSpec(Strict):
    L: int = Field(49, ge=0)
    s: float = 0.4
    z: list[tuple[float, float]] = Field(default_factory=_default_moment_z)
    pairs: list[tuple[int, int]] = Field(default_factory=_default_pairs)
    diagonal_scan: bool = True
    scan_s: Optional[float] = None
    scan_z: list[tuple[float, float]] = Field(
        default_factory=lambda: [(0.5, 10.0 ** -e) for e in range(0, 7)])

    @field_validator("s")
    @classmethod
    def _s(cls, v):
        return _check_s(v)

    @field_validator("z", "scan_z")
    @classmethod
    def _z(cls, v):
        return _check_z(v)

    @model_validator(mode="after")
    def _pairs_in_box(self):
        for x, y in self.pairs:
            if not (0 <= x <= self.L and 0 <= y <= self.L):
                raise ValueError(f"pair ({x}, {y}) lies outside the box [0, {self.L}]")
        return self


class DecaySpec(Strict):
    chain_length: int = Field(400, ge=8)
    s: float = 0.5
    z: Optional[list[tuple[float, float]]] = None
    max_distance: int = Field(40, ge=1)
    fit_tolerance: float = 0.15
    max_rel_se: float = 0.2
    sup_scan: list[float] = []

    @field_validator("s")
    @classmethod
    def _s(cls, v):
        return _check_s(v)

    @field_validator("z")
    @classmethod
    def _z(cls, v):
        return None if v is None else _check_z(v)

    @model_validator(mode="after")
    def _geometry(self):
        if 2 * self.max_distance > self.chain_length:
            raise ValueError("max_distance must not exceed chain_length / 2")
        return self


class CounterexampleSpec(Strict):
    a: list[float] = [0.5, 1.0, 2.0]
    eps: list[float] = [0.05, 0.1]
    raw_samples: int = Field(1_000_000, ge=1)

    @field_validator("a")
    @classmethod
    def _a_positive(cls, v):
        if any(not x > 0 for x in v):
            raise ValueError("a must be positive")
        return v

    @field_validator("eps")
    @classmethod
    def _eps_positive(cls, v):
        if any(not x > 0 for x in v):
            raise ValueError("eps must be positive")
        return v


class KreinSpec(Strict):
    instances: int = Field(100, ge=1)
    L: int = Field(19, ge=0)
    site: Optional[list[int]] = None
    z: tuple[float, float] = (0.3, 0.05)
    sweep: list[float] = [-1.5, 0.25, 2.0]
    check_value: float = 0.9

    @field_validator("z")
    @classmethod
    def _z(cls, v):
        _check_z([v])
        return v

    @field_validator("sweep")
    @classmethod
    def _distinct(cls, v):
        if len(v) < 2 or len(set(v)) != len(v):
            raise ValueError("sweep needs at least two distinct values")
        return v


class ConstantsSpec(Strict):
    L: int = Field(10, ge=1)
    eps: float = Field(0.01, gt=0)
    s: float = 0.4

    @field_validator("s")
    @classmethod
    def _s(cls, v):
        return _check_s(v)


class ExperimentConfig(Strict):
    seed: int = Field(0, ge=0, lt=2 ** 64)
    samples: int = Field(10_000, ge=100)
    workers: int = Field(1, ge=1)
    potential: PotentialSpec = PotentialSpec()
    density: DensitySpec = DensitySpec()
    constants: ConstantsSpec = ConstantsSpec()
    wegner: WegnerSpec = WegnerSpec()
    moments: MomentSpec = MomentSpec()
    decay: DecaySpec = DecaySpec()
    counterexample: CounterexampleSpec = CounterexampleSpec()
    krein: KreinSpec = KreinSpec()

    @property
    def dim(self) -> int:
        return self.potential.dim

    def echo(self) -> dict:
        return self.model_dump(mode="json")


def _format_error(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        parts.append(f"{loc}: {err['msg']}")
    return "; ".join(parts)


def validate_config(data: dict | None, **overrides) -> ExperimentConfig:
    """Validate a raw mapping; ``overrides`` replace top-level keys when not None."""
    data = dict(data or {})
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        cfg = ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigurationError(_format_error(exc)) from None
    try:
        u = cfg.potential.build()
        cfg.density.build()
    except AlloyError as exc:
        raise ConfigurationError(str(exc)) from None
    if "decay" in data and u.total == 0.0:
        warnings.warn("sum of u vanishes; bounds requiring ubar != 0 will not apply",
                      HypothesisWarning, stacklevel=2)
    if "moments" in data and cfg.moments.s > 0.5:
        warnings.warn(f"moments.s = {cfg.moments.s} > 0.5: the sample variance of |G|^s "
                      "may be infinite", HypothesisWarning, stacklevel=2)
    return cfg


def parse_config(path: str | Path | None, **overrides) -> ExperimentConfig:
    """Load a YAML or JSON config file (or defaults when ``path`` is None)."""
    if path is None:
        return validate_config({}, **overrides)
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"malformed config {path}: {exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigurationError("config root must be a mapping")
    if "config" in data and "manifest_version" in data:
        data = data["config"]
    return validate_config(data, **overrides)


def as_complex(pair) -> complex:
    return complex(float(pair[0]), float(pair[1]))
