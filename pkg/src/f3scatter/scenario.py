"""Scenario files: schema, validation, hashing and assembly of the numerical model."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .geometry import (ClusterGeometry, GridPair, OtherCluster, PotentialSpec,
                       assemble_intercluster, build_grids)
from .subsystem import (EffectiveInteraction, SpectralData, effective_interaction,
                        eigensolve_subsystem, full_thresholds)

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ProfileCfg(_Model):
    profile: Literal["gaussian", "sech2", "bump"]
    amplitude: float
    width: float = Field(1.0, gt=0)

    def spec(self, scale: float = 1.0) -> PotentialSpec:
        return PotentialSpec(self.profile, self.amplitude * scale, self.width)


class OtherClusterCfg(_Model):
    name: str
    proj: list[list[float]]
    decay_mu: float = Field(3.0, gt=0)


class GeometryCfg(_Model):
    dim_xa: int = 2
    dim_xperp: int = 1
    others: list[OtherClusterCfg] = []


class GridCfg(_Model):
    xa_lengths: list[float]
    xa_counts: list[int]
    xperp_lengths: list[float]
    xperp_counts: list[int]


class PotentialsCfg(_Model):
    va: ProfileCfg
    vb: list[ProfileCfg] = []
    delta: float = 1.0

    @field_validator("delta")
    @classmethod
    def _nonneg(cls, v):
        if v < 0:
            raise ValueError("negative interaction scale")
        return v


class ChannelCfg(_Model):
    incident: int = 0
    epsilon1: Optional[float] = None
    n_channels: int = Field(1, ge=1)


class SolverCfg(_Model):
    tol: float = Field(1e-10, gt=0)
    max_iter: int = Field(200, ge=1)
    method: Literal["neumann", "gmres"] = "neumann"
    laplacian: Literal["spectral", "stencil"] = "spectral"
    truncation_tol: float = Field(1e-10, gt=0)
    eta_schedule: list[float] = [0.02, 0.01, 0.005]
    extrapolation_tol: float = Field(1e-2, gt=0)


class ReconstructionCfg(_Model):
    interval: tuple[float, float] = (-3.0, -1.5)
    mode: Literal["full", "near_forward"] = "full"
    n_nodes: int = Field(16, ge=16)
    z_samples: int = Field(12, ge=12)
    zeta_rings: int = Field(2, ge=1)
    zeta_per_ring: int = Field(4, ge=1)
    y_factors: list[float] = [5.0, 10.0, 20.0, 40.0]
    oracle: bool = True

    @model_validator(mode="after")
    def _interval(self):
        a, b = self.interval
        if not a < b:
            raise ValueError("interval must satisfy a < b")
        return self


class ScenarioConfig(_Model):
    schema_version: int
    seed: int = 0
    geometry: GeometryCfg
    grids: GridCfg
    potentials: PotentialsCfg
    channels: ChannelCfg = ChannelCfg()
    solver: SolverCfg = SolverCfg()
    reconstruction: ReconstructionCfg = ReconstructionCfg()

    @field_validator("schema_version")
    @classmethod
    def _version(cls, v):
        if v != SCHEMA_VERSION:
            raise ValueError(f"schema version {v} does not match {SCHEMA_VERSION}")
        return v

    @model_validator(mode="after")
    def _cross(self):
        if len(self.potentials.vb) != len(self.geometry.others):
            raise ValueError("potentials.vb needs one entry per geometry.others cluster")
        n = self.geometry.dim_xa + self.geometry.dim_xperp
        for b in self.geometry.others:
            if any(len(row) != n for row in b.proj):
                raise ValueError(f"geometry.others[{b.name}].proj rows must have length {n}")
        if len(self.grids.xa_counts) != self.geometry.dim_xa:
            raise ValueError("grids.xa_counts must have dim_xa entries")
        if len(self.grids.xperp_counts) != self.geometry.dim_xperp:
            raise ValueError("grids.xperp_counts must have dim_xperp entries")
        return self

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    def with_delta(self, delta: float) -> "ScenarioConfig":
        return self.model_copy(update={"potentials": self.potentials.model_copy(
            update={"delta": float(delta)})})


def _format_error(err: ValidationError) -> str:
    parts = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"])
        msg = "missing required key" if e["type"] == "missing" else e["msg"]
        parts.append(f"{loc}: {msg}" if loc else msg)
    return "; ".join(parts)


def load_scenario(data: dict) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigError(_format_error(err)) from None


def parse_scenario(path) -> ScenarioConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such file") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: invalid JSON ({err})") from None
    return load_scenario(data)


def default_scenario_path() -> Path:
    return Path(str(resources.files("f3scatter") / "data" / "default_scenario.json"))


def default_scenario() -> ScenarioConfig:
    return parse_scenario(default_scenario_path())


@dataclass
class Problem:
    """The assembled model for one scenario."""

    config: ScenarioConfig

    @cached_property
    def geometry(self) -> ClusterGeometry:
        g = self.config.geometry
        others = tuple(OtherCluster(b.name, np.asarray(b.proj, dtype=float), b.decay_mu)
                       for b in g.others)
        return ClusterGeometry(g.dim_xa, g.dim_xperp, others)

    @cached_property
    def grid(self) -> GridPair:
        g = self.config.grids
        return build_grids(g.xa_lengths, g.xa_counts, g.xperp_lengths, g.xperp_counts)

    @property
    def vb_specs(self) -> list:
        d = self.config.potentials.delta
        return [p.spec(d) for p in self.config.potentials.vb]

    @cached_property
    def spectral(self) -> SpectralData:
        c = self.config
        return eigensolve_subsystem(c.potentials.va.spec(), c.grids.xperp_lengths,
                                    c.grids.xperp_counts, c.solver.laplacian,
                                    c.channels.epsilon1, c.channels.n_channels)

    @cached_property
    def ia(self) -> np.ndarray:
        return assemble_intercluster(self.geometry, self.vb_specs, self.grid,
                                     self.config.solver.truncation_tol)

    @property
    def incident(self) -> int:
        return self.config.channels.incident

    @cached_property
    def effective(self) -> EffectiveInteraction:
        return effective_interaction(self.spectral.psi(self.incident), self.ia, self.grid)

    @cached_property
    def thresholds(self) -> list:
        dims = [b.dim for b in self.geometry.others]
        return full_thresholds(self.spectral, self.vb_specs, dims)

    def scaled(self, t: float) -> "Problem":
        """Same model with every V_b multiplied by ``t``; shares the spectrum."""
        p = Problem(self.config.with_delta(self.config.potentials.delta * t))
        p.__dict__["spectral"] = self.spectral
        p.__dict__["geometry"] = self.geometry
        p.__dict__["grid"] = self.grid
        return p
