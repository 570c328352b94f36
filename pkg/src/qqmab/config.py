"""JSON run configuration: schema, validation and construction of domain objects.

Angle and amplitude fields are written as analytic sums::

    const + linear . x + sum_k amp_k sin(k_k . x + phase_k)

so that values, gradients and Laplacians are exact at any point.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Malformed or inadmissible configuration."""


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class Wave(Strict):
    amp: float
    k: tuple[float, float]
    phase: float = 0.0


class FieldSpec(Strict):
    const: float = 0.0
    linear: tuple[float, float] = (0.0, 0.0)
    waves: tuple[Wave, ...] = ()

    def value(self, x, y):
        out = self.const + self.linear[0] * x + self.linear[1] * y
        for w in self.waves:
            out = out + w.amp * np.sin(w.k[0] * x + w.k[1] * y + w.phase)
        return out + 0.0 * x

    def gradient(self, x, y):
        gx = self.linear[0] + 0.0 * x
        gy = self.linear[1] + 0.0 * x
        for w in self.waves:
            c = w.amp * np.cos(w.k[0] * x + w.k[1] * y + w.phase)
            gx = gx + w.k[0] * c
            gy = gy + w.k[1] * c
        return np.stack([gx, gy])

    def laplacian(self, x, y):
        out = 0.0 * x
        for w in self.waves:
            out = out - (w.k[0] ** 2 + w.k[1] ** 2) * w.amp * np.sin(w.k[0] * x + w.k[1] * y + w.phase)
        return out


class GridConfig(Strict):
    n: int = Field(128, ge=3)
    length: float = Field(1.0, gt=0)
    origin: tuple[float, float] = (0.0, 0.0)
    periodic: bool = False
    boundary: Literal["cell", "box"] = "cell"


class FamilyConfig(Strict):
    kind: Literal["simple", "ab"]
    theta: float = 0.0
    gamma: FieldSpec = FieldSpec()
    omega: FieldSpec = FieldSpec()
    L: tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)

    @model_validator(mode="after")
    def _check(self):
        if self.kind == "simple" and abs(np.linalg.norm(self.L) - 1) > 1e-12:
            raise ValueError("L must have unit norm")
        return self


class PhiConfig(Strict):
    amplitude: FieldSpec = FieldSpec(const=1.0)
    phase: FieldSpec = FieldSpec()

    def value(self, x, y):
        return self.amplitude.value(x, y) * np.exp(1j * self.phase.value(x, y))


class GaussianConfig(Strict):
    center: tuple[float, float]
    sigma: float = Field(gt=0)
    k: tuple[float, float] = (0.0, 0.0)

    def value(self, x, y):
        r2 = (x - self.center[0]) ** 2 + (y - self.center[1]) ** 2
        return np.exp(-r2 / (2 * self.sigma**2) + 1j * (self.k[0] * x + self.k[1] * y))


class VerifyConfig(Strict):
    grid: GridConfig
    family: FamilyConfig
    phi: PhiConfig = PhiConfig()
    perturb_alpha: tuple[float, float] = (0.0, 0.0)
    tolerance: float = Field(1e-6, gt=0)
    tolerances: dict[str, float] = {}
    report_only: tuple[str, ...] = ()
    probe: "ProbeConfig | None" = None


class ProbeConfig(Strict):
    samples: int = Field(100, ge=1)
    seed: int = 0
    n: int = Field(32, ge=8)
    threshold: float = 1e-3


class SimulationConfig(Strict):
    dt: float = Field(ge=0)
    steps: int = Field(ge=0)
    hbar: float = Field(1.0, gt=0)
    mass: float = Field(1.0, gt=0)
    operator: Literal["covariant", "expanded"] = "covariant"
    link_refinement: int = Field(8, ge=1)
    stability_factor: float = Field(2.5, gt=0, le=2.8)
    norm_growth_limit: float = Field(1.5, gt=1)


class EvolveConfig(Strict):
    grid: GridConfig
    family: FamilyConfig | None = None
    potential: FieldSpec = FieldSpec()
    initial: GaussianConfig | PhiConfig
    simulation: SimulationConfig
    norm_drift_tol: float = Field(1e-6, gt=0)
    continuity_tol: float | None = None


class SolenoidSection(Strict):
    R: float = Field(0.5, gt=0)
    flux: float | None = None
    B: float | None = None
    charge: float = 1.0
    hbar: float = Field(1.0, gt=0)
    center: tuple[float, float] = (0.0, 0.0)

    @model_validator(mode="after")
    def _flux(self):
        if (self.flux is None) == (self.B is None):
            raise ValueError("give exactly one of flux or B")
        return self


class ScreenConfig(Strict):
    start: float = -3.0
    stop: float = 3.0
    count: int = Field(41, ge=1)


class ABConfig(Strict):
    solenoid: SolenoidSection
    theta: float = np.pi / 4
    source_x: float = -8.0
    screen_x: float = 8.0
    apex: float = 2.0
    screen: ScreenConfig = ScreenConfig()
    reference_point: tuple[float, float] | None = None
    clearance: float = Field(2.0, ge=0)
    grid: GridConfig = GridConfig(n=128, length=8.0, origin=(-4.0, -4.0))
    complex_limit: bool = False
    wavenumber: float = 4.0
    refinement: int = Field(64, ge=1)
    convergence_tol: float = Field(1e-7, gt=0)
    max_refinement: int = Field(8192, ge=1)
    loop_radius: float | None = None
    tolerance: float = Field(1e-3, gt=0)
    holonomy_tolerance: float = Field(1e-6, gt=0)
    witness_tolerance: float = Field(1e-10, gt=0)


class SplitConfig(Strict):
    dim: int = Field(4, ge=1, le=8)
    seed: int = 0
    samples: int = Field(100, ge=1)
    tolerance: float = Field(1e-12, gt=0)
    decoupling_tolerance: float = Field(1e-10, gt=0)


class FieldsConfig(Strict):
    ab: ABConfig | None = None
    family: FamilyConfig | None = None
    grid: GridConfig | None = None

    @model_validator(mode="after")
    def _one(self):
        if (self.ab is None) == (self.family is None):
            raise ValueError("give exactly one of ab or family")
        if self.family is not None and self.grid is None:
            raise ValueError("family fields need a grid")
        return self


class RunConfig(Strict):
    schema_version: Literal[1]
    command: Literal["verify", "evolve", "ab-pattern", "holonomy", "split-check", "fields"] | None = None
    verify: VerifyConfig | None = None
    evolve: EvolveConfig | None = None
    ab: ABConfig | None = None
    split: SplitConfig | None = None
    fields: FieldsConfig | None = None
    seed: int | None = None

    @field_validator("schema_version", mode="before")
    @classmethod
    def _version(cls, v):
        if v != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {v!r}; expected {SCHEMA_VERSION}")
        return v


VerifyConfig.model_rebuild()


def load_config(path: str | Path) -> tuple[RunConfig, dict]:
    """Parse and validate; returns the model and the raw JSON for echoing."""
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(raw), raw


def parse_config(raw: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def section(cfg: RunConfig, name: str):
    sec = getattr(cfg, name)
    if sec is None:
        raise ConfigError(f"config has no '{name}' section")
    return sec


# ---------------------------------------------------------------------------
# builders


def build_grid(gc: GridConfig):
    from .fields import GridSpec
    from .schrodinger import box_grid

    if gc.boundary == "box":
        if gc.periodic:
            raise ConfigError("a box grid cannot be periodic")
        g = box_grid((gc.n, gc.n), (gc.length, gc.length))
        return GridSpec(g.n, g.h, tuple(o + h for o, h in zip(gc.origin, g.h)))
    if gc.periodic:
        h = gc.length / gc.n
        return GridSpec((gc.n, gc.n), (h, h), gc.origin, periodic=True)
    return GridSpec.square(gc.n, gc.length, origin=gc.origin)


def build_family(fc: FamilyConfig, grid):
    """FamilySolution with analytic gradients and Laplacians supplied."""
    from .phase import PhaseTriple, family_ab, family_simple
    from .quaternion import Quaternion

    X, Y = grid.coords()
    if fc.kind == "simple":
        w, x, y, k = fc.L
        L = Quaternion(complex(w, x), complex(y, k))
        return family_simple(grid, fc.omega.value(X, Y), L, grad_omega=fc.omega.gradient(X, Y),
                             lap_omega=fc.omega.laplacian(X, Y))
    zero = np.zeros((2,) + grid.shape)
    ph = PhaseTriple.build(grid, fc.theta, fc.gamma.value(X, Y), fc.omega.value(X, Y),
                           grads={"theta": zero, "gamma": fc.gamma.gradient(X, Y),
                                  "omega": fc.omega.gradient(X, Y)},
                           laps={"theta": np.zeros(grid.shape), "gamma": fc.gamma.laplacian(X, Y),
                                 "omega": fc.omega.laplacian(X, Y)})
    return family_ab(ph)


def family_connection(fc: FamilyConfig):
    """Analytic Q = alpha i + beta j at arbitrary (M, 2) points."""
    from .quaternion import Quaternion

    c, s = np.cos(fc.theta), np.sin(fc.theta)

    def conn(P):
        x, y = P[:, 0], P[:, 1]
        gW = fc.omega.gradient(x, y).T
        if fc.kind == "simple":
            return Quaternion(1j * gW, np.zeros_like(gW, complex))
        gG = fc.gamma.gradient(x, y).T
        phase = np.exp(1j * (fc.gamma.value(x, y) + fc.omega.value(x, y)))[:, None]
        return Quaternion(1j * (c * c * gG + s * s * gW), -1j * s * c * phase * (gG - gW))

    return conn


def build_ab_setup(ac: ABConfig):
    from .ab import ABSetup, SolenoidConfig

    s = ac.solenoid
    kw = dict(charge=s.charge, hbar=s.hbar, center=s.center)
    sol = SolenoidConfig(R=s.R, flux=s.flux, **kw) if s.flux is not None else SolenoidConfig.from_field(s.R, s.B, **kw)
    if ac.grid.periodic:
        raise ConfigError("the AB grid cannot be periodic")
    return ABSetup(solenoid=sol, theta=ac.theta, source_x=ac.source_x, screen_x=ac.screen_x, apex=ac.apex,
                   screen_y=tuple(np.linspace(ac.screen.start, ac.screen.stop, ac.screen.count)),
                   reference_point=ac.reference_point, clearance=ac.clearance, grid_n=ac.grid.n,
                   grid_length=ac.grid.length, complex_limit=ac.complex_limit, refinement=ac.refinement,
                   convergence_tol=ac.convergence_tol, max_refinement=ac.max_refinement)
