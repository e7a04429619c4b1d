"""Run configuration: JSON schema, validation, model assembly.

All user-facing energies are meV, temperatures kelvin, times ns.  A config
names one model, the physical parameters, optional grid/steady overrides,
up to two sweep axes, and the initial dot state.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from . import envkit, singledot, spindeg, twodot, units
from .steady import SteadyPolicy
from .volterra import TimeGrid

SCHEMA_VERSION = 1

MODELS = ("singledot", "spindeg", "twodot")

SWEEPABLE = (
    "mu1_mev",
    "mu2_mev",
    "coulomb_mev",
    "bandwidth",
    "coupling_factor",
    "temperature_k",
    "initial_state",
)


class ConfigError(ValueError):
    pass


@dataclass
class GridConfig:
    step_ns: float | None = None
    horizon_ns: float | None = None
    window_lo_radns: float | None = None
    window_hi_radns: float | None = None


@dataclass
class SteadyConfig:
    window_ns: float | None = None
    rel_tol: float = 1e-4
    balance_tol: float = 1e-3


@dataclass
class SweepAxis:
    name: str
    values: list

    @staticmethod
    def parse(raw: dict) -> "SweepAxis":
        name = raw.get("name")
        if name not in SWEEPABLE:
            raise ConfigError(f"unknown sweep parameter {name!r}; pick from {SWEEPABLE}")
        if "values" in raw:
            values = list(raw["values"])
        else:
            try:
                lo, hi, count = raw["min"], raw["max"], int(raw["count"])
            except KeyError as exc:
                raise ConfigError(f"sweep axis needs values or min/max/count: {exc}")
            if count < 1:
                raise ConfigError("sweep axis count must be >= 1")
            values = list(np.linspace(lo, hi, count))
        if not values:
            raise ConfigError("sweep axis has no values")
        return SweepAxis(name=name, values=values)


@dataclass
class RunConfig:
    model: str = "singledot"
    dot_energy_mev: float = 30.0
    dot2_energy_mev: float | None = None  # twodot only; defaults to dot 1
    coulomb_mev: float = 0.0
    temperature_k: float = 2.0
    mu1_mev: float = 40.0
    mu2_mev: float = 0.0
    coupling_factor: float = 0.05
    bandwidth: float = 0.01
    mode_spacing_radns: float = 2.0 * math.pi
    initial_state: Any = "vacuum"
    grid: GridConfig = field(default_factory=GridConfig)
    steady: SteadyConfig = field(default_factory=SteadyConfig)
    sweep: list[SweepAxis] = field(default_factory=list)
    out_dir: str = "."
    oracle_modes: int = 3
    seed: int = 0  # reserved; no stochastic path in v1

    def validate(self) -> None:
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}")
        if self.temperature_k <= 0:
            raise ConfigError("temperature must be > 0 K")
        if self.bandwidth <= 0:
            raise ConfigError("bandwidth must be > 0")
        if self.coupling_factor <= 0:
            raise ConfigError("coupling factor must be > 0")
        if self.coulomb_mev < 0:
            raise ConfigError("coulomb energy must be >= 0")
        if self.dot_energy_mev <= 0:
            raise ConfigError("dot energy must be > 0")
        if len(self.sweep) > 2:
            raise ConfigError("at most two sweep axes")
        if self.mode_spacing_radns <= 0:
            raise ConfigError("mode spacing must be > 0")

    @staticmethod
    def from_dict(raw: dict) -> "RunConfig":
        raw = dict(raw)
        grid = GridConfig(**raw.pop("grid", {}))
        steady = SteadyConfig(**raw.pop("steady", {}))
        sweep = [SweepAxis.parse(ax) for ax in raw.pop("sweep", [])]
        known = {f for f in RunConfig.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        cfg = RunConfig(**raw, grid=grid, steady=steady, sweep=sweep)
        cfg.validate()
        return cfg

    @staticmethod
    def from_file(path: str) -> "RunConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}")
        return RunConfig.from_dict(raw)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["sweep"] = [{"name": ax.name, "values": list(ax.values)} for ax in self.sweep]
        return out

    def with_values(self, **kwargs) -> "RunConfig":
        d = self.to_dict()
        d.pop("sweep")
        d["grid"] = dict(d["grid"])
        d["steady"] = dict(d["steady"])
        d.update(kwargs)
        grid = GridConfig(**d.pop("grid"))
        steady = SteadyConfig(**d.pop("steady"))
        cfg = RunConfig(**d, grid=grid, steady=steady, sweep=[])
        cfg.validate()
        return cfg


def resolved_environments(cfg: RunConfig):
    omega = units.mev_to_radns(cfg.dot_energy_mev)
    window = None
    if cfg.grid.window_lo_radns is not None and cfg.grid.window_hi_radns is not None:
        window = (cfg.grid.window_lo_radns, cfg.grid.window_hi_radns)
    return envkit.environment_pair(
        cfg.temperature_k,
        cfg.mu1_mev,
        cfg.mu2_mev,
        cfg.coupling_factor,
        cfg.bandwidth,
        omega,
        cfg.mode_spacing_radns,
        window,
    )


def resolved_grid(cfg: RunConfig, env1, env2) -> TimeGrid:
    omega = units.mev_to_radns(cfg.dot_energy_mev)
    omega2 = units.mev_to_radns(cfg.dot2_energy_mev or cfg.dot_energy_mev)
    omega_c = units.mev_to_radns(cfg.coulomb_mev)
    scales = [
        omega,
        omega2,
        omega_c,
        cfg.bandwidth * omega,
        abs(env1.mu_radns - omega),
        abs(env2.mu_radns - omega),
    ]
    step = cfg.grid.step_ns or 0.05 / max(s for s in scales if s > 0)
    if cfg.grid.horizon_ns is not None:
        horizon = cfg.grid.horizon_ns
    else:
        mem = min(envkit.kernel_memory_rate(env1), envkit.kernel_memory_rate(env2))
        if cfg.model == "singledot":
            gamma = envkit.golden_rule_rate(env1) + envkit.golden_rule_rate(env2)
            horizon = max(12.0 / mem, 8.0 / gamma)
        else:
            # Coefficient window only; the density run extends with frozen
            # coefficient values afterwards.
            horizon = 16.0 / mem
    count = max(2, int(math.ceil(horizon / step)))
    if count > 1_500_000:
        raise ConfigError(
            f"grid would need {count} steps; override grid.step_ns or horizon_ns"
        )
    return TimeGrid(step=step, count=count)


def steady_policy(cfg: RunConfig) -> SteadyPolicy:
    omega = units.mev_to_radns(cfg.dot_energy_mev)
    window = cfg.steady.window_ns or 10.0 / (cfg.bandwidth * omega)
    return SteadyPolicy(
        window=window,
        rel_tol=cfg.steady.rel_tol,
        balance_tol=cfg.steady.balance_tol,
    )


def initial_state_vector(cfg: RunConfig):
    """Model-specific initial state from the config field."""
    init = cfg.initial_state
    if cfg.model == "singledot":
        if init in ("vacuum", None):
            return (1.0, 0.0)
        if init == "occupied":
            return (0.0, 1.0)
        vals = [float(x) for x in init]
        if len(vals) != 2:
            raise ConfigError("singledot initial state needs (rho00, rho11)")
        return tuple(vals)
    if cfg.model == "spindeg":
        if init in ("vacuum", None):
            return np.diag([1.0, 0.0, 0.0, 0.0]).astype(complex)
        if init == "double":
            return np.diag([0.0, 0.0, 0.0, 1.0]).astype(complex)
        vals = [float(x) for x in init]
        if len(vals) != 4:
            raise ConfigError(
                "spindeg initial state needs populations (rho00, rho_dd, rho_uu, rho22)"
            )
        rho = np.zeros((4, 4), dtype=complex)
        rho[spindeg.IDX_EMPTY, spindeg.IDX_EMPTY] = vals[0]
        rho[spindeg.IDX_DOWN, spindeg.IDX_DOWN] = vals[1]
        rho[spindeg.IDX_UP, spindeg.IDX_UP] = vals[2]
        rho[spindeg.IDX_DOUBLE, spindeg.IDX_DOUBLE] = vals[3]
        return rho
    # twodot
    if isinstance(init, str) and init.startswith("basis_"):
        idx = int(init.split("_")[1])
        if not 1 <= idx <= 8:
            raise ConfigError("twodot basis states are basis_1 .. basis_8")
        return twodot.INITIAL_BASIS[:, idx - 1].copy()
    if isinstance(init, (int, float)) and not isinstance(init, bool):
        idx = int(init)
        if not 1 <= idx <= 8:
            raise ConfigError("twodot basis states are 1 .. 8")
        return twodot.INITIAL_BASIS[:, idx - 1].copy()
    if init in ("vacuum", None):
        return twodot.INITIAL_BASIS[:, 0].copy()
    vals = [float(x) for x in init]
    if len(vals) != 6:
        raise ConfigError("twodot initial state needs a density 6-vector")
    return np.asarray(vals)


def build_model(cfg: RunConfig, spectra_override=None):
    """Assemble the model object named by the config."""
    env1, env2 = resolved_environments(cfg)
    grid = resolved_grid(cfg, env1, env2)
    omega = units.mev_to_radns(cfg.dot_energy_mev)
    omega_c = units.mev_to_radns(cfg.coulomb_mev)
    s1, s2 = spectra_override if spectra_override else (None, None)
    if cfg.model == "singledot":
        return singledot.SingleDotModel(
            omega, env1, env2, grid, spectrum1=s1, spectrum2=s2
        )
    if cfg.model == "spindeg":
        return spindeg.SpinDegModel(
            omega, omega_c, env1, env2, grid, spectrum1=s1, spectrum2=s2
        )
    omega2 = units.mev_to_radns(cfg.dot2_energy_mev or cfg.dot_energy_mev)
    return twodot.TwoDotModel(
        (omega, omega2), omega_c, env1, env2, grid, spectrum1=s1, spectrum2=s2
    )
