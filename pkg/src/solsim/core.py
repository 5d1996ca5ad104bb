"""Units, parameter conversion, grids and run configuration.

Everything downstream works in scaled units in which hbar = 1, the atomic
mass m = 1 and the healing length of the reference soliton is xi = 1.
This module owns the conversion from lab-frame quantities into that system,
the periodic spatial grid, and the scenario configuration shared by the
mean-field and two-mode layers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from functools import cached_property

import numpy as np
from scipy.constants import hbar as HBAR_SI

HBAR = 1.0
MASS = 1.0

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class SimUnits:
    """Internal unit system. All three scales are pinned to exactly 1."""

    hbar: float = 1.0
    mass: float = 1.0
    xi: float = 1.0

    def __post_init__(self):
        if not (self.hbar == self.mass == self.xi == 1.0):
            raise ValueError("internal computations assume hbar = mass = xi = 1")


@dataclass(frozen=True)
class PhysicalParams:
    """Lab-frame parameters of a quasi-1D attractive condensate.

    a_s : s-wave scattering length [m] (negative for attraction)
    omega_perp : transverse trap angular frequency [rad/s]
    atom_mass : atomic mass [kg]
    """

    a_s: float
    omega_perp: float
    atom_mass: float

    def __post_init__(self):
        for name in ("a_s", "omega_perp", "atom_mass"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")
        if self.omega_perp <= 0:
            raise ValueError(f"omega_perp must be positive, got {self.omega_perp}")
        if self.atom_mass <= 0:
            raise ValueError(f"atom_mass must be positive, got {self.atom_mass}")


@dataclass(frozen=True)
class ScaledInteraction:
    """1D interaction strength in scaled units plus the conversion record."""

    u0: float
    ref_length_m: float
    time_unit_s: float
    energy_unit_j: float

    @property
    def metadata(self) -> dict:
        return {
            "ref_length_m": self.ref_length_m,
            "time_unit_s": self.time_unit_s,
            "energy_unit_j": self.energy_unit_j,
        }


def u0_from_physical(p: PhysicalParams, ref_length: float, hbar_si: float = HBAR_SI) -> ScaledInteraction:
    """Convert lab-frame parameters to the scaled 1D interaction strength.

    The physical 1D coupling is U0 = 2 a_s hbar omega_perp [J m].  With the
    declared reference length L, the energy unit is hbar^2/(m L^2) and the
    time unit m L^2 / hbar, so the dimensionless coupling becomes
    2 a_s omega_perp m L / hbar.
    """
    if not (math.isfinite(ref_length) and ref_length > 0):
        raise ValueError(f"ref_length must be positive and finite, got {ref_length!r}")
    energy_unit = hbar_si**2 / (p.atom_mass * ref_length**2)
    time_unit = p.atom_mass * ref_length**2 / hbar_si
    u0 = 2.0 * p.a_s * p.omega_perp * p.atom_mass * ref_length / hbar_si
    return ScaledInteraction(u0, ref_length, time_unit, energy_unit)


def scattering_length_from_scaled(u0: float, omega_perp: float, atom_mass: float,
                                  ref_length: float, hbar_si: float = HBAR_SI) -> float:
    """Inverse of :func:`u0_from_physical`; returns a_s in meters."""
    return u0 * hbar_si / (2.0 * omega_perp * atom_mass * ref_length)


def soliton_width(n_sol: int, u0: float) -> float:
    """Healing-length width xi = 2 / (|u0| n_sol) of an n_sol-atom bright soliton.

    The stationary sech profile sqrt(n_sol / 2 xi) sech(x / xi) solves the
    attractive mean-field equation exactly at this width.
    """
    if u0 >= 0:
        raise ValueError("no bright soliton for repulsive interactions (u0 must be < 0)")
    if n_sol < 2:
        raise ValueError(f"n_sol must be at least 2, got {n_sol}")
    return 2.0 / (abs(u0) * n_sol)


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic 1D grid.

    n_points must be a power of two (>= 256) to keep the spectral transforms
    in their fastest regime; dx is derived.
    """

    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self):
        if self.x_max <= self.x_min:
            raise ValueError("x_max must exceed x_min")
        n = self.n_points
        if n < 256 or (n & (n - 1)) != 0:
            raise ValueError(f"n_points must be a power of two >= 256, got {n}")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_points

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @cached_property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n_points)

    @cached_property
    def k(self) -> np.ndarray:
        """Angular wavenumbers in FFT ordering."""
        return TWO_PI * np.fft.fftfreq(self.n_points, d=self.dx)

    def quadrature(self, values: np.ndarray) -> float | complex:
        """Integral over the periodic box (trapezoid = Riemann sum here)."""
        return values.sum() * self.dx


# --- scenario configuration ---------------------------------------------

SCENARIO_NAMES = (
    "fragmentation-at-rest",
    "collision-pre-frag",
    "collision-post-frag",
    "postcollision-kinematics",
)


@dataclass(frozen=True)
class ScenarioConfig:
    """Resolved parameters of a single run.

    phi is stored reduced to [0, 2 pi).  The grid must be at least four
    times wider than the initial separation to suppress wrap-around.
    """

    scenario: str
    n_sol: int
    u0: float
    d_ini: float
    v_ini: float
    phi: float
    t_final: float
    dt: float
    grid: Grid1D
    out_dir: str = "runs"
    tm_dt: float = 0.1
    snapshot_stride: int = 50
    threads: int = 1
    q_times: tuple[float, ...] = ()
    q_grid_side: int = 161

    def __post_init__(self):
        if self.scenario not in SCENARIO_NAMES:
            raise ValueError(
                f"unknown scenario {self.scenario!r}; valid names: {', '.join(SCENARIO_NAMES)}"
            )
        if self.u0 >= 0:
            raise ValueError("u0 must be negative (attractive interactions)")
        if self.n_sol < 2:
            raise ValueError("n_sol must be at least 2")
        if self.dt <= 0 or self.tm_dt <= 0:
            raise ValueError("time steps must be positive")
        if self.t_final < 0:
            raise ValueError("t_final must be non-negative")
        if self.d_ini < 0:
            raise ValueError("d_ini must be non-negative")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.grid.width < 4.0 * self.d_ini:
            raise ValueError(
                f"grid width {self.grid.width} is below 4 x d_ini = {4.0 * self.d_ini}; "
                "widen the box to suppress wrap-around"
            )
        if any(t < 0 or t > self.t_final for t in self.q_times):
            raise ValueError("q_times must lie inside [0, t_final]")
        object.__setattr__(self, "phi", self.phi % TWO_PI)

    @property
    def xi(self) -> float:
        return soliton_width(self.n_sol, self.u0)

    @property
    def n_tot(self) -> int:
        return 2 * self.n_sol


# --- key=value configuration files ---------------------------------------

_FLOAT_KEYS = ("u0", "d_ini", "v_ini", "phi", "t_final", "dt", "tm_dt",
               "grid_x_min", "grid_x_max")
_INT_KEYS = ("n_sol", "grid_points", "snapshot_stride", "threads", "q_grid_side")
_STR_KEYS = ("scenario", "out_dir")
_LIST_KEYS = ("q_times",)
CONFIG_KEYS = _FLOAT_KEYS + _INT_KEYS + _STR_KEYS + _LIST_KEYS


def _parse_angle(text: str) -> float:
    t = text.strip().lower()
    if t == "pi":
        return math.pi
    if t == "-pi":
        return -math.pi
    return float(t)


def parse_keyvalue(text: str) -> dict[str, str]:
    """Parse a `key = value` file body; '#' starts a comment."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ValueError(f"line {lineno}: empty key or value in {raw!r}")
        if key in out:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def coerce_config_values(raw: dict[str, str]) -> dict:
    """Type the raw string mapping; unknown keys are rejected."""
    unknown = sorted(set(raw) - set(CONFIG_KEYS))
    if unknown:
        raise ValueError(f"unknown configuration keys: {', '.join(unknown)}")
    out: dict = {}
    for key, value in raw.items():
        if key == "phi":
            out[key] = _parse_angle(value)
        elif key in _FLOAT_KEYS:
            out[key] = float(value)
        elif key in _INT_KEYS:
            out[key] = int(value)
        elif key in _LIST_KEYS:
            if value.strip().lower() == "none":
                out[key] = ()
            else:
                parts = [p for p in value.replace(",", " ").split() if p]
                out[key] = tuple(float(p) for p in parts)
        else:
            out[key] = value
    return out


def scenario_config_from_mapping(params: dict) -> ScenarioConfig:
    """Build a ScenarioConfig from a fully resolved (typed) mapping."""
    params = dict(params)
    grid = Grid1D(params.pop("grid_x_min"), params.pop("grid_x_max"), params.pop("grid_points"))
    known = {f.name for f in fields(ScenarioConfig)}
    extra = sorted(set(params) - known)
    if extra:
        raise ValueError(f"unknown configuration keys: {', '.join(extra)}")
    return ScenarioConfig(grid=grid, **params)


def mapping_from_scenario_config(cfg: ScenarioConfig) -> dict:
    """Flatten a ScenarioConfig back into configuration-file keys."""
    out = {
        "scenario": cfg.scenario,
        "n_sol": cfg.n_sol,
        "u0": cfg.u0,
        "d_ini": cfg.d_ini,
        "v_ini": cfg.v_ini,
        "phi": cfg.phi,
        "t_final": cfg.t_final,
        "dt": cfg.dt,
        "tm_dt": cfg.tm_dt,
        "grid_x_min": cfg.grid.x_min,
        "grid_x_max": cfg.grid.x_max,
        "grid_points": cfg.grid.n_points,
        "out_dir": cfg.out_dir,
        "snapshot_stride": cfg.snapshot_stride,
        "threads": cfg.threads,
        "q_grid_side": cfg.q_grid_side,
        "q_times": cfg.q_times,
    }
    return out


def dump_config(params: dict) -> str:
    """Serialize a typed mapping as a loadable key=value file body."""
    lines = []
    for key, value in params.items():
        if isinstance(value, (tuple, list)):
            rendered = ", ".join(repr(float(v)) for v in value) or "none"
        elif isinstance(value, float):
            rendered = repr(value)
        else:
            rendered = str(value)
        lines.append(f"{key} = {rendered}")
    return "\n".join(lines) + "\n"
