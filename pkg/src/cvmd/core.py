"""Box geometry, simulation state and run configuration.

All quantities are in reduced Lennard-Jones units (length, energy and
mass of one).  Boxes are orthorhombic with per-axis periodicity and
half-open intervals ``[0, L)``.
"""
from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


class Tag(enum.IntEnum):
    FLUID = 0
    WALL_BOTTOM = 1
    WALL_TOP = 2


@dataclass(frozen=True)
class BoxSpec:
    """Orthorhombic simulation box.

    Parameters
    ----------
    lengths : array_like, shape (3,)
        Edge lengths, all positive.
    periodic : tuple of bool
        Periodicity flag per axis.
    """

    lengths: np.ndarray
    periodic: tuple = (True, True, True)

    def __post_init__(self):
        L = np.asarray(self.lengths, dtype=float).reshape(3)
        if not np.all(np.isfinite(L)) or np.any(L <= 0):
            raise ValueError(f"box lengths must be positive, got {L}")
        L.setflags(write=False)
        object.__setattr__(self, "lengths", L)
        object.__setattr__(self, "periodic", tuple(bool(p) for p in self.periodic))

    @classmethod
    def cubic(cls, L: float, periodic=(True, True, True)) -> "BoxSpec":
        return cls(np.full(3, float(L)), periodic)

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    @property
    def periodic_mask(self) -> np.ndarray:
        return np.array(self.periodic, dtype=bool)


def min_image(r, box: BoxSpec) -> np.ndarray:
    """Minimum-image convention applied to separation vector(s).

    Periodic components are mapped into ``[-L/2, L/2)``; non-periodic
    components pass through unchanged.  Works on any array with a
    trailing axis of length 3.
    """
    r = np.array(r, dtype=float, copy=True)
    for a in range(3):
        if box.periodic[a]:
            L = box.lengths[a]
            r[..., a] = r[..., a] - L * np.floor(r[..., a] / L + 0.5)
    return r


def wrap_position(r, box: BoxSpec, return_shift: bool = False):
    """Wrap position(s) into the primary box ``[0, L)`` on periodic axes.

    Parameters
    ----------
    r : array_like, (..., 3)
    box : BoxSpec
    return_shift : bool
        Also return the integer number of box lengths removed per axis,
        so that ``wrapped + shift * L`` recovers the unwrapped input.

    Returns
    -------
    wrapped : ndarray
    shift : ndarray of int64, optional
    """
    r = np.array(r, dtype=float, copy=True)
    shift = np.zeros(r.shape, dtype=np.int64)
    for a in range(3):
        if not box.periodic[a]:
            continue
        L = box.lengths[a]
        x = r[..., a]
        k = np.floor(x / L)
        w = x - k * L
        # rounding can land exactly on L or marginally below 0
        hi = w >= L
        w = np.where(hi, w - L, w)
        k = np.where(hi, k + 1, k)
        lo = w < 0
        w = np.where(lo, w + L, w)
        k = np.where(lo, k - 1, k)
        r[..., a] = w
        shift[..., a] = k.astype(np.int64)
    if return_shift:
        return r, shift
    return r


@dataclass
class SimState:
    """Mutable molecular state.

    Momenta are lab-frame values at the half step preceding ``time``
    (leapfrog staggering).  ``tether_sites`` rows are NaN for fluid atoms.
    ``displacement`` and ``shift`` describe the most recent position
    update and are consumed by crossing detection.
    """

    positions: np.ndarray
    momenta: np.ndarray
    masses: np.ndarray
    tags: np.ndarray
    box: BoxSpec
    tether_sites: np.ndarray | None = None
    time: float = 0.0
    xi_bottom: float = 0.0
    xi_top: float = 0.0
    step: int = 0
    displacement: np.ndarray | None = None
    shift: np.ndarray | None = None

    def __post_init__(self):
        self.positions = np.ascontiguousarray(self.positions, dtype=float)
        self.momenta = np.ascontiguousarray(self.momenta, dtype=float)
        N = len(self.positions)
        self.masses = np.broadcast_to(np.asarray(self.masses, dtype=float), (N,)).copy()
        self.tags = np.asarray(self.tags, dtype=np.int8).reshape(N)
        if self.momenta.shape != (N, 3) or self.positions.shape != (N, 3):
            raise ValueError("positions and momenta must both have shape (N, 3)")
        if self.tether_sites is None:
            self.tether_sites = np.full((N, 3), np.nan)
        walls = self.tags != Tag.FLUID
        has_site = np.all(np.isfinite(self.tether_sites), axis=1)
        if np.any(has_site != walls):
            raise ValueError("wall atoms need tether sites and fluid atoms must not have one")

    @property
    def n(self) -> int:
        return len(self.positions)

    def copy(self) -> "SimState":
        return dataclasses.replace(
            self,
            positions=self.positions.copy(),
            momenta=self.momenta.copy(),
            masses=self.masses.copy(),
            tags=self.tags.copy(),
            tether_sites=self.tether_sites.copy(),
            displacement=None if self.displacement is None else self.displacement.copy(),
            shift=None if self.shift is None else self.shift.copy(),
        )

    def kinetic_energy(self) -> float:
        return 0.5 * float(np.sum(self.momenta**2 / self.masses[:, None]))


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_floats(text: str) -> tuple:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _parse_ints(text: str) -> tuple:
    return tuple(int(v) for v in text.replace(",", " ").split())


def _optional(conv):
    def parse(text):
        return None if text.strip().lower() in ("", "none", "auto") else conv(text)
    return parse


@dataclass
class RunConfig:
    """Run parameters for all three cases.

    Field names double as configuration-file keys.  Case-specific fields
    are simply ignored by cases that do not use them.
    """

    # shared
    density: float = 0.8
    n: int = 2048
    dt: float = 0.005
    steps: int = 20000
    temperature: float = 1.0
    seed: int = 1
    box_length: float | None = None
    # case 1: budgets
    cv_side: float = 1.52
    cv_index: tuple | None = None
    mass_grid: int = 16
    series_every: int = 1
    # case 2: pressure routes
    block_length: int = 2000
    output_every: int = 100
    # case 3: Couette start-up
    wall_speed: float = 1.0
    k4: float = 5.0e3
    k6: float = 5.0e6
    q_xi: float | None = None
    thermostat_dof: str = "extensive"
    lattice_cells: int = 16
    wall_layers: int = 4
    grid: int = 16
    ensemble: int = 8
    equilibration_steps: int = 1000
    rescale_every: int = 10
    profile_times: tuple = (1.0, 4.0, 8.0, 16.0, 32.0, 64.0)
    profile_window: float = 0.5
    stress_time: float = 10.0
    stress_window: float = 5.0
    stress_blocks: int = 5
    balance_window: int = 40
    viscosity: float = 1.6
    n_terms: int = 1000

    _PARSERS = {
        "box_length": _optional(float),
        "q_xi": _optional(float),
        "cv_index": _optional(_parse_ints),
        "profile_times": _parse_floats,
        "thermostat_dof": str.strip,
    }

    def __post_init__(self):
        self.validate()

    def validate(self) -> "RunConfig":
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if not self.density > 0:
            raise ConfigError("density must be positive")
        if self.n <= 0 or self.steps < 0:
            raise ConfigError("n must be positive and steps non-negative")
        if self.temperature <= 0:
            raise ConfigError("temperature must be positive")
        if self.thermostat_dof not in ("extensive", "intensive"):
            raise ConfigError("thermostat_dof must be 'extensive' or 'intensive'")
        if self.q_xi is not None and self.q_xi <= 0:
            raise ConfigError("q_xi must be positive")
        for name in ("series_every", "block_length", "output_every", "grid", "mass_grid",
                     "ensemble", "balance_window", "stress_blocks", "lattice_cells", "n_terms"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")
        if self.wall_layers < 1 or 2 * self.wall_layers >= 2 * self.lattice_cells:
            raise ConfigError("wall_layers leaves no fluid")
        if self.cv_index is not None and len(self.cv_index) != 3:
            raise ConfigError("cv_index needs three integers")
        return self

    @property
    def box_side(self) -> float:
        """Cubic box edge: explicit ``box_length`` or ``(n/density)^(1/3)``."""
        if self.box_length is not None:
            return float(self.box_length)
        return (self.n / self.density) ** (1.0 / 3.0)

    def grid_cells_for(self, side: float) -> int:
        """Number of cells per axis for a CV edge ``side``.

        ``side`` is a nominal value; the tiling edge ``L / k`` must match it
        to 0.1%.
        """
        L = self.box_side
        k = int(round(L / side))
        if k < 1 or abs(k * side - L) > 1e-3 * L:
            raise ConfigError(f"CV side {side} does not divide box length {L}")
        return k

    @classmethod
    def field_names(cls) -> list:
        return [f.name for f in dataclasses.fields(cls)]

    def with_overrides(self, **kw) -> "RunConfig":
        unknown = set(kw) - set(self.field_names())
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        return dataclasses.replace(self, **kw)

    @classmethod
    def parse_value(cls, key: str, text: str):
        fields = {f.name: f for f in dataclasses.fields(cls)}
        if key not in fields:
            raise ConfigError(f"unknown configuration key: {key!r}")
        try:
            if key in cls._PARSERS:
                return cls._PARSERS[key](text)
            default = fields[key].default
            if isinstance(default, bool):
                return _parse_bool(text)
            if isinstance(default, int):
                return int(text)
            if isinstance(default, float):
                return float(text)
            return text.strip()
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {text!r} ({exc})") from None

    def to_text(self) -> str:
        lines = []
        for name in self.field_names():
            v = getattr(self, name)
            if isinstance(v, tuple):
                v = ", ".join(repr(x) for x in v)
            elif v is None:
                v = "none"
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{name} = {v}")
        return "\n".join(lines) + "\n"


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines into typed overrides.

    Blank lines and ``#`` comments are ignored; unknown keys and malformed
    lines raise :class:`ConfigError`.
    """
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = RunConfig.parse_value(key, value)
    return out


def load_config(path, base: RunConfig | None = None, **overrides) -> RunConfig:
    """Read a configuration file on top of ``base`` (defaults if None)."""
    values = parse_config_text(Path(path).read_text()) if path is not None else {}
    values.update(overrides)
    base = base or RunConfig()
    try:
        return base.with_overrides(**values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None

