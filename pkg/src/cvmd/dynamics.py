"""Leapfrog integration, wall thermostats and initial conditions."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import BoxSpec, SimState, Tag, wrap_position
from .forces import K4_DEFAULT, K6_DEFAULT, ForceField, NeighborList, compute_forces

FCC_BASIS = np.array([[0.0, 0.0, 0.0], [0.5, 0.5, 0.0], [0.5, 0.0, 0.5], [0.0, 0.5, 0.5]])


@dataclass
class ThermostatState:
    """Per-wall Nose-Hoover friction variables.

    Parameters
    ----------
    T0 : float
        Target temperature.
    q : float or None
        Thermal inertia; ``None`` means ``N_wall * dt`` per wall.
    dof : {"extensive", "intensive"}
        Target kinetic term ``3 N_wall T0`` or ``3 T0``.
    """

    T0: float = 1.0
    q: float | None = None
    dof: str = "extensive"
    xi: dict = field(default_factory=lambda: {Tag.WALL_BOTTOM: 0.0, Tag.WALL_TOP: 0.0})

    def inertia(self, n_wall: int, dt: float) -> float:
        q = self.q if self.q is not None else n_wall * dt
        if q <= 0:
            raise ValueError("thermostat inertia must be positive")
        return q

    def target(self, n_wall: int) -> float:
        return 3.0 * n_wall * self.T0 if self.dof == "extensive" else 3.0 * self.T0


def fcc_lattice(cells, a: float, offset: float = 0.25) -> np.ndarray:
    """FCC sites for ``cells`` unit cells of edge ``a`` per axis.

    Sites are shifted by ``offset * a`` on every axis so none sits on a
    box face.  Ordering: unit cells in C order, then basis atoms.
    """
    cells = np.broadcast_to(np.asarray(cells, dtype=int), (3,))
    ix, iy, iz = np.meshgrid(*(np.arange(c) for c in cells), indexing="ij")
    corners = np.stack([ix.ravel(), iy.ravel(), iz.ravel()], axis=1).astype(float)
    pos = (corners[:, None, :] + FCC_BASIS[None, :, :]).reshape(-1, 3)
    return (pos + offset) * a


def maxwell_boltzmann(n: int, T: float, masses, rng) -> np.ndarray:
    """Gaussian momenta with zero net momentum, rescaled to exactly ``T``.

    Temperature here is ``sum p^2/m / (3 n)``.
    """
    m = np.broadcast_to(np.asarray(masses, dtype=float), (n,))
    p = rng.normal(0.0, 1.0, size=(n, 3)) * np.sqrt(m * T)[:, None]
    p -= m[:, None] * (p.sum(axis=0) / m.sum())
    Tm = np.sum(p**2 / m[:, None]) / (3 * n)
    p *= np.sqrt(T / Tm)
    return p


def kinetic_temperature(momenta, masses, streaming=None) -> float:
    p = np.asarray(momenta, dtype=float)
    m = np.broadcast_to(np.asarray(masses, dtype=float), (len(p),))
    if streaming is not None:
        p = p - m[:, None] * np.asarray(streaming)
    return float(np.sum(p**2 / m[:, None]) / (3 * len(p)))


def init_fcc(rho: float, N: int, box: BoxSpec | float | None, T: float, seed: int) -> SimState:
    """Periodic FCC crystal with Maxwell-Boltzmann momenta.

    ``N`` must be ``4 k^3``; the box is cubic with edge ``(N/rho)^(1/3)``
    when ``box`` is None, otherwise its volume must match ``N/rho``
    within 1%.
    """
    k = int(round((N / 4) ** (1.0 / 3.0)))
    if 4 * k**3 != N:
        raise ValueError(f"N={N} is not 4*k^3 for an FCC box")
    if box is None:
        box = BoxSpec.cubic((N / rho) ** (1.0 / 3.0))
    elif not isinstance(box, BoxSpec):
        box = BoxSpec.cubic(float(box))
    L = box.lengths
    if not np.allclose(L, L[0]):
        raise ValueError("FCC initialisation needs a cubic box")
    if abs(N / box.volume - rho) > 0.01 * rho:
        raise ValueError(f"box volume {box.volume} inconsistent with N={N}, rho={rho}")
    pos = fcc_lattice(k, L[0] / k)
    rng = np.random.default_rng(seed)
    mom = maxwell_boltzmann(N, T, 1.0, rng)
    return SimState(pos, mom, np.ones(N), np.zeros(N, dtype=np.int8), box)


def drift(state: SimState, dt: float) -> np.ndarray:
    """Position update with the current (half-step) momenta; returns old positions."""
    old = state.positions
    disp = state.momenta * (dt / state.masses[:, None])
    new, shift = wrap_position(old + disp, state.box, return_shift=True)
    state.positions = new
    state.displacement = disp
    state.shift = shift
    state.time += dt
    state.step += 1
    return old


def leapfrog_step(state: SimState, forces: ForceField | np.ndarray, dt: float) -> SimState:
    """One half-step leapfrog update in place.

    ``p(t+dt/2) = p(t-dt/2) + F(t) dt`` then ``r(t+dt) = r(t) + p(t+dt/2) dt/m``.
    """
    F = forces.total if isinstance(forces, ForceField) else np.asarray(forces)
    state.momenta = state.momenta + F * dt
    drift(state, dt)
    return state


def nh_wall_kick(state: SimState, forces: np.ndarray, thermo: ThermostatState, wall_tag,
                 wall_speed: float, dt: float, mask=None) -> None:
    """Thermostatted momentum update of one wall, in place.

    The friction variable advances by explicit Euler from the incoming
    peculiar momenta; the momentum update treats the friction term
    semi-implicitly (trapezoidal in ``p``).
    """
    wall_tag = Tag(wall_tag)
    if mask is None:
        mask = state.tags == wall_tag
    nw = int(mask.sum())
    if nw == 0:
        return
    m = state.masses[mask][:, None]
    u = np.array([wall_speed if wall_tag == Tag.WALL_TOP else 0.0, 0.0, 0.0])
    pbar = state.momenta[mask] - m * u
    xi = thermo.xi[wall_tag]
    ke2 = float(np.sum(pbar**2 / m))
    xi = xi + dt * (ke2 - thermo.target(nw)) / thermo.inertia(nw, dt)
    h = 0.5 * xi * dt
    pbar = (pbar * (1.0 - h) + forces[mask] * dt) / (1.0 + h)
    state.momenta[mask] = pbar + m * u
    thermo.xi[wall_tag] = xi
    if wall_tag == Tag.WALL_TOP:
        state.xi_top = xi
    else:
        state.xi_bottom = xi


def nh_wall_step(state: SimState, forces, thermo: ThermostatState, wall_tag, wall_speed: float,
                 dt: float) -> SimState:
    """Thermostatted kick of one wall's atoms (positions are not moved)."""
    F = forces.total if isinstance(forces, ForceField) else np.asarray(forces)
    nh_wall_kick(state, F, thermo, wall_tag, wall_speed, dt)
    return state


class Integrator:
    """Drives the force/kick/drift cycle and notifies observers.

    Observers may implement ``on_kick(state, ff, p_old, impulse_ext)``
    called after the momentum update (with positions still at ``t``) and
    ``on_drift(state, x_old)`` called after the position update.
    ``impulse_ext`` is the part of the momentum change not due to pair
    forces (tethers and thermostat friction); it is ``None`` for systems
    without wall atoms.

    Parameters
    ----------
    state : SimState
    dt : float
    thermostat : ThermostatState, optional
        Enables Nose-Hoover walls.
    wall_speed : float
        Speed of the top wall in x; tether sites of that wall translate.
    skin : float
        Verlet-list skin; 0 runs the full cell search every step.
    """

    def __init__(self, state: SimState, dt: float, thermostat: ThermostatState | None = None,
                 wall_speed: float = 0.0, k4: float = K4_DEFAULT, k6: float = K6_DEFAULT,
                 skin: float = 0.3):
        self.state = state
        self.dt = float(dt)
        self.thermostat = thermostat
        self.wall_speed = float(wall_speed)
        self.k4, self.k6 = k4, k6
        self.nlist = NeighborList(skin)
        self.observers = []
        self._masks = {t: state.tags == t for t in (Tag.FLUID, Tag.WALL_BOTTOM, Tag.WALL_TOP)}
        self.last_forces: ForceField | None = None

    def step(self) -> ForceField:
        s = self.state
        dt = self.dt
        ff = compute_forces(s, self.k4, self.k6, self.nlist)
        p_old = s.momenta
        s.momenta = p_old + ff.total * dt
        if self.thermostat is not None:
            for tag in (Tag.WALL_BOTTOM, Tag.WALL_TOP):
                m = self._masks[tag]
                if m.any():
                    s.momenta[m] = p_old[m]
                    nh_wall_kick(s, ff.total, self.thermostat, tag, self.wall_speed, dt, mask=m)
        walls = ~self._masks[Tag.FLUID]
        impulse_ext = None
        if walls.any():
            # fluid atoms feel pair forces only; keep their entries exactly zero
            impulse_ext = np.zeros_like(p_old)
            impulse_ext[walls] = (s.momenta[walls] - p_old[walls]) - ff.pair[walls] * dt
        for ob in self.observers:
            ob.on_kick(s, ff, p_old, impulse_ext)
        x_old = drift(s, dt)
        top = self._masks[Tag.WALL_TOP]
        if self.wall_speed != 0.0 and top.any():
            s.tether_sites[top, 0] += self.wall_speed * dt
            s.tether_sites[top] = wrap_position(s.tether_sites[top], s.box)
        for ob in self.observers:
            ob.on_drift(s, x_old)
        self.last_forces = ff
        return ff

    def run(self, steps: int, callback=None) -> None:
        for _ in range(int(steps)):
            self.step()
            if callback is not None:
                callback(self)


@dataclass(frozen=True)
class ChannelGeometry:
    """Layout of the tethered-wall channel.

    ``fluid_lo`` and ``fluid_hi`` are the planes midway between the
    innermost wall layers and the adjacent fluid layers.
    """

    box: BoxSpec
    lattice: float
    layer_spacing: float
    fluid_lo: float
    fluid_hi: float

    @property
    def height(self) -> float:
        return self.fluid_hi - self.fluid_lo


def init_couette(box_length: float, cells: int, wall_layers: int, T: float, seed: int):
    """FCC channel with tethered walls in y and periodic x, z.

    The lattice has ``cells`` unit cells per axis; its (100) atomic layers
    normal to y number ``2 * cells``.  The lowest and highest
    ``wall_layers`` layers become tethered walls with sites at the lattice
    points.  Returns ``(state, geometry)``.
    """
    a = box_length / cells
    box = BoxSpec(np.full(3, float(box_length)), (True, False, True))
    pos = fcc_lattice(cells, a)
    layer = np.rint(pos[:, 1] / (0.5 * a) - 0.5).astype(int)
    nlay = 2 * cells
    tags = np.full(len(pos), Tag.FLUID, dtype=np.int8)
    tags[layer < wall_layers] = Tag.WALL_BOTTOM
    tags[layer >= nlay - wall_layers] = Tag.WALL_TOP
    sites = np.full(pos.shape, np.nan)
    walls = tags != Tag.FLUID
    sites[walls] = pos[walls]
    rng = np.random.default_rng(seed)
    mom = np.zeros_like(pos)
    for t in (Tag.FLUID, Tag.WALL_BOTTOM, Tag.WALL_TOP):
        m = tags == t
        mom[m] = maxwell_boltzmann(int(m.sum()), T, 1.0, rng)
    state = SimState(pos, mom, np.ones(len(pos)), tags, box, tether_sites=sites)
    geom = ChannelGeometry(box, a, 0.5 * a, wall_layers * 0.5 * a, (nlay - wall_layers) * 0.5 * a)
    return state, geom


def rescale_fluid(state: SimState, T: float) -> None:
    """Remove fluid net momentum and rescale fluid momenta to temperature ``T``."""
    m = state.tags == Tag.FLUID
    p = state.momenta[m]
    mass = state.masses[m][:, None]
    p -= mass * (p.sum(axis=0) / mass.sum())
    Tm = np.sum(p**2 / mass) / (3 * len(p))
    state.momenta[m] = p * np.sqrt(T / Tm)
