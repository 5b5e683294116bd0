"""Pressure routes: virial, volume average (VA) and method of planes (MOP).

Sign convention: ``Pi = kappa - sigma`` with kinetic part ``kappa`` and
configurational stress ``sigma``; for repulsive pairs ``sigma`` is
negative and the pressure positive.  Face quantities are oriented along
the positive axis on both faces of a cell, so ``P_x^+`` and ``P_x^-`` each
estimate ``Pi . e_x`` at their own plane.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BoxSpec, SimState
from .forces import ForceField, PairRecords
from ._pykernels import MODE_SPAN
from .lcv import CVGrid

AXIS_OF_FACE = np.array([0, 0, 1, 1, 2, 2])


@dataclass(frozen=True)
class PressureTensor:
    """Kinetic and configurational parts; ``total = kinetic - sigma``.

    ``advection`` is the streaming contribution ``rho u u`` removed from
    the kinetic part (zero for global routes).
    """

    kinetic: np.ndarray
    sigma: np.ndarray
    advection: np.ndarray | None = None

    @property
    def total(self) -> np.ndarray:
        return self.kinetic - self.sigma

    @property
    def configurational(self) -> np.ndarray:
        return -self.sigma


@dataclass(frozen=True)
class FaceStress:
    """Window-averaged face quantities, arrays of shape (ncells, 6, 3).

    ``traction`` is the configurational traction ``T``; ``kinetic_lab`` the
    full crossing flux of momentum per unit area and time; ``advection``
    the streaming part ``rho u_a u_b`` at each face; ``kinetic`` the
    peculiar remainder.  ``total = kinetic - traction``.
    """

    traction: np.ndarray
    kinetic_lab: np.ndarray
    advection: np.ndarray
    face_areas: np.ndarray
    tau: float
    n_samples: int

    @property
    def kinetic(self) -> np.ndarray:
        return self.kinetic_lab - self.advection

    @property
    def total(self) -> np.ndarray:
        return self.kinetic - self.traction

    @property
    def total_lab(self) -> np.ndarray:
        return self.kinetic_lab - self.traction


def _add_faces(acc, cell, face, w):
    """acc[cell, face, :] += w for rows with cell >= 0 (deterministic order)."""
    ok = cell >= 0
    if not np.any(ok):
        return
    flat = cell[ok] * 6 + face[ok]
    n = acc.shape[0] * 6
    for a in range(3):
        acc[:, :, a] += np.bincount(flat, weights=w[ok, a], minlength=n).reshape(-1, 6)


def face_traction_sums(grid: CVGrid, positions, pairs: PairRecords) -> np.ndarray:
    """Instantaneous ``sum f_ij dS`` per cell face, shape (ncells, 6, 3)."""
    walk = grid.pair_traverse(positions[pairs.i], positions[pairs.j], pairs.r_ij, want_visits=False)
    out = np.zeros((grid.ncells, 6, 3))
    if len(walk.plane_pair) == 0:
        return out
    f = pairs.f_ij[walk.plane_pair] * (-walk.plane_dir)[:, None]
    a = walk.plane_axis
    _add_faces(out, walk.plane_exit, 2 * a + (walk.plane_dir > 0), f)
    _add_faces(out, walk.plane_enter, 2 * a + (walk.plane_dir < 0), f)
    return out


def face_kinetic_sums(grid: CVGrid, crossings, momenta) -> np.ndarray:
    """``sum p sgn(p_normal)`` per cell face for one step's crossings."""
    out = np.zeros((grid.ncells, 6, 3))
    if len(crossings) == 0:
        return out
    d = crossings.dir
    w = momenta[crossings.mol] * d[:, None]
    a = crossings.axis
    _add_faces(out, crossings.cell_exit, 2 * a + (d > 0), w)
    _add_faces(out, crossings.cell_enter, 2 * a + (d < 0), w)
    return out


def _neighbours(grid: CVGrid) -> np.ndarray:
    """Flat index of the cell across each face, -1 if outside; shape (ncells, 6)."""
    K = np.stack(np.unravel_index(np.arange(grid.ncells), grid.shape), axis=1)
    out = np.empty((grid.ncells, 6), dtype=np.int64)
    n = np.array(grid.shape)
    for f in range(6):
        a, step = f // 2, (1 if f % 2 else -1)
        Kn = K.copy()
        Kn[:, a] += step
        if grid.modes[a] == MODE_SPAN:
            Kn[:, a] %= n[a]
            inside = np.ones(len(K), dtype=bool)
        else:
            inside = (Kn[:, a] >= 0) & (Kn[:, a] < n[a])
        flat = (Kn[:, 0] * n[1] + Kn[:, 1]) * n[2] + Kn[:, 2]
        out[:, f] = np.where(inside, flat, -1)
    return out


class FaceAccumulator:
    """Integrator observer accumulating MOP sums on every face of a grid.

    Call :meth:`take` to obtain the window average and reset.
    """

    def __init__(self, grid: CVGrid, dt: float):
        self.grid = grid
        self.dt = float(dt)
        self._nbr = _neighbours(grid)
        self._cells = None
        self.reset()

    def reset(self):
        n = self.grid.ncells
        self.S = np.zeros((n, 6, 3))
        self.Kf = np.zeros((n, 6, 3))
        self.sum_m = np.zeros(n)
        self.sum_p = np.zeros((n, 3))
        self.n_force = 0
        self.n_drift = 0

    def on_kick(self, state: SimState, ff: ForceField, p_old, impulse_ext) -> None:
        self.S += face_traction_sums(self.grid, state.positions, ff.pairs)
        cells = self.grid.locate(state.positions)
        ok = cells >= 0
        pm = 0.5 * (p_old + state.momenta)
        n = self.grid.ncells
        self.sum_m += np.bincount(cells[ok], weights=state.masses[ok], minlength=n)
        for a in range(3):
            self.sum_p[:, a] += np.bincount(cells[ok], weights=pm[ok, a], minlength=n)
        self.n_force += 1

    def on_drift(self, state: SimState, x_old) -> None:
        cr = self.grid.point_crossings(x_old, state.positions, state.displacement, state.shift)
        self.Kf += face_kinetic_sums(self.grid, cr, state.momenta)
        self.n_drift += 1

    def current(self) -> FaceStress:
        return face_time_averages(self)

    def take(self) -> FaceStress:
        out = self.current()
        self.reset()
        return out


def face_time_averages(acc: FaceAccumulator) -> FaceStress:
    """Window averages of traction, crossing flux and face advection."""
    grid = acc.grid
    if acc.n_force == 0 or acc.n_drift == 0:
        raise ValueError("empty window")
    area = grid.face_areas[AXIS_OF_FACE]
    if np.any(area <= 0):
        raise ValueError("zero-area face")
    tau = acc.n_drift * acc.dt
    T = -acc.S / (acc.n_force * area[None, :, None])
    K = acc.Kf / (tau * area[None, :, None])
    # streaming term from the two cells sharing each face
    with np.errstate(invalid="ignore", divide="ignore"):
        rho_uu = np.where(acc.sum_m[:, None, None] > 0,
                          acc.sum_p[:, :, None] * acc.sum_p[:, None, :] / acc.sum_m[:, None, None],
                          0.0) / (acc.n_force * grid.cell_volume)
    adv = np.zeros_like(T)
    for f in range(6):
        a = f // 2
        nb = acc._nbr[:, f]
        own = rho_uu[:, :, a]
        other = np.where((nb >= 0)[:, None], rho_uu[np.maximum(nb, 0), :, a], own)
        adv[:, f, :] = 0.5 * (own + other)
    return FaceStress(T, K, adv, area, tau, acc.n_force)


def mop_face_tensor(faces: FaceStress, cell: int, face: int):
    """``(T, K, P)`` three-vectors on one face of one cell."""
    return faces.traction[cell, face], faces.kinetic[cell, face], faces.total[cell, face]


def cv_scalar(faces: FaceStress, cell: int = 0, part: str = "total") -> float:
    """Mean of the six normal face components ``P_aa^+-`` of one cell."""
    arr = {"total": faces.total, "kinetic": faces.kinetic,
           "traction": faces.traction, "kinetic_lab": faces.kinetic_lab}[part]
    f = np.arange(6)
    return float(np.mean(arr[cell, f, AXIS_OF_FACE]))


def global_mop_plane(positions, pairs: PairRecords, box: BoxSpec, axis: int, coord: float):
    """Configurational MOP pressure vector on a whole periodic plane.

    Independent oracle: counts signed crossings of each minimum-image pair
    segment with the plane ``x_axis = coord`` and its periodic images,
    returning ``(1/A) sum f_ij * (-direction)``.
    """
    L = box.lengths
    A = float(np.prod(np.delete(L, axis)))
    xi = positions[pairs.i, axis]
    xe = xi - pairs.r_ij[:, axis]
    if box.periodic[axis]:
        La = L[axis]
        ki = np.floor((xi - coord) / La)
        ke = np.floor((xe - coord) / La)
        # number of images of the plane passed, signed along i -> j
        n = ke - ki
    else:
        n = (xe >= coord).astype(float) - (xi >= coord).astype(float)
    return np.sum(pairs.f_ij * (-n)[:, None], axis=0) / A


def virial_instant(ff: ForceField, p_old, p_new, masses, volume: float):
    """Instantaneous virial ``(kappa, sigma, Pi)`` scalars.

    The kinetic part averages the two half-step kinetic energies.
    """
    kinetic = float(np.sum((p_old**2 + p_new**2) / (2.0 * masses[:, None]))) / (3.0 * volume)
    conf = float(np.sum(ff.pairs.f_ij * ff.pairs.r_ij)) / (3.0 * volume)
    return kinetic, -conf, kinetic + conf


def virial_tensor(pairs: PairRecords, volume: float) -> np.ndarray:
    """Configurational virial pressure tensor ``(1/V) sum f_ij r_ij``."""
    return np.einsum("pa,pb->ab", pairs.f_ij, pairs.r_ij) / volume


def virial_scalar(samples):
    """Window average of ``(kappa, sigma, Pi)`` over instantaneous samples."""
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3 or len(arr) == 0:
        raise ValueError("expected a non-empty (n, 3) sample array")
    k, s, p = arr.mean(axis=0)
    return float(k), float(s), float(p)


def va_config_sums(grid: CVGrid, positions, pairs: PairRecords) -> np.ndarray:
    """Per-cell ``sum_pairs l_ij f_ij r_ij``, shape (ncells, 3, 3)."""
    walk = grid.pair_traverse(positions[pairs.i], positions[pairs.j], pairs.r_ij, want_visits=True)
    n = grid.ncells
    out = np.zeros((n, 3, 3))
    if len(walk.visit_pair) == 0:
        return out
    f = pairs.f_ij[walk.visit_pair]
    r = pairs.r_ij[walk.visit_pair]
    l = walk.visit_frac
    c = walk.visit_cell
    for a in range(3):
        for b in range(a, 3):
            v = np.bincount(c, weights=l * f[:, a] * r[:, b], minlength=n)
            out[:, a, b] = v
            out[:, b, a] = v
    return out


def va_tensor(grid: CVGrid, state: SimState, pairs: PairRecords, p_old=None, p_new=None):
    """Instantaneous VA pressure tensor of every cell.

    Returns a :class:`PressureTensor` with arrays of shape (ncells, 3, 3);
    the kinetic part uses peculiar momenta about each cell's streaming
    velocity, and the streaming part is reported as ``advection``.
    """
    acc = VAAccumulator(grid)
    p_new = state.momenta if p_new is None else p_new
    p_old = p_new if p_old is None else p_old
    acc.add(state.positions, pairs, p_old, p_new, state.masses)
    return acc.take()


class VAAccumulator:
    """Accumulates VA sums over samples; also usable as an integrator observer."""

    def __init__(self, grid: CVGrid):
        self.grid = grid
        self.reset()

    def reset(self):
        n = self.grid.ncells
        self.conf = np.zeros((n, 3, 3))
        self.pp = np.zeros((n, 3, 3))
        self.p = np.zeros((n, 3))
        self.m = np.zeros(n)
        self.n_samples = 0

    def add(self, positions, pairs, p_old, p_new, masses):
        g = self.grid
        n = g.ncells
        self.conf += va_config_sums(g, positions, pairs)
        cells = g.locate(positions)
        ok = cells >= 0
        c = cells[ok]
        mo = masses[ok]
        po, pn = p_old[ok], p_new[ok]
        pm = 0.5 * (po + pn)
        for a in range(3):
            self.p[:, a] += np.bincount(c, weights=pm[:, a], minlength=n)
            for b in range(a, 3):
                w = 0.5 * (po[:, a] * po[:, b] + pn[:, a] * pn[:, b]) / mo
                v = np.bincount(c, weights=w, minlength=n)
                self.pp[:, a, b] += v
                if b != a:
                    self.pp[:, b, a] += v
        self.m += np.bincount(c, weights=mo, minlength=n)
        self.n_samples += 1

    def on_kick(self, state, ff, p_old, impulse_ext):
        self.add(state.positions, ff.pairs, p_old, state.momenta, state.masses)

    def on_drift(self, state, x_old):
        pass

    def current(self) -> PressureTensor:
        if self.n_samples == 0:
            raise ValueError("empty window")
        V = self.grid.cell_volume
        N = self.n_samples
        with np.errstate(invalid="ignore", divide="ignore"):
            adv = np.where(self.m[:, None, None] > 0,
                           self.p[:, :, None] * self.p[:, None, :] / self.m[:, None, None], 0.0)
        kin_lab = self.pp / (N * V)
        adv = adv / (N * V)
        return PressureTensor(kin_lab - adv, -self.conf / (N * V), adv)

    def take(self) -> PressureTensor:
        out = self.current()
        self.reset()
        return out


def midpoint_stress_linear(a, b):
    """Cell-centre value of a quantity varying linearly between two opposing faces."""
    return 0.5 * (np.asarray(a) + np.asarray(b))


def block_means(series, block_len: int) -> np.ndarray:
    x = np.asarray(series, dtype=float)
    nb = len(x) // int(block_len)
    if block_len < 1 or nb < 2:
        raise ValueError("series must contain at least two blocks")
    return x[: nb * block_len].reshape(nb, block_len).mean(axis=1)


def block_std(series, block_len: int) -> float:
    """Standard deviation (ddof=1) of non-overlapping block means."""
    return float(np.std(block_means(series, block_len), ddof=1))


def block_sem(series, block_len: int) -> float:
    """Standard error of the mean from block averaging."""
    bm = block_means(series, block_len)
    return float(np.std(bm, ddof=1) / np.sqrt(len(bm)))


def percentage_discrepancy(a: float, b: float) -> float:
    """``100 |a - b| / |b|``."""
    if b == 0:
        raise ValueError("reference value is zero")
    return 100.0 * abs(a - b) / abs(b)


_AX = "xyz"
VA_COLUMNS = (("cell_ix", "cell_iy", "cell_iz")
              + tuple(f"{p}_{a}{b}" for p in ("P", "K", "C") for a in _AX for b in _AX))
MOP_COLUMNS = ("cell_ix", "cell_iy", "cell_iz", "face", "T_x", "T_y", "T_z", "K_x", "K_y", "K_z")


def va_cell_rows(grid: CVGrid, kinetic, configurational) -> list:
    """CSV rows of per-cell VA tensors: total ``P = K + C``, kinetic ``K``, configurational ``C``."""
    K = np.asarray(kinetic).reshape(grid.ncells, 9)
    C = np.asarray(configurational).reshape(grid.ncells, 9)
    rows = []
    for c in range(grid.ncells):
        idx = tuple(int(v) for v in grid.unravel(c))
        rows.append(idx + tuple(K[c] + C[c]) + tuple(K[c]) + tuple(C[c]))
    return rows


def mop_face_rows(grid: CVGrid, traction, kinetic) -> list:
    """CSV rows of per-face MOP traction and kinetic vectors; faces 0..5 are x-, x+, ..., z+."""
    T = np.asarray(traction)
    K = np.asarray(kinetic)
    rows = []
    for c in range(grid.ncells):
        idx = tuple(int(v) for v in grid.unravel(c))
        for f in range(6):
            rows.append(idx + (f,) + tuple(T[c, f]) + tuple(K[c, f]))
    return rows
