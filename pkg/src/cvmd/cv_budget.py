"""Per-CV conservation ledgers for mass, momentum and energy.

Ledgers are time-integrated over one step per interval and summed into
windows.  Every interval satisfies

    Accumulation - Forcing + Advection = Residual

with advection counted positive for outflow.  Mass and momentum close to
round-off; the energy residual is the integrator error.

Sampling conventions
--------------------
* Momentum content at step ``n`` uses ``p(n - 1/2)`` with positions
  ``r(n)``; crossings during the drift ``r(n) -> r(n+1)`` carry
  ``p(n + 1/2)``.  Forcing is ``dt * F(r(n))`` (rectangle rule).
* Energy content at step ``n`` uses the mean of the two half-step kinetic
  energies plus half of each pair energy at ``r(n)``.  Forcing power is
  integrated with the trapezoid rule over the step and crossings carry the
  mean of the crossing molecule's energy at both ends of the step.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import SimState
from .forces import ForceField, PairRecords
from .lcv import CVGrid, Crossings

QUANTITIES = ("mass", "mom_x", "mom_y", "mom_z", "energy")


def _bincount3(idx, w, n):
    ok = idx >= 0
    out = np.empty((n, 3))
    for a in range(3):
        out[:, a] = np.bincount(idx[ok], weights=w[ok, a], minlength=n)
    return out


def _bincount1(idx, w, n):
    ok = idx >= 0
    return np.bincount(idx[ok], weights=w[ok], minlength=n)


def molecule_energy(momenta_old, momenta_new, masses, forces: ForceField) -> np.ndarray:
    """Per-molecule energy at integer time: mean half-step KE plus half pair energies."""
    m = masses
    ke = (np.sum(momenta_old**2, axis=1) + np.sum(momenta_new**2, axis=1)) / (4.0 * m)
    return ke + forces.potential_per_molecule(len(m))


def snapshot(state: SimState, grid: CVGrid, energies=None, momenta=None, cells=None):
    """Per-cell ``(sum m, sum p, sum e)`` over molecules inside each cell.

    ``energies`` defaults to zero; ``momenta`` to the stored momenta.
    """
    if cells is None:
        cells = grid.locate(state.positions)
    p = state.momenta if momenta is None else momenta
    n = grid.ncells
    mass = _bincount1(cells, state.masses, n)
    mom = _bincount3(cells, p, n)
    en = np.zeros(n) if energies is None else _bincount1(cells, energies, n)
    return mass, mom, en


def record_advection(crossings: Crossings, momenta, masses, ncells: int, energies=None):
    """Outflow-positive advection of mass, momentum and energy.

    ``energies``, if given, holds one value per crossing row.  Returns
    ``(mass, momentum, energy)`` per cell for one step's crossings.
    """
    mol = crossings.mol
    out_c, in_c = crossings.cell_exit, crossings.cell_enter
    m = masses[mol]
    p = momenta[mol]
    mass = _bincount1(out_c, m, ncells) - _bincount1(in_c, m, ncells)
    mom = _bincount3(out_c, p, ncells) - _bincount3(in_c, p, ncells)
    en = None
    if energies is not None:
        en = _bincount1(out_c, energies, ncells) - _bincount1(in_c, energies, ncells)
    return mass, mom, en


def record_forcing(pairs: PairRecords, cells, dt: float, ncells: int, impulse_ext=None):
    """Momentum forcing ``dt * sum f_ij (theta_i - theta_j)`` per cell, plus external impulse.

    Pairs with both ends in the same cell cancel identically and are skipped.
    Returns ``(pair_part, external_part)``.
    """
    ci = cells[pairs.i]
    cj = cells[pairs.j]
    x = ci != cj
    f = pairs.f_ij[x] * dt
    fp = _bincount3(ci[x], f, ncells) - _bincount3(cj[x], f, ncells)
    fe = np.zeros((ncells, 3)) if impulse_ext is None else _bincount3(cells, impulse_ext, ncells)
    return fp, fe


def energy_power(pairs: PairRecords, cells, velocities, ncells: int, force_ext=None):
    """Rate of energy input per cell: ``sum f_ij . (v_i + v_j)/2 (theta_i - theta_j)``."""
    ci = cells[pairs.i]
    cj = cells[pairs.j]
    x = ci != cj
    vi = velocities[pairs.i[x]]
    vj = velocities[pairs.j[x]]
    w = 0.5 * np.sum(pairs.f_ij[x] * (vi + vj), axis=1)
    g = _bincount1(ci[x], w, ncells) - _bincount1(cj[x], w, ncells)
    if force_ext is not None:
        g = g + _bincount1(cells, np.sum(velocities * force_ext, axis=1), ncells)
    return g


@dataclass
class CVBudget:
    """Ledgers for every cell of a grid over one window of steps."""

    ncells: int
    t0: float = 0.0
    t1: float = 0.0
    steps: int = 0
    mass_acc: np.ndarray = None
    mass_adv: np.ndarray = None
    mom_acc: np.ndarray = None
    mom_adv: np.ndarray = None
    mom_force_pair: np.ndarray = None
    mom_force_ext: np.ndarray = None
    en_acc: np.ndarray = None
    en_adv: np.ndarray = None
    en_force: np.ndarray = None
    crossings: np.ndarray = None

    def __post_init__(self):
        n = self.ncells
        for name in ("mass_acc", "mass_adv", "en_acc", "en_adv", "en_force"):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros(n))
        for name in ("mom_acc", "mom_adv", "mom_force_pair", "mom_force_ext"):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros((n, 3)))
        if self.crossings is None:
            self.crossings = np.zeros(n, dtype=np.int64)

    def add(self, other: "CVBudget") -> None:
        for name in ("mass_acc", "mass_adv", "mom_acc", "mom_adv", "mom_force_pair",
                     "mom_force_ext", "en_acc", "en_adv", "en_force", "crossings"):
            setattr(self, name, getattr(self, name) + getattr(other, name))
        self.t1 = other.t1
        self.steps += other.steps

    @property
    def mom_force(self) -> np.ndarray:
        return self.mom_force_pair + self.mom_force_ext


@dataclass
class ResidualReport:
    """Residuals ``Accumulation - Forcing + Advection`` per cell."""

    mass: np.ndarray
    momentum: np.ndarray
    energy: np.ndarray
    mean_abs_acc_momentum: np.ndarray
    mean_abs_acc_energy: np.ndarray


def close_window(budget: CVBudget) -> ResidualReport:
    b = budget
    return ResidualReport(
        mass=b.mass_acc + b.mass_adv,
        momentum=b.mom_acc - b.mom_force + b.mom_adv,
        energy=b.en_acc - b.en_force + b.en_adv,
        mean_abs_acc_momentum=np.abs(b.mom_acc),
        mean_abs_acc_energy=np.abs(b.en_acc),
    )


@dataclass
class ResidualStats:
    """Running per-cell statistics over closed intervals."""

    ncells: int
    intervals: int = 0
    mass_violations: int = 0
    mom_res_max: np.ndarray = None
    mom_acc_abs: np.ndarray = None
    en_res_abs: np.ndarray = None
    en_acc_abs: np.ndarray = None

    def __post_init__(self):
        n = self.ncells
        self.mom_res_max = np.zeros((n, 3))
        self.mom_acc_abs = np.zeros((n, 3))
        self.en_res_abs = np.zeros(n)
        self.en_acc_abs = np.zeros(n)

    def momentum_ratio(self) -> np.ndarray:
        """max |Residual| / max(1, mean |Accumulation|), per cell and component."""
        mean_acc = self.mom_acc_abs / max(self.intervals, 1)
        return self.mom_res_max / np.maximum(1.0, mean_acc)

    def energy_ratio(self, cells=None) -> float:
        """mean |Residual| / mean |Accumulation| pooled over ``cells`` (all if None)."""
        sel = slice(None) if cells is None else np.asarray(cells)
        acc = float(np.sum(self.en_acc_abs[sel]))
        return float(np.sum(self.en_res_abs[sel])) / acc if acc > 0 else 0.0


class BudgetTracker:
    """Integrator observer maintaining ledgers on one grid.

    Parameters
    ----------
    grid : CVGrid
    dt : float
    energy : bool
        Track the energy ledger (costs a per-molecule energy evaluation).
    window : int
        Steps per output window; closed windows are kept in ``windows``.
    series_cells : sequence of int
        Cells whose per-interval ledgers are stored in ``series``.
    """

    def __init__(self, grid: CVGrid, dt: float, energy: bool = True, window: int | None = None,
                 series_cells=(), keep_windows: bool = True):
        self.grid = grid
        self.dt = float(dt)
        self.energy = energy
        self.window = window
        self.keep_windows = keep_windows
        self.series_cells = np.asarray(series_cells, dtype=np.int64)
        self.series = []
        self.windows = []
        self.stats = ResidualStats(grid.ncells)
        self._cells = None
        self._prev = None
        self._pending = None
        self._win = None

    # the integrator calls on_kick with positions at t_n and momenta p(n+1/2)
    def on_kick(self, state: SimState, ff: ForceField, p_old, impulse_ext) -> None:
        n = self.grid.ncells
        if self._cells is None:
            self._cells = self.grid.locate(state.positions)
        cells = self._cells
        m = state.masses
        mass, mom, _ = snapshot(state, self.grid, momenta=p_old, cells=cells)
        cur = {"t": state.time, "mass": mass, "mom": mom}
        if self.energy:
            e = molecule_energy(p_old, state.momenta, m, ff)
            v = (p_old + state.momenta) / (2.0 * m[:, None])
            fext = None if impulse_ext is None else impulse_ext / self.dt
            cur["e"] = e
            cur["E"] = _bincount1(cells, e, n)
            cur["g"] = energy_power(ff.pairs, cells, v, n, fext)
        fp, fe = record_forcing(ff.pairs, cells, self.dt, n, impulse_ext)
        cur["fp"], cur["fe"] = fp, fe
        if self._prev is not None and self._pending is not None:
            self._close_interval(self._prev, cur)
        self._prev = cur
        self._pending = None

    def on_drift(self, state: SimState, x_old) -> None:
        n = self.grid.ncells
        cr = self.grid.point_crossings(x_old, state.positions, state.displacement, state.shift)
        mass_adv, mom_adv, _ = record_advection(cr, state.momenta, state.masses, n)
        self._pending = {"cr": cr, "mass_adv": mass_adv, "mom_adv": mom_adv}
        self._cells = self.grid.locate(state.positions)

    def _close_interval(self, prev, cur) -> None:
        n = self.grid.ncells
        pend = self._pending
        b = CVBudget(n, t0=prev["t"], t1=cur["t"], steps=1)
        b.mass_acc = cur["mass"] - prev["mass"]
        b.mass_adv = pend["mass_adv"]
        b.mom_acc = cur["mom"] - prev["mom"]
        b.mom_adv = pend["mom_adv"]
        b.mom_force_pair = prev["fp"]
        b.mom_force_ext = prev["fe"]
        cr = pend["cr"]
        b.crossings = (np.bincount(cr.cell_exit[cr.cell_exit >= 0], minlength=n)
                       + np.bincount(cr.cell_enter[cr.cell_enter >= 0], minlength=n))
        if self.energy:
            b.en_acc = cur["E"] - prev["E"]
            b.en_force = 0.5 * self.dt * (prev["g"] + cur["g"])
            ec = 0.5 * (prev["e"][cr.mol] + cur["e"][cr.mol])
            b.en_adv = _bincount1(cr.cell_exit, ec, n) - _bincount1(cr.cell_enter, ec, n)
        self._update_stats(b)
        if self.window is not None:
            if self._win is None:
                self._win = CVBudget(n, t0=b.t0, t1=b.t0)
            self._win.add(b)
            if self._win.steps >= self.window:
                if self.keep_windows:
                    self.windows.append(self._win)
                self.on_window(self._win)
                self._win = None

    def on_window(self, budget: CVBudget) -> None:
        """Hook for subclasses or harness code; called when a window closes."""

    def _update_stats(self, b: CVBudget) -> None:
        s = self.stats
        s.intervals += 1
        mres = b.mass_acc + b.mass_adv
        s.mass_violations += int(np.count_nonzero(mres))
        mom_res = b.mom_acc - b.mom_force + b.mom_adv
        np.maximum(s.mom_res_max, np.abs(mom_res), out=s.mom_res_max)
        s.mom_acc_abs += np.abs(b.mom_acc)
        if self.energy:
            en_res = b.en_acc - b.en_force + b.en_adv
            s.en_res_abs += np.abs(en_res)
            s.en_acc_abs += np.abs(b.en_acc)
        else:
            en_res = np.zeros(self.grid.ncells)
        for c in self.series_cells:
            self.series.append((
                b.t0, int(c),
                float(b.mass_acc[c]), float(b.mass_adv[c]),
                *b.mom_acc[c], *b.mom_adv[c], *b.mom_force[c], *mom_res[c],
                float(b.en_acc[c]), float(b.en_adv[c]), float(b.en_force[c]), float(en_res[c]),
            ))


SERIES_COLUMNS = (
    "time", "cell", "mass_acc", "mass_adv",
    "mom_acc_x", "mom_acc_y", "mom_acc_z", "mom_adv_x", "mom_adv_y", "mom_adv_z",
    "mom_force_x", "mom_force_y", "mom_force_z", "mom_res_x", "mom_res_y", "mom_res_z",
    "en_acc", "en_adv", "en_force", "en_res",
)


def budget_rows(budget: CVBudget, grid: CVGrid, cells=None):
    """CSV rows ``(ix, iy, iz, quantity, accumulation, advection, forcing, residual)``."""
    cells = range(grid.ncells) if cells is None else cells
    rows = []
    for c in cells:
        ix, iy, iz = (int(v) for v in grid.unravel(int(c)))
        b = budget
        entries = [("mass", b.mass_acc[c], b.mass_adv[c], 0.0)]
        for a, q in enumerate(("mom_x", "mom_y", "mom_z")):
            entries.append((q, b.mom_acc[c, a], b.mom_adv[c, a], b.mom_force[c, a]))
        entries.append(("energy", b.en_acc[c], b.en_adv[c], b.en_force[c]))
        for q, acc, adv, frc in entries:
            rows.append((ix, iy, iz, q, float(acc), float(adv), float(frc), float(acc - frc + adv)))
    return rows


BUDGET_COLUMNS = ("cell_ix", "cell_iy", "cell_iz", "quantity", "accumulation", "advection",
                  "forcing", "residual")
