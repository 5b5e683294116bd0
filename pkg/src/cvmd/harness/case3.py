"""Start-up Couette flow between tethered, thermostatted walls.

Each ensemble member is equilibrated with both walls at rest (fluid
momenta rescaled periodically), then the clock is reset and the top wall
starts moving at ``wall_speed``.  Members differ only in the seed of the
initial velocities.

Three sets of measurements are taken per member:

* streamwise velocity per y layer in windows centred on ``profile_times``;
* VA and MOP shear stress per layer around ``stress_time``, split into
  ``stress_blocks`` sub-blocks for error estimates;
* the momentum budget of a CV enclosing all of the liquid, in windows of
  ``balance_window`` steps, with the face shear forces from MOP.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..analytic import CouetteParams, couette_shear_stress, couette_velocity, cv_momentum_history
from ..cv_budget import BudgetTracker
from ..core import BoxSpec, RunConfig, Tag
from ..dynamics import Integrator, ThermostatState, init_couette, rescale_fluid
from ..lcv import CVGrid
from ..pressure import (MOP_COLUMNS, VA_COLUMNS, FaceAccumulator, VAAccumulator,
                        midpoint_stress_linear, mop_face_rows, va_cell_rows)
from .io import mean_sem, write_csv, write_report

log = logging.getLogger(__name__)

Y_LO, Y_HI = 2, 3  # face ids of the y- and y+ faces


def box_length_for(cfg: RunConfig) -> float:
    if cfg.box_length is not None:
        return float(cfg.box_length)
    return (4 * cfg.lattice_cells**3 / cfg.density) ** (1.0 / 3.0)


def _steps_for(t: float, dt: float) -> int:
    return int(round(t / dt))


class _Window:
    """Observer active for kicks with ``t0 <= time < t1``."""

    def __init__(self, t0, t1, dt):
        self.k0 = _steps_for(t0, dt)
        self.k1 = _steps_for(t1, dt)

    def active(self, state):
        return self.k0 <= state.step < self.k1


class VelocityProfile(_Window):
    """Mean fluid streamwise velocity per layer over one time window."""

    def __init__(self, grid: CVGrid, t0, t1, dt):
        super().__init__(t0, t1, dt)
        self.grid = grid
        self.px = np.zeros(grid.ncells)
        self.m = np.zeros(grid.ncells)
        self.samples = 0

    def on_kick(self, state, ff, p_old, impulse_ext):
        if not self.active(state):
            return
        fluid = state.tags == Tag.FLUID
        c = self.grid.locate(state.positions[fluid])
        ok = c >= 0
        n = self.grid.ncells
        px = 0.5 * (p_old[fluid, 0] + state.momenta[fluid, 0])
        self.px += np.bincount(c[ok], weights=px[ok], minlength=n)
        self.m += np.bincount(c[ok], weights=state.masses[fluid][ok], minlength=n)
        self.samples += 1

    def on_drift(self, state, x_old):
        pass

    def velocity(self):
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.m > 0, self.px / self.m, np.nan)


class StressProfile(_Window):
    """VA and MOP layer stresses in consecutive sub-blocks of one window."""

    def __init__(self, grid: CVGrid, t0, t1, dt, blocks: int):
        super().__init__(t0, t1, dt)
        self.grid = grid
        self.va = VAAccumulator(grid)
        self.mop = FaceAccumulator(grid, dt)
        n = self.k1 - self.k0
        self.edges = [self.k0 + (n * b) // blocks for b in range(blocks + 1)]
        self.va_blocks = []
        self.mop_blocks = []
        # full tensors summed over blocks: VA kinetic, VA configurational,
        # MOP traction, MOP kinetic
        self.sums = None
        self._live = False

    def _close(self):
        va_t = self.va.take()
        mop_t = self.mop.take()
        va, mop = va_t.total, mop_t.total
        self.va_blocks.append(va[:, 0, 1])
        # y faces carry the (y, x) component; average the two faces of each cell
        self.mop_blocks.append(midpoint_stress_linear(mop[:, Y_LO, 0], mop[:, Y_HI, 0]))
        parts = [va_t.kinetic, va_t.configurational, mop_t.traction, mop_t.kinetic]
        self.sums = parts if self.sums is None else [a + b for a, b in zip(self.sums, parts)]

    def tensors(self):
        """Block means of the full VA tensors and MOP face vectors over the window."""
        return [a / len(self.va_blocks) for a in self.sums]

    def on_kick(self, state, ff, p_old, impulse_ext):
        if self.mop.n_force > 0 and state.step in self.edges[1:]:
            self._close()
        if self.active(state):
            self.va.on_kick(state, ff, p_old, impulse_ext)
            self.mop.on_kick(state, ff, p_old, impulse_ext)
            self._live = True
        else:
            self._live = False

    def on_drift(self, state, x_old):
        if self._live:
            self.mop.on_drift(state, x_old)

    def finish(self):
        if self.mop.n_force > 0:
            self._close()
        return np.array(self.va_blocks), np.array(self.mop_blocks)


class LiquidBalance:
    """Momentum budget of the whole-liquid CV with MOP face forces per window."""

    COLUMNS = ("window", "t0", "t1", "accumulation_x", "advection_x", "forcing_x",
               "force_top_x", "force_bottom_x", "residual_x", "scale")

    def __init__(self, grid: CVGrid, dt: float, window: int):
        self.grid = grid
        self.dt = dt
        self.tracker = BudgetTracker(grid, dt, energy=False, window=window, keep_windows=False)
        self.faces = FaceAccumulator(grid, dt)
        self.tracker.on_window = self._on_window
        self.rows = []
        # largest relative gap between pair forcing and the two MOP face forces
        self.face_gap = 0.0

    # the tracker closes a window inside its on_kick, before the face
    # accumulator sees the same kick, so both cover identical steps
    @property
    def observers(self):
        return [self.tracker, self.faces]

    def _on_window(self, b):
        f = self.faces
        top = -f.S[0, Y_HI] * self.dt
        bottom = f.S[0, Y_LO] * self.dt
        f.reset()
        acc, adv = b.mom_acc[0], b.mom_adv[0]
        forcing = b.mom_force[0]
        res = acc - forcing + adv
        scale = max(1.0, float(np.max(np.abs(np.concatenate([acc, adv, forcing])))))
        self.rows.append((len(self.rows), b.t0, b.t1, acc[0], adv[0], forcing[0], top[0],
                          bottom[0], res[0], scale))
        gap = float(np.max(np.abs(b.mom_force_pair[0] - (top + bottom)))) / scale
        self.face_gap = max(self.face_gap, gap)


@dataclass
class MemberResult:
    seed: int
    velocity: dict
    va_blocks: np.ndarray
    mop_blocks: np.ndarray
    balance: np.ndarray
    face_gap: float
    wall_temperature: tuple
    tensors: list = field(default_factory=list)


def _thermostat(cfg):
    return ThermostatState(cfg.temperature, cfg.q_xi, cfg.thermostat_dof)


def run_member(cfg: RunConfig, seed: int, progress=None) -> tuple:
    """One trajectory; returns ``(MemberResult, geometry)``."""
    L = box_length_for(cfg)
    state, geom = init_couette(L, cfg.lattice_cells, cfg.wall_layers, cfg.temperature, seed)
    thermo = _thermostat(cfg)
    integ = Integrator(state, cfg.dt, thermostat=thermo, wall_speed=0.0, k4=cfg.k4, k6=cfg.k6)
    for n in range(cfg.equilibration_steps):
        integ.step()
        if n % cfg.rescale_every == 0:
            rescale_fluid(state, cfg.temperature)
    rescale_fluid(state, cfg.temperature)
    state.time = 0.0
    state.step = 0
    # impulsive start: the top wall moves with U0 from t = 0
    top = state.tags == Tag.WALL_TOP
    state.momenta[top, 0] += state.masses[top] * cfg.wall_speed
    integ.wall_speed = cfg.wall_speed

    box = state.box
    layers = CVGrid.tiling(box, (1, cfg.grid, 1))
    w = 0.5 * cfg.profile_window
    profiles = {t: VelocityProfile(layers, t - w, t + w, cfg.dt) for t in cfg.profile_times}
    ws = 0.5 * cfg.stress_window
    stress = StressProfile(layers, cfg.stress_time - ws, cfg.stress_time + ws, cfg.dt,
                           cfg.stress_blocks)
    liquid = CVGrid.single(box, (0.0, geom.fluid_lo, 0.0), (box.lengths[0], geom.fluid_hi,
                                                              box.lengths[2]))
    balance = LiquidBalance(liquid, cfg.dt, cfg.balance_window)
    integ.observers = [*profiles.values(), stress, *balance.observers]

    # steps = 0 means: just long enough for every measurement window,
    # plus one step so the last window closes at its final kick
    t_end = max(max(cfg.profile_times) + w, cfg.stress_time + ws)
    steps = cfg.steps if cfg.steps > 0 else _steps_for(t_end, cfg.dt) + 1
    every = max(1, steps // 10)
    Tw = []
    for n in range(steps):
        integ.step()
        if n % 100 == 0:
            for tag in (Tag.WALL_BOTTOM, Tag.WALL_TOP):
                m = state.tags == tag
                u = cfg.wall_speed if tag == Tag.WALL_TOP else 0.0
                mass = state.masses[m][:, None]
                p = state.momenta[m] - mass * np.array([u, 0.0, 0.0])
                Tw.append((int(tag), float(np.sum(p**2 / mass)) / (3 * m.sum())))
        if progress is not None and (n + 1) % every == 0:
            progress(n + 1, steps)
    va, mop = stress.finish()
    Tw = np.array(Tw)
    wall_T = tuple(float(Tw[Tw[:, 0] == t, 1].mean()) for t in (1, 2))
    res = MemberResult(seed, {t: p.velocity() for t, p in profiles.items()}, va, mop,
                       np.array(balance.rows), balance.face_gap, wall_T, stress.tensors())
    return res, geom


@dataclass
class Case3Result:
    members: list
    params: CouetteParams
    y_centres: np.ndarray      # bin centres measured from the lower liquid boundary
    interior: np.ndarray       # bin indices used for comparisons
    fluid_bins: np.ndarray
    velocity: dict = field(default_factory=dict)       # t -> (mean, sem, analytic)
    stress: dict = field(default_factory=dict)
    balance: dict = field(default_factory=dict)
    tensors: list = field(default_factory=list)  # stress-window VA K, C and MOP T, K
    layers: CVGrid | None = None
    files: dict = field(default_factory=dict)

    def velocity_rms(self, t) -> float:
        mean, _, an = self.velocity[t]
        i = self.interior
        return float(np.sqrt(np.mean((mean[i] - an[i]) ** 2)))

    @property
    def balance_residual_max(self) -> float:
        b = self.balance
        return float(np.max(np.abs(b["residual"]) / b["scale"]))


def _analytic_window(fn, y, t0, t1, p, samples=11):
    ts = np.linspace(t0, t1, samples)
    vals = np.array([fn(y, t, p) for t in ts])
    integrate = getattr(np, "trapezoid", None) or np.trapz
    return integrate(vals, ts, axis=0) / (t1 - t0)


def summarise(members, geom, cfg: RunConfig) -> Case3Result:
    box = geom.box
    layers = CVGrid.tiling(box, (1, cfg.grid, 1))
    centres = np.array([layers.cell_bounds(layers.ravel(0, b, 0))[0][1] for b in range(cfg.grid)])
    centres = centres + 0.5 * layers.widths[1]
    y = centres - geom.fluid_lo
    fluid_bins = np.flatnonzero((centres > geom.fluid_lo) & (centres < geom.fluid_hi))
    interior = fluid_bins[2:-2]
    A = box.lengths[0] * box.lengths[2]
    n_fluid = 4 * cfg.lattice_cells**3 * (1 - cfg.wall_layers / cfg.lattice_cells)
    rho = n_fluid / (A * geom.height)
    p = CouetteParams(mu=cfg.viscosity, rho=rho, L=geom.height, U0=cfg.wall_speed,
                      n_terms=cfg.n_terms, dx=box.lengths[0], dz=box.lengths[2])
    res = Case3Result(members, p, y, interior, fluid_bins)
    yb = np.clip(y[fluid_bins], 0.0, p.L)

    w = 0.5 * cfg.profile_window
    for t in cfg.profile_times:
        u = np.array([m.velocity[t] for m in members])
        mean, sem = mean_sem(u) if len(members) > 1 else (u[0], np.full(u.shape[1], np.nan))
        an = np.full(len(y), np.nan)
        an[fluid_bins] = _analytic_window(couette_velocity, yb, max(t - w, 0.0), t + w, p)
        res.velocity[t] = (mean, sem, an)

    ws = 0.5 * cfg.stress_window
    va = np.concatenate([m.va_blocks for m in members])
    mop = np.concatenate([m.mop_blocks for m in members])
    an = np.full(len(y), np.nan)
    an[fluid_bins] = _analytic_window(couette_shear_stress, yb, cfg.stress_time - ws,
                                      cfg.stress_time + ws, p)
    va_m, va_s = mean_sem(va)
    mop_m, mop_s = mean_sem(mop)
    d_m, d_s = mean_sem(va - mop)
    res.stress = {"va": va_m, "va_sem": va_s, "mop": mop_m, "mop_sem": mop_s,
                  "diff": d_m, "diff_sem": d_s, "analytic": an, "n_blocks": len(va)}

    rows = np.array([m.balance for m in members])  # (members, windows, columns)
    t0, t1 = rows[0, :, 1], rows[0, :, 2]
    tau = t1 - t0
    rate = rows[:, :, 3] / tau
    ftop = rows[:, :, 6] / tau
    fbot = rows[:, :, 7] / tau
    an_rate = np.full(len(t0), np.nan)
    an_top = np.full(len(t0), np.nan)
    an_bot = np.full(len(t0), np.nan)
    for k in range(len(t0)):
        if t0[k] <= 0:
            continue
        ts = np.linspace(t0[k], t1[k], 5)
        h = np.array([cv_momentum_history(t, p) for t in ts]).mean(axis=0)
        # force of the walls on the liquid is minus the outward face integral at y=L
        an_rate[k], an_top[k], an_bot[k] = h[0], -h[1], h[2]
    res.balance = {"t0": t0, "t1": t1, "residual": rows[:, :, 8], "scale": rows[:, :, 9]}
    for name, v, a in (("rate", rate, an_rate), ("top", ftop, an_top), ("bottom", fbot, an_bot)):
        m, s = mean_sem(v) if len(members) > 1 else (v[0], np.full(v.shape[1], np.nan))
        res.balance[name] = m
        res.balance[name + "_sem"] = s
        res.balance[name + "_analytic"] = a
    res.balance["face_gap"] = max(m.face_gap for m in members)
    res.tensors = [np.mean([m.tensors[k] for m in members], axis=0) for k in range(4)]
    res.layers = layers
    return res


def envelope_coverage(mean, sem, analytic, t0, t_min: float = 1.0, k: float = 2.0) -> float:
    """Fraction of windows starting at or after ``t_min`` with ``|mean - analytic| <= k sem``."""
    sel = (t0 >= t_min) & np.isfinite(analytic)
    if not np.any(sel):
        raise ValueError("no windows after t_min")
    return float(np.mean(np.abs(mean[sel] - analytic[sel]) <= k * sem[sel]))


def run_case3(cfg: RunConfig, out_dir=None, progress=None) -> Case3Result:
    members = []
    geom = None
    for k in range(cfg.ensemble):
        seed = cfg.seed + k
        log.info("case3: member %d/%d seed %d", k + 1, cfg.ensemble, seed)
        cb = None if progress is None else (lambda n, tot, k=k: progress(k, n, tot))
        m, geom = run_member(cfg, seed, cb)
        members.append(m)
    res = summarise(members, geom, cfg)
    if out_dir is not None:
        _write(res, cfg, Path(out_dir))
    return res


def _write(res: Case3Result, cfg: RunConfig, out: Path):
    rows = []
    for t, (mean, sem, an) in res.velocity.items():
        for b in range(len(mean)):
            rows.append((t, b, res.y_centres[b], mean[b], sem[b], an[b]))
    res.files["velocity"] = write_csv(out / "case3_velocity.csv",
                                      ("time", "bin", "y", "u_md", "u_sem", "u_analytic"), rows)
    s = res.stress
    rows = [(b, res.y_centres[b], s["va"][b], s["va_sem"][b], s["mop"][b], s["mop_sem"][b],
             s["analytic"][b]) for b in range(len(res.y_centres))]
    res.files["stress"] = write_csv(
        out / "case3_stress.csv",
        ("bin", "y", "pi_xy_va", "va_sem", "pi_xy_mop", "mop_sem", "pi_xy_analytic"), rows)
    layers = res.layers
    vk, vc, mt, mk = res.tensors
    res.files["va_cells"] = write_csv(out / "case3_va_cells.csv", VA_COLUMNS,
                                      va_cell_rows(layers, vk, vc))
    res.files["mop_faces"] = write_csv(out / "case3_mop_faces.csv", MOP_COLUMNS,
                                       mop_face_rows(layers, mt, mk))
    b = res.balance
    rows = [(k, b["t0"][k], b["t1"][k], b["rate"][k], b["rate_sem"][k], b["rate_analytic"][k],
             b["top"][k], b["top_sem"][k], b["top_analytic"][k], b["bottom"][k],
             b["bottom_sem"][k], b["bottom_analytic"][k], float(np.max(np.abs(b["residual"][:, k])
                                                                  / b["scale"][:, k])))
            for k in range(len(b["t0"]))]
    res.files["balance"] = write_csv(
        out / "case3_balance.csv",
        ("window", "t0", "t1", "dpdt", "dpdt_sem", "dpdt_analytic", "force_top", "force_top_sem",
         "force_top_analytic", "force_bottom", "force_bottom_sem", "force_bottom_analytic",
         "residual_rel_max"), rows)
    for m in res.members:
        res.files[f"balance_seed{m.seed}"] = write_csv(
            out / f"case3_balance_seed{m.seed}.csv", LiquidBalance.COLUMNS,
            [(int(r[0]), *r[1:]) for r in m.balance])
    report = {"ensemble": len(res.members), "viscosity": res.params.mu, "rho": res.params.rho,
              "height": res.params.L,
              "balance_residual_max": res.balance_residual_max,
              "face_gap_max": res.balance["face_gap"]}
    for t in res.velocity:
        report[f"velocity_rms_t{t:g}"] = res.velocity_rms(t)
    for m in res.members:
        report[f"wall_T_seed{m.seed}"] = f"{m.wall_temperature[0]:.4f} {m.wall_temperature[1]:.4f}"
    res.files["report"] = write_report(out / "case3_report.txt", report)
