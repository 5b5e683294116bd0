"""Equilibrium pressure from the whole-box CV surfaces against the virial."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..core import BoxSpec, ConfigError, RunConfig
from ..dynamics import Integrator, init_fcc
from ..lcv import CVGrid
from ..pressure import FaceAccumulator, block_std, cv_scalar, percentage_discrepancy, virial_instant
from .io import write_csv, write_report

log = logging.getLogger(__name__)

SERIES_COLUMNS = ("step", "kappa_vir", "sigma_vir", "kappa_cv", "sigma_cv", "pd")
INTERVAL_COLUMNS = ("step", "kappa_vir", "sigma_vir", "pi_vir", "kappa_cv", "sigma_cv", "pi_cv")


@dataclass
class Case2Result:
    steps: int
    # per output interval: kappa_vir, sigma_vir, pi_vir, kappa_cv, sigma_cv, pi_cv
    intervals: np.ndarray
    # running averages up to each interval end, same columns
    cumulative: np.ndarray
    interval_steps: np.ndarray
    pd_series: np.ndarray
    initial_sigma_vir: float
    temperature: float
    density: float
    block_sd: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)

    @property
    def final(self) -> dict:
        k, s, p, kc, sc, pc = self.cumulative[-1]
        return {"kappa_vir": k, "sigma_vir": s, "pi_vir": p, "kappa_cv": kc, "sigma_cv": sc,
                "pi_cv": pc}

    @property
    def pd_total(self) -> float:
        return float(self.pd_series[-1])

    def pd(self, part: str) -> float:
        f = self.final
        return percentage_discrepancy(f[f"{part}_cv"], f[f"{part}_vir"])


class _Virial:
    def __init__(self):
        self.samples = []
        self.temps = []
        self.first = None

    def on_kick(self, state, ff, p_old, impulse_ext):
        k, s, p = virial_instant(ff, p_old, state.momenta, state.masses, state.box.volume)
        if self.first is None:
            self.first = s
        self.samples.append((k, s, p))
        self.temps.append(k * state.box.volume / state.n)

    def on_drift(self, state, x_old):
        pass


def run_case2(cfg: RunConfig, out_dir=None, progress=None) -> Case2Result:
    """Accumulate whole-box CV surface pressure and the virial side by side."""
    if cfg.steps < 2 * cfg.output_every:
        raise ConfigError("case2 needs at least two output intervals")
    box = BoxSpec.cubic(cfg.box_side)
    state = init_fcc(cfg.density, cfg.n, box, cfg.temperature, cfg.seed)
    integ = Integrator(state, cfg.dt)
    grid = CVGrid.tiling(box, (1, 1, 1))
    faces = FaceAccumulator(grid, cfg.dt)
    vir = _Virial()
    integ.observers = [faces, vir]

    rows, marks = [], []
    every = max(1, cfg.steps // 20)
    for n in range(cfg.steps):
        integ.step()
        if (n + 1) % cfg.output_every == 0:
            fs = faces.take()
            v = np.array(vir.samples[-cfg.output_every:]).mean(axis=0)
            rows.append((*v, cv_scalar(fs, 0, "kinetic"), cv_scalar(fs, 0, "traction"),
                         cv_scalar(fs, 0, "total")))
            marks.append(n + 1)
        if progress is not None and (n + 1) % every == 0:
            progress(n + 1, cfg.steps)

    iv = np.array(rows)
    cum = np.cumsum(iv, axis=0) / np.arange(1, len(iv) + 1)[:, None]
    pd = np.array([percentage_discrepancy(c[5], c[2]) for c in cum])
    res = Case2Result(cfg.steps, iv, cum, np.array(marks), pd, float(vir.first),
                      float(np.mean(vir.temps)), cfg.n / box.volume)
    nblk = max(1, cfg.block_length // cfg.output_every)
    if len(iv) >= 2 * nblk:
        for c, name in enumerate(("kappa_vir", "sigma_vir", "pi_vir", "kappa_cv", "sigma_cv", "pi_cv")):
            res.block_sd[name] = block_std(iv[:, c], nblk)
    log.info("case2: final %s pd %.4f%%", res.final, res.pd_total)

    if out_dir is not None:
        out = Path(out_dir)
        res.files["series"] = write_csv(
            out / "case2_series.csv", SERIES_COLUMNS,
            [(int(s), c[0], c[1], c[3], c[4], p) for s, c, p in zip(marks, cum, pd)])
        res.files["intervals"] = write_csv(out / "case2_intervals.csv", INTERVAL_COLUMNS,
                                           [(int(s), *r) for s, r in zip(marks, iv)])
        report = {"steps": cfg.steps, "initial_sigma_vir": res.initial_sigma_vir,
                  "temperature": res.temperature, "pd_total": res.pd_total,
                  "pd_kinetic": res.pd("kappa"), "pd_configurational": res.pd("sigma")}
        report.update(res.final)
        report.update({f"block_sd_{k}": v for k, v in res.block_sd.items()})
        res.files["report"] = write_report(out / "case2_report.txt", report)
    return res
