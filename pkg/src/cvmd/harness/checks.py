"""Fast invariant suite shared by ``cvmd check`` and the test suite."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .._backend import get_kernels
from ..cv_budget import BudgetTracker
from ..core import BoxSpec, RunConfig, wrap_position
from ..dynamics import Integrator, init_fcc
from ..forces import build_cells
from ..lcv import CVGrid, ControlVolume, face_incidence_pair, segment_inside_fraction
from ..pressure import face_traction_sums, global_mop_plane, va_config_sums, virial_tensor


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    tol: float
    detail: str = ""

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag} {self.name}: {self.value:.3e} (tol {self.tol:.1e}) {self.detail}".rstrip()


def _fluid_state(seed=0, steps=200, n=500, rho=0.8):
    """Short NVE run from an FCC start so that pairs interact."""
    cfg = RunConfig(n=n, density=rho)
    box = BoxSpec.cubic(cfg.box_side)
    state = init_fcc(rho, 4 * round((n / 4) ** (1 / 3)) ** 3, box, 1.0, seed)
    Integrator(state, 0.005).run(steps)
    return state


def _random_segments(rng, m):
    lo = rng.uniform(-1.0, 1.0, (m, 3))
    w = rng.uniform(0.2, 2.0, (m, 3))
    a = lo + rng.uniform(-0.5, 1.5, (m, 3)) * w
    b = a + rng.normal(0.0, 1.0, (m, 3)) * rng.uniform(0.05, 2.0, (m, 1))
    return lo, w, a, b


def check_theta_identity(n_cases: int = 100_000, seed: int = 0) -> CheckResult:
    """``theta_i - theta_j = -sum`` of outward-signed face incidences on random segments and CVs."""
    rng = np.random.default_rng(seed)
    lo, w, a, b = _random_segments(rng, n_cases)
    # some coordinates are snapped onto faces to exercise ties
    snap = rng.random((n_cases, 3)) < 0.08
    side = rng.integers(0, 2, (n_cases, 3))
    a = np.where(snap, lo + side * w, a)
    fails = 0
    for k in range(n_cases):
        if np.array_equal(a[k], b[k]):
            continue
        cv = ControlVolume.from_bounds(lo[k], lo[k] + w[k])
        inc = face_incidence_pair(a[k], b[k], cv)
        if inc.theta_ij != -int(inc.signed.sum()):
            fails += 1
    return CheckResult("theta_ij = -sum face incidences", fails == 0, float(fails), 0.0,
                       f"{n_cases} cases")


def _quad_fraction(a, b, lo, hi, m):
    s = (np.arange(m) + 0.5) / m
    out = 0
    for c in np.array_split(s, max(1, m // 500_000)):
        p = a[None, :] + c[:, None] * (b - a)[None, :]
        out += int(np.count_nonzero(np.all((p >= lo) & (p < hi), axis=1)))
    return out / m


def check_lij_quadrature(n_cases: int = 100, samples: int = 4_000_000, seed: int = 1) -> CheckResult:
    """Segment fraction inside a cuboid against midpoint quadrature (error <= 1/samples)."""
    rng = np.random.default_rng(seed)
    lo, w, a, b = _random_segments(rng, n_cases)
    err = 0.0
    for k in range(n_cases):
        cv = ControlVolume.from_bounds(lo[k], lo[k] + w[k])
        q = _quad_fraction(a[k], b[k], cv.lo, cv.hi, samples)
        err = max(err, abs(segment_inside_fraction(a[k], b[k], cv) - q))
    return CheckResult("l_ij vs quadrature", err <= 1e-6, err, 1e-6, f"{n_cases} cases")


def check_lij_grid(n_cases: int = 2000, seed: int = 2) -> CheckResult:
    """Per-cell segment fractions from the grid walk against per-cell clipping, and sum to one."""
    rng = np.random.default_rng(seed)
    box = BoxSpec((7.0, 6.0, 5.0), (False, False, False))
    grid = CVGrid(box, (7, 4, 5), origin=(0.0, 0.0, 0.0), widths=(1.0, 1.5, 1.0))
    a = rng.uniform(0.01, 1, (n_cases, 3)) * box.lengths
    b = np.clip(a + rng.normal(0, 1.0, (n_cases, 3)), 0.0, box.lengths * (1 - 1e-12))
    walk = grid.pair_traverse(a, b, a - b, want_visits=True)
    err = 0.0
    total = np.bincount(walk.visit_pair, weights=walk.visit_frac, minlength=n_cases)
    err = max(err, float(np.max(np.abs(total - 1.0))))
    for p, c, f in zip(walk.visit_pair[:5000], walk.visit_cell[:5000], walk.visit_frac[:5000]):
        lo, hi = grid.cell_bounds(int(c))
        ex = segment_inside_fraction(a[p], b[p], ControlVolume.from_bounds(lo, hi))
        err = max(err, abs(ex - f))
    return CheckResult("grid l_ij vs clipping", err <= 1e-12, err, 1e-12)


def check_va_virial(state=None) -> CheckResult:
    """Whole-domain VA configurational tensor equals the virial one."""
    state = _fluid_state() if state is None else state
    pairs = build_cells(state.positions, state.box)
    grid = CVGrid.tiling(state.box, (1, 1, 1))
    V = state.box.volume
    va = va_config_sums(grid, state.positions, pairs)[0] / V
    vir = virial_tensor(pairs, V)
    rel = float(np.max(np.abs(va - vir)) / np.max(np.abs(vir)))
    return CheckResult("VA(whole domain) = virial configurational", rel <= 1e-9, rel, 1e-9)


def check_mop_global(state=None) -> CheckResult:
    """MOP traction on whole-domain planes equals the independent global-plane oracle."""
    state = _fluid_state() if state is None else state
    pairs = build_cells(state.positions, state.box)
    L = state.box.lengths
    worst = 0.0
    for axis in range(3):
        shape = [1, 1, 1]
        shape[axis] = 4
        grid = CVGrid.tiling(state.box, tuple(shape))
        S = face_traction_sums(grid, state.positions, pairs)
        area = grid.face_areas[axis]
        for k in range(4):
            idx = [0, 0, 0]
            idx[axis] = k
            c = grid.ravel(*idx)
            coord = k * L[axis] / 4
            ref = global_mop_plane(state.positions, pairs, state.box, axis, coord)
            conf = S[c, 2 * axis] / area  # minus the traction, i.e. configurational pressure
            scale = max(float(np.max(np.abs(ref))), 1e-300)
            worst = max(worst, float(np.max(np.abs(conf - ref))) / scale)
    return CheckResult("MOP(whole plane) = global MOP oracle", worst <= 1e-12, worst, 1e-12)


def check_divergence(state=None) -> CheckResult:
    """Face tractions of each cell sum to its net pair force (discrete divergence theorem)."""
    state = _fluid_state() if state is None else state
    pairs = build_cells(state.positions, state.box)
    grid = CVGrid.tiling(state.box, (3, 4, 5))
    S = face_traction_sums(grid, state.positions, pairs)
    cells = grid.locate(state.positions)
    ci, cj = cells[pairs.i], cells[pairs.j]
    n = grid.ncells
    net = np.zeros((n, 3))
    for a in range(3):
        net[:, a] = (np.bincount(ci, weights=pairs.f_ij[:, a], minlength=n)
                     - np.bincount(cj, weights=pairs.f_ij[:, a], minlength=n))
    # outward flux: minus the upper-face sum plus the lower-face sum
    flux = np.zeros((n, 3))
    for a in range(3):
        flux += -S[:, 2 * a + 1] + S[:, 2 * a]
    err = float(np.max(np.abs(flux - net)) / max(1.0, np.max(np.abs(net))))
    return CheckResult("sum of face forces = net CV pair force", err <= 1e-12, err, 1e-12)


def check_backends(seed: int = 3) -> CheckResult:
    """Compiled and pure-Python kernels give bit-identical output."""
    try:
        ck = get_kernels("compiled")
    except ImportError:
        return CheckResult("compiled = python kernels", True, 0.0, 0.0, "(no compiled backend)")
    pk = get_kernels("python")
    state = _fluid_state(seed=seed, steps=50)
    L = np.ascontiguousarray(state.box.lengths)
    a = ck.wca_pairs(state.positions, L, (1, 1, 1), 2.0 ** (1 / 6))
    b = pk.wca_pairs(state.positions, L, (1, 1, 1), 2.0 ** (1 / 6))
    same = all(np.array_equal(x, y) for x, y in zip(a, b))
    cand = ck.wca_pairs(state.positions, L, (1, 1, 1), 2.0 ** (1 / 6) + 0.3)
    fa = ck.wca_filter(state.positions, L, (1, 1, 1), 2.0 ** (1 / 6), cand[0], cand[1])
    fb = pk.wca_filter(state.positions, L, (1, 1, 1), 2.0 ** (1 / 6), cand[0], cand[1])
    same &= all(np.array_equal(x, y) and np.array_equal(x, z) for x, y, z in zip(fa, fb, a))
    g = CVGrid.tiling(state.box, (4, 4, 4))
    i, j, r = a[0], a[1], a[2]
    args = (np.ascontiguousarray(state.positions[i]), np.ascontiguousarray(state.positions[j]), r)
    wa = ck.pair_traverse(*args, want_visits=True, **g._args)
    wb = pk.pair_traverse(*args, want_visits=True, **g._args)
    same &= all(np.array_equal(x, y) for x, y in zip(wa[0] + wa[1], wb[0] + wb[1]))
    x0 = state.positions
    rng = np.random.default_rng(seed)
    disp = rng.normal(0.0, 0.4, x0.shape)
    x1, shift = wrap_position(x0 + disp, state.box, return_shift=True)
    xa = ck.point_crossings(x0, x1, disp, np.ascontiguousarray(shift, dtype=np.int_), **g._args)
    xb = pk.point_crossings(x0, x1, disp, np.ascontiguousarray(shift, dtype=np.int_), **g._args)
    same &= all(np.array_equal(x, y) for x, y in zip(xa, xb))
    return CheckResult("compiled = python kernels", bool(same), float(not same), 0.0)


def check_short_budget(steps: int = 200) -> CheckResult:
    """Mass exact and momentum to round-off for a 4^3 grid over a short NVE run."""
    state = init_fcc(0.8, 256, None, 1.0, 4)
    it = Integrator(state, 0.005)
    tr = BudgetTracker(CVGrid.tiling(state.box, (4, 4, 4)), 0.005, energy=False)
    it.observers = [tr]
    it.run(steps)
    ratio = float(tr.stats.momentum_ratio().max())
    ok = tr.stats.mass_violations == 0 and ratio <= 1e-10
    return CheckResult("short-run mass/momentum budgets", ok, ratio, 1e-10,
                       f"mass violations {tr.stats.mass_violations}")


ALL_CHECKS = (check_backends, check_theta_identity, check_lij_quadrature, check_lij_grid,
              check_va_virial, check_mop_global, check_divergence, check_short_budget)


def run_check(cfg: RunConfig | None = None, out=print) -> list:
    results = []
    for fn in ALL_CHECKS:
        r = fn()
        results.append(r)
        if out is not None:
            out(r.line())
    return results
