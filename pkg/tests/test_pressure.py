import numpy as np
import pytest

from cvmd.core import BoxSpec, SimState
from cvmd.dynamics import Integrator, init_fcc
from cvmd.forces import build_cells, compute_forces
from cvmd.harness.checks import check_divergence, check_mop_global, check_va_virial
from cvmd.lcv import CVGrid
from cvmd.pressure import (FaceAccumulator, VAAccumulator, block_sem, block_std, cv_scalar,
                           face_traction_sums, global_mop_plane, midpoint_stress_linear,
                           percentage_discrepancy, va_config_sums, va_tensor, virial_instant,
                           virial_scalar, virial_tensor)


def test_ideal_limit_virial_is_rho_T():
    s = init_fcc(0.8, 2048, None, 0.65, 1)
    ff = compute_forces(s)
    kappa, sigma, pi = virial_instant(ff, s.momenta, s.momenta, s.masses, s.box.volume)
    assert sigma == 0.0
    assert kappa == pytest.approx(0.8 * 0.65, rel=1e-12)
    assert pi == kappa


def test_virial_scalar_average():
    assert virial_scalar([[1, -1, 2], [3, -3, 6]]) == (2.0, -2.0, 4.0)
    with pytest.raises(ValueError):
        virial_scalar([])


def test_oracle_checks(fluid_state):
    for check in (check_va_virial, check_mop_global, check_divergence):
        r = check(fluid_state)
        assert r.passed, r.line()


def test_va_whole_domain_kinetic(fluid_state):
    s = fluid_state
    g = CVGrid.tiling(s.box, (1, 1, 1))
    t = va_tensor(g, s, build_cells(s.positions, s.box))
    kappa = float(np.trace(t.kinetic[0])) / 3
    assert kappa == pytest.approx(np.sum(s.momenta**2) / (3 * s.box.volume), rel=1e-10)
    np.testing.assert_allclose(t.configurational[0], virial_tensor(build_cells(s.positions, s.box),
                                                                   s.box.volume), rtol=1e-9)


def test_va_single_straddling_pair():
    box = BoxSpec.cubic(6.0)
    grid = CVGrid.tiling(box, (2, 1, 1))
    pos = np.array([[2.5, 3.0, 3.0], [3.5, 3.0, 3.0]])
    s = SimState(pos, np.zeros((2, 3)), 1.0, [0, 0], box)
    pairs = build_cells(pos, box)
    t = va_tensor(grid, s, pairs)
    fr = np.outer(pairs.f_ij[0], pairs.r_ij[0])
    for c in range(2):
        np.testing.assert_allclose(t.configurational[c], 0.5 * fr / grid.cell_volume)
    np.testing.assert_allclose(va_config_sums(grid, pos, pairs).sum(axis=0), fr)
    assert not t.kinetic.any()


def test_mop_zero_without_pairs_or_motion():
    s = init_fcc(0.8, 256, None, 1.0, 0)
    s.momenta[:] = 0.0
    grid = CVGrid.tiling(s.box, (2, 2, 2))
    acc = FaceAccumulator(grid, 0.005)
    it = Integrator(s, 0.005)
    it.observers = [acc]
    it.run(3)
    f = acc.take()
    assert not f.total.any()
    assert cv_scalar(f, 0) == 0.0
    assert acc.n_force == 0


def test_global_mop_sign_repulsive(fluid_state):
    s = fluid_state
    pairs = build_cells(s.positions, s.box)
    for axis in range(3):
        p = global_mop_plane(s.positions, pairs, s.box, axis, 0.37 * s.box.lengths[axis])
        assert p[axis] > 0  # repulsive pairs push outward


def test_mop_face_time_average_matches_global(fluid_state):
    s = fluid_state.copy()
    grid = CVGrid.tiling(s.box, (1, 1, 1))
    acc = FaceAccumulator(grid, 0.005)
    it = Integrator(s, 0.005)
    ref = []

    class Probe:
        def on_kick(self, state, ff, p_old, impulse_ext):
            ref.append(global_mop_plane(state.positions, ff.pairs, state.box, 1, 0.0))

        def on_drift(self, state, x_old):
            pass

    it.observers = [acc, Probe()]
    it.run(20)
    f = acc.take()
    # configurational pressure on the y- face is minus its traction
    np.testing.assert_allclose(-f.traction[0, 2], np.mean(ref, axis=0), rtol=1e-12)


def test_va_accumulator_empty():
    acc = VAAccumulator(CVGrid.tiling(BoxSpec.cubic(4.0), (1, 1, 1)))
    with pytest.raises(ValueError):
        acc.current()


def test_face_traction_no_straddle():
    box = BoxSpec.cubic(6.0)
    grid = CVGrid.tiling(box, (2, 2, 2))
    pos = np.array([[1.0, 1.0, 1.0], [1.9, 1.0, 1.0]])
    assert not face_traction_sums(grid, pos, build_cells(pos, box)).any()


def test_midpoint():
    assert midpoint_stress_linear(2.0, 2.0) == 2.0
    np.testing.assert_allclose(midpoint_stress_linear([1.0, 3.0], [3.0, 5.0]), [2.0, 4.0])


def test_block_statistics(rng):
    assert block_std(np.full(100, 3.0), 10) == 0.0
    assert block_std(np.tile([1.0, -1.0], 50), 2) == 0.0
    x = rng.normal(0.0, 1.0, 400_000)
    for b in (1, 16, 100):
        assert block_std(x, b) == pytest.approx(1 / np.sqrt(b), rel=0.05)
    assert block_sem(x, 100) == pytest.approx(1 / np.sqrt(x.size), rel=0.05)
    with pytest.raises(ValueError):
        block_std(np.ones(3), 2)


def test_percentage_discrepancy():
    assert percentage_discrepancy(1.0, 1.0) == 0.0
    assert percentage_discrepancy(1.001, 1.0) == pytest.approx(0.1)
    assert percentage_discrepancy(-1.001, -1.0) == pytest.approx(0.1)
    with pytest.raises(ValueError):
        percentage_discrepancy(1.0, 0.0)
