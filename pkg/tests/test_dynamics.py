import numpy as np
import pytest

from cvmd.core import BoxSpec, SimState, Tag
from cvmd.dynamics import (Integrator, ThermostatState, fcc_lattice, init_couette, init_fcc,
                           kinetic_temperature, leapfrog_step, maxwell_boltzmann, nh_wall_kick,
                           rescale_fluid)


def test_fcc_init_matches_case1_box():
    s = init_fcc(0.8, 2048, None, 1.0, 3)
    np.testing.assert_allclose(s.box.lengths, 13.68, atol=1e-2)
    assert s.n == 2048
    # 8^3 unit cells, four atoms each, min spacing a/sqrt(2)
    a = s.box.lengths[0] / 8
    d = s.positions[1] - s.positions[0]
    assert np.linalg.norm(d) == pytest.approx(a / np.sqrt(2))
    assert np.all(np.abs(s.momenta.sum(axis=0)) <= 1e-12)
    assert kinetic_temperature(s.momenta, s.masses) == pytest.approx(1.0, rel=0.02)


def test_fcc_init_errors():
    with pytest.raises(ValueError):
        init_fcc(0.8, 2000, None, 1.0, 0)
    with pytest.raises(ValueError):
        init_fcc(0.8, 2048, 20.0, 1.0, 0)


def test_maxwell_boltzmann_exact(rng):
    p = maxwell_boltzmann(500, 0.65, 2.0, rng)
    np.testing.assert_allclose(p.sum(axis=0), 0.0, atol=1e-12)
    assert kinetic_temperature(p, 2.0) == pytest.approx(0.65, rel=1e-12)


def test_free_flight():
    box = BoxSpec.cubic(10.0)
    s = SimState(np.array([[1.0, 2, 3]]), np.array([[0.5, -0.25, 1.0]]), 2.0, [0], box)
    leapfrog_step(s, np.zeros((1, 3)), 0.1)
    np.testing.assert_allclose(s.positions[0], [1.025, 1.9875, 3.05])
    assert s.step == 1 and s.time == pytest.approx(0.1)


def test_constant_force_quadratic():
    box = BoxSpec.cubic(1e3, (False, False, False))
    dt, F = 0.01, np.array([[0.3, 0.0, -0.2]])
    # p stored at -dt/2 for a particle at rest at t=0
    s = SimState(np.array([[500.0, 500, 500]]), -0.5 * dt * F, 1.0, [0], box)
    for _ in range(100):
        leapfrog_step(s, F, dt)
    t = 100 * dt
    np.testing.assert_allclose(s.positions[0], 500.0 + 0.5 * F[0] * t * t, rtol=1e-12, atol=1e-9)


def _pair_collision_error(dt, offset, steps):
    box = BoxSpec.cubic(10.0)
    s = SimState(np.array([[3.0, 5, 5], [6.0, 5 + offset, 5]]),
                 np.array([[0.6, 0, 0], [-0.6, 0, 0]]), 1.0, [0, 0], box)
    it = Integrator(s, dt)
    energies = []

    class Probe:
        def on_kick(self, state, ff, p_old, impulse_ext):
            ke = 0.25 * float(np.sum(p_old**2 + state.momenta**2))
            energies.append((ke + ff.potential_energy, len(ff.pairs)))

        def on_drift(self, state, x_old):
            pass

    it.observers = [Probe()]
    it.run(steps)
    e = np.array([v for v, _ in energies])
    apart = np.array([n == 0 for _, n in energies])
    assert apart[0] and (~apart).sum() > 0
    return float(np.max(np.abs(e[apart] - e[0]))), float(e.max() - e.min())


@pytest.mark.parametrize("offset", [0.0, 0.2, 0.5])
def test_isolated_pair_energy(offset):
    # the force kink at r_c leaves an O(dt^2) energy offset after each collision
    err, spread = _pair_collision_error(0.005, offset, 10_000)
    assert err < 1e-3 * 0.36
    assert spread < 5e-3
    err_half, _ = _pair_collision_error(0.0025, offset, 20_000)
    assert err_half < 0.5 * err


def test_nh_fixed_point():
    s, _ = init_couette(13.7, 8, 2, 1.0, 0)
    wall = s.tags == Tag.WALL_BOTTOM
    th = ThermostatState(1.0)
    # wall exactly at T0 in the extensive convention
    p = s.momenta[wall]
    target = th.target(int(wall.sum()))
    s.momenta[wall] = p * np.sqrt(target / np.sum(p**2))
    nh_wall_kick(s, np.zeros_like(s.momenta), th, Tag.WALL_BOTTOM, 0.0, 0.005)
    assert th.xi[Tag.WALL_BOTTOM] == pytest.approx(0.0, abs=1e-12)


def test_nh_hot_wall_increases_xi():
    s, _ = init_couette(13.7, 8, 2, 1.0, 0)
    s.momenta *= 1.5
    th = ThermostatState(1.0)
    nh_wall_kick(s, np.zeros_like(s.momenta), th, Tag.WALL_TOP, 0.0, 0.005)
    assert th.xi[Tag.WALL_TOP] > 0
    assert s.xi_top == th.xi[Tag.WALL_TOP]


def test_couette_geometry():
    s, g = init_couette(27.40, 16, 4, 1.0, 0)
    assert s.n == 16384
    assert int(np.sum(s.tags == Tag.FLUID)) == 12288
    assert g.height == pytest.approx(20.55)
    walls = s.tags != Tag.FLUID
    assert np.array_equal(s.tether_sites[walls], s.positions[walls])
    fy = s.positions[s.tags == Tag.FLUID, 1]
    assert fy.min() > g.fluid_lo and fy.max() < g.fluid_hi
    assert not s.box.periodic[1]


def test_moving_wall_tethers_translate():
    s, _ = init_couette(13.7, 8, 2, 1.0, 0)
    top = s.tags == Tag.WALL_TOP
    x0 = s.tether_sites[top, 0].copy()
    it = Integrator(s, 0.005, thermostat=ThermostatState(1.0), wall_speed=1.0)
    it.run(10)
    d = (s.tether_sites[top, 0] - x0) % s.box.lengths[0]
    np.testing.assert_allclose(d, 0.05, atol=1e-12)


def test_integrator_impulse_ext_zero_for_fluid():
    s, _ = init_couette(13.7, 8, 2, 1.0, 0)
    seen = []

    class Probe:
        def on_kick(self, state, ff, p_old, impulse_ext):
            seen.append(impulse_ext)

        def on_drift(self, state, x_old):
            pass

    it = Integrator(s, 0.005, thermostat=ThermostatState(1.0))
    it.observers = [Probe()]
    it.run(3)
    fluid = s.tags == Tag.FLUID
    assert all(not x[fluid].any() for x in seen)
    # walls start exactly at T0, so friction only appears after the first kick
    assert all(x[~fluid].any() for x in seen[1:])


def test_periodic_impulse_ext_none():
    s = init_fcc(0.8, 256, None, 1.0, 1)
    seen = []

    class Probe:
        def on_kick(self, state, ff, p_old, impulse_ext):
            seen.append(impulse_ext)

        def on_drift(self, state, x_old):
            pass

    it = Integrator(s, 0.005)
    it.observers = [Probe()]
    it.run(2)
    assert seen == [None, None]


def test_rescale_fluid():
    s, _ = init_couette(13.7, 8, 2, 1.0, 0)
    s.momenta += 0.3
    rescale_fluid(s, 1.0)
    f = s.tags == Tag.FLUID
    np.testing.assert_allclose(s.momenta[f].sum(axis=0), 0.0, atol=1e-10)
    assert kinetic_temperature(s.momenta[f], 1.0) == pytest.approx(1.0, rel=1e-12)


def test_fcc_lattice_shape():
    pos = fcc_lattice((2, 3, 4), 1.0)
    assert pos.shape == (96, 3)
    assert len(np.unique(np.round(pos, 9), axis=0)) == 96


@pytest.mark.slow
def test_wall_thermostat_reaches_target():
    s, _ = init_couette(13.7, 8, 2, 1.0, 11)
    th = ThermostatState(1.0)
    it = Integrator(s, 0.005, thermostat=th)
    temps = {Tag.WALL_BOTTOM: [], Tag.WALL_TOP: []}

    def sample(integ):
        if integ.state.step > 2000 and integ.state.step % 20 == 0:
            for t in temps:
                m = integ.state.tags == t
                temps[t].append(kinetic_temperature(integ.state.momenta[m], 1.0))

    it.run(10_000, callback=sample)  # 50 time units
    for t in temps:
        assert np.mean(temps[t]) == pytest.approx(1.0, rel=0.03)
