"""Property-based checks of geometric and conservation invariants."""
import numpy as np
from hypothesis import assume, given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cvmd._backend import get_kernels
from cvmd.analytic import CouetteParams, couette_velocity
from cvmd.cv_budget import record_advection, record_forcing
from cvmd.core import BoxSpec, RunConfig, min_image, parse_config_text, wrap_position
from cvmd.forces import build_cells
from cvmd.lcv import (CVGrid, ControlVolume, face_incidence_pair, grid_traverse_segment,
                      segment_inside_fraction, theta)

coord = st.floats(-3.0, 3.0, allow_nan=False, width=64)
vec3 = st.tuples(coord, coord, coord).map(np.array)
width = st.floats(0.1, 3.0)
cvs = st.tuples(vec3, st.tuples(width, width, width).map(np.array)).map(
    lambda t: ControlVolume.from_bounds(t[0], t[0] + t[1]))


@given(vec3, vec3, cvs)
def test_theta_identity(a, b, cv):
    assume(not np.array_equal(a, b))
    inc = face_incidence_pair(a, b, cv)
    assert inc.theta_ij == theta(a, cv) - theta(b, cv)
    assert inc.theta_ij == -int(inc.signed.sum())
    assert set(np.unique(inc.values)) <= {-1, 0, 1}


@given(vec3, vec3, cvs)
def test_theta_identity_on_faces(a, b, cv):
    # endpoints snapped onto faces exercise the half-open tie rules
    a = np.where(np.abs(a) < 1, cv.lo, a)
    b = np.where(np.abs(b) > 2, cv.hi, b)
    assume(not np.array_equal(a, b))
    inc = face_incidence_pair(a, b, cv)
    assert inc.theta_ij == -int(inc.signed.sum())


@given(vec3, vec3, cvs)
def test_segment_fraction_bounds(a, b, cv):
    assume(not np.array_equal(a, b))
    f = segment_inside_fraction(a, b, cv)
    assert 0.0 <= f <= 1.0
    assert abs(f - segment_inside_fraction(b, a, cv)) <= 1e-12
    if theta(a, cv) and theta(b, cv):
        assert f == 1.0


@given(st.tuples(*[st.floats(0.01, 0.999)] * 3), vec3.map(lambda v: v / 3.0))
def test_grid_fractions_sum_to_one(u, d):
    assume(np.any(np.abs(d) > 1e-6))
    box = BoxSpec((6.0, 5.0, 4.0))
    grid = CVGrid.tiling(box, (4, 5, 2))
    a = np.array(u) * box.lengths
    out = grid_traverse_segment(a, a + d, grid)
    assert abs(sum(f for _, f, _ in out) - 1.0) <= 1e-12
    for c, f, _ in out:
        assert 0.0 <= f <= 1.0 + 1e-15  # zero only when starting on a face


@given(arrays(np.float64, (8, 3), elements=st.floats(-50, 50)))
def test_min_image_range(r):
    box = BoxSpec((3.0, 4.0, 5.0))
    m = min_image(r, box)
    assert np.all(m >= -box.lengths / 2) and np.all(m < box.lengths / 2 + 1e-12)
    k = (r - m) / box.lengths
    np.testing.assert_allclose(k, np.round(k), atol=1e-9)


@given(arrays(np.float64, (8, 3), elements=st.floats(-50, 50)))
def test_wrap_range_and_shift(r):
    box = BoxSpec((3.0, 4.0, 5.0))
    w, k = wrap_position(r, box, return_shift=True)
    assert np.all(w >= 0) and np.all(w < box.lengths)
    np.testing.assert_allclose(w + k * box.lengths, r, atol=1e-9)


@given(st.integers(0, 2**31 - 1), st.floats(0.05, 1.5))
def test_crossings_conserve_mass(seed, scale):
    rng = np.random.default_rng(seed)
    box = BoxSpec.cubic(6.0, (True, False, True))
    grid = CVGrid(box, (3, 4, 3))
    x0 = rng.uniform(0, 1, (200, 3)) * box.lengths
    disp = rng.normal(0, scale, x0.shape)
    x1, shift = wrap_position(x0 + disp, box, return_shift=True)
    cr = grid.point_crossings(x0, x1, disp, shift)
    mass, _, _ = record_advection(cr, np.zeros_like(x0), np.ones(len(x0)), grid.ncells)
    n0 = np.bincount(grid.locate(x0)[grid.locate(x0) >= 0], minlength=grid.ncells)
    n1 = np.bincount(grid.locate(x1)[grid.locate(x1) >= 0], minlength=grid.ncells)
    assert np.array_equal(n1 - n0, -mass)


@given(st.integers(0, 2**31 - 1))
def test_forcing_sums_to_zero(seed):
    rng = np.random.default_rng(seed)
    box = BoxSpec.cubic(5.0)
    pos = rng.uniform(0, 5.0, (150, 3))
    pairs = build_cells(pos, box)
    assume(len(pairs) > 0)
    grid = CVGrid.tiling(box, (3, 2, 4))
    fp, _ = record_forcing(pairs, grid.locate(pos), 0.005, grid.ncells)
    np.testing.assert_allclose(fp.sum(axis=0), 0.0, atol=1e-9 * max(1.0, np.abs(fp).max()))


@given(st.integers(0, 2**31 - 1), st.sampled_from([(1, 1, 1), (1, 0, 1), (0, 0, 0)]))
def test_backends_agree(seed, periodic):
    try:
        ck = get_kernels("compiled")
    except ImportError:
        return
    pk = get_kernels("python")
    rng = np.random.default_rng(seed)
    L = np.array([5.0, 4.0, 6.0])
    pos = rng.uniform(0, 1, (120, 3)) * L
    a = ck.wca_pairs(pos, L, periodic, 2 ** (1 / 6))
    b = pk.wca_pairs(pos, L, periodic, 2 ** (1 / 6))
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    box = BoxSpec(L, tuple(bool(p) for p in periodic))
    g = CVGrid(box, (2, 3, 2))
    disp = rng.normal(0, 0.5, pos.shape)
    x1, shift = wrap_position(pos + disp, box, return_shift=True)
    sh = np.ascontiguousarray(shift, dtype=np.int_)
    xa = ck.point_crossings(pos, x1, disp, sh, **g._args)
    xb = pk.point_crossings(pos, x1, disp, sh, **g._args)
    assert all(np.array_equal(x, y) for x, y in zip(xa, xb))
    ri, rj = np.ascontiguousarray(pos[a[0]]), np.ascontiguousarray(pos[a[1]])
    wa = ck.pair_traverse(ri, rj, a[2], want_visits=True, **g._args)
    wb = pk.pair_traverse(ri, rj, a[2], want_visits=True, **g._args)
    assert all(np.array_equal(x, y) for x, y in zip(wa[0] + wa[1], wb[0] + wb[1]))


@given(st.floats(0.0, 1.0), st.floats(1e-3, 200.0))
def test_couette_velocity_bounded(frac, t):
    p = CouetteParams(mu=1.6, rho=0.8, L=20.52)
    u = couette_velocity(frac * p.L, t, p)
    assert -1e-9 <= u <= p.U0 + 1e-9


@given(st.floats(1e-4, 0.1), st.integers(0, 10**6), st.integers(1, 64),
       st.lists(st.floats(0.1, 100.0), min_size=1, max_size=6))
def test_config_text_roundtrip(dt, steps, grid, times):
    cfg = RunConfig(dt=dt, steps=steps, grid=grid, profile_times=tuple(times))
    parsed = parse_config_text(cfg.to_text())
    assert RunConfig(**parsed) == cfg
