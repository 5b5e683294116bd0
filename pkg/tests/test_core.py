import numpy as np
import pytest

from cvmd.core import (BoxSpec, ConfigError, RunConfig, SimState, Tag, load_config, min_image,
                       parse_config_text, wrap_position)

L = 13.68


def test_min_image_examples():
    box = BoxSpec.cubic(L)
    np.testing.assert_allclose(min_image([13.0, 0, 0], box), [-0.68, 0, 0], atol=1e-12)
    assert np.array_equal(min_image([0.0, 0, 0], box), [0, 0, 0])
    # half-open: +L/2 maps to the lower end
    assert min_image([6.84, 0, 0], box)[0] == -6.84


def test_min_image_skips_open_axes():
    box = BoxSpec.cubic(L, (True, False, True))
    out = min_image([13.0, 13.0, 13.0], box)
    assert out[1] == 13.0
    np.testing.assert_allclose(out[[0, 2]], [-0.68, -0.68], atol=1e-12)


def test_wrap_examples():
    box = BoxSpec.cubic(L)
    np.testing.assert_allclose(wrap_position([14.0, 1, 1], box), [0.32, 1, 1], atol=1e-12)
    assert np.array_equal(wrap_position([3.0, 1, 1], box), [3.0, 1, 1])
    np.testing.assert_allclose(wrap_position([-0.1, 1, 1], box), [13.58, 1, 1], atol=1e-12)


def test_wrap_shift_recovers_input(rng):
    box = BoxSpec((3.0, 4.0, 5.0), (True, True, False))
    r = rng.uniform(-20, 20, (500, 3))
    w, k = wrap_position(r, box, return_shift=True)
    np.testing.assert_allclose(w + k * box.lengths, r, atol=1e-12)
    assert np.all(w[:, :2] >= 0) and np.all(w[:, :2] < box.lengths[:2])
    assert np.array_equal(w[:, 2], r[:, 2])


def test_wrap_never_returns_L():
    box = BoxSpec.cubic(L)
    w = wrap_position([-1e-17, 0, 0], box)
    assert 0.0 <= w[0] < L


def test_box_rejects_bad_lengths():
    with pytest.raises(ValueError):
        BoxSpec((1.0, 0.0, 1.0))
    with pytest.raises(ValueError):
        BoxSpec((1.0, np.nan, 1.0))


def test_state_tether_invariant():
    box = BoxSpec.cubic(5.0)
    pos = np.ones((2, 3))
    with pytest.raises(ValueError):
        SimState(pos, np.zeros((2, 3)), 1.0, [Tag.FLUID, Tag.WALL_TOP], box)
    s = SimState(pos, np.zeros((2, 3)), 1.0, [Tag.FLUID, Tag.WALL_TOP], box,
                 tether_sites=np.array([[np.nan] * 3, [1.0, 1, 1]]))
    assert s.n == 2
    c = s.copy()
    c.positions[0, 0] = 9.0
    assert s.positions[0, 0] == 1.0


def test_config_parse_roundtrip(tmp_path):
    cfg = RunConfig(dt=0.0025, profile_times=(1.0, 2.0), box_length=27.4, cv_index=(1, 2, 3))
    path = tmp_path / "run.cfg"
    path.write_text(cfg.to_text())
    assert load_config(path) == cfg


def test_config_comments_and_overrides(tmp_path):
    path = tmp_path / "a.cfg"
    path.write_text("# header\ndt = 0.001  # small\n\nsteps = 10\n")
    cfg = load_config(path, steps=5)
    assert cfg.dt == 0.001 and cfg.steps == 5


@pytest.mark.parametrize("text", [
    "dt 0.1",            # no '='
    "nonsense = 1",      # unknown key
    "dt = fast",         # bad float
    "dt = 1\ndt = 2",    # duplicate
    "dt = -1",           # invalid value
    "wall_layers = 16",  # no fluid left
    "thermostat_dof = both",
])
def test_config_errors(tmp_path, text):
    path = tmp_path / "bad.cfg"
    path.write_text(text + "\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_parse_optional_values():
    out = parse_config_text("box_length = none\nq_xi = auto\nprofile_times = 1, 4, 16\n")
    assert out == {"box_length": None, "q_xi": None, "profile_times": (1.0, 4.0, 16.0)}


def test_grid_cells_for_nominal_side():
    cfg = RunConfig(n=2048, density=0.8)
    assert cfg.grid_cells_for(1.52) == 9
    with pytest.raises(ConfigError):
        cfg.grid_cells_for(1.6)
