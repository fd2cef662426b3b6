import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from walshdm.plant import ActuatorGrid, PlantConfig, build_plant, drift_profile, observe
from walshdm.walsh import build_basis, project


def make(rows=4, cols=4, n=32, **kw):
    kw.setdefault("noise_sigma_nm", 0.0)
    return build_plant(PlantConfig(ActuatorGrid.regular(rows, cols, n), n, **kw))


def test_full_geometry_has_140_actuators():
    g = ActuatorGrid.regular(12, 12, 256, inactive_corners=True)
    assert g.count == 140
    g.validate(256)


def test_grid_spans_edges():
    g = ActuatorGrid.regular(6, 6, 64)
    assert g.positions.min() == 0 and g.positions.max() == 63
    assert g.pitch_px == pytest.approx(63 / 5)


def test_single_centered_actuator_peak():
    p = make(1, 1, 32, stroke_nm=3500.0)
    w = p.observe(np.ones(1))
    assert w[16, 16] == pytest.approx(3500.0, rel=1e-15)
    assert w.max() == w[16, 16]


def test_polarity_flips_sign():
    up, down = make(1, 1, 16), make(1, 1, 16, polarity=-1)
    np.testing.assert_array_equal(up.observe(np.ones(1)), -down.observe(np.ones(1)))


def test_zero_control_noise_only():
    p = make(noise_sigma_nm=2.0, n=128, seed=4)
    w = p.observe(np.zeros(16))
    assert w.size >= 10_000
    assert 1.9 <= np.sqrt(np.mean(w**2)) <= 2.1


def test_zero_control_no_noise_is_flat():
    np.testing.assert_array_equal(make().observe(np.zeros(16)), 0.0)


def test_beta_scaling():
    p = make(1, 1, 16, beta_true=2.0)
    np.testing.assert_allclose(p.observe(np.array([0.5])), 0.25 * p.observe(np.array([1.0])), rtol=1e-15)


def test_superposition_distant_actuators():
    grid = ActuatorGrid(1, 2, np.ones((1, 2), bool), np.array([[5.0, 5.0], [26.0, 26.0]]), 21.0)
    cfg = PlantConfig(grid, 32, kernel_sigma_px=1.5, noise_sigma_nm=0.0)
    p = build_plant(cfg)
    both = p.observe(np.array([0.7, 0.4]))
    one = p.observe(np.array([0.7, 0.0])) + p.observe(np.array([0.0, 0.4]))
    np.testing.assert_allclose(both, one, rtol=0, atol=1e-9 * np.abs(both).max())


def test_repeatable_without_noise():
    p = make()
    u = np.linspace(0, 1, 16)
    np.testing.assert_array_equal(p.observe(u), p.observe(u))
    assert p.step == 2


def test_reproducible_with_seed():
    a, b = make(noise_sigma_nm=2.0, seed=9), make(noise_sigma_nm=2.0, seed=9)
    for u in np.random.default_rng(0).uniform(size=(3, 16)):
        np.testing.assert_array_equal(a.observe(u), b.observe(u))


@pytest.mark.parametrize("u", [np.full(16, 1.01), np.full(16, -0.01), np.full(16, np.nan), np.ones(15)])
def test_rejects_infeasible(u):
    with pytest.raises(ValueError):
        make().observe(u)


def test_rejects_bad_positions():
    bad = ActuatorGrid(1, 2, np.ones((1, 2), bool), np.array([[3.0, 3.0], [3.2, 3.1]]), 1.0)
    with pytest.raises(ValueError):
        build_plant(PlantConfig(bad, 16))
    out = ActuatorGrid(1, 1, np.ones((1, 1), bool), np.array([[16.0, 3.0]]), 1.0)
    with pytest.raises(ValueError):
        build_plant(PlantConfig(out, 16))


def test_config_validation():
    g = ActuatorGrid.regular(2, 2, 8)
    for kw in [dict(beta_true=0), dict(kernel_sigma_px=-1), dict(noise_sigma_nm=-1), dict(polarity=0)]:
        with pytest.raises(ValueError):
            PlantConfig(g, 8, **kw)


def test_coefficient_influence_matches_observation():
    p = make()
    b = build_basis(5, 8)
    Q = p.coefficient_influence(b)
    g = np.random.default_rng(1).uniform(size=16)
    np.testing.assert_allclose(Q @ g, project(b, p.response(g)), atol=1e-9)
    np.testing.assert_allclose(p.influence() @ g, p.response(g).ravel(order="F"), atol=1e-9)


def test_drift_scales_amplitudes():
    p = make(drift_rate=0.01)
    prof = drift_profile(p.config.grid.positions, 32)
    assert np.all(np.abs(prof) <= 1)
    u = np.ones(16)
    w0 = p.observe(u)
    p.step = 10
    np.testing.assert_allclose(p.amplitudes(), 1 + 0.1 * prof)
    w10 = p.observe(u)
    assert not np.allclose(w0, w10)


def test_offset_added():
    cfg = PlantConfig(ActuatorGrid.regular(2, 2, 8), 8, noise_sigma_nm=0.0)
    off = np.full((8, 8), 3.0)
    p = build_plant(cfg, offset=off)
    np.testing.assert_array_equal(observe(p, np.zeros(4)), off)


@settings(max_examples=30, deadline=None)
@given(g1=st.lists(st.floats(0, 0.5), min_size=9, max_size=9), g2=st.lists(st.floats(0, 0.5), min_size=9, max_size=9))
def test_linear_in_g(g1, g2):
    p = make(3, 3, 16)
    g1, g2 = np.array(g1), np.array(g2)
    lhs = p.response(g1 + g2)
    rhs = p.response(g1) + p.response(g2)
    assert np.max(np.abs(lhs - rhs)) <= 1e-9 * max(1.0, np.abs(lhs).max())


@settings(max_examples=30, deadline=None)
@given(i=st.integers(0, 8), lo=st.floats(0, 0.9), dv=st.floats(0.01, 0.1))
def test_monotone_actuation(i, lo, dv):
    p = make(3, 3, 16)
    u = np.full(9, 0.3)
    x, y = p.config.grid.positions[i].astype(int)
    u[i] = lo
    before = p.observe(u)[y, x]
    u[i] = min(lo + dv, 1.0)
    assert p.observe(u)[y, x] > before
