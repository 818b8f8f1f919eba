import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from jfcs.config import TopologyConfig, stream
from jfcs.topology import (LargeScaleState, array_response, draw_channel, draw_large_scale,
                           large_scale, los_probability, nearest_ru, noise_power, path_loss,
                           place_rus, rician_factor, select_paths)


def test_path_loss_reference_points():
    assert path_loss(1000.0) == pytest.approx(-140.7, abs=1e-12)
    # at 10 m only the 50 m slope is still active
    assert path_loss(10.0) == pytest.approx(-140.7 + 70.0 + 15.0 * np.log10(0.2), abs=1e-12)
    assert path_loss(10.0) == pytest.approx(-81.18, abs=5e-3)
    assert path_loss(1000.0, shadow=3.0) == pytest.approx(-137.7)


@pytest.mark.parametrize("d", [10.0, 50.0])
def test_path_loss_continuous_at_breakpoints(d):
    eps = 1e-9 * d
    assert path_loss(d - eps) == pytest.approx(path_loss(d + eps), abs=1e-6)


def test_path_loss_rejects_nonpositive():
    with pytest.raises(ValueError):
        path_loss(0.0)
    with pytest.raises(ValueError):
        path_loss(np.array([5.0, -1.0]))


def test_los_probability_values():
    assert los_probability(18.0) == pytest.approx(1.0)
    assert los_probability(5.0) == pytest.approx(1.0)
    assert los_probability(36.0) == pytest.approx(0.5 * (1 - np.exp(-1)) + np.exp(-1), abs=1e-12)
    assert los_probability(36.0) == pytest.approx(0.68394, abs=1e-5)
    assert los_probability(1e6) < 1e-4


@given(st.floats(18.0, 5000.0), st.floats(0.0, 1000.0))
def test_los_probability_nonincreasing_beyond_18m(d, delta):
    assert los_probability(d + delta) <= los_probability(d) + 1e-15


def test_rician_factor_cases():
    assert rician_factor(0.5) == pytest.approx(1.0)
    assert rician_factor(0.0) == 0.0
    assert rician_factor(1.0) == 1e3
    assert rician_factor(1.0, kappa_max=50.0) == 50.0
    with pytest.raises(ValueError):
        rician_factor(1.5)


def test_array_response():
    assert np.allclose(array_response(0.0, 5), np.ones(5))
    assert np.allclose(array_response(0.7, 1), [1.0])
    assert np.allclose(array_response(np.pi / 2, 2), [1.0, -1.0])
    v = array_response(0.3, 16)
    assert np.allclose(np.abs(v), 1.0)
    assert v[0] == 1.0
    with pytest.raises(ValueError):
        array_response(0.1, 0)


def test_noise_power():
    assert noise_power(1.0, 0.0) == pytest.approx(-170.0)
    assert noise_power(20e6, 9.0) == pytest.approx(-87.9897, abs=1e-4)
    assert noise_power(40e6, 9.0) - noise_power(20e6, 9.0) == pytest.approx(10 * np.log10(2))


def _state(kappa, xi=2e-10, m=4, k=1):
    kap = np.full((1, k), kappa, float)
    los = [np.exp(1j * np.pi * np.arange(m)[None, :] * np.sin(0.4)) * np.ones((k, 1))]
    return LargeScaleState(np.ones((1, k)), np.full((1, k), xi), kap, np.full((1, k), 0.4), los,
                           np.zeros((1, 2)), np.zeros((k, 2)))


def test_channel_los_limit_is_deterministic(rng):
    ls = _state(np.inf)
    h1 = draw_channel(ls, rng)[0]
    h2 = draw_channel(ls, rng)[0]
    assert np.array_equal(h1, h2)
    assert np.allclose(h1, np.sqrt(2e-10) * ls.los[0])


def test_channel_rayleigh_power_matches_gain(rng):
    # 1000 UEs sharing one gain stand in for 1000 independent draws
    big = _state(0.0, xi=3e-11, m=4, k=1000)
    p = np.concatenate([np.mean(np.abs(draw_channel(big, rng)[0]) ** 2, axis=1)
                        for _ in range(100)])
    assert p.mean() == pytest.approx(3e-11, rel=0.02)


def test_channel_rayleigh_variance_chi2(rng):
    # per-element |h|^2 / (xi/2) summed over re/im is chi-square with 2 dof
    xi = 5e-12
    big = _state(0.0, xi=xi, m=1, k=20_000)
    h = draw_channel(big, rng)[0][:, 0]
    s = 2.0 * np.abs(h) ** 2 / xi
    var_stat = np.sum(s)
    dof = 2 * h.size
    lo, hi = stats.chi2.ppf([0.005, 0.995], dof)
    assert lo <= var_stat <= hi


def test_channel_reproducible_bitwise():
    cfg = TopologyConfig(num_dus=1, rus_per_du=(3,), num_ues=4, antennas=6)
    ru = place_rus(cfg, stream(7, "ru-placement"))

    def draw():
        ls = draw_large_scale(cfg, ru, stream(7, "ue-placement"), stream(7, "shadowing"))
        return draw_channel(ls, stream(7, "fading"))
    a, b = draw(), draw()
    for x, y in zip(a, b):
        assert np.array_equal(x, y)


def test_large_scale_shapes_and_selection():
    cfg = TopologyConfig(num_dus=2, rus_per_du=(2, 3), num_ues=6, antennas=(4, 4, 8, 8, 8))
    ru = place_rus(cfg, stream(1, "ru"))
    assert np.all(np.hypot(ru[:, 0], ru[:, 1]) <= cfg.cell_radius)
    ls = draw_large_scale(cfg, ru, stream(1, "a"), stream(1, "b"))
    assert ls.xi.shape == (5, 6) and np.all(ls.xi > 0)
    assert np.all(np.isfinite(ls.kappa))
    assert [l.shape for l in ls.los] == [(6, 4), (6, 4), (6, 8), (6, 8), (6, 8)]
    for l in ls.los:
        assert np.allclose(np.abs(l), 1.0)
    assert np.all((ls.aod >= -np.pi / 2) & (ls.aod < np.pi / 2))
    mask = select_paths(ls, 3)
    assert mask.shape == (6, 5) and np.all(mask.sum(axis=1) == 3)
    for k in range(6):
        chosen = ls.xi[mask[k], k]
        assert chosen.min() >= ls.xi[~mask[k], k].max()
    near = nearest_ru(ls)
    assert np.array_equal(near, np.argmin(ls.distance, axis=0))


def test_large_scale_los_vector_matches_array_response():
    cfg = TopologyConfig(num_dus=1, rus_per_du=(1,), num_ues=1, antennas=5)
    ls = large_scale(cfg, np.array([[0.0, 0.0]]), np.array([[100.0, 40.0]]), np.zeros((1, 1)))
    assert np.allclose(ls.los[0][0], array_response(ls.aod[0, 0], 5))
    assert ls.distance[0, 0] == pytest.approx(np.sqrt(100 ** 2 + 40 ** 2 + (cfg.ru_height - cfg.ue_height) ** 2))
