import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fullduplex import channel_model as cm
from fullduplex.channel_model import ChannelSet, ScenarioConfig, make_rng


def test_path_loss_reference_points():
    assert cm.path_loss_los(1.0) == pytest.approx(103.8)
    assert cm.path_loss_los(0.1) == pytest.approx(103.8 - 20.9)
    assert cm.path_loss_nlos(1.0) == pytest.approx(145.4)
    assert cm.path_loss_nlos(0.01) == pytest.approx(145.4 - 2 * 37.5)


def test_path_loss_rejects_nonpositive_distance():
    with pytest.raises(ValueError):
        cm.path_loss_los(0.0)


def test_noise_power_lte_10mhz():
    dbm, watt = cm.noise_power(10e6, 9.0)
    assert dbm == pytest.approx(-174 + 70 + 9)
    assert watt == pytest.approx(10 ** ((dbm - 30) / 10))


def test_unit_conversions_roundtrip():
    x = np.array([-30.0, 0.0, 26.0])
    assert np.allclose(cm.watt_to_dbm(cm.dbm_to_watt(x)), x)
    assert np.allclose(cm.lin_to_db(cm.db_to_lin(x)), x)
    assert cm.dbm_to_watt(30.0) == pytest.approx(1.0)


def test_make_rng_streams_are_independent_and_replayable():
    a = make_rng(5, 1, 2).standard_normal(4)
    b = make_rng(5, 1, 2).standard_normal(4)
    c = make_rng(5, 2, 1).standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.allclose(a, c)


def test_config_validation():
    with pytest.raises(ValueError):
        ScenarioConfig(n_tx=0)
    with pytest.raises(ValueError):
        ScenarioConfig(k_dl=0, k_ul=0)
    with pytest.raises(ValueError):
        ScenarioConfig(channel_mode="free-space")
    with pytest.raises(ValueError):
        ScenarioConfig(p_bs=0.0)


def test_config_json_units(tmp_path):
    doc = {"p_bs_dbm": 26.0, "q_bar_dbm": 23.0, "sigma_si2_db": -100.0,
           "dl_positions": [[0.05, 0.0], [0.0, 0.05]], "k_dl": 2, "description": "x"}
    path = tmp_path / "s.json"
    path.write_text(json.dumps(doc))
    cfg = ScenarioConfig.from_json(path)
    assert cfg.p_bs == pytest.approx(10 ** -0.4)
    assert cfg.sigma_si2 == pytest.approx(1e-10)
    assert cfg.dl_positions == ((0.05, 0.0), (0.0, 0.05))
    again = ScenarioConfig.from_dict(cfg.to_dict())
    assert again == cfg and again.config_hash() == cfg.config_hash()


def test_config_rejects_unknown_and_duplicate_fields():
    with pytest.raises(ValueError):
        ScenarioConfig.from_dict({"n_txx": 3})
    with pytest.raises(ValueError):
        ScenarioConfig.from_dict({"p_bs": 1.0, "p_bs_dbm": 30.0})


def test_config_hash_tracks_content():
    a = ScenarioConfig()
    assert a.config_hash() == ScenarioConfig().config_hash()
    assert a.config_hash() != a.replace(seed=1).config_hash()


def test_topology_drops_inside_cell():
    cfg = ScenarioConfig(k_dl=50, k_ul=40)
    topo = cm.draw_topology(cfg, make_rng(0, 1))
    assert topo.dl_positions.shape == (50, 2) and topo.ul_positions.shape == (40, 2)
    assert np.all(topo.d_dl <= cfg.cell_radius_km + 1e-12)
    assert topo.d_cci.shape == (40, 50)


def test_realistic_draw_shapes_and_large_scale():
    cfg = ScenarioConfig(n_tx=4, n_rx=2, k_dl=3, k_ul=2)
    topo = cm.draw_topology(cfg, make_rng(1, 1))
    ch = cm.draw_channels(cfg, topo, make_rng(1, 2))
    assert ch.h_dl.shape == (3, 4) and ch.h_ul.shape == (2, 2)
    assert ch.g_cci.shape == (2, 3) and ch.h_si.shape == (2, 4)
    assert np.allclose(ch.kappa_dl, cm.db_to_lin(-cm.path_loss_los(topo.d_dl)))
    assert ch.sigma_n2_dl == pytest.approx(cm.noise_power(10e6, 9.0)[1])
    assert ch.sigma_n2_bs == pytest.approx(cm.noise_power(10e6, 5.0)[1])


def test_large_scale_statistics():
    # E|h|^2 = kappa per antenna
    cfg = ScenarioConfig(n_tx=2, n_rx=1, k_dl=1, k_ul=1, dl_positions=((0.05, 0.0),),
                         ul_positions=((0.0, 0.08),))
    draws = [cm.generate(cfg, make_rng(3, k)) for k in range(3000)]
    p = np.mean([np.mean(np.abs(c.h_dl) ** 2) for c in draws])
    assert p == pytest.approx(draws[0].kappa_dl[0], rel=0.05)


def test_si_channel_rician_moments():
    cfg = ScenarioConfig(n_tx=2, n_rx=2, sigma_si2=4.0, rician_k=1.0, channel_mode="iid")
    h = np.array([cm.draw_iid_channels(cfg, make_rng(9, k)).h_si for k in range(4000)])
    # mean sqrt(s K/(1+K)) * ones, total power s per entry
    assert np.allclose(h.mean(axis=0), np.sqrt(2.0), atol=0.06)
    assert np.mean(np.abs(h) ** 2) == pytest.approx(4.0, rel=0.04)


def test_zero_si_gives_zero_matrix():
    cfg = ScenarioConfig(sigma_si2=0.0, channel_mode="iid")
    assert np.all(cm.draw_iid_channels(cfg, make_rng(0)).h_si == 0)


def test_common_random_numbers_across_si_levels():
    a = ScenarioConfig(sigma_si2=1e-10)
    ch1 = cm.generate(a, make_rng(4, 0))
    ch2 = cm.generate(a.replace(sigma_si2=1e-6), make_rng(4, 0))
    assert np.array_equal(ch1.h_dl, ch2.h_dl)
    assert np.allclose(ch1.h_si * 100, ch2.h_si)


def test_channelset_validation_and_freeze():
    with pytest.raises(ValueError):
        ChannelSet(np.ones((1, 2)), np.ones((1, 1)), np.ones((1, 1)), np.ones((1, 2)), 0.0, 1.0)
    with pytest.raises(ValueError):
        ChannelSet(np.full((1, 2), np.nan), np.ones((1, 1)), np.ones((1, 1)),
                   np.ones((1, 2)), 1.0, 1.0)
    ch = ChannelSet(np.ones((1, 2)), np.ones((1, 1)), np.ones((1, 1)), np.ones((1, 2)), 1.0, 1.0)
    with pytest.raises(ValueError):
        ch.h_dl[0, 0] = 2.0


def test_channelset_without_uplink_users():
    ch = ChannelSet(np.ones((2, 3)), np.zeros((0, 2)), np.zeros((0, 2)), np.zeros((2, 3)), 1., 1.)
    assert ch.k_ul == 0 and ch.k_dl == 2 and ch.n_rx == 2


@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3), st.integers(0, 2 ** 16))
def test_normalization_preserves_sinrs(p, q, seed):
    from fullduplex import rate_model as rm
    rng = make_rng(seed)
    cfg = ScenarioConfig(n_tx=3, n_rx=2, k_dl=2, k_ul=2, channel_mode="iid", sigma_si2=0.2)
    ch = cm.draw_iid_channels(cfg, rng).replace(sigma_n2_dl=0.3, sigma_n2_bs=2.0)
    a = rng.standard_normal((2, 3, 3)) + 1j * rng.standard_normal((2, 3, 3))
    d_n = rm.Design(a @ a.conj().transpose(0, 2, 1) / 20, rng.uniform(0, 1, 2))
    d = d_n.scaled(p, q)
    r1 = rm.rates(ch, d)
    r2 = rm.rates(ch.normalized(p, q), d_n)
    assert np.allclose(r1.sinr_dl, r2.sinr_dl, rtol=1e-9)
    assert np.allclose(r1.sinr_ul, r2.sinr_ul, rtol=1e-9)
