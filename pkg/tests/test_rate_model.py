import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fullduplex import rate_model as rm
from fullduplex.channel_model import ChannelSet, make_rng
from fullduplex.rate_model import Design

from conftest import random_channels, random_design

dims = st.tuples(st.integers(1, 4), st.integers(1, 4), st.integers(1, 3), st.integers(1, 3),
                 st.integers(0, 2 ** 20))


def _instance(params, si=0.3):
    n_tx, n_rx, kd, ku, seed = params
    rng = make_rng(seed)
    ch = random_channels(rng, n_tx, n_rx, kd, ku, si=si)
    return ch, random_design(rng, ch, p=5.0, q=5.0)


def test_single_user_downlink_closed_form():
    h = np.array([[1.0, 1j]])
    ch = ChannelSet(h, np.zeros((0, 1)), np.zeros((0, 1)), np.zeros((1, 2)), 0.5, 1.0)
    w = h / np.linalg.norm(h)
    d = Design.from_beamformers(w * np.sqrt(2.0), [])
    assert rm.downlink_sinr(0, ch, d) == pytest.approx(2.0 * 2.0 / 0.5)
    assert rm.downlink_se(ch, d) == pytest.approx(np.log2(9.0))


def test_single_user_uplink_closed_form():
    h = np.array([[1.0, 2.0]])
    ch = ChannelSet(np.zeros((0, 3)), h, np.zeros((1, 0)), np.zeros((2, 3)), 1.0, 0.25)
    d = Design(np.zeros((0, 3, 3)), [3.0])
    assert rm.uplink_sinr(0, ch, d) == pytest.approx(3.0 * 5.0 / 0.25)
    assert rm.uplink_se_det(ch, d) == pytest.approx(np.log2(1 + 60.0))


def test_cci_enters_downlink_interference():
    ch = ChannelSet([[1.0]], [[1.0]], [[2.0]], [[0.0]], 1.0, 1.0)
    d = Design([[[1.0]]], [0.5])
    assert rm.downlink_sinr(0, ch, d) == pytest.approx(1.0 / (1.0 + 4.0 * 0.5))


def test_si_enters_uplink():
    ch = ChannelSet([[1.0, 0.0]], [[1.0]], [[0.0]], [[1.0, 1.0]], 1.0, 1.0)
    d = Design(np.diag([1.0, 1.0])[None], [1.0])
    assert rm.uplink_sinr(0, ch, d) == pytest.approx(1.0 / 3.0)


def test_zero_design_has_zero_rates():
    rng = make_rng(1)
    ch = random_channels(rng, 3, 2, 2, 2)
    r = rm.rates(ch, Design.zeros(ch))
    assert r.total == 0.0


@given(dims)
def test_downlink_log_forms_agree(params):
    ch, d = _instance(params)
    assert rm.downlink_se_ratio(ch, d) == pytest.approx(rm.downlink_se(ch, d), rel=1e-9, abs=1e-12)


@given(dims)
def test_uplink_sic_equals_log_det(params):
    ch, d = _instance(params)
    assert rm.uplink_se(ch, d) == pytest.approx(rm.uplink_se_det(ch, d), rel=1e-9, abs=1e-12)


def test_uplink_sum_rate_invariant_to_decoding_order():
    rng = make_rng(3)
    ch = random_channels(rng, 3, 3, 1, 3)
    d = random_design(rng, ch, q=4.0)
    ref = rm.uplink_se_det(ch, d)
    for order in itertools.permutations(range(3)):
        assert rm.uplink_se(ch, d, order=order) == pytest.approx(ref, rel=1e-10)
    with pytest.raises(ValueError):
        rm.uplink_sinrs(ch, d, order=[0, 0, 1])


@given(dims)
def test_dc_split_reproduces_sum_rate(params):
    ch, d = _instance(params)
    total = rm.downlink_se(ch, d, base=None) + rm.uplink_se_det(ch, d, base=None)
    assert rm.dc_h(ch, d) - rm.dc_g(ch, d) == pytest.approx(total, rel=1e-9, abs=1e-10)


def _directional(fn, ch, d, dq, du, eps=1e-6):
    up = Design(d.q_dl + eps * dq, d.q_ul + eps * du)
    dn = Design(d.q_dl - eps * dq, d.q_ul - eps * du)
    return (fn(ch, up) - fn(ch, dn)) / (2 * eps)


@pytest.mark.parametrize("fn,grad", [(rm.dc_g, rm.grad_g), (rm.dc_h, rm.grad_h)])
@pytest.mark.parametrize("seed", range(5))
def test_gradients_match_finite_differences(fn, grad, seed):
    rng = make_rng(seed, 7)
    ch = random_channels(rng, 3, 2, 2, 2, si=0.5)
    d = random_design(rng, ch, p=2.0, q=2.0)
    a = rng.standard_normal((2, 3, 3)) + 1j * rng.standard_normal((2, 3, 3))
    dq = rm.hermitize(a)
    du = rng.standard_normal(2)
    gq, gu = grad(ch, d)
    lin = float(np.einsum("kij,kji->", gq, dq).real + gu @ du)
    assert lin == pytest.approx(_directional(fn, ch, d, dq, du), rel=1e-5, abs=1e-8)


@given(dims, st.integers(0, 2 ** 20))
def test_affine_majorization_bounds_g(params, seed2):
    ch, d = _instance(params)
    d2 = random_design(make_rng(seed2), ch, p=5.0, q=5.0)
    # g concave: the tangent at d2 lies above it
    assert rm.dc_g_affine(ch, d, d2) >= rm.dc_g(ch, d) - 1e-9 * (1 + abs(rm.dc_g(ch, d)))
    assert rm.dc_g_affine(ch, d2, d2) == pytest.approx(rm.dc_g(ch, d2), rel=1e-12)


def test_design_check_reports_violations():
    d = Design(np.diag([2.0, -0.5])[None], [1.5])
    probs = d.check(p_bs=1.0, q_bar=1.0)
    assert len(probs) == 3
    assert Design(np.eye(2)[None] * 0.5, [0.5]).check(1.0, 1.0) == []


def test_design_is_hermitized_and_frozen():
    d = Design(np.array([[[1.0, 1.0], [0.0, 1.0]]]), [0.1])
    assert np.allclose(d.q_dl[0], d.q_dl[0].conj().T)
    with pytest.raises(ValueError):
        d.q_ul[0] = 1.0
