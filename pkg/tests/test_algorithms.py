import numpy as np
import pytest

from fullduplex import algorithms as alg
from fullduplex import rate_model as rm
from fullduplex.channel_model import ChannelSet, generate, make_rng
from fullduplex.rate_model import Design

from conftest import small_config


def _instance(seed, **kw):
    cfg = small_config(seed=seed, **kw)
    return cfg, generate(cfg, make_rng(seed, 2))


# stopping rule -----------------------------------------------------------

def test_stopping_rule_window():
    flat = [1.0] * 10
    assert alg.stopping_rule(flat, epsilon=1e-5, window=10)
    assert not alg.stopping_rule(flat[:9], epsilon=1e-5, window=10)
    rising = list(np.linspace(0.0, 1.0, 12))
    assert not alg.stopping_rule(rising, epsilon=1e-5, window=10)
    # growth of 9e-6 over the window stops, 2e-5 does not
    assert alg.stopping_rule([0.0] * 5 + list(np.linspace(0, 9e-6, 10)), 1e-5, 10)
    assert not alg.stopping_rule([0.0] * 5 + list(np.linspace(0, 2e-5, 10)), 1e-5, 10)


def test_stopping_rule_iteration_cap():
    assert alg.stopping_rule(np.arange(6.0), epsilon=1e-5, window=10, max_iter=5)
    assert not alg.stopping_rule(np.arange(5.0), epsilon=1e-5, window=10, max_iter=5)


# rank-1 tools ------------------------------------------------------------

def test_check_rank1():
    h = np.array([1.0, 1j, 0.5])
    ok, ratio = alg.check_rank1(np.outer(h, h.conj()))
    assert ok and ratio < 1e-12
    ok, ratio = alg.check_rank1(np.diag([2.0, 1.0]))
    assert not ok and ratio == pytest.approx(0.5)


def test_randomization_is_exact_on_rank1_input(rng):
    cfg, ch = _instance(3)
    w = (rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))) * 0.3
    d = Design.from_beamformers(w, [0.2, 0.4])
    ext = alg.randomize_rank1(d, ch, 50, rng)
    # unit-modulus phases only rotate a rank-1 factor, so every sample is the same design;
    # the square roots of round-off eigenvalues (~1e-17) leave a ~1e-9 perturbation
    assert ext.rates.total == pytest.approx(rm.rates(ch, d).total, rel=1e-7)
    assert np.allclose([np.linalg.norm(x) for x in ext.beamformers], np.linalg.norm(w, axis=1))


def test_randomization_matches_batch_rate_formula(rng):
    cfg, ch = _instance(4)
    d = Design(np.array([np.eye(2), np.diag([1.0, 0.5])]) * 2.0, [1.0, 3.0])
    ext = alg.randomize_rank1(d, ch, 300, rng)
    again = rm.rates(ch, Design.from_beamformers(ext.beamformers, d.q_ul))
    assert ext.rates.total == pytest.approx(again.total, rel=1e-12)
    # the best sample beats the average sample
    draws = [alg.randomize_rank1(d, ch, 1, make_rng(9, k)).rates.total for k in range(40)]
    assert ext.rates.total >= np.mean(draws)


# drivers -----------------------------------------------------------------

@pytest.mark.parametrize("algo", [1, 2])
@pytest.mark.parametrize("seed", range(3))
def test_traces_are_monotone_and_feasible(algo, seed):
    cfg, ch = _instance(seed)
    sol = alg.run(algo, cfg, ch, rng=make_rng(seed, 3))
    assert sol.status == "converged"
    assert sol.trace.is_monotone(slack=0.0)
    assert sol.design.check(cfg.p_bs, cfg.q_bar, tol=1e-6) == []
    # the surrogate is a lower bound of the true rate in nats
    assert sol.trace.values[-1] <= sol.se_relaxed * rm.LN2 + 1e-8
    assert sol.kkt["available"] and sol.kkt["stationarity"] < 1e-4
    assert np.isfinite(sol.se_extracted)


def test_both_algorithms_agree_on_a_small_instance():
    cfg, ch = _instance(11)
    init = alg.initialize(cfg, ch, make_rng(11, 3))
    s1 = alg.run_algorithm1(cfg, ch, init=init, rng=make_rng(1))
    s2 = alg.run_algorithm2(cfg, ch, init=init, rng=make_rng(1))
    assert s1.se_relaxed == pytest.approx(s2.se_relaxed, rel=2e-2)


def test_runs_are_deterministic():
    cfg, ch = _instance(5)
    a = alg.run_algorithm2(cfg, ch, rng=make_rng(7)).to_record()
    b = alg.run_algorithm2(cfg, ch, rng=make_rng(7)).to_record()
    a.pop("timing"), b.pop("timing")
    assert a == b


def test_initializer_is_feasible_with_tight_slacks():
    cfg, ch = _instance(6)
    init = alg.initialize(cfg, ch, make_rng(6, 3))
    assert init.design.check(cfg.p_bs, cfg.q_bar, tol=1e-9) == []
    assert np.allclose(init.x ** 2, init.design.q_ul)
    assert np.allclose(init.t_dl, 1 + rm.downlink_sinrs(ch, init.design))


def test_single_downlink_user_reaches_mrt_capacity():
    h = np.array([[0.6, 0.8j, -0.3]])
    ch = ChannelSet(h, np.zeros((0, 1)), np.zeros((0, 1)), np.zeros((1, 3)), 1.0, 1.0)
    cfg = small_config(n_tx=3, n_rx=1, k_dl=1, k_ul=0, p_bs=5.0)
    for algo in (1, 2):
        sol = alg.run(algo, cfg, ch, rng=make_rng(0))
        ref = np.log2(1 + 5.0 * np.linalg.norm(h) ** 2)
        assert sol.se_relaxed == pytest.approx(ref, rel=1e-6)
        assert sol.se_extracted == pytest.approx(ref, rel=1e-6)
        assert sol.rank_ratio[0] < 1e-4


def test_record_layout():
    cfg, ch = _instance(8)
    rec = alg.run_algorithm1(cfg, ch, rng=make_rng(1)).to_record()
    assert {"se_dl", "se_ul", "se_total"} <= set(rec["se_extracted"])
    assert len(rec["trace"]) == rec["iterations"] + 1
    assert "total_s" in rec["timing"]
    assert np.array(rec["beamformers"]["real"]).shape == (2, 2)


def test_failed_subproblems_restart_then_report_error(monkeypatch):
    cfg, ch = _instance(9, restarts=2)
    calls = []

    def broken(sub, settings=None, start=None):
        calls.append(1)
        return alg.SubproblemResult(sub.expansion, np.nan, "infeasible", 0, np.inf)

    monkeypatch.setattr(alg, "solve_maxdet", broken)
    sol = alg.run_algorithm1(cfg, ch, rng=make_rng(0))
    assert sol.status == "error" and sol.restarts == 2
    assert len(calls) == 3
    assert sol.kkt == {"available": False}
