import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fullduplex.channel_model import ChannelSet, ScenarioConfig, iid_config, make_rng
from fullduplex.rate_model import Design

settings.register_profile("default", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def random_channels(rng, n_tx, n_rx, k_dl, k_ul, si=0.1, noise=1.0) -> ChannelSet:
    return ChannelSet(crandn(rng, k_dl, n_tx), crandn(rng, k_ul, n_rx), crandn(rng, k_ul, k_dl),
                      np.sqrt(si) * crandn(rng, n_rx, n_tx), noise, noise)


def random_design(rng, ch: ChannelSet, p=1.0, q=1.0, rank=None) -> Design:
    n = ch.n_tx
    r = n if rank is None else rank
    qs = []
    for _ in range(ch.k_dl):
        a = crandn(rng, n, r)
        qs.append(a @ a.conj().T)
    qs = np.array(qs).reshape(ch.k_dl, n, n)
    tr = np.trace(qs, axis1=1, axis2=2).real.sum()
    if tr > 0:
        qs = qs * (p * rng.uniform(0.2, 1.0) / tr)
    return Design(qs, rng.uniform(0, q, ch.k_ul))


def small_config(**kw) -> ScenarioConfig:
    """Unit-noise i.i.d. setting with unit budgets, sized for quick tests."""
    base = dict(n_tx=2, n_rx=2, k_dl=2, k_ul=2, p_bs=10.0, q_bar=10.0, sigma_si2=0.01,
                n_random=200)
    base.update(kw)
    return iid_config(**base)


@pytest.fixture
def rng():
    return make_rng(1234, 0)


# acceptance report -------------------------------------------------------

ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """Record ``(criterion, passed, detail)``; printed in the terminal summary."""
    def report(number, passed, detail):
        ACCEPTANCE[number] = (bool(passed), detail)
        return passed
    return report


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
