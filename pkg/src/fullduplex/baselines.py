"""Half-duplex reference system.

The half-duplex BS serves the downlink and the uplink in separate, equal
time slots with all ``N_T + N_R`` antennas.  Uplink powers come from
iterative water-filling on the SIMO multiple-access channel, downlink
covariances from the downlink-only special case of the SPCA design.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import algorithms
from .channel_model import ChannelSet, ScenarioConfig, config_of
from .rate_model import LN2

__all__ = ["HalfDuplexResult", "IwfResult", "half_duplex_channels", "uplink_iwf",
           "uplink_sum_rate", "downlink_only", "downlink_semax_hd", "half_duplex_total",
           "half_duplex"]


@dataclass(frozen=True)
class HalfDuplexResult:
    """Spectral efficiencies (bits/s/Hz) of a 50/50 time-shared link pair.

    ``dl_se`` and ``ul_se`` are the rates while a direction owns the channel;
    the ``*_half`` fields and ``total`` account for the time share.
    """

    dl_se: float
    ul_se: float
    dl_half: float = field(init=False)
    ul_half: float = field(init=False)
    total: float = field(init=False)

    def __post_init__(self):
        if self.dl_se < 0 or self.ul_se < 0:
            raise ValueError("spectral efficiencies must be nonnegative")
        object.__setattr__(self, "dl_half", 0.5 * float(self.dl_se))
        object.__setattr__(self, "ul_half", 0.5 * float(self.ul_se))
        object.__setattr__(self, "total", self.dl_half + self.ul_half)

    def as_dict(self) -> dict:
        return {"dl_se": float(self.dl_se), "ul_se": float(self.ul_se),
                "dl": self.dl_half, "ul": self.ul_half, "total": self.total}


def half_duplex_total(dl_se: float, ul_se: float) -> HalfDuplexResult:
    return HalfDuplexResult(float(dl_se), float(ul_se))


def half_duplex_channels(channels: ChannelSet, rng: np.random.Generator) -> ChannelSet:
    """Give every link ``N_T + N_R`` BS antennas and drop CCI and SI.

    The first ``N_T`` (downlink) or ``N_R`` (uplink) coefficients are the
    full-duplex ones; the rest are fresh ``CN(0, kappa)`` draws using the
    stored large-scale gain of each user.
    """
    n = channels.n_tx + channels.n_rx
    kd, ku = channels.k_dl, channels.k_ul

    def extend(h, kappa, extra):
        z = (rng.standard_normal((h.shape[0], extra))
             + 1j * rng.standard_normal((h.shape[0], extra))) / np.sqrt(2.0)
        return np.hstack([h, np.sqrt(kappa)[:, None] * z])

    h_dl = extend(channels.h_dl, channels.kappa_dl, channels.n_rx)
    h_ul = extend(channels.h_ul, channels.kappa_ul, channels.n_tx)
    return ChannelSet(h_dl, h_ul, np.zeros((ku, kd)), np.zeros((n, n)),
                      channels.sigma_n2_dl, channels.sigma_n2_bs,
                      channels.kappa_dl, channels.kappa_ul)


# uplink -----------------------------------------------------------------

@dataclass
class IwfResult:
    powers: np.ndarray
    se: float                    # bits/s/Hz
    sweeps: int
    history: list                # sum rate after each sweep


def uplink_sum_rate(h_ul, powers, sigma2: float) -> float:
    """``log2 det(I + sum_j q_j h_j h_j^H / sigma2)``."""
    h = np.asarray(h_ul, dtype=complex)
    if h.shape[0] == 0:
        return 0.0
    q = np.asarray(powers, dtype=float)
    # det(I_N + H^T diag(q) conj(H) / s) = det(I_K + D^1/2 conj(H) H^T D^1/2 / s)
    hs = h * np.sqrt(q / sigma2)[:, None]
    m = np.eye(h.shape[0]) + hs.conj() @ hs.T
    return float(np.linalg.slogdet(m)[1] / LN2)


def uplink_iwf(channels: ChannelSet, q_bar, tol: float = 1e-10, max_sweeps: int = 100) -> IwfResult:
    """Iterative water-filling for the SIMO multiple-access channel.

    Parameters
    ----------
    channels : ChannelSet
        Uses ``h_ul`` and ``sigma_n2_bs``; other links are ignored.
    q_bar : float or array_like
        Per-user power budget.
    tol : float
        Stop once a full sweep changes the sum rate by less than ``tol`` bits.

    Each user owns one receive signature, so its single-user problem
    ``max log(1 + q h^H R^-1 h)`` over ``0 <= q <= q_bar`` has the clipped
    closed form ``q = q_bar``.  The cyclic structure is kept so the
    per-sweep history can be inspected.
    """
    h = channels.h_ul
    k = h.shape[0]
    q_bar = np.broadcast_to(np.asarray(q_bar, float), (k,)).copy()
    s2 = channels.sigma_n2_bs
    q = np.zeros(k)
    history = [uplink_sum_rate(h, q, s2)]
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        for j in range(k):
            others = np.delete(np.arange(k), j)
            r = s2 * np.eye(h.shape[1]) + (h[others].T * q[others]) @ h[others].conj()
            gain = float(np.real(h[j].conj() @ np.linalg.solve(r, h[j])))
            # d/dq log(1 + q gain) > 0, so the clipped maximizer is the budget
            q[j] = q_bar[j] if gain > 0 else 0.0
        history.append(uplink_sum_rate(h, q, s2))
        if abs(history[-1] - history[-2]) < tol:
            break
    return IwfResult(q, history[-1], sweeps, history)


# downlink ---------------------------------------------------------------

def downlink_only(channels: ChannelSet) -> ChannelSet:
    """The same downlink with no uplink users and no self-interference."""
    n_rx = channels.n_rx
    return ChannelSet(channels.h_dl, np.zeros((0, n_rx)), np.zeros((0, channels.k_dl)),
                      np.zeros((n_rx, channels.n_tx)), channels.sigma_n2_dl,
                      channels.sigma_n2_bs, channels.kappa_dl, np.zeros(0))


def downlink_semax_hd(channels: ChannelSet, p_bs: float, config: Optional[ScenarioConfig] = None,
                      rng: Optional[np.random.Generator] = None, algo: int = 2) -> float:
    """Downlink-only sum-SE maximization under a sum power budget (bits/s/Hz).

    Runs the iterative designs on the ``K_U = 0`` reduction and returns the
    SE of the extracted rank-one beamformers.
    """
    if p_bs <= 0 or channels.k_dl == 0:
        return 0.0
    ch = downlink_only(channels)
    cfg = config_of(ch, config, p_bs=float(p_bs), sigma_si2=0.0)
    sol = algorithms.run(algo, cfg, ch, rng=rng)
    if sol.status == "error":
        raise RuntimeError("downlink half-duplex design failed")
    return float(sol.se_extracted)


def half_duplex(config: ScenarioConfig, channels: ChannelSet, rng: np.random.Generator,
                algo: int = 2) -> HalfDuplexResult:
    """Half-duplex counterpart of one full-duplex realization.

    ``rng`` supplies the extra antenna coefficients and then the random
    start of the downlink design.
    """
    hd = half_duplex_channels(channels, rng)
    ul = uplink_iwf(hd, config.q_bar).se if hd.k_ul else 0.0
    dl = downlink_semax_hd(hd, config.p_bs, config, rng=rng, algo=algo)
    return half_duplex_total(dl, ul)
