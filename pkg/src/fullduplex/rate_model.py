"""SINRs, spectral efficiencies and the concave-minus-concave split of the sum rate.

All log-domain quantities here are natural logs (nats) unless a ``base``
argument says otherwise; :class:`RateBreakdown` reports bits/s/Hz.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from .channel_model import ChannelSet

__all__ = [
    "Design", "RateBreakdown", "hermitize",
    "downlink_received", "downlink_interference", "downlink_sinr", "downlink_sinrs",
    "downlink_se", "downlink_se_ratio", "uplink_sinr", "uplink_sinrs", "uplink_se",
    "uplink_se_det", "rates", "dc_h", "dc_g", "grad_h", "grad_g", "dc_g_affine",
    "si_covariance",
]

LN2 = np.log(2.0)


def hermitize(a):
    a = np.asarray(a, dtype=complex)
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


@dataclass(frozen=True)
class Design:
    """Downlink covariances ``q_dl`` (K_D, N_T, N_T) and uplink powers ``q_ul`` (K_U,)."""

    q_dl: np.ndarray
    q_ul: np.ndarray

    def __post_init__(self):
        q_dl = np.asarray(self.q_dl, dtype=complex)
        if q_dl.ndim == 2:
            q_dl = q_dl[None]
        if q_dl.size == 0:
            q_dl = q_dl.reshape(0, *(q_dl.shape[-2:] if q_dl.ndim == 3 else (0, 0)))
        q_dl = hermitize(q_dl)
        q_ul = np.asarray(self.q_ul, dtype=float).reshape(-1)
        q_dl.setflags(write=False)
        q_ul.setflags(write=False)
        object.__setattr__(self, "q_dl", q_dl)
        object.__setattr__(self, "q_ul", q_ul)

    @classmethod
    def zeros(cls, channels: ChannelSet) -> "Design":
        n = channels.n_tx
        return cls(np.zeros((channels.k_dl, n, n)), np.zeros(channels.k_ul))

    @classmethod
    def from_beamformers(cls, w, q_ul) -> "Design":
        w = np.atleast_2d(np.asarray(w, dtype=complex))
        return cls(np.einsum("ki,kj->kij", w, w.conj()), q_ul)

    @property
    def k_dl(self):
        return self.q_dl.shape[0]

    @property
    def k_ul(self):
        return self.q_ul.shape[0]

    def total_power(self) -> float:
        return float(np.trace(self.q_dl, axis1=1, axis2=2).real.sum())

    def scaled(self, p_scale, q_scale) -> "Design":
        return Design(self.q_dl * p_scale, self.q_ul * q_scale)

    def check(self, p_bs, q_bar, tol=1e-9) -> list:
        """Return a list of violated invariants (empty when valid)."""
        problems = []
        for i, q in enumerate(self.q_dl):
            tr = max(float(np.trace(q).real), 0.0)
            if np.linalg.eigvalsh(q).min(initial=0.0) < -tol * max(tr, 1e-300):
                problems.append(f"Q_D{i + 1} not PSD")
        if self.total_power() > p_bs * (1 + tol) + tol:
            problems.append("BS power budget exceeded")
        q_bar = np.broadcast_to(q_bar, self.q_ul.shape)
        if np.any(self.q_ul < -tol * q_bar) or np.any(self.q_ul > q_bar * (1 + tol)):
            problems.append("uplink power outside [0, q_bar]")
        return problems


@dataclass(frozen=True)
class RateBreakdown:
    """Per-user SINRs and rates (bits/s/Hz) with direction totals."""

    sinr_dl: np.ndarray
    sinr_ul: np.ndarray
    rate_dl: np.ndarray
    rate_ul: np.ndarray

    @property
    def total_dl(self) -> float:
        return float(self.rate_dl.sum())

    @property
    def total_ul(self) -> float:
        return float(self.rate_ul.sum())

    @property
    def total(self) -> float:
        return self.total_dl + self.total_ul

    def as_dict(self) -> dict:
        return {"sinr_dl": self.sinr_dl.tolist(), "sinr_ul": self.sinr_ul.tolist(),
                "rate_dl": self.rate_dl.tolist(), "rate_ul": self.rate_ul.tolist(),
                "se_dl": self.total_dl, "se_ul": self.total_ul, "se_total": self.total}


# Downlink ----------------------------------------------------------------

def _dl_gains(ch: ChannelSet, d: Design):
    # gains[i, k] = h_i^H Q_k h_i
    return np.einsum("in,kno,io->ik", ch.h_dl.conj(), d.q_dl, ch.h_dl).real


def _cci_power(ch: ChannelSet, d: Design):
    return (np.abs(ch.g_cci) ** 2 * d.q_ul[:, None]).sum(axis=0) if ch.k_ul else np.zeros(ch.k_dl)


def downlink_received(ch: ChannelSet, d: Design):
    """Total received power (signal + interference + noise) per downlink user."""
    return ch.sigma_n2_dl + _dl_gains(ch, d).sum(axis=1) + _cci_power(ch, d)


def downlink_interference(ch: ChannelSet, d: Design):
    """Interference plus noise per downlink user."""
    gains = _dl_gains(ch, d)
    return ch.sigma_n2_dl + gains.sum(axis=1) - np.diag(gains) + _cci_power(ch, d)


def downlink_sinrs(ch: ChannelSet, d: Design):
    gains = _dl_gains(ch, d)
    signal = np.diag(gains)
    interf = ch.sigma_n2_dl + gains.sum(axis=1) - signal + _cci_power(ch, d)
    return np.maximum(signal, 0.0) / interf


def downlink_sinr(i: int, ch: ChannelSet, d: Design) -> float:
    if not 0 <= i < ch.k_dl:
        raise IndexError(f"downlink user index {i} out of range")
    return float(downlink_sinrs(ch, d)[i])


def downlink_se(ch: ChannelSet, d: Design, base: Optional[float] = 2.0) -> float:
    """Sum of per-user ``log(1 + SINR)``."""
    r = np.log1p(downlink_sinrs(ch, d)).sum()
    return float(r / np.log(base)) if base else float(r)


def downlink_se_ratio(ch: ChannelSet, d: Design, base: Optional[float] = 2.0) -> float:
    """Same quantity evaluated as a sum of log(received / interference)."""
    r = np.sum(np.log(downlink_received(ch, d)) - np.log(downlink_interference(ch, d)))
    return float(r / np.log(base)) if base else float(r)


# Uplink ------------------------------------------------------------------

def si_covariance(ch: ChannelSet, d: Design):
    """``sum_i H_SI Q_i H_SI^H``."""
    if d.k_dl == 0:
        return np.zeros((ch.n_rx, ch.n_rx), dtype=complex)
    return hermitize(ch.h_si @ d.q_dl.sum(axis=0) @ ch.h_si.conj().T)


def _logdet(a) -> float:
    c = linalg.cholesky(hermitize(a), lower=True)
    return 2.0 * float(np.log(np.diag(c).real).sum())


def uplink_sinrs(ch: ChannelSet, d: Design, order: Optional[Sequence[int]] = None):
    """MMSE-SIC SINRs; ``order`` lists users in decoding order (default 0..K_U-1)."""
    order = list(range(ch.k_ul)) if order is None else list(order)
    if sorted(order) != list(range(ch.k_ul)):
        raise ValueError("order must be a permutation of the uplink users")
    cov = ch.sigma_n2_bs * np.eye(ch.n_rx) + si_covariance(ch, d)
    out = np.zeros(ch.k_ul)
    # decode last-to-first so cov accumulates the not-yet-decoded users
    for j in reversed(order):
        h = ch.h_ul[j]
        c = linalg.cho_factor(hermitize(cov), lower=True)
        out[j] = d.q_ul[j] * float(np.real(h.conj() @ linalg.cho_solve(c, h)))
        cov = cov + d.q_ul[j] * np.outer(h, h.conj())
    return out


def uplink_sinr(j: int, ch: ChannelSet, d: Design, order=None) -> float:
    if not 0 <= j < ch.k_ul:
        raise IndexError(f"uplink user index {j} out of range")
    return float(uplink_sinrs(ch, d, order)[j])


def uplink_se(ch: ChannelSet, d: Design, base: Optional[float] = 2.0, order=None) -> float:
    r = np.log1p(uplink_sinrs(ch, d, order)).sum()
    return float(r / np.log(base)) if base else float(r)


def uplink_se_det(ch: ChannelSet, d: Design, base: Optional[float] = 2.0) -> float:
    """Uplink sum rate as a log-determinant ratio."""
    theta = ch.sigma_n2_bs * np.eye(ch.n_rx) + si_covariance(ch, d)
    full = theta + np.einsum("j,jm,jn->mn", d.q_ul, ch.h_ul, ch.h_ul.conj())
    r = _logdet(full) - _logdet(theta)
    return float(r / np.log(base)) if base else float(r)


def rates(ch: ChannelSet, d: Design) -> RateBreakdown:
    s_dl = downlink_sinrs(ch, d)
    s_ul = uplink_sinrs(ch, d)
    return RateBreakdown(s_dl, s_ul, np.log2(1 + s_dl), np.log2(1 + s_ul))


# Difference-of-concave split ---------------------------------------------

def _theta(ch, d):
    return ch.sigma_n2_bs * np.eye(ch.n_rx) + si_covariance(ch, d)


def dc_h(ch: ChannelSet, d: Design) -> float:
    full = _theta(ch, d) + np.einsum("j,jm,jn->mn", d.q_ul, ch.h_ul, ch.h_ul.conj())
    return _logdet(full) + float(np.log(downlink_received(ch, d)).sum())


def dc_g(ch: ChannelSet, d: Design) -> float:
    return float(np.log(downlink_interference(ch, d)).sum()) + _logdet(_theta(ch, d))


def grad_g(ch: ChannelSet, d: Design):
    """Gradient of ``dc_g``: (K_D, N_T, N_T) matrices and a (K_U,) vector."""
    vt = downlink_interference(ch, d)
    hh = np.einsum("in,im->inm", ch.h_dl, ch.h_dl.conj()) / vt[:, None, None]
    si = ch.h_si.conj().T @ linalg.solve(_theta(ch, d), ch.h_si, assume_a="pos")
    gq = np.empty((ch.k_dl, ch.n_tx, ch.n_tx), dtype=complex)
    tot = hh.sum(axis=0)
    for k in range(ch.k_dl):
        gq[k] = tot - hh[k] + si
    gu = (np.abs(ch.g_cci) ** 2 / vt[None, :]).sum(axis=1) if ch.k_ul else np.zeros(0)
    return hermitize(gq), gu


def grad_h(ch: ChannelSet, d: Design):
    """Gradient of ``dc_h`` in the same layout as :func:`grad_g`."""
    a = downlink_received(ch, d)
    full = _theta(ch, d) + np.einsum("j,jm,jn->mn", d.q_ul, ch.h_ul, ch.h_ul.conj())
    inv_h = linalg.solve(full, np.column_stack([ch.h_si, ch.h_ul.T]), assume_a="pos")
    si = ch.h_si.conj().T @ inv_h[:, :ch.n_tx]
    hh = np.einsum("in,im->nm", ch.h_dl / np.sqrt(a)[:, None], ch.h_dl.conj() / np.sqrt(a)[:, None])
    gq = np.broadcast_to(hermitize(si + hh), (ch.k_dl, ch.n_tx, ch.n_tx)).copy()
    hu = inv_h[:, ch.n_tx:]
    gu = np.real(np.einsum("jm,mj->j", ch.h_ul.conj(), hu)) if ch.k_ul else np.zeros(0)
    if ch.k_ul:
        gu = gu + (np.abs(ch.g_cci) ** 2 / a[None, :]).sum(axis=1)
    return gq, gu


def dc_g_affine(ch: ChannelSet, d: Design, expansion: Design) -> float:
    """First-order (majorizing) expansion of ``dc_g`` around ``expansion`` evaluated at ``d``."""
    gq, gu = grad_g(ch, expansion)
    dq = d.q_dl - expansion.q_dl
    lin = float(np.einsum("kij,kji->", gq, dq).real) + float(gu @ (d.q_ul - expansion.q_ul))
    return dc_g(ch, expansion) + lin
