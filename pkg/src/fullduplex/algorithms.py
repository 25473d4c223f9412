"""Iterative MAXDET (algorithm 1) and iterative SPCA (algorithm 2) designs.

Both drivers normalize the channels once (unit noise and budgets), iterate
the convex subproblems of :mod:`fullduplex.convex_core.subproblems` and map
the final design back to Watts.  Surrogate objectives are tracked in nats.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import rate_model as rm
from .channel_model import ChannelSet, ScenarioConfig, make_rng
from .convex_core import barrier
from .convex_core.subproblems import (MaxdetSubproblem, SolverSettings, SpcaSubproblem,
                                      SubproblemResult, solve_maxdet, solve_spca, uplink_g)
from .rate_model import Design, RateBreakdown

__all__ = ["InitPoint", "IterationRecord", "IterationTrace", "Solution", "Extraction",
           "initialize", "run_algorithm1", "run_algorithm2", "run", "stopping_rule",
           "check_rank1", "randomize_rank1", "kkt_residual", "kkt_residual_spca",
           "solver_settings"]


# initialization ----------------------------------------------------------

@dataclass(frozen=True)
class InitPoint:
    """Starting point in physical units.

    ``psi`` is ``t / beta`` with ``beta`` in Watts, ``x = sqrt(q)``.
    """
    design: Design
    x: np.ndarray
    psi: np.ndarray
    t_dl: np.ndarray
    beta: np.ndarray


def _slacks_at(ch: ChannelSet, d: Design):
    beta = rm.downlink_interference(ch, d)
    t = rm.downlink_received(ch, d) / beta
    return t, beta


def initialize(config: ScenarioConfig, channels: ChannelSet, rng: np.random.Generator) -> InitPoint:
    """Random feasible start: Wishart covariances, uniform uplink powers."""
    n, kd, ku = channels.n_tx, channels.k_dl, channels.k_ul
    a = (rng.standard_normal((kd, n, n)) + 1j * rng.standard_normal((kd, n, n))) / np.sqrt(2.0)
    q = a @ np.conj(np.swapaxes(a, 1, 2))
    tr = float(np.trace(q, axis1=1, axis2=2).real.sum())
    if tr > config.p_bs:
        q = q * (config.p_bs / tr)
    q_ul = rng.uniform(0.0, 1.0, ku) * config.q_bar
    d = Design(q, q_ul)
    t, beta = _slacks_at(channels, d)
    return InitPoint(d, np.sqrt(d.q_ul), t / beta, t, beta)


def _normalize_init(init: InitPoint, channels: ChannelSet, config: ScenarioConfig):
    d = init.design.scaled(1.0 / config.p_bs, 1.0 / config.q_bar)
    x = init.x / np.sqrt(config.q_bar)
    beta = init.beta / channels.sigma_n2_dl
    return d, x, init.t_dl / beta


# traces and results ------------------------------------------------------

@dataclass
class IterationRecord:
    index: int
    surrogate: float        # nats
    se_total: float         # bits/s/Hz of the current relaxed design
    seconds: float
    status: str
    newton_iters: int = 0
    accepted: bool = True


@dataclass
class IterationTrace:
    records: List[IterationRecord] = field(default_factory=list)

    def append(self, rec: IterationRecord):
        self.records.append(rec)

    @property
    def values(self) -> np.ndarray:
        return np.array([r.surrogate for r in self.records])

    def __len__(self):
        return len(self.records)

    def is_monotone(self, slack: float = 1e-9) -> bool:
        v = self.values
        return bool(np.all(np.diff(v) >= -slack))

    def to_list(self) -> list:
        return [dict(vars(r)) for r in self.records]


def stopping_rule(values, epsilon: float = 1e-5, window: int = 10, max_iter: int = 500) -> bool:
    """True when the last ``window`` values rose by less than ``epsilon`` or the cap is hit.

    ``values`` holds the initial value followed by one entry per iteration.
    """
    v = np.asarray(values, dtype=float)
    if len(v) - 1 >= max_iter:
        return True
    if len(v) < window:
        return False
    return bool(v[-1] - v[-window] < epsilon)


@dataclass
class Extraction:
    beamformers: np.ndarray      # (K_D, N_T), physical units
    rates: RateBreakdown
    n_samples: int


@dataclass
class Solution:
    algorithm: str
    status: str                  # converged | max_iter | error
    design: Design               # physical units
    rates_relaxed: RateBreakdown
    trace: IterationTrace
    kkt: dict
    rank_ratio: np.ndarray       # lambda_2 / lambda_1 per downlink covariance
    extraction: Optional[Extraction] = None
    restarts: int = 0
    slacks: dict = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    @property
    def iterations(self) -> int:
        return max(len(self.trace) - 1, 0)

    @property
    def beamformers(self):
        return None if self.extraction is None else self.extraction.beamformers

    @property
    def se_relaxed(self) -> float:
        return self.rates_relaxed.total

    @property
    def se_extracted(self) -> float:
        return self.extraction.rates.total if self.extraction else float("nan")

    def to_record(self) -> dict:
        """JSON-ready summary; wall-clock timings live under ``timing``."""
        rec = {
            "algorithm": self.algorithm,
            "status": self.status,
            "iterations": self.iterations,
            "restarts": self.restarts,
            "se_relaxed": self.rates_relaxed.as_dict(),
            "se_extracted": self.extraction.rates.as_dict() if self.extraction else None,
            "rank_ratio": self.rank_ratio.tolist(),
            "kkt": self.kkt,
            "trace": [{"index": r.index, "surrogate": r.surrogate, "se_total": r.se_total,
                       "status": r.status, "newton_iters": r.newton_iters,
                       "accepted": r.accepted} for r in self.trace.records],
            "design": {"q_dl_real": self.design.q_dl.real.tolist(),
                       "q_dl_imag": self.design.q_dl.imag.tolist(),
                       "q_ul": self.design.q_ul.tolist()},
            "timing": {"total_s": self.seconds,
                       "per_iteration_s": [r.seconds for r in self.trace.records]},
        }
        if self.extraction is not None:
            w = self.extraction.beamformers
            rec["beamformers"] = {"real": w.real.tolist(), "imag": w.imag.tolist()}
        return rec


# rank-1 diagnostics and extraction ---------------------------------------

def check_rank1(q, tol: float = 1e-6):
    """``(is_rank1, lambda_2 / lambda_1)`` for a Hermitian PSD matrix."""
    ev = np.linalg.eigvalsh(rm.hermitize(q))[::-1]
    if ev.size < 2 or ev[0] <= 0:
        return True, 0.0
    ratio = float(max(ev[1], 0.0) / ev[0])
    return ratio <= tol, ratio


def _batch_se(ch: ChannelSet, w, q_ul):
    """Total SE in bits for a batch of beamformer sets ``w`` (S, K_D, N_T)."""
    s = w.shape[0]
    gains = np.abs(np.einsum("im,skm->sik", ch.h_dl.conj(), w)) ** 2
    cci = (np.abs(ch.g_cci) ** 2 * q_ul[:, None]).sum(axis=0) if ch.k_ul else np.zeros(ch.k_dl)
    own = np.einsum("sii->si", gains)
    interf = ch.sigma_n2_dl + gains.sum(axis=2) - own + cci[None, :]
    dl = np.log2(1.0 + own / interf).sum(axis=1)
    if ch.k_ul == 0:
        return dl
    hw = np.einsum("rm,skm->skr", ch.h_si, w)
    theta = ch.sigma_n2_bs * np.eye(ch.n_rx)[None] + np.einsum("skr,skc->src", hw, hw.conj())
    full = theta + np.einsum("j,jr,jc->rc", q_ul, ch.h_ul, ch.h_ul.conj())[None]
    ul = (np.linalg.slogdet(full)[1] - np.linalg.slogdet(theta)[1]) / np.log(2.0)
    return dl + ul


def randomize_rank1(design: Design, channels: ChannelSet, n_samples: int,
                    rng: np.random.Generator) -> Extraction:
    """Best of ``n_samples`` joint draws ``w_i = U_i Sigma_i^(1/2) v_i`` with unit-modulus ``v_i``."""
    kd, n = design.k_dl, channels.n_tx
    n_samples = max(int(n_samples), 1)
    best_w, best_se = None, -np.inf
    factors = []
    for q in design.q_dl:
        s, u = np.linalg.eigh(rm.hermitize(q))
        factors.append(u * np.sqrt(np.maximum(s, 0.0))[None, :])
    # draw in chunks to bound memory
    chunk = 256
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        phase = rng.uniform(0.0, 2.0 * np.pi, (m, kd, n))
        v = np.exp(1j * phase)
        w = np.empty((m, kd, n), dtype=complex)
        for i in range(kd):
            w[:, i, :] = v[:, i, :] @ factors[i].T
        se = _batch_se(channels, w, design.q_ul)
        k = int(np.argmax(se))
        if se[k] > best_se:
            best_se, best_w = float(se[k]), w[k].copy()
        done += m
    if best_w is None:
        best_w = np.zeros((0, n), dtype=complex)
    d = Design.from_beamformers(best_w, design.q_ul) if kd else Design(design.q_dl, design.q_ul)
    return Extraction(best_w, rm.rates(channels, d), n_samples)


# KKT residuals -----------------------------------------------------------

def kkt_residual(design: Design, duals: Optional[dict], channels: ChannelSet,
                 expansion: Optional[Design] = None, z_duals=None) -> dict:
    """Residuals of the MAXDET KKT system with the gradient of g taken at ``design``.

    ``design`` and ``duals`` must be in normalized units (as returned by
    :func:`solve_maxdet`).  ``expansion`` is accepted for symmetry with the
    subproblem but the converged-point substitution ignores it.
    """
    if duals is None or "rows" not in duals:
        return {"available": False}
    sub = MaxdetSubproblem(channels, design)
    prog, lay = sub.program()
    z = lay.pack(design)
    lam = np.array([duals["rows"][nm] for nm in prog.row_names])
    out = barrier.kkt_residual(prog, z, lam, duals["Z"])
    out["available"] = True
    out["mu_budget"] = float(duals["mu"] * (1.0 - design.total_power()))
    return out


def kkt_residual_spca(design: Design, slacks: dict, duals: Optional[dict],
                      channels: ChannelSet) -> dict:
    """Same check for the SPCA reformulation at its converged point.

    Rebuilding the subproblem with ``psi = t / beta`` and the linearization at
    the point itself makes every approximated constraint agree with the exact
    one to first order, so the KKT system is that of the exact problem.
    """
    if duals is None or "rows" not in duals:
        return {"available": False}
    psi = slacks["t_dl"] / slacks["beta"]
    sub = SpcaSubproblem(channels, design, psi, slacks["x"])
    prog, lay = sub.program()
    z = lay.pack(design, tau_dl=slacks["t_dl"] - 1.0, beta=slacks["beta"],
                 tau_ul=slacks["t_ul"] - 1.0, x=slacks["x"])
    lam = np.array([duals["rows"][nm] for nm in prog.row_names])
    out = barrier.kkt_residual(prog, z, lam, duals["Z"])
    out["available"] = True
    out["mu_budget"] = float(duals["mu"] * (1.0 - design.total_power()))
    return out


# drivers -----------------------------------------------------------------

def solver_settings(config: ScenarioConfig, verbose: bool = False) -> SolverSettings:
    return SolverSettings(gap_tol=config.gap_tol, newton_tol=config.newton_tol,
                          mu=config.barrier_mu, max_newton=config.max_newton, verbose=verbose)


class _Failure(RuntimeError):
    pass


def _true_nats(ch, d):
    return rm.downlink_se(ch, d, base=None) + rm.uplink_se_det(ch, d, base=None)


def _iterate_maxdet(ch, d, config, settings):
    trace = IterationTrace()
    u = _true_nats(ch, d)
    trace.append(IterationRecord(0, u, u / rm.LN2, 0.0, "init"))
    last = None
    n = 0
    while not stopping_rule(trace.values, config.epsilon, config.window, config.max_iter):
        n += 1
        t0 = time.perf_counter()
        res = solve_maxdet(MaxdetSubproblem(ch, d), settings)
        if res.status not in ("optimal", "max_iter"):
            raise _Failure(res.status)
        last = res
        # keep the expansion point if the subproblem did not certify an ascent
        accepted = res.objective >= u
        if accepted:
            d = res.design
            u = res.objective
        se = _true_nats(ch, d) / rm.LN2
        trace.append(IterationRecord(n, u, se, time.perf_counter() - t0, res.status,
                                     res.newton_iters, accepted))
    return d, trace, last, {}


def _iterate_spca(ch, d, x, psi, config, settings):
    trace = IterationTrace()
    t_dl, beta = _slacks_at(ch, d)
    t_ul = 1.0 + np.array([uplink_g(ch, d, x[j], j) for j in range(ch.k_ul)])
    u = float(np.log(t_dl).sum() + np.log(t_ul).sum())
    trace.append(IterationRecord(0, u, _true_nats(ch, d) / rm.LN2, 0.0, "init"))
    slacks = {"t_dl": t_dl, "beta": beta, "t_ul": t_ul, "x": x}
    warm = None
    last = None
    n = 0
    while not stopping_rule(trace.values, config.epsilon, config.window, config.max_iter):
        n += 1
        t0 = time.perf_counter()
        res = solve_spca(SpcaSubproblem(ch, d, psi, x), settings, start=warm)
        if res.status not in ("optimal", "max_iter"):
            raise _Failure(res.status)
        last = res
        accepted = res.objective >= u
        if accepted:
            d, u, slacks = res.design, res.objective, res.slacks
            psi = slacks["t_dl"] / slacks["beta"]
            x = slacks["x"]
            warm = slacks
        se = _true_nats(ch, d) / rm.LN2
        trace.append(IterationRecord(n, u, se, time.perf_counter() - t0, res.status,
                                     res.newton_iters, accepted))
    return d, trace, last, slacks


def _finish(name, status, config, channels, ch_n, d_n, trace, last, slacks, restarts,
            rng, extract, t_start):
    if last is None:
        kkt = {"available": False}
    elif name == "algorithm1":
        kkt = kkt_residual(last.design, last.duals, ch_n)
    else:
        kkt = kkt_residual_spca(last.design, last.slacks, last.duals, ch_n)
    d = d_n.scaled(config.p_bs, config.q_bar)
    ratios = np.array([check_rank1(q)[1] for q in d.q_dl])
    sol = Solution(name, status, d, rm.rates(channels, d), trace, kkt, ratios,
                   restarts=restarts, slacks={k: np.asarray(v).tolist() for k, v in slacks.items()})
    if extract and d.k_dl:
        ext = randomize_rank1(d_n, ch_n, config.n_random, rng)
        ext.beamformers = ext.beamformers * np.sqrt(config.p_bs)
        ext.rates = rm.rates(channels, Design.from_beamformers(ext.beamformers, d.q_ul))
        sol.extraction = ext
    elif extract:
        sol.extraction = Extraction(np.zeros((0, channels.n_tx), complex), sol.rates_relaxed, 0)
    sol.seconds = time.perf_counter() - t_start
    return sol


def _run(name, config, channels, init, rng, extract, verbose):
    t_start = time.perf_counter()
    rng = make_rng(config.seed, 101) if rng is None else rng
    settings = solver_settings(config, verbose)
    ch_n = channels.normalized(config.p_bs, config.q_bar)
    restarts = 0
    while True:
        if init is None:
            init = initialize(config, channels, rng)
        d0, x0, psi0 = _normalize_init(init, channels, config)
        try:
            if name == "algorithm1":
                d, trace, last, slacks = _iterate_maxdet(ch_n, d0, config, settings)
            else:
                d, trace, last, slacks = _iterate_spca(ch_n, d0, x0, psi0, config, settings)
            break
        except _Failure:
            if restarts >= config.restarts:
                trace = IterationTrace()
                return _finish(name, "error", config, channels, ch_n, d0, trace, None, {},
                               restarts, rng, extract, t_start)
            restarts += 1
            init = None
    status = "max_iter" if len(trace) - 1 >= config.max_iter else "converged"
    return _finish(name, status, config, channels, ch_n, d, trace, last, slacks, restarts,
                   rng, extract, t_start)


def run_algorithm1(config: ScenarioConfig, channels: ChannelSet, init: Optional[InitPoint] = None,
                   rng: Optional[np.random.Generator] = None, extract: bool = True,
                   verbose: bool = False) -> Solution:
    """Iterative MAXDET design.

    Parameters
    ----------
    config : ScenarioConfig
        Budgets, stopping rule and solver settings.
    channels : ChannelSet
        Physical-unit channels.
    init : InitPoint, optional
        Starting point; drawn with :func:`initialize` when omitted (and on restarts).
    rng : numpy.random.Generator, optional
        Source for initial points and randomization; defaults to a stream of ``config.seed``.
    """
    return _run("algorithm1", config, channels, init, rng, extract, verbose)


def run_algorithm2(config: ScenarioConfig, channels: ChannelSet, init: Optional[InitPoint] = None,
                   rng: Optional[np.random.Generator] = None, extract: bool = True,
                   verbose: bool = False) -> Solution:
    """Iterative SPCA design; same interface as :func:`run_algorithm1`."""
    return _run("algorithm2", config, channels, init, rng, extract, verbose)


def run(algo, config, channels, **kw) -> Solution:
    """Dispatch on ``algo`` in {1, 2, "1", "2"}."""
    return {"1": run_algorithm1, "2": run_algorithm2}[str(algo)](config, channels, **kw)
