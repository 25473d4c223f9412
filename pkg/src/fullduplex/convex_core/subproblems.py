"""The two convex subproblem families solved at every outer iteration.

Both builders expect *normalized* channels (see
:meth:`fullduplex.channel_model.ChannelSet.normalized`): unit noise, unit
BS budget and unit per-user uplink budget.  Designs going in and out are
in the same normalized units.

Variable layout shared by both programs: the ``K_D`` downlink covariances
(``N_T**2`` Hermitian coordinates each) followed by the ``K_U`` uplink
powers, then program-specific slacks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from scipy import linalg

from .. import rate_model as rm
from ..channel_model import ChannelSet
from ..rate_model import Design
from . import hermitian
from .barrier import (ConvexProgram, Infeasible, LogDetTerm, PsdBlock,
                      barrier_newton, find_interior)

__all__ = ["SolverSettings", "MaxdetSubproblem", "SpcaSubproblem", "SubproblemResult",
           "solve_maxdet", "solve_spca", "F_bound", "G_bound", "uplink_g",
           "uplink_cov", "schur_min_eig"]


@dataclass(frozen=True)
class SolverSettings:
    gap_tol: float = 1e-7
    newton_tol: float = 1e-9
    mu: float = 10.0
    max_newton: int = 400
    verbose: bool = False

    def kwargs(self):
        return dict(gap_tol=self.gap_tol, newton_tol=self.newton_tol, mu=self.mu,
                    max_newton=self.max_newton, verbose=self.verbose)


@dataclass
class SubproblemResult:
    design: Design
    objective: float
    status: str
    newton_iters: int
    gap: float
    slacks: Dict[str, np.ndarray] = field(default_factory=dict)
    # lambda_lo (q >= 0), lambda_hi (q <= 1), mu (sum power), Z (per Q block),
    # plus any program-specific row multipliers keyed by row family
    duals: Dict[str, object] = field(default_factory=dict)
    log: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


# shared pieces -------------------------------------------------------------

class _Layout:
    def __init__(self, ch: ChannelSet, extra=()):
        self.k_dl, self.k_ul, self.nt = ch.k_dl, ch.k_ul, ch.n_tx
        self.nb = self.nt * self.nt
        self.q_off = self.k_dl * self.nb
        off = self.q_off + self.k_ul
        self.extra = {}
        for name, size in extra:
            self.extra[name] = slice(off, off + size)
            off += size
        self.n = off

    def qblock(self, i):
        return slice(i * self.nb, (i + 1) * self.nb)

    @property
    def qul(self):
        return slice(self.q_off, self.q_off + self.k_ul)

    def psd_blocks(self):
        return [PsdBlock(i * self.nb, self.nt, f"Q{i}") for i in range(self.k_dl)]

    def pack(self, d: Design, **extra):
        z = np.zeros(self.n)
        for i in range(self.k_dl):
            z[self.qblock(i)] = hermitian.to_vec(d.q_dl[i])
        z[self.qul] = d.q_ul
        for name, v in extra.items():
            z[self.extra[name]] = v
        return z

    def design(self, z) -> Design:
        q = np.array([hermitian.from_vec(z[self.qblock(i)], self.nt) for i in range(self.k_dl)])
        q = q.reshape(self.k_dl, self.nt, self.nt)
        return Design(q, np.clip(z[self.qul], 0.0, None))


def _dl_rows(ch: ChannelSet, lay: _Layout, exclude_self: bool):
    """Affine maps of the DL received power a_i (or interference-plus-noise b_i)."""
    a = np.zeros((ch.k_dl, lay.n))
    hv = hermitian.to_vec(np.einsum("in,im->inm", ch.h_dl, ch.h_dl.conj()))
    for i in range(ch.k_dl):
        for k in range(ch.k_dl):
            if exclude_self and k == i:
                continue
            a[i, lay.qblock(k)] = hv[i]
        a[i, lay.qul] = np.abs(ch.g_cci[:, i]) ** 2
    return a, np.full(ch.k_dl, ch.sigma_n2_dl)


def _si_maps(ch: ChannelSet):
    """H_SI E_a H_SI^H for every Hermitian basis matrix E_a."""
    b = hermitian.basis(ch.n_tx)
    return ch.h_si @ b @ ch.h_si.conj().T


def _trace_row(lay: _Layout):
    r = np.zeros(lay.n)
    iv = hermitian.identity_vec(lay.nt)
    for i in range(lay.k_dl):
        r[lay.qblock(i)] = iv
    return r


def _box_rows(lay: _Layout):
    """q_j >= 0, 1 - q_j >= 0 and 1 - sum tr Q >= 0."""
    ku = lay.k_ul
    rows = np.zeros((2 * ku + 1, lay.n))
    rows_b = np.zeros(2 * ku + 1)
    for j in range(ku):
        rows[j, lay.q_off + j] = 1.0
        rows[ku + j, lay.q_off + j] = -1.0
        rows_b[ku + j] = 1.0
    rows[2 * ku] = -_trace_row(lay)
    rows_b[2 * ku] = 1.0
    names = [f"q_lo{j}" for j in range(ku)] + [f"q_hi{j}" for j in range(ku)] + ["power"]
    return rows, rows_b, names


def _interior_design(d: Design, ch: ChannelSet, weight: float = 0.9) -> Design:
    """Convex combination of ``d`` with a strictly interior reference point."""
    nt = ch.n_tx
    ref_q = np.broadcast_to(np.eye(nt) / (2.0 * nt * max(ch.k_dl, 1)), d.q_dl.shape)
    ref_u = np.full(ch.k_ul, 0.5)
    return Design(weight * d.q_dl + (1 - weight) * ref_q, weight * d.q_ul + (1 - weight) * ref_u)


def _standard_duals(prog, res, lay: _Layout):
    ku = lay.k_ul
    rd = res.row_duals
    names = prog.row_names
    out = {
        "lambda_lo": np.array([rd[names.index(f"q_lo{j}")] for j in range(ku)]),
        "lambda_hi": np.array([rd[names.index(f"q_hi{j}")] for j in range(ku)]),
        "mu": float(rd[names.index("power")]),
        "Z": [hermitian.from_vec(hermitian.to_vec(z), lay.nt) for z in res.psd_duals],
        "rows": dict(zip(names, rd)),
    }
    return out


# MAXDET ---------------------------------------------------------------------

@dataclass
class MaxdetSubproblem:
    """Maximize ``h(Q, q) - g_n(Q, q)`` with ``g_n`` linearized at ``expansion``."""
    channels: ChannelSet
    expansion: Design
    vartheta: np.ndarray = None   # DL interference-plus-noise at the expansion
    theta: np.ndarray = None      # UL noise-plus-SI covariance at the expansion

    def __post_init__(self):
        ch, d = self.channels, self.expansion
        self.vartheta = rm.downlink_interference(ch, d)
        self.theta = ch.sigma_n2_bs * np.eye(ch.n_rx) + rm.si_covariance(ch, d)
        if np.any(self.vartheta <= 0):
            raise ValueError("interference-plus-noise must be positive")

    def program(self):
        ch, d = self.channels, self.expansion
        lay = _Layout(ch)
        maps = np.zeros((lay.n, ch.n_rx, ch.n_rx), dtype=complex)
        si = _si_maps(ch)
        for i in range(ch.k_dl):
            maps[lay.qblock(i)] = si
        maps[lay.qul] = np.einsum("jm,jn->jmn", ch.h_ul, ch.h_ul.conj())
        full = LogDetTerm(ch.sigma_n2_bs * np.eye(ch.n_rx, dtype=complex), maps)
        la, lb = _dl_rows(ch, lay, exclude_self=False)
        gq, gu = rm.grad_g(ch, d)
        grad = lay.pack(Design(gq, gu))
        z_exp = lay.pack(d)
        const = -rm.dc_g(ch, d) + float(grad @ z_exp)
        rows, rows_b, names = _box_rows(lay)
        prog = ConvexProgram(lay.n, logdets=[full], log_a=la, log_b=lb, linear=-grad,
                             const=const, psd=lay.psd_blocks(), rows_a=rows, rows_b=rows_b,
                             row_names=names)
        return prog, lay


def solve_maxdet(sub: MaxdetSubproblem, settings: SolverSettings = SolverSettings()) -> SubproblemResult:
    prog, lay = sub.program()
    z0 = lay.pack(_interior_design(sub.expansion, sub.channels))
    try:
        res = barrier_newton(prog, z0, **settings.kwargs())
    except Infeasible:
        return SubproblemResult(sub.expansion, -np.inf, "infeasible", 0, np.inf)
    d = lay.design(res.z)
    return SubproblemResult(d, res.objective, res.status, res.newton_iters, res.gap,
                            duals=_standard_duals(prog, res, lay), log=res.log)


# SPCA -----------------------------------------------------------------------

def F_bound(t, beta, psi):
    """Convex upper estimate of ``t * beta`` (tight at ``psi = t / beta``)."""
    return t * t / (2.0 * psi) + psi * beta * beta / 2.0


def uplink_cov(ch: ChannelSet, d: Design, j: int):
    """Interference-plus-noise covariance seen by uplink user ``j`` after SIC."""
    cov = ch.sigma_n2_bs * np.eye(ch.n_rx) + rm.si_covariance(ch, d)
    for m in range(j + 1, ch.k_ul):
        cov = cov + d.q_ul[m] * np.outer(ch.h_ul[m], ch.h_ul[m].conj())
    return rm.hermitize(cov)


def uplink_g(ch: ChannelSet, d: Design, x, j: int) -> float:
    """``x^2 h_j^H X_j^-1 h_j`` (the uplink SINR for ``q_j = x^2``)."""
    h = ch.h_ul[j]
    c = linalg.cho_factor(uplink_cov(ch, d, j), lower=True)
    return float(x * x * np.real(h.conj() @ linalg.cho_solve(c, h)))


def _g_linearization(ch: ChannelSet, d_n: Design, x_n, j: int):
    """Value, x-slope and covariance weight of the linearization of g at the expansion."""
    h = ch.h_ul[j]
    xinv_h = linalg.cho_solve(linalg.cho_factor(uplink_cov(ch, d_n, j), lower=True), h)
    s = float(np.real(h.conj() @ xinv_h))
    w = x_n * x_n * np.outer(xinv_h, xinv_h.conj())
    return x_n * x_n * s, 2.0 * x_n * s, rm.hermitize(w)


def G_bound(ch: ChannelSet, d: Design, x, j: int, d_n: Design, x_n) -> float:
    """Affine upper bound of ``-g(x^2, Q, q)`` linearized at ``(x_n, d_n)``."""
    g0, slope, w = _g_linearization(ch, d_n, x_n, j)
    dx = uplink_cov(ch, d, j) - uplink_cov(ch, d_n, j)
    return -(g0 + slope * (x - x_n) - float(np.real(np.trace(w @ dx))))


def schur_min_eig(ch: ChannelSet, d: Design, x, j: int, alpha) -> float:
    """Smallest eigenvalue of the epigraph LMI ``[[alpha, x h^H], [x h, X_j]]``."""
    h = ch.h_ul[j]
    n = ch.n_rx
    m = np.zeros((n + 1, n + 1), dtype=complex)
    m[0, 0] = alpha
    m[0, 1:] = x * h.conj()
    m[1:, 0] = x * h
    m[1:, 1:] = uplink_cov(ch, d, j)
    return float(np.linalg.eigvalsh(m)[0])


@dataclass
class SpcaSubproblem:
    """Convex approximation with parameters ``psi`` and linearization ``(x_n, expansion)``."""
    channels: ChannelSet
    expansion: Design
    psi: np.ndarray
    x_n: np.ndarray
    x_cov: List[np.ndarray] = None

    def __post_init__(self):
        ch = self.channels
        self.psi = np.asarray(self.psi, float).reshape(ch.k_dl)
        self.x_n = np.asarray(self.x_n, float).reshape(ch.k_ul)
        if np.any(self.psi <= 0):
            raise ValueError("psi must be positive")
        self.x_cov = [uplink_cov(ch, self.expansion, j) for j in range(ch.k_ul)]

    def program(self):
        ch, d_n = self.channels, self.expansion
        kd, ku = ch.k_dl, ch.k_ul
        lay = _Layout(ch, [("tau_dl", kd), ("beta", kd), ("tau_ul", ku), ("x", ku)])
        sl = lay.extra
        a_rows, a_b = _dl_rows(ch, lay, exclude_self=False)
        b_rows, b_b = _dl_rows(ch, lay, exclude_self=True)
        rows, rows_b, rows_p, names = [], [], [], []

        def add(a, b, p=None, name=""):
            rows.append(a)
            rows_b.append(b)
            rows_p.append(np.zeros(lay.n) if p is None else p)
            names.append(name)

        for i in range(kd):
            # a_i(z) - (1 + tau)^2 / (2 psi) - psi beta^2 / 2 >= 0
            psi = self.psi[i]
            a = a_rows[i].copy()
            a[sl["tau_dl"].start + i] = -1.0 / psi
            p = np.zeros(lay.n)
            p[sl["tau_dl"].start + i] = 1.0 / psi
            p[sl["beta"].start + i] = psi
            add(a, a_b[i] - 0.5 / psi, p, f"F{i}")
        for i in range(kd):
            a = -b_rows[i]
            a[sl["beta"].start + i] = 1.0
            add(a, -b_b[i], name=f"beta{i}")
        for j in range(ku):
            # tau_j <= g0 + slope (x - x_n) - tr[W (X_j(z) - X_j^n)]
            g0, slope, w = _g_linearization(ch, d_n, self.x_n[j], j)
            a = np.zeros(lay.n)
            si = hermitian.to_vec(ch.h_si.conj().T @ w @ ch.h_si)
            for i in range(kd):
                a[lay.qblock(i)] = -si
            for m in range(j + 1, ku):
                a[lay.q_off + m] = -float(np.real(ch.h_ul[m].conj() @ w @ ch.h_ul[m]))
            a[sl["x"].start + j] = slope
            a[sl["tau_ul"].start + j] = -1.0
            b = g0 - slope * self.x_n[j] + float(np.real(np.trace(w @ self.x_cov[j]))) \
                - ch.sigma_n2_bs * float(np.real(np.trace(w)))
            add(a, b, name=f"G{j}")
        for j in range(ku):
            a = np.zeros(lay.n)
            a[lay.q_off + j] = 1.0
            p = np.zeros(lay.n)
            p[sl["x"].start + j] = 2.0
            add(a, 0.0, p, f"cone{j}")
        box, box_b, box_names = _box_rows(lay)
        for r, b, nme in zip(box, box_b, box_names):
            add(r, b, name=nme)
        for i in range(kd):
            a = np.zeros(lay.n)
            a[sl["tau_dl"].start + i] = 1.0
            add(a, 0.0, name=f"t_dl{i}")
        for j in range(ku):
            a = np.zeros(lay.n)
            a[sl["tau_ul"].start + j] = 1.0
            add(a, 0.0, name=f"t_ul{j}")

        tau_idx = list(range(sl["tau_dl"].start, sl["tau_dl"].stop)) + \
            list(range(sl["tau_ul"].start, sl["tau_ul"].stop))
        log_a = np.zeros((len(tau_idx), lay.n))
        log_a[np.arange(len(tau_idx)), tau_idx] = 1.0
        prog = ConvexProgram(lay.n, log_a=log_a, log_b=np.ones(len(tau_idx)),
                             psd=lay.psd_blocks(), rows_a=np.array(rows).reshape(-1, lay.n),
                             rows_b=np.array(rows_b), rows_p=np.array(rows_p).reshape(-1, lay.n),
                             row_names=names)
        return prog, lay

    def start(self, lay: _Layout, prog: ConvexProgram, slacks: Optional[dict] = None,
              shrink: float = 1e-6):
        """Interior starting point.

        ``slacks`` from the previous solve (with the expansion as its design)
        give a strictly feasible point.  Without them the slacks are placed a
        relative ``shrink`` inside their equality values at the expansion.
        """
        ch, d = self.channels, self.expansion
        if slacks is not None:
            return lay.pack(d, tau_dl=slacks["t_dl"] - 1.0, beta=slacks["beta"],
                            tau_ul=slacks["t_ul"] - 1.0, x=slacks["x"])
        if np.any(d.q_ul <= 0) or (ch.k_dl and np.any(np.linalg.eigvalsh(d.q_dl)[:, 0] <= 0)):
            d = Design((1 - shrink) * d.q_dl + shrink * np.eye(ch.n_tx) / (ch.n_tx * max(ch.k_dl, 1)),
                       np.clip(d.q_ul, shrink, 1 - shrink))
        a = rm.downlink_received(ch, d)
        beta = rm.downlink_interference(ch, d) * (1 + shrink)
        room = 2.0 * self.psi * (a - self.psi * beta * beta / 2.0)
        t_dl = np.sqrt(np.maximum(room, 0.0)) * (1 - shrink)
        x = np.sqrt(d.q_ul) * (1 - shrink)
        z = lay.pack(d, tau_dl=t_dl - 1.0, beta=beta, x=x)
        t_ul = np.zeros(ch.k_ul)
        for j in range(ch.k_ul):
            r = prog.row_names.index(f"G{j}")
            t_ul[j] = float(prog.rows_a[r] @ z + prog.rows_b[r]) * (1 - shrink)
        z[lay.extra["tau_ul"]] = t_ul
        return z


def solve_spca(sub: SpcaSubproblem, settings: SolverSettings = SolverSettings(),
               start: Optional[dict] = None) -> SubproblemResult:
    """Solve one SPCA subproblem; ``start`` holds the previous slacks if any."""
    prog, lay = sub.program()
    z0 = sub.start(lay, prog, start)
    try:
        if not prog.strictly_feasible(z0) and start is not None:
            z0 = sub.start(lay, prog)
        z0 = find_interior(prog, z0, **settings.kwargs())
        res = barrier_newton(prog, z0, **settings.kwargs())
    except Infeasible:
        return SubproblemResult(sub.expansion, -np.inf, "infeasible", 0, np.inf)
    d = lay.design(res.z)
    sl = lay.extra
    slacks = {
        "t_dl": 1.0 + res.z[sl["tau_dl"]],
        "beta": res.z[sl["beta"]].copy(),
        "t_ul": 1.0 + res.z[sl["tau_ul"]],
        "x": res.z[sl["x"]].copy(),
    }
    return SubproblemResult(d, res.objective, res.status, res.newton_iters, res.gap,
                            slacks=slacks, duals=_standard_duals(prog, res, lay), log=res.log)
