"""Path-following log-barrier Newton method for small dense convex programs.

Problem class (all data real or complex Hermitian, variables real)::

    maximize    sum_l w_l logdet(A_l + sum_a z_a M_la)
              + sum_k log(r_k . z + s_k) + c . z + const
    subject to  Herm(z[block]) >= 0       (PSD variable blocks)
                A z + b - 0.5 * P (z*z) >= 0   (rows, P >= 0 elementwise)

Hermitian blocks use the coordinates of :mod:`.hermitian`.  Each Newton
step works in coordinates scaled by the congruence ``Y -> L Y L^H`` with
``Q = L L^H`` the Cholesky factorization of the current block, so the
barrier Hessian of every PSD block is the identity.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy import linalg

from . import hermitian, kernels

log = logging.getLogger(__name__)

__all__ = ["LogDetTerm", "PsdBlock", "ConvexProgram", "BarrierResult",
           "barrier_newton", "find_interior", "Infeasible", "kkt_residual"]


class Infeasible(RuntimeError):
    """No strictly feasible point could be found."""


@dataclass
class LogDetTerm:
    a0: np.ndarray            # (m, m) Hermitian
    maps: np.ndarray          # (n, m, m) Hermitian image of each coordinate
    weight: float = 1.0

    def matrix(self, z):
        return kernels.affine_sum(self.a0, self.maps, z)


@dataclass
class PsdBlock:
    offset: int
    dim: int
    name: str

    @property
    def stop(self):
        return self.offset + self.dim * self.dim


@dataclass
class ConvexProgram:
    n: int
    logdets: List[LogDetTerm] = field(default_factory=list)
    log_a: Optional[np.ndarray] = None     # (k, n)
    log_b: Optional[np.ndarray] = None     # (k,)
    linear: Optional[np.ndarray] = None    # (n,)
    const: float = 0.0
    psd: List[PsdBlock] = field(default_factory=list)
    rows_a: Optional[np.ndarray] = None    # (m, n)
    rows_b: Optional[np.ndarray] = None    # (m,)
    rows_p: Optional[np.ndarray] = None    # (m, n), >= 0
    row_names: List[str] = field(default_factory=list)

    def __post_init__(self):
        n = self.n
        if self.log_a is None:
            self.log_a, self.log_b = np.zeros((0, n)), np.zeros(0)
        if self.linear is None:
            self.linear = np.zeros(n)
        if self.rows_a is None:
            self.rows_a, self.rows_b = np.zeros((0, n)), np.zeros(0)
        self.log_a = np.asarray(self.log_a, float).reshape(-1, n)
        self.log_b = np.asarray(self.log_b, float).reshape(-1)
        self.linear = np.asarray(self.linear, float).reshape(n)
        self.rows_a = np.asarray(self.rows_a, float).reshape(-1, n)
        self.rows_b = np.asarray(self.rows_b, float).reshape(-1)
        if self.rows_p is None:
            self.rows_p = np.zeros_like(self.rows_a)
        self.rows_p = np.asarray(self.rows_p, float).reshape(-1, n)
        if not self.row_names:
            self.row_names = [f"row{r}" for r in range(self.rows_a.shape[0])]
        if np.any(self.rows_p < 0):
            raise ValueError("quadratic row coefficients must be nonnegative")
        mask = self._psd_mask()
        if np.any(self.rows_p[:, mask] != 0):
            raise ValueError("quadratic row terms may not touch PSD block coordinates")

    def _psd_mask(self):
        mask = np.zeros(self.n, dtype=bool)
        for b in self.psd:
            mask[b.offset:b.stop] = True
        return mask

    @property
    def degree(self) -> int:
        return sum(b.dim for b in self.psd) + self.rows_a.shape[0]

    # evaluation ------------------------------------------------------------
    def block(self, z, b: PsdBlock):
        return kernels.from_vec(z[b.offset:b.stop], b.dim)

    def rows(self, z):
        return self.rows_a @ z + self.rows_b - 0.5 * (self.rows_p @ (z * z))

    def rows_grad(self, z):
        return self.rows_a - self.rows_p * z[None, :]

    def objective(self, z) -> float:
        """Objective value, ``-inf`` outside its domain."""
        val = self.const + float(self.linear @ z)
        if self.log_a.shape[0]:
            r = self.log_a @ z + self.log_b
            if np.any(r <= 0):
                return -np.inf
            val += float(np.log(r).sum())
        for term in self.logdets:
            ld = kernels.hpd_logdet(term.matrix(z))
            if ld == -np.inf:
                return -np.inf
            val += term.weight * ld
        return val

    def objective_grad(self, z):
        """Gradient of the objective in plain coordinates."""
        g = self.linear.copy()
        if self.log_a.shape[0]:
            g += (self.log_a / (self.log_a @ z + self.log_b)[:, None]).sum(axis=0)
        for term in self.logdets:
            inv = linalg.inv(term.matrix(z))
            g += term.weight * np.einsum("aij,ji->a", term.maps, inv).real
        return g

    def strictly_feasible(self, z, margin=0.0) -> bool:
        if np.any(self.rows(z) <= margin):
            return False
        for b in self.psd:
            if kernels.hpd_logdet(self.block(z, b)) == -np.inf:
                return False
        return np.isfinite(self.objective(z))

    def barrier_value(self, z, t) -> float:
        """``-t f0(z) + phi(z)``; ``inf`` outside the interior."""
        c = self.rows(z)
        if np.any(c <= 0):
            return np.inf
        val = -float(np.log(c).sum())
        for b in self.psd:
            ld = kernels.hpd_logdet(self.block(z, b))
            if ld == -np.inf:
                return np.inf
            val -= ld
        f = self.objective(z)
        if not np.isfinite(f):
            return np.inf
        return val - t * f


@dataclass
class BarrierResult:
    z: np.ndarray
    objective: float
    status: str                    # optimal | max_iter | numerical_failure | infeasible
    t: float
    gap: float
    row_duals: np.ndarray
    psd_duals: List[np.ndarray]
    newton_iters: int
    log: list = field(default_factory=list)

    def dual(self, prog: ConvexProgram, name: str):
        for b, zb in zip(prog.psd, self.psd_duals):
            if b.name == name:
                return zb
        return self.row_duals[prog.row_names.index(name)]


def _scaling(prog: ConvexProgram, z):
    """Block-diagonal scaling T, Cholesky factors and inverses of the PSD blocks.

    With ``Q = L L^H`` the step ``dQ = L Y L^H`` turns ``-logdet`` into
    ``-logdet(I + Y)`` up to a constant: unit Hessian, gradient ``-I``.
    """
    n = prog.n
    t_mat = np.eye(n)
    roots, invs = [], []
    for b in prog.psd:
        try:
            low, inv = kernels.chol_inv(prog.block(z, b))
        except np.linalg.LinAlgError:
            w, v = np.linalg.eigh(prog.block(z, b))
            w = np.maximum(w, 1e-300)
            low, inv = (v * np.sqrt(w)) @ v.conj().T, (v / w) @ v.conj().T
        roots.append(low)
        invs.append(inv)
        t_mat[b.offset:b.stop, b.offset:b.stop] = kernels.congruence_map(low)
    return t_mat, roots, invs


def _newton_system(prog: ConvexProgram, z, t, t_mat):
    """Gradient and Hessian of ``-t f0 + phi`` in scaled coordinates."""
    n = prog.n
    grad = -t * (prog.linear @ t_mat)
    hess = np.zeros((n, n))
    if prog.log_a.shape[0]:
        r = prog.log_a @ z + prog.log_b
        la = (prog.log_a @ t_mat) / r[:, None]
        grad -= t * la.sum(axis=0)
        hess += t * (la.T @ la)
    for term in prog.logdets:
        maps = np.tensordot(t_mat, term.maps, axes=(0, 0))
        g_ld, h_ld = kernels.logdet_derivs(term.matrix(z), maps)
        grad -= t * term.weight * g_ld
        hess -= t * term.weight * h_ld
    if prog.rows_a.shape[0]:
        c = prog.rows(z)
        gr = (prog.rows_grad(z) @ t_mat) / c[:, None]
        grad -= gr.sum(axis=0)
        hess += gr.T @ gr
        hess[np.diag_indices(n)] += (prog.rows_p / c[:, None]).sum(axis=0)
    for b in prog.psd:
        grad[b.offset:b.offset + b.dim] -= 1.0
        idx = np.arange(b.offset, b.stop)
        hess[idx, idx] += 1.0
    return grad, hess


def _solve_newton(grad, hess):
    d = np.sqrt(np.maximum(np.diag(hess), 1e-300))
    hs = hess / d[:, None] / d[None, :]
    rhs = -grad / d
    try:
        c = linalg.cho_factor(hs, lower=True, check_finite=False)
        y = linalg.cho_solve(c, rhs, check_finite=False)
    except linalg.LinAlgError:
        w, v = np.linalg.eigh(hs)
        w = np.maximum(w, 1e-12 * max(w.max(), 1.0))
        y = v @ ((v.T @ rhs) / w)
    return y / d


def _max_step(prog: ConvexProgram, z, dz, dy, roots):
    """Largest s with z + s dz in the interior of the barrier/objective domain."""
    s_max = np.inf
    for b in prog.psd:
        ev = kernels.min_eig(kernels.from_vec(dy[b.offset:b.stop], b.dim))
        if ev < 0:
            s_max = min(s_max, -1.0 / ev)
    if prog.rows_a.shape[0]:
        c0 = prog.rows(z)
        d1 = prog.rows_grad(z) @ dz
        d2 = prog.rows_p @ (dz * dz)
        s_max = min(s_max, kernels.quad_root_min(c0, d1, d2))
    if prog.log_a.shape[0]:
        r0 = prog.log_a @ z + prog.log_b
        r1 = prog.log_a @ dz
        neg = r1 < 0
        if np.any(neg):
            s_max = min(s_max, float(np.min(-r0[neg] / r1[neg])))
    for term in prog.logdets:
        da = kernels.affine_sum(np.zeros_like(term.a0), term.maps, dz)
        ev = kernels.min_gen_eig(term.matrix(z), da)
        if ev < 0:
            s_max = min(s_max, -1.0 / ev)
    return s_max


def _duals(prog, z, t, invs):
    c = prog.rows(z)
    return 1.0 / (t * c), [inv / t for inv in invs]


def barrier_newton(prog: ConvexProgram, z0, *, t0: Optional[float] = None,
                   mu: float = 10.0, gap_tol: float = 1e-7, newton_tol: float = 1e-9,
                   max_newton: int = 400, verbose: bool = False,
                   stop_when: Optional[Callable[[np.ndarray], bool]] = None) -> BarrierResult:
    """Maximize ``prog`` from the strictly feasible point ``z0``.

    The outer loop multiplies the barrier weight by ``mu`` until the
    duality-gap bound ``m / t`` falls below ``gap_tol * max(1, |f0|)``.
    Each centering runs Newton steps until ``lambda^2 / 2 <= newton_tol``.
    """
    z = np.array(z0, dtype=float)
    if not prog.strictly_feasible(z):
        raise Infeasible("starting point is not strictly feasible")
    m = max(prog.degree, 1)
    f = prog.objective(z)
    t = max(1.0, m / max(1.0, abs(f))) if t0 is None else max(1.0, float(t0))
    iters, lines = 0, []
    status = "max_iter"
    invs = []

    def record(*items):
        if verbose:
            lines.append(items)
            log.debug("t=%.3e it=%d lambda2=%.3e step=%.3e gap=%.3e", *items)

    centers = []
    while True:
        # late on the central path z(t) ~ z* + v / t, so z(mu t) - z(t) is
        # about (z(t) - z(t / mu)) / mu; take that predictor when it helps
        if len(centers) >= 2:
            z_try = z + (centers[-1] - centers[-2]) / mu
            if prog.barrier_value(z_try, t) < prog.barrier_value(z, t):
                z = z_try
        # centering
        centered = False
        while iters < max_newton:
            t_mat, roots, invs = _scaling(prog, z)
            grad, hess = _newton_system(prog, z, t, t_mat)
            dy = _solve_newton(grad, hess)
            lam2 = float(-grad @ dy)
            if not np.isfinite(lam2):
                status = "numerical_failure"
                break
            if lam2 / 2.0 <= newton_tol:
                centered = True
                break
            dz = t_mat @ dy
            s_max = _max_step(prog, z, dz, dy, roots)
            lam = np.sqrt(max(lam2, 0.0))
            s = min(1.0, 0.99 * s_max)
            if lam > 0.25 or s < 1.0:
                f_cur = prog.barrier_value(z, t)
                s_damp = min(1.0 / (1.0 + lam), 0.99 * s_max)
                while s > s_damp:
                    if prog.barrier_value(z + s * dz, t) <= f_cur - 0.25 * s * lam2:
                        break
                    s *= 0.5
                s = max(s, s_damp)
            z_new = z + s * dz
            iters += 1
            if not np.isfinite(prog.barrier_value(z_new, t)):
                status = "numerical_failure"
                break
            z = z_new
            record(t, iters, lam2, s, m / t)
            if stop_when is not None and stop_when(z):
                f = prog.objective(z)
                row_d, psd_d = _duals(prog, z, t, _scaling(prog, z)[2])
                return BarrierResult(z, f, "stopped", t, m / t, row_d, psd_d, iters, lines)
            if s < 1e-14:
                status = "numerical_failure"
                break
        f = prog.objective(z)
        if not centered:
            break
        record(t, iters, lam2, 0.0, m / t)
        if m / t <= gap_tol * max(1.0, abs(f)):
            status = "optimal"
            break
        centers.append(z.copy())
        t *= mu
    _, _, invs = _scaling(prog, z)
    row_d, psd_d = _duals(prog, z, t, invs)
    return BarrierResult(z, f, status, t, m / t, row_d, psd_d, iters, lines)


def find_interior(prog: ConvexProgram, z0, *, s_floor: float = 1.0, **kw) -> np.ndarray:
    """Strictly feasible point for ``prog`` starting from ``z0``.

    ``z0`` must already be strictly inside every PSD block.  Rows are
    relaxed by a shared slack ``s`` which is driven below zero by the
    barrier method.
    """
    z0 = np.asarray(z0, dtype=float)
    if prog.strictly_feasible(z0):
        return z0
    for b in prog.psd:
        try:
            linalg.cholesky(prog.block(z0, b), lower=True)
        except linalg.LinAlgError as exc:
            raise Infeasible(f"start is not inside PSD block {b.name}") from exc
    n, m = prog.n, prog.rows_a.shape[0]
    # rows are rescaled to unit size at z0 so that one shared slack fits all
    scale = 1.0 / np.maximum(1.0, np.abs(prog.rows(z0)))
    c0 = prog.rows(z0) * scale
    s0 = max(0.0, -float(c0.min(initial=0.0))) + 1.0
    rows_a = np.zeros((m + 1, n + 1))
    rows_a[:m, :n] = prog.rows_a * scale[:, None]
    rows_a[:m, n] = 1.0
    rows_a[m, n] = 1.0
    rows_p = np.zeros((m + 1, n + 1))
    rows_p[:m, :n] = prog.rows_p * scale[:, None]
    linear = np.zeros(n + 1)
    linear[n] = -1.0
    aux = ConvexProgram(n + 1, linear=linear, psd=list(prog.psd), rows_a=rows_a,
                        rows_b=np.append(prog.rows_b * scale, s_floor + s0), rows_p=rows_p)
    za = np.append(z0, s0)
    res = barrier_newton(aux, za, stop_when=lambda y: y[-1] < 0 and prog.strictly_feasible(y[:-1]), **kw)
    if res.status != "stopped":
        raise Infeasible(f"phase I ended with slack {res.z[-1]:.3e} ({res.status})")
    return res.z[:-1]


def kkt_residual(prog: ConvexProgram, z, row_duals, psd_duals) -> dict:
    """Scaled stationarity and complementarity residuals of ``(z, duals)``.

    Stationarity of ``f0 + sum lambda_r c_r + sum <Z_b, Q_b>``; each residual
    is divided by one plus the norms of the terms that enter it.
    """
    z = np.asarray(z, float)
    lam = np.asarray(row_duals, float)
    g0 = prog.objective_grad(z)
    terms = lam[:, None] * prog.rows_grad(z)
    zt = np.zeros(prog.n)
    comp_psd = 0.0
    zn = 0.0
    for b, zb in zip(prog.psd, psd_duals):
        zt[b.offset:b.stop] = hermitian.to_vec(zb)
        comp_psd += abs(float(np.trace(zb @ prog.block(z, b)).real))
        zn += float(np.linalg.norm(zb))
    r = g0 + terms.sum(axis=0) + zt
    scale = 1.0 + np.linalg.norm(g0) + np.linalg.norm(terms, axis=1).sum() + zn
    comp_rows = np.abs(lam * prog.rows(z))
    f = abs(prog.objective(z))
    return {
        "stationarity": float(np.linalg.norm(r) / scale),
        "complementarity": float((comp_rows.sum() + comp_psd) / (1.0 + f)),
        "comp_max": float(max(comp_rows.max(initial=0.0), comp_psd)),
        "min_row": float(prog.rows(z).min(initial=np.inf)),
    }
