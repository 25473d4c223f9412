"""Reference numpy implementations of the solver kernels.

The compiled module ``_kernels_c`` exposes the same functions with the
same signatures; :mod:`.kernels` picks one at import.
"""

import numpy as np
from scipy import linalg

from . import hermitian

__all__ = ["logdet_derivs", "quad_root_min", "hpd_logdet", "congruence_map", "affine_sum",
           "chol_inv", "min_eig", "min_gen_eig", "from_vec"]


def hpd_logdet(a) -> float:
    """``log det a`` for Hermitian positive definite ``a``; ``-inf`` otherwise."""
    try:
        c = linalg.cholesky(a, lower=True, check_finite=False)
    except linalg.LinAlgError:
        return -np.inf
    return 2.0 * float(np.log(np.diag(c).real).sum())


def affine_sum(a0, maps, z):
    """``a0 + sum_a z_a maps[a]``."""
    return a0 + np.tensordot(z, maps, axes=(0, 0))


def congruence_map(s):
    """Matrix T with ``T @ to_vec(Y) == to_vec(S Y S^H)``."""
    return hermitian.congruence_map(s)


def chol_inv(q):
    """Lower Cholesky factor of ``q`` and ``q^-1``; raises ``LinAlgError`` if not PD."""
    c = linalg.cholesky(q, lower=True, check_finite=False)
    ci = linalg.solve_triangular(c, np.eye(q.shape[0]), lower=True, check_finite=False)
    return c, ci.conj().T @ ci


def min_eig(y) -> float:
    """Smallest eigenvalue of a Hermitian matrix."""
    return float(np.linalg.eigvalsh(y)[0])


def min_gen_eig(a, b) -> float:
    """Smallest eigenvalue of ``L^-1 b L^-H`` where ``a = L L^H`` is positive definite."""
    c = linalg.cholesky(a, lower=True, check_finite=False)
    m = linalg.solve_triangular(c, linalg.solve_triangular(c, b, lower=True).conj().T, lower=True)
    return float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0])


def from_vec(z, n):
    """Hermitian matrix from its orthonormal-basis coordinates."""
    return hermitian.from_vec(z, n)


def logdet_derivs(a, maps):
    """Gradient and Hessian of ``logdet(A + sum_a y_a M_a)`` at ``y = 0``.

    Parameters
    ----------
    a : (m, m) complex Hermitian positive definite
    maps : (n, m, m) complex Hermitian

    Returns
    -------
    grad : (n,) real, ``tr(A^-1 M_a)``
    hess : (n, n) real, ``-Re tr(A^-1 M_a A^-1 M_b)``
    """
    n, m = maps.shape[0], a.shape[0]
    c = linalg.cholesky(a, lower=True, check_finite=False)
    ci = linalg.solve_triangular(c, np.eye(m), lower=True, check_finite=False)
    y = ci @ maps @ ci.conj().T                      # (n, m, m), Hermitian
    grad = np.einsum("aii->a", y).real
    f = y.reshape(n, m * m)
    hess = -(f @ f.conj().T).real
    return grad, hess


def quad_root_min(c0, d1, d2):
    """Smallest positive s where some ``c0 + s d1 - 0.5 s^2 d2`` hits zero.

    Requires ``c0 > 0`` and ``d2 >= 0``; returns ``inf`` if none does.
    """
    c0 = np.asarray(c0, float)
    d1 = np.asarray(d1, float)
    d2 = np.asarray(d2, float)
    best = np.inf
    for k in range(c0.shape[0]):
        if d2[k] > 0:
            # 0.5 d2 s^2 - d1 s - c0 = 0, positive root (stable form)
            disc = np.sqrt(d1[k] * d1[k] + 2.0 * d2[k] * c0[k])
            if d1[k] >= 0:
                s = (d1[k] + disc) / d2[k]
            else:
                s = 2.0 * c0[k] / (disc - d1[k])
        elif d1[k] < 0:
            s = -c0[k] / d1[k]
        else:
            continue
        if s < best:
            best = s
    return best
