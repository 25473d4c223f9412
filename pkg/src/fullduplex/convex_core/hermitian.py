"""Real coordinates for complex Hermitian matrices.

An n x n Hermitian matrix is stored as n**2 reals in the basis that is
orthonormal for ``<A, B> = Re tr(A^H B)``: the diagonal units, symmetric
pairs ``(E_kl + E_lk)/sqrt 2`` and antisymmetric pairs
``i (E_kl - E_lk)/sqrt 2``.  With this choice the gradient of a real
function in coordinates is the coordinate vector of its matrix gradient.
"""

from functools import lru_cache

import numpy as np

__all__ = ["basis", "to_vec", "from_vec", "identity_vec", "congruence_map"]


@lru_cache(maxsize=None)
def _basis(n: int) -> np.ndarray:
    out = np.zeros((n * n, n, n), dtype=complex)
    a = 0
    for k in range(n):
        out[a, k, k] = 1.0
        a += 1
    r = 1.0 / np.sqrt(2.0)
    for k in range(n):
        for l in range(k + 1, n):
            out[a, k, l] = out[a, l, k] = r
            a += 1
            out[a, k, l] = 1j * r
            out[a, l, k] = -1j * r
            a += 1
    out.setflags(write=False)
    return out


def basis(n: int) -> np.ndarray:
    """(n*n, n, n) stack of basis matrices."""
    return _basis(int(n))


def to_vec(x) -> np.ndarray:
    """Coordinates of Hermitian ``x`` (..., n, n) -> (..., n*n)."""
    x = np.asarray(x)
    b = basis(x.shape[-1])
    # Re tr(E_a X) = Re sum_ij E_a[i, j] X[j, i]
    return np.einsum("aij,...ji->...a", b, x).real


def from_vec(z, n: int) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    return np.einsum("...a,aij->...ij", z, basis(n))


def identity_vec(n: int) -> np.ndarray:
    v = np.zeros(n * n)
    v[:n] = 1.0
    return v


def congruence_map(s) -> np.ndarray:
    """Matrix T with ``T @ to_vec(Y) == to_vec(S Y S^H)``."""
    s = np.asarray(s)
    b = basis(s.shape[0])
    ses = s @ b @ s.conj().T
    return np.einsum("bij,aji->ba", b, ses).real
