"""Kernel selection: compiled extension when built, numpy otherwise.

Set ``FULLDUPLEX_PURE_PYTHON=1`` to force the numpy versions.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py
if os.environ.get("FULLDUPLEX_PURE_PYTHON", "").lower() not in ("1", "true", "yes"):
    try:
        from . import _kernels_c as _impl  # type: ignore[attr-defined,no-redef]
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py

logdet_derivs = _impl.logdet_derivs
quad_root_min = _impl.quad_root_min
hpd_logdet = _impl.hpd_logdet
congruence_map = _impl.congruence_map
affine_sum = _impl.affine_sum
chol_inv = _impl.chol_inv
min_eig = _impl.min_eig
min_gen_eig = _impl.min_gen_eig
from_vec = _impl.from_vec

__all__ = ["BACKEND", "logdet_derivs", "quad_root_min", "hpd_logdet", "congruence_map",
           "affine_sum", "chol_inv", "min_eig", "min_gen_eig", "from_vec"]
