"""Compiled kernels against the numpy fallback.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--no-solve]

The first table times each kernel on matrices of the sizes the barrier
solver sees (``n`` = antennas, ``m`` = Hermitian coordinates).  The second
runs one MAXDET design end to end in a subprocess per backend, since the
backend is fixed at import (``FULLDUPLEX_PURE_PYTHON``).
"""

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from fullduplex.convex_core import _kernels_py

try:
    from fullduplex.convex_core import _kernels_c
except ImportError:  # extension not built
    _kernels_c = None


def _herm(rng, n, pd=False):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return a @ a.conj().T + n * np.eye(n) if pd else (a + a.conj().T) / 2


def _cases(n, n_maps, rng):
    a = _herm(rng, n, pd=True)
    maps = np.array([_herm(rng, n) for _ in range(n_maps)])
    z = rng.standard_normal(n_maps)
    low = np.linalg.cholesky(a)
    b = _herm(rng, n)
    c0, d1, d2 = rng.uniform(0.1, 1, 64), rng.standard_normal(64), rng.uniform(0, 1, 64)
    return {
        "hpd_logdet": lambda k: k.hpd_logdet(a),
        "affine_sum": lambda k: k.affine_sum(a, maps, z),
        "logdet_derivs": lambda k: k.logdet_derivs(a, maps),
        "congruence_map": lambda k: k.congruence_map(low),
        "chol_inv": lambda k: k.chol_inv(a),
        "min_gen_eig": lambda k: k.min_gen_eig(a, b),
        "quad_root_min": lambda k: k.quad_root_min(c0, d1, d2),
    }


def bench_kernels(repeat):
    rng = np.random.default_rng(0)
    rows = []
    for n, n_maps in ((2, 8), (4, 32), (8, 64)):
        for name, fn in _cases(n, n_maps, rng).items():
            row = {"kernel": name, "n": n, "maps": n_maps}
            for label, mod in (("python", _kernels_py), ("cython", _kernels_c)):
                if mod is None:
                    row[label] = float("nan")
                    continue
                t = timeit.Timer(lambda: fn(mod))
                loops, _ = t.autorange()
                row[label] = min(t.repeat(repeat, loops)) / loops * 1e6
            rows.append(row)
    return rows


_SOLVE = """
import json, time
from fullduplex import algorithms as alg
from fullduplex.channel_model import generate, iid_config, make_rng
from fullduplex.convex_core import kernels
cfg = iid_config(n_tx=4, n_rx=4, k_dl=4, k_ul=4, seed=5, n_random=100)
ch = generate(cfg, make_rng(5, 2))
t = time.perf_counter()
sol = alg.run_algorithm1(cfg, ch, rng=make_rng(5, 3), extract=False)
print(json.dumps({"backend": kernels.BACKEND, "seconds": time.perf_counter() - t,
                  "iterations": sol.iterations, "se": sol.se_relaxed}))
"""


def bench_solve():
    out = []
    for pure in ("1", "0"):
        env = dict(os.environ, FULLDUPLEX_PURE_PYTHON=pure)
        res = subprocess.run([sys.executable, "-c", _SOLVE], env=env, capture_output=True,
                             text=True, check=True)
        out.append(json.loads(res.stdout))
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--no-solve", action="store_true", help="skip the end-to-end design")
    args = ap.parse_args(argv)
    if _kernels_c is None:
        print("compiled extension not built; only the numpy column is timed", file=sys.stderr)
    print(f"{'kernel':<16}{'n':>3}{'maps':>6}{'numpy us':>12}{'cython us':>12}{'speedup':>9}")
    for r in bench_kernels(args.repeat):
        print(f"{r['kernel']:<16}{r['n']:>3}{r['maps']:>6}{r['python']:>12.2f}{r['cython']:>12.2f}"
              f"{r['python'] / r['cython']:>9.1f}")
    if not args.no_solve:
        print("\nalgorithm 1, i.i.d. 4x4, K_D = K_U = 4")
        for r in bench_solve():
            print(f"  {r['backend']:<7} {r['seconds']:7.2f} s  {r['iterations']:3d} iterations  "
                  f"SE {r['se']:.6f}")


if __name__ == "__main__":
    main()
