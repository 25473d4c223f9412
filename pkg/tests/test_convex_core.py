import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import optimize

from fullduplex.channel_model import make_rng
from fullduplex.convex_core import _kernels_py, barrier, hermitian, kernels
from fullduplex.convex_core.barrier import (ConvexProgram, Infeasible, LogDetTerm, PsdBlock,
                                            barrier_newton, find_interior)

try:
    from fullduplex.convex_core import _kernels_c
except ImportError:  # extension not built
    _kernels_c = None

needs_ext = pytest.mark.skipif(_kernels_c is None, reason="compiled kernels not built")


def _herm(rng, n, pd=False):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return a @ a.conj().T + n * np.eye(n) if pd else (a + a.conj().T) / 2


# coordinates --------------------------------------------------------------

@given(st.integers(1, 6), st.integers(0, 2 ** 20))
def test_hermitian_roundtrip(n, seed):
    x = _herm(make_rng(seed), n)
    assert np.allclose(hermitian.from_vec(hermitian.to_vec(x), n), x)


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_basis_is_orthonormal(n):
    b = hermitian.basis(n)
    gram = np.einsum("aij,bij->ab", b.conj(), b).real
    assert np.allclose(gram, np.eye(n * n))
    assert np.allclose(b, np.conj(np.swapaxes(b, 1, 2)))


@given(st.integers(1, 5), st.integers(0, 2 ** 20))
def test_inner_product_is_trace(n, seed):
    rng = make_rng(seed)
    x, y = _herm(rng, n), _herm(rng, n)
    assert hermitian.to_vec(x) @ hermitian.to_vec(y) == pytest.approx(np.trace(x @ y).real)


@given(st.integers(1, 5), st.integers(0, 2 ** 20))
def test_congruence_map(n, seed):
    rng = make_rng(seed)
    s = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    y = _herm(rng, n)
    t = hermitian.congruence_map(s)
    assert np.allclose(t @ hermitian.to_vec(y), hermitian.to_vec(s @ y @ s.conj().T))


# kernels ------------------------------------------------------------------

def test_backend_flag():
    assert kernels.BACKEND in ("cython", "python")


@needs_ext
@given(st.integers(1, 6), st.integers(0, 2 ** 20))
def test_compiled_kernels_match_numpy(n, seed):
    rng = make_rng(seed)
    a = _herm(rng, n, pd=True)
    maps = np.array([_herm(rng, n) for _ in range(4)])
    z = rng.standard_normal(4)
    py, c = _kernels_py, _kernels_c
    assert c.hpd_logdet(a) == pytest.approx(py.hpd_logdet(a), rel=1e-12)
    assert np.allclose(c.affine_sum(a, maps, z), py.affine_sum(a, maps, z))
    low = np.linalg.cholesky(a)
    assert np.allclose(c.congruence_map(low), py.congruence_map(low))
    l1, i1 = c.chol_inv(a)
    l2, i2 = py.chol_inv(a)
    assert np.allclose(l1, l2) and np.allclose(i1, i2)
    b = _herm(rng, n)
    assert c.min_eig(b) == pytest.approx(py.min_eig(b), abs=1e-10)
    assert c.min_gen_eig(a, b) == pytest.approx(py.min_gen_eig(a, b), abs=1e-10)
    g1, h1 = c.logdet_derivs(a, maps)
    g2, h2 = py.logdet_derivs(a, maps)
    assert np.allclose(g1, g2) and np.allclose(h1, h2)
    v = rng.standard_normal(n * n)
    assert np.allclose(c.from_vec(v, n), py.from_vec(v, n))
    c0, d1, d2 = rng.uniform(0.1, 1, 5), rng.standard_normal(5), rng.uniform(0, 1, 5)
    assert c.quad_root_min(c0, d1, d2) == pytest.approx(py.quad_root_min(c0, d1, d2))


def test_hpd_logdet_outside_cone():
    assert _kernels_py.hpd_logdet(np.diag([1.0, -1.0])) == -np.inf
    if _kernels_c is not None:
        assert _kernels_c.hpd_logdet(np.diag([1.0, -1.0]).astype(complex)) == -np.inf


@given(st.integers(1, 5), st.integers(0, 2 ** 20))
def test_logdet_derivatives_finite_difference(n, seed):
    rng = make_rng(seed)
    a = _herm(rng, n, pd=True)
    maps = np.array([_herm(rng, n) for _ in range(3)])
    g, h = kernels.logdet_derivs(a, maps)
    eps = 1e-6
    for k in range(3):
        fd = (kernels.hpd_logdet(a + eps * maps[k]) - kernels.hpd_logdet(a - eps * maps[k])) / (2 * eps)
        assert g[k] == pytest.approx(fd, rel=1e-5, abs=1e-7)
    def grad_at(m):
        return kernels.logdet_derivs(m, maps)[0]
    fd_h = (grad_at(a + eps * maps[0]) - grad_at(a - eps * maps[0])) / (2 * eps)
    assert np.allclose(h[0], fd_h, rtol=1e-4, atol=1e-7)


def test_quad_root_min():
    # c0 + s d1 - s^2 d2 / 2 hits zero at s = 1 for (1, 0, 2) and s = 2 for (2, -1, 0)
    s = kernels.quad_root_min(np.array([1.0, 2.0]), np.array([0.0, -1.0]), np.array([2.0, 0.0]))
    assert s == pytest.approx(1.0)
    assert kernels.quad_root_min(np.array([1.0]), np.array([1.0]), np.array([0.0])) == np.inf


# barrier solver -----------------------------------------------------------

def _psd_trace_program(n, budget):
    """maximize logdet Q s.t. tr Q <= budget."""
    b = hermitian.basis(n)
    row = hermitian.to_vec(np.eye(n))
    return ConvexProgram(n * n, logdets=[LogDetTerm(np.zeros((n, n), complex), b)],
                         psd=[PsdBlock(0, n, "Q")], rows_a=-row[None], rows_b=[budget])


def test_logdet_with_trace_budget():
    prog = _psd_trace_program(3, 3.0)
    z0 = 0.5 * hermitian.identity_vec(3)
    res = barrier_newton(prog, z0)
    assert res.status == "optimal"
    assert np.allclose(hermitian.from_vec(res.z, 3), np.eye(3), atol=1e-6)
    # dual of the budget row is 1/(budget/n) = 1
    assert res.row_duals[0] == pytest.approx(1.0, rel=1e-5)


def test_scalar_log_on_interval():
    prog = ConvexProgram(1, log_a=[[1.0]], log_b=[0.0], rows_a=[[1.0], [-1.0]], rows_b=[-1.0, 5.0])
    res = barrier_newton(prog, np.array([2.0]))
    assert res.z[0] == pytest.approx(5.0, abs=1e-6)


@pytest.mark.parametrize("seed", range(6))
def test_linear_program_matches_linprog(seed):
    rng = make_rng(seed, 11)
    n, m = 4, 9
    a = rng.standard_normal((m, n))
    z_in = rng.standard_normal(n)
    b = a @ z_in + rng.uniform(0.5, 2.0, m)
    c = rng.standard_normal(n)
    box = np.vstack([np.eye(n), -np.eye(n)])
    rows_a = -np.vstack([a, box])
    rows_b = np.concatenate([b, np.full(2 * n, 10.0)])
    prog = ConvexProgram(n, linear=c, rows_a=rows_a, rows_b=rows_b)
    z0 = find_interior(prog, np.zeros(n))
    res = barrier_newton(prog, z0, gap_tol=1e-10)
    ref = optimize.linprog(-c, A_ub=-rows_a, b_ub=rows_b, bounds=[(None, None)] * n,
                           method="highs")
    assert -ref.fun == pytest.approx(res.objective, rel=1e-7, abs=1e-7)


def _waterfill(gains, p):
    gains = np.sort(gains)[::-1]
    for k in range(len(gains), 0, -1):
        mu = (p + np.sum(1 / gains[:k])) / k
        if mu - 1 / gains[k - 1] > 0:
            return float(np.sum(np.log(mu * gains[:k])))
    return 0.0


@pytest.mark.parametrize("seed", range(5))
def test_mimo_capacity_matches_water_filling(seed):
    # maximize logdet(I + H Q H^H) over tr Q <= P: the classic water-filling oracle
    rng = make_rng(seed, 12)
    n, m, p = 3, 2, 2.5
    h = (rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))) / np.sqrt(2)
    b = hermitian.basis(n)
    maps = h[None] @ b @ h.conj().T[None]
    prog = ConvexProgram(n * n, logdets=[LogDetTerm(np.eye(m, dtype=complex), maps)],
                         psd=[PsdBlock(0, n, "Q")],
                         rows_a=-hermitian.to_vec(np.eye(n))[None], rows_b=[p])
    res = barrier_newton(prog, 0.1 * hermitian.identity_vec(n), gap_tol=1e-10)
    gains = np.linalg.eigvalsh(h.conj().T @ h)
    gains = gains[gains > 1e-12]
    assert res.objective == pytest.approx(_waterfill(gains, p), rel=1e-7)
    kkt = barrier.kkt_residual(prog, res.z, res.row_duals, res.psd_duals)
    # centering stops at lambda^2/2 <= 1e-9, which bounds stationarity near 1e-6
    assert kkt["stationarity"] < 1e-5 and kkt["complementarity"] < 1e-6


def test_find_interior_recovers_feasible_point():
    prog = ConvexProgram(2, linear=[1.0, 1.0], rows_a=[[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]],
                         rows_b=[-3.0, -2.0, 10.0])
    z = find_interior(prog, np.zeros(2))
    assert prog.strictly_feasible(z)


def test_find_interior_reports_infeasible():
    prog = ConvexProgram(1, rows_a=[[1.0], [-1.0]], rows_b=[-2.0, 1.0])
    with pytest.raises(Infeasible):
        find_interior(prog, np.zeros(1), max_newton=200)


def test_barrier_rejects_infeasible_start():
    prog = _psd_trace_program(2, 1.0)
    with pytest.raises(Infeasible):
        barrier_newton(prog, 2 * hermitian.identity_vec(2))


def test_quadratic_rows_validation():
    with pytest.raises(ValueError):
        ConvexProgram(1, rows_a=[[1.0]], rows_b=[1.0], rows_p=[[-1.0]])
    with pytest.raises(ValueError):
        ConvexProgram(1, psd=[PsdBlock(0, 1, "q")], rows_a=[[1.0]], rows_b=[1.0], rows_p=[[1.0]])


def test_quadratic_row_disk():
    # maximize x + y on the unit disk: optimum sqrt 2
    prog = ConvexProgram(2, linear=[1.0, 1.0], rows_a=np.zeros((1, 2)), rows_b=[0.5],
                         rows_p=[[1.0, 1.0]])
    res = barrier_newton(prog, np.zeros(2), gap_tol=1e-10)
    assert res.objective == pytest.approx(np.sqrt(2.0), rel=1e-8)
