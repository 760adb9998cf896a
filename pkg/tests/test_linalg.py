import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from cgl_dg import linalg
from cgl_dg.assembly import assemble_mass, assemble_stiffness
from cgl_dg.linalg import BlockSystem, SolverError, backward_error, relative_residual, solve, solve_coupled
from cgl_dg.mesh import build_unit_square
from cgl_dg.space import DGSpace


def step_blocks(n=4, sigma=1e3, variant="NIPG", a=0.5, dt=0.01):
    space = DGSpace(build_unit_square(n), 1)
    M = assemble_mass(space)
    A = assemble_stiffness(space, variant, sigma)
    D = (M / dt + A - M).tocsr()
    C = (a * A).tocsr()
    return D, C


@pytest.mark.parametrize("method", ["direct", "iterative"])
def test_block_system_solution(method):
    D, C = step_blocks()
    rng = np.random.default_rng(0)
    x = rng.standard_normal(2 * D.shape[0])
    system = BlockSystem(((D, -C), (C, D)), np.zeros(2 * D.shape[0]))
    system.rhs = system.matrix() @ x
    got = solve(system, method)
    assert relative_residual(system.matrix(), got, system.rhs) <= 1e-10
    np.testing.assert_allclose(got, x, rtol=0, atol=1e-6 * np.abs(x).max())


def test_coupled_matches_block_form():
    D, C = step_blocks()
    rng = np.random.default_rng(1)
    r1, r2 = rng.standard_normal((2, D.shape[0]))
    x1, x2 = solve_coupled(D, C, r1, r2)
    B = sp.bmat([[D, -C], [C, D]])
    ref = np.linalg.solve(B.toarray(), np.concatenate([r1, r2]))
    np.testing.assert_allclose(np.concatenate([x1, x2]), ref, atol=1e-10 * np.abs(ref).max())


def test_large_penalty_direct_backward_error():
    D, C = step_blocks(n=6, sigma=1e8, a=1e-4, dt=2 * (np.sqrt(2) / 6) ** 2)
    rng = np.random.default_rng(2)
    r1, r2 = rng.standard_normal((2, D.shape[0]))
    x1, x2 = solve_coupled(D, C, r1, r2, "direct")
    Z = sp.csc_matrix(D + 1j * C)
    assert backward_error(Z, x1 + 1j * x2, r1 + 1j * r2) <= linalg.DIRECT_RESIDUAL_TOL


def test_zero_rhs():
    D, C = step_blocks()
    z = np.zeros(D.shape[0])
    for method in ("direct", "iterative"):
        x1, x2 = solve_coupled(D, C, z, z, method)
        assert not x1.any() and not x2.any()


def test_singular_raises():
    B = sp.csc_matrix(np.array([[1.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(SolverError):
        solve((B, np.array([1.0, 0.0])), "direct")


def test_non_finite_raises():
    B = sp.csc_matrix(np.array([[np.nan, 0.0], [0.0, 1.0]]))
    with pytest.raises(SolverError):
        solve((B, np.array([1.0, 0.0])))


def test_iterative_gives_up():
    D, C = step_blocks(sigma=1e8, dt=1.0)
    rhs = np.ones(2 * D.shape[0])
    B = sp.bmat([[D, -C], [C, D]], format="csc")
    with pytest.raises(SolverError) as info:
        linalg._solve(B, rhs, "iterative", 1e-14, 1)
    assert info.value.residual > 1e-14


def test_bad_arguments():
    D, C = step_blocks(n=1)
    with pytest.raises(ValueError):
        BlockSystem(((D, C), (C, D[:-1, :-1])), np.zeros(2 * D.shape[0]))
    with pytest.raises(ValueError):
        BlockSystem(((D, C), (C, D)), np.zeros(3))
    with pytest.raises(ValueError):
        solve((D, np.ones(D.shape[0])), "cholesky")


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 30), st.integers(0, 2**31 - 1))
def test_random_diagonally_dominant(n, seed):
    rng = np.random.default_rng(seed)
    dense = rng.standard_normal((n, n))
    dense += np.diag(np.abs(dense).sum(axis=1) + 1.0)
    x = rng.standard_normal(n)
    got = solve((sp.csc_matrix(dense), dense @ x))
    np.testing.assert_allclose(got, x, atol=1e-10 * (1 + np.abs(x).max()))
    assert backward_error(sp.csc_matrix(dense), got, dense @ x) <= 1e-10
