import numpy as np
import pytest
import scipy.sparse as sp

from polyvuln.linprog import INFEASIBLE, UNBOUNDED, LinearProgram, solve


def test_simple_maximization():
    # max x + y s.t. x + 2y <= 4, 3x + y <= 6
    lp = LinearProgram([1, 1], A_ub=[[1, 2], [3, 1]], b_ub=[4, 6], maximize=True)
    sol = solve(lp, method="simplex")
    assert sol.optimal
    assert sol.objective == pytest.approx(2.8)
    assert np.allclose(sol.x, [1.6, 1.2])


def test_equality_and_free_variables():
    lp = LinearProgram([1, -1], A_eq=[[1, 1]], b_eq=[1], bounds=[(None, None), (-2, 3)])
    sol = solve(lp, method="simplex")
    assert sol.optimal
    assert sol.objective == pytest.approx(-5.0)
    assert lp.violation(sol.x) < 1e-9


def test_infeasible_and_unbounded():
    lp = LinearProgram([1], A_ub=[[1], [-1]], b_ub=[1, -2])
    for m in ("simplex", "highs"):
        assert solve(lp, method=m).status == INFEASIBLE
    lp = LinearProgram([-1, 0], A_ub=[[0, 1]], b_ub=[1])
    for m in ("simplex", "highs"):
        assert solve(lp, method=m).status == UNBOUNDED


def test_sparse_input_matches_dense():
    rng = np.random.default_rng(3)
    A = rng.uniform(-1, 1, (6, 4))
    b = rng.uniform(0.5, 2, 6)
    c = rng.uniform(-1, 1, 4)
    dense = solve(LinearProgram(c, A_ub=A, b_ub=b, bounds=(0, 3)), method="simplex")
    sparse = solve(LinearProgram(c, A_ub=sp.csr_matrix(A), b_ub=b, bounds=(0, 3)), method="simplex")
    assert dense.objective == pytest.approx(sparse.objective, abs=1e-9)


def test_validation_errors():
    with pytest.raises(ValueError):
        LinearProgram([1, 2], A_ub=[[1, 2, 3]], b_ub=[1])
    with pytest.raises(ValueError):
        LinearProgram([np.inf])
    with pytest.raises(ValueError):
        solve(LinearProgram([1]), method="magic")


def test_matches_highs_on_random_programs():
    rng = np.random.default_rng(7)
    for _ in range(50):
        nv, m = rng.integers(2, 6), rng.integers(1, 6)
        lp = LinearProgram(rng.normal(size=nv), A_ub=rng.normal(size=(m, nv)),
                           b_ub=rng.uniform(0, 2, m), bounds=(-1, 2))
        a, b = solve(lp, method="simplex"), solve(lp, method="highs")
        assert a.status == b.status
        if a.optimal:
            assert a.objective == pytest.approx(b.objective, abs=1e-7)
