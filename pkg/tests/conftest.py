import itertools

import numpy as np
import pytest

from restartlp import SaddlePoint, SparseMatrix


def random_sparse(m, n, density, rng):
    """Random sparse matrix without duplicate entries."""
    nnz = max(1, int(round(m * n * density)))
    flat = rng.choice(m * n, size=nnz, replace=False)
    rows, cols = np.divmod(flat, n)
    return SparseMatrix(m, n, rows, cols, rng.standard_normal(nnz))


def feasible_point(problem, rng, scale=1.0):
    """Random point in the feasible region (x >= 0 when required)."""
    x = rng.standard_normal(problem.n) * scale
    if problem.nonneg:
        x = np.abs(x)
    y = rng.standard_normal(problem.m) * scale
    return SaddlePoint(x, y)


def brute_force_lp(problem, tol=1e-9):
    """Reference optimum of a tiny LP by basic-feasible-solution enumeration.

    Solves min c'x, Ax = b, x >= 0 by trying every column subset of size
    rank(A); independent of every iterative code path in the package.
    """
    A = problem.A.to_dense()
    b, c = problem.b, problem.c
    m, n = A.shape
    if n > 14:
        raise ValueError("enumeration reference is for tiny instances")
    rank = int(np.linalg.matrix_rank(A)) if A.size else 0
    best_val, best_x = np.inf, None

    def consider(x):
        nonlocal best_val, best_x
        if x.size and np.min(x) < -tol:
            return
        if np.linalg.norm(A @ x - b) > tol * (1.0 + np.linalg.norm(b)):
            return
        val = float(c @ x)
        if val < best_val:
            best_val, best_x = val, x

    consider(np.zeros(n))
    for size in range(1, min(rank, n) + 1):
        for cols in itertools.combinations(range(n), size):
            sub = A[:, cols]
            sol, *_ = np.linalg.lstsq(sub, b, rcond=None)
            x = np.zeros(n)
            x[list(cols)] = sol
            consider(x)
    return best_val, best_x


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
