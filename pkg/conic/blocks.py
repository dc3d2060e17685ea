"""
Block-matrix helpers that work on numpy arrays and cvxpy expressions alike.

One assembly routine thus serves the optimization (cvxpy variables) and the
independent numeric re-check (numpy values).
"""
from typing import Any, List, Sequence

import cvxpy as cp
import numpy as np


def is_symbolic(value: Any) -> bool:
    return isinstance(value, cp.Expression)


def bmat(blocks: Sequence[Sequence[Any]]) -> Any:
    """Assemble a block matrix, returning a cvxpy expression if any block is one."""
    if any(is_symbolic(b) for row in blocks for b in row):
        return cp.bmat([list(row) for row in blocks])
    return np.block([[np.asarray(b, dtype=float) for b in row] for row in blocks])


def sym(X: Any) -> Any:
    """Symmetric part (X + X') / 2."""
    return (X + X.T) / 2


def zeros(rows: int, cols: int) -> np.ndarray:
    return np.zeros((rows, cols))


def eye(n: int) -> np.ndarray:
    return np.eye(n)


def col(v: Any) -> Any:
    """Vector as an (n, 1) column."""
    if is_symbolic(v):
        return cp.reshape(v, (v.shape[0], 1), order="F") if v.ndim == 1 else v
    v = np.asarray(v, dtype=float)
    return v.reshape(-1, 1)


def scalar_block(s: Any) -> Any:
    """Scalar as a (1, 1) block."""
    if is_symbolic(s):
        return cp.reshape(s, (1, 1), order="F")
    return np.array([[float(s)]])


def diag(v: Any) -> Any:
    if is_symbolic(v):
        return cp.diag(v)
    return np.diag(np.asarray(v, dtype=float))


def symmetric_from_upper(blocks: List[List[Any]], sizes: Sequence[int]) -> Any:
    """
    Build a symmetric block matrix from its upper triangle.

    Args:
        blocks: blocks[i][j] for j >= i (None means zero); diagonal blocks are
            symmetrized, lower blocks are the transposes of the upper ones
        sizes: Block sizes

    Returns:
        Symmetric block matrix (numpy or cvxpy)
    """
    k = len(sizes)
    full: List[List[Any]] = [[None] * k for _ in range(k)]
    for i in range(k):
        for j in range(i, k):
            b = blocks[i][j] if j < len(blocks[i]) else None
            if b is None:
                b = zeros(sizes[i], sizes[j])
            if i == j:
                full[i][i] = sym(b)
            else:
                full[i][j] = b
                full[j][i] = b.T
    return bmat(full)
