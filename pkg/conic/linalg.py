"""
Linear-algebra helpers shared by the certificate and Find-W programs.
"""
from typing import Optional

import numpy as np
from scipy.linalg import null_space

from config import settings


def nullspace_basis(M: np.ndarray, rank_tol: Optional[float] = None, n_cols: Optional[int] = None) -> np.ndarray:
    """
    Orthonormal basis of the nullspace of M.

    Args:
        M: Matrix (an empty matrix with n_cols columns is allowed)
        rank_tol: Relative singular-value cutoff; defaults to
            settings.rank_tol scaled by the largest dimension
        n_cols: Column count when M has no rows and no shape information

    Returns:
        Matrix N with orthonormal columns and M N ~ 0; shape (m, 0) when
        M has full column rank, identity when M has no rows
    """
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M.reshape(1, -1) if M.size else M.reshape(0, n_cols or 0)
    m = M.shape[1]
    if M.shape[0] == 0 or not np.any(M):
        return np.eye(m)
    if rank_tol is None:
        rank_tol = settings.rank_tol * max(M.shape)
    return null_space(M, rcond=rank_tol)
