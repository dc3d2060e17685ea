"""
LCP instances and the complementarity residual shared by every checker.
"""
from dataclasses import dataclass
from typing import Tuple

import numpy as np


@dataclass(frozen=True, eq=False)
class LCPInstance:
    """LCP(q, F): find lam >= 0 with F lam + q >= 0 and lam'(F lam + q) = 0."""
    F: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        F = np.array(self.F, dtype=float)
        q = np.array(self.q, dtype=float).reshape(-1)
        if F.ndim != 2 or F.shape[0] != F.shape[1]:
            raise ValueError(f"F must be square, got shape {F.shape}")
        if F.shape[0] != q.size:
            raise ValueError(f"q has length {q.size}, expected {F.shape[0]}")
        if not (np.all(np.isfinite(F)) and np.all(np.isfinite(q))):
            raise ValueError("LCP data must be finite")
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "q", q)

    @property
    def m(self) -> int:
        return self.q.size

    def slack(self, lam: np.ndarray) -> np.ndarray:
        """w = F lam + q."""
        return self.F @ lam + self.q

    def scale(self) -> float:
        """Magnitude used to make tolerances relative."""
        if self.m == 0:
            return 1.0
        return max(1.0, float(np.max(np.abs(self.q))), float(np.max(np.abs(self.F))))


def complementarity_residual(F: np.ndarray, q: np.ndarray, lam: np.ndarray) -> float:
    """
    Largest violation of lam >= 0, F lam + q >= 0 and lam'(F lam + q) = 0.

    Args:
        F: LCP matrix
        q: LCP vector
        lam: Candidate solution

    Returns:
        Nonnegative residual (0 for an exact solution)
    """
    lam = np.asarray(lam, dtype=float)
    if lam.size == 0:
        return 0.0
    w = F @ lam + q
    return float(max(0.0, -lam.min(), -w.min(), abs(lam @ w)))


def active_set(lam: np.ndarray, tol: float) -> Tuple[int, ...]:
    """Indices with lam_i > tol."""
    return tuple(int(i) for i in np.flatnonzero(lam > tol))
