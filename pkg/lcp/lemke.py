"""
Lemke's complementary pivoting with a lexicographic ratio test.

Tableau layout (one row per basic variable):

    [ I | -F | -e | q ]     columns w_0..w_{m-1}, z_0..z_{m-1}, z0, rhs

The covering vector e is all ones. The w-columns hold the current basis
inverse, which the lexicographic rule uses to break ratio ties.
"""
from dataclasses import dataclass, field
from typing import Optional, Tuple
import logging

import numpy as np

from lcp.problem import LCPInstance, complementarity_residual, active_set
from config import settings

logger = logging.getLogger(__name__)


class LCPRayTermination(RuntimeError):
    """Lemke stopped on a secondary ray: no solution was found."""


class LCPCyclingError(RuntimeError):
    """The pivot budget was exhausted."""


class LCPResidualError(RuntimeError):
    """Lemke ended on a point whose complementarity residual exceeds the tolerance."""


@dataclass
class LCPResult:
    """Solution returned by the LCP solvers."""
    lam: np.ndarray
    active_set: Tuple[int, ...] = field(default_factory=tuple)
    pivots: int = 0
    method: str = "lemke"
    residual: float = 0.0


def _lexicographic_row(T: np.ndarray, rows: np.ndarray, col: int, m: int, tol: float) -> int:
    """Pick the leaving row by the lexicographic minimum ratio rule."""
    candidates = rows
    pivots = T[candidates, col]
    keys = [T[:, -1]] + [T[:, j] for j in range(m)]
    for key in keys:
        ratios = key[candidates] / pivots
        best = ratios.min()
        keep = ratios <= best + tol * max(1.0, abs(best))
        candidates = candidates[keep]
        pivots = pivots[keep]
        if candidates.size == 1:
            break
    return int(candidates[0])


def solve_lemke(
    inst: LCPInstance,
    tol: Optional[float] = None,
    max_pivots: Optional[int] = None,
    piv_tol: float = 1e-12
) -> LCPResult:
    """
    Solve LCP(q, F) with Lemke's method.

    Args:
        inst: LCP instance
        tol: Complementarity tolerance (defaults to settings.lcp_tol)
        max_pivots: Pivot budget (defaults to settings.lcp_max_pivots)
        piv_tol: Smallest pivot element considered nonzero

    Returns:
        LCPResult with the complementary solution

    Raises:
        LCPRayTermination: If the method ends on a secondary ray
        LCPCyclingError: If the pivot budget is exhausted
        LCPResidualError: If the polished point is not complementary within tol
    """
    tol = settings.lcp_tol if tol is None else tol
    max_pivots = settings.lcp_max_pivots if max_pivots is None else max_pivots
    F, q, m = inst.F, inst.q, inst.m

    if m == 0 or q.min() >= 0.0:
        return LCPResult(lam=np.zeros(m), pivots=0, method="trivial")

    z0 = 2 * m
    T = np.hstack([np.eye(m), -F, -np.ones((m, 1)), q.reshape(-1, 1)])
    basis = list(range(m))

    # z0 enters at the most negative q; ties go to the last index
    r = int(m - 1 - np.argmin(q[::-1]))
    _pivot(T, r, z0)
    leaving = basis[r]
    basis[r] = z0
    entering = m + leaving
    pivots = 1

    while True:
        col = T[:, entering]
        rows = np.flatnonzero(col > piv_tol)
        if rows.size == 0:
            raise LCPRayTermination(f"ray termination after {pivots} pivots (m={m})")

        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
        z0_row = basis.index(z0)
        if z0_row in ties:
            r = z0_row
        else:
            r = _lexicographic_row(T, rows, entering, m, 1e-12)

        _pivot(T, r, entering)
        leaving = basis[r]
        basis[r] = entering
        pivots += 1

        if leaving == z0:
            break
        if pivots > max_pivots:
            raise LCPCyclingError(f"no termination within {max_pivots} pivots (m={m})")
        entering = leaving + m if leaving < m else leaving - m

    lam = np.zeros(m)
    for row, var in enumerate(basis):
        if m <= var < 2 * m:
            lam[var - m] = T[row, -1]
    lam = _polish(F, q, lam, tol)

    residual = complementarity_residual(F, q, lam)
    if residual > tol * inst.scale():
        raise LCPResidualError(f"Lemke residual {residual:.3g} above tolerance {tol:.1g} after {pivots} pivots (m={m})")
    logger.debug(f"Lemke finished in {pivots} pivots, residual {residual:.3g}")

    return LCPResult(
        lam=lam,
        active_set=active_set(lam, tol),
        pivots=pivots,
        method="lemke",
        residual=residual
    )


def _pivot(T: np.ndarray, r: int, col: int) -> None:
    T[r] /= T[r, col]
    factors = T[:, col].copy()
    factors[r] = 0.0
    T -= np.outer(factors, T[r])


def _polish(F: np.ndarray, q: np.ndarray, lam: np.ndarray, tol: float) -> np.ndarray:
    """Re-solve F_aa lam_a = -q_a on the support; keep the result if it is no worse."""
    lam = np.where(lam < 0.0, 0.0, lam)
    support = np.flatnonzero(lam > tol)
    if support.size == 0:
        return lam
    F_aa = F[np.ix_(support, support)]
    refined = lam.copy()
    refined[support] = np.linalg.lstsq(F_aa, -q[support], rcond=None)[0]
    if refined.min() < -tol:
        return lam
    refined = np.where(refined < 0.0, 0.0, refined)
    if complementarity_residual(F, q, refined) <= complementarity_residual(F, q, lam):
        return refined
    return lam
