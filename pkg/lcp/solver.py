"""
Robust LCP entry point used by the simulator.
"""
from typing import Optional, Sequence
import logging

import numpy as np

from lcp.problem import LCPInstance, complementarity_residual, active_set
from lcp.lemke import LCPResult, LCPRayTermination, LCPCyclingError, LCPResidualError, solve_lemke
from lcp.enumerate import enumerate_solutions
from config import settings

logger = logging.getLogger(__name__)


def _solve_on_support(inst: LCPInstance, support: Sequence[int], tol: float) -> Optional[np.ndarray]:
    """Solve F_aa lam_a = -q_a for a guessed active set; None when the guess is wrong."""
    m = inst.m
    alpha = list(support)
    lam = np.zeros(m)
    if alpha:
        F_aa = inst.F[np.ix_(alpha, alpha)]
        try:
            lam[alpha] = np.linalg.solve(F_aa, -inst.q[alpha])
        except np.linalg.LinAlgError:
            return None
    if complementarity_residual(inst.F, inst.q, lam) > tol * inst.scale():
        return None
    return np.where(lam < 0.0, 0.0, lam)


def solve_lcp(
    inst: LCPInstance,
    tol: Optional[float] = None,
    warm_start: Optional[Sequence[int]] = None,
    allow_enumeration: bool = True
) -> LCPResult:
    """
    Solve LCP(q, F), trying cheap paths first.

    Order: q >= 0 (lam = 0), the active set of a previous solution, Lemke,
    and finally exhaustive enumeration for small m.

    Args:
        inst: LCP instance
        tol: Complementarity tolerance (defaults to settings.lcp_tol)
        warm_start: Active set of a nearby solution
        allow_enumeration: Fall back to enumeration when Lemke fails

    Returns:
        LCPResult

    Raises:
        LCPRayTermination: If no solution exists (or none was found)
    """
    tol = settings.lcp_tol if tol is None else tol
    m = inst.m

    if m == 0 or inst.q.min() >= 0.0:
        return LCPResult(lam=np.zeros(m), method="trivial")

    if warm_start:
        lam = _solve_on_support(inst, warm_start, tol)
        if lam is not None:
            return LCPResult(
                lam=lam,
                active_set=tuple(warm_start),
                method="warm",
                residual=complementarity_residual(inst.F, inst.q, lam)
            )

    try:
        return solve_lemke(inst, tol=tol)
    except (LCPRayTermination, LCPCyclingError, LCPResidualError) as e:
        if not allow_enumeration or m > settings.enum_max_contacts:
            raise LCPRayTermination(str(e)) from e
        logger.debug(f"Lemke failed ({e}), enumerating {2 ** m} active sets")

    sols = enumerate_solutions(inst, tol=tol)
    if sols.is_empty:
        raise LCPRayTermination(f"LCP has no solution (m={m}, exhaustive enumeration)")
    # prefer an isolated solution when one exists
    member = next((mem for mem in sols if not mem.degenerate), sols.members[0])
    return LCPResult(
        lam=member.lam,
        active_set=active_set(member.lam, tol),
        method="enumeration",
        residual=complementarity_residual(inst.F, inst.q, member.lam)
    )
