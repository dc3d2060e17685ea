"""
Exhaustive LCP analysis: solution enumeration over active sets, the P-matrix
test, and the W-uniqueness oracle built on top of them.
"""
from dataclasses import dataclass, field
from itertools import combinations
from typing import List, Optional, Tuple
import logging

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import linprog

from lcp.problem import LCPInstance, complementarity_residual
from config import settings

logger = logging.getLogger(__name__)


@dataclass
class SolutionMember:
    """One solution of an LCP with the active set that produced it."""
    lam: np.ndarray
    active_set: Tuple[int, ...]
    degenerate: bool = False


@dataclass
class SolutionSet:
    """Solutions of an LCP; complete when produced by exhaustive enumeration."""
    members: List[SolutionMember] = field(default_factory=list)
    complete: bool = True

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    @property
    def is_empty(self) -> bool:
        return not self.members

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([mem.lam for mem in self.members])

    def spread(self, W: np.ndarray) -> float:
        """Largest deviation of W lam across members."""
        if len(self.members) < 2 or W.shape[0] == 0:
            return 0.0
        images = self.lambdas @ W.T
        return float(np.max(np.abs(images - images[0])))


def _check_size(m: int) -> None:
    if m > settings.enum_max_contacts:
        raise ValueError(
            f"enumeration over 2^{m} active sets exceeds enum_max_contacts={settings.enum_max_contacts}"
        )


def _feasible_in_family(
    F: np.ndarray,
    q: np.ndarray,
    alpha: List[int],
    base: np.ndarray
) -> Optional[np.ndarray]:
    """Search the affine family base + N t (singular F_aa) for a point meeting the sign conditions."""
    m = q.size
    F_aa = F[np.ix_(alpha, alpha)]
    N = null_space(F_aa)
    rest = [i for i in range(m) if i not in alpha]

    # -(base + N t) <= 0 on alpha, -(F_ra (base + N t) + q_r) <= 0 off alpha
    A_ub = [-N]
    b_ub = [base]
    if rest:
        F_ra = F[np.ix_(rest, alpha)]
        A_ub.append(-F_ra @ N)
        b_ub.append(F_ra @ base + q[rest])
    res = linprog(
        c=np.zeros(N.shape[1]),
        A_ub=np.vstack(A_ub),
        b_ub=np.concatenate(b_ub),
        bounds=[(None, None)] * N.shape[1],
        method="highs"
    )
    if res.status != 0:
        return None
    return base + N @ res.x


def enumerate_solutions(inst: LCPInstance, tol: Optional[float] = None) -> SolutionSet:
    """
    Enumerate the solutions of LCP(q, F) over all 2^m active sets.

    For each active set alpha the system F_aa lam_a = -q_a is solved in least
    squares. A singular but consistent system yields a family of solutions;
    its minimum-norm member is reported with degenerate=True (or a member of
    the family satisfying the sign conditions when the minimum-norm one does
    not).

    Args:
        inst: LCP instance, m <= settings.enum_max_contacts
        tol: Complementarity tolerance (defaults to settings.lcp_tol)

    Returns:
        Complete SolutionSet, possibly empty

    Raises:
        ValueError: If m exceeds the enumeration guard
    """
    tol = settings.lcp_tol if tol is None else tol
    F, q, m = inst.F, inst.q, inst.m
    _check_size(m)
    scale = inst.scale()
    accept_tol = 10.0 * tol * scale

    members: List[SolutionMember] = []
    for size in range(m + 1):
        for alpha in combinations(range(m), size):
            alpha = list(alpha)
            lam = np.zeros(m)
            degenerate = False
            if alpha:
                F_aa = F[np.ix_(alpha, alpha)]
                rhs = -q[alpha]
                sol, _, rank, _ = np.linalg.lstsq(F_aa, rhs, rcond=None)
                if np.max(np.abs(F_aa @ sol - rhs)) > accept_tol:
                    continue
                degenerate = rank < len(alpha)
                lam[alpha] = sol
                if degenerate and complementarity_residual(F, q, lam) > accept_tol:
                    found = _feasible_in_family(F, q, alpha, sol)
                    if found is None:
                        continue
                    lam[alpha] = found

            if complementarity_residual(F, q, lam) > accept_tol:
                continue
            lam = np.where(lam < 0.0, 0.0, lam)
            _merge(members, SolutionMember(lam=lam, active_set=tuple(alpha), degenerate=degenerate), accept_tol)

    return SolutionSet(members=members, complete=True)


def _merge(members: List[SolutionMember], new: SolutionMember, tol: float) -> None:
    for mem in members:
        if np.max(np.abs(mem.lam - new.lam), initial=0.0) <= tol:
            mem.degenerate = mem.degenerate or new.degenerate
            return
    members.append(new)


def is_p_matrix(F: np.ndarray, tol: float = 1e-12) -> bool:
    """
    Check whether every principal minor of F is positive.

    Args:
        F: Square matrix, at most settings.enum_max_contacts rows
        tol: Minors at or below tol count as non-positive

    Returns:
        True for a P-matrix
    """
    F = np.asarray(F, dtype=float)
    if F.ndim != 2 or F.shape[0] != F.shape[1]:
        raise ValueError(f"F must be square, got shape {F.shape}")
    m = F.shape[0]
    _check_size(m)
    for size in range(1, m + 1):
        for alpha in combinations(range(m), size):
            if np.linalg.det(F[np.ix_(alpha, alpha)]) <= tol:
                return False
    return True


@dataclass
class WUniquenessReport:
    """Outcome of the enumeration oracle for a candidate W."""
    samples: int
    max_spread: float
    multi_solution_samples: int
    empty_samples: int
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_spread <= self.tol


def _crafted_q(F: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """q with a known solution on a random support, which lands on degenerate sets often."""
    m = F.shape[0]
    support = rng.random(m) < 0.5
    lam = np.where(support, rng.uniform(0.0, 1.0, m), 0.0)
    w = np.where(support, 0.0, rng.uniform(0.0, 1.0, m))
    return w - F @ lam


def check_w_uniqueness(
    F: np.ndarray,
    W: np.ndarray,
    samples: Optional[int] = None,
    tol: Optional[float] = None,
    rng: Optional[np.random.Generator] = None
) -> WUniquenessReport:
    """
    Check empirically that W SOL(q, F) is single-valued.

    Half of the samples draw q with entries from U[-1, 1]; the other half
    build q from a random complementary pair so that multi-solution sets
    are actually exercised.

    Args:
        F: LCP matrix
        W: Candidate uniqueness map (n_w x m)
        samples: Number of q samples
        tol: Allowed spread of W lam
        rng: Random generator

    Returns:
        WUniquenessReport
    """
    samples = settings.find_w_oracle_samples if samples is None else samples
    tol = settings.find_w_oracle_tol if tol is None else tol
    rng = np.random.default_rng(0) if rng is None else rng
    F = np.asarray(F, dtype=float)
    W = np.asarray(W, dtype=float).reshape(-1, F.shape[0])

    max_spread = 0.0
    multi = 0
    empty = 0
    for k in range(samples):
        if k % 2 == 0:
            q = rng.uniform(-1.0, 1.0, F.shape[0])
        else:
            q = _crafted_q(F, rng)
        sols = enumerate_solutions(LCPInstance(F=F, q=q))
        if sols.is_empty:
            empty += 1
            continue
        if len(sols) > 1 or any(mem.degenerate for mem in sols):
            multi += 1
        max_spread = max(max_spread, sols.spread(W))

    report = WUniquenessReport(
        samples=samples,
        max_spread=max_spread,
        multi_solution_samples=multi,
        empty_samples=empty,
        tol=tol
    )
    logger.debug(
        f"W oracle: spread {max_spread:.3g} over {samples} samples "
        f"({multi} multi-solution, {empty} empty)"
    )
    return report
