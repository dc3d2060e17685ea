"""
Row-by-row construction of a uniqueness map W for an LCP matrix F.

Each step searches the nullspace of the rows found so far for a direction
along which W SOL(q, F) is single-valued, certified by the uniqueness
programs and checked against exhaustive enumeration before it is accepted.
"""
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional
import logging

import numpy as np

from conic.linalg import nullspace_basis
from conic.sdp import SDProblem, SDPStatus, solve_sdp
from lcp.enumerate import WUniquenessReport, check_w_uniqueness
from sos.programs import build_phi_constraints
from config import settings

logger = logging.getLogger(__name__)


class FindWError(RuntimeError):
    """The row search could not continue."""


@dataclass
class FindWStep:
    """One solved row program."""
    r: np.ndarray
    nullspace: np.ndarray
    w: np.ndarray
    eta: float
    objective: float
    status: SDPStatus
    solver: str = ""
    multipliers: Dict[str, np.ndarray] = field(default_factory=dict)


@dataclass
class FindWResult:
    """Outcome of the row search."""
    W: np.ndarray
    steps: List[FindWStep] = field(default_factory=list)
    oracle_reports: List[WUniquenessReport] = field(default_factory=list)
    partial: bool = False
    oracle_failed: bool = False
    message: str = ""

    @property
    def rank(self) -> int:
        return int(self.W.shape[0])


def solve_find_w_step(
    F: np.ndarray,
    W_d: np.ndarray,
    r: np.ndarray,
    eta_cap: Optional[float] = None,
    degree: Optional[int] = None
) -> FindWStep:
    """
    Minimize r' N' w over admissible rows w, N a nullspace basis of W_d.

    Args:
        F: LCP matrix (m x m)
        W_d: Rows found so far (k x m, k may be 0)
        r: Random weights, one per nullspace column
        eta_cap: Upper bound on eta (defaults to settings.find_w_eta_cap)
        degree: Relaxation degree (defaults to settings.sos_degree)

    Returns:
        FindWStep with the optimal w and objective; the objective is 0
        without solving when W_d already has full column rank

    Raises:
        FindWError: If the solver does not return a feasible optimum
    """
    F = np.asarray(F, dtype=float)
    m = F.shape[0]
    W_d = np.asarray(W_d, dtype=float).reshape(-1, m)
    eta_cap = settings.find_w_eta_cap if eta_cap is None else eta_cap
    N = nullspace_basis(W_d, n_cols=m)
    r = np.asarray(r, dtype=float).reshape(-1)
    if N.shape[1] == 0:
        return FindWStep(r=r, nullspace=N, w=np.zeros(m), eta=0.0, objective=0.0, status=SDPStatus.FEASIBLE_OPTIMAL)
    if r.size != N.shape[1]:
        raise ValueError(f"r has length {r.size}, nullspace has dimension {N.shape[1]}")

    prob = SDProblem(f"find_w_row{W_d.shape[0]}")
    w = prob.variable("w", m)
    eta = prob.variable("eta", nonneg=True)
    prob.add_le(w, 1.0)
    prob.add_le(-w, 1.0)
    prob.add_le(eta, eta_cap)
    build_phi_constraints(F, w, eta, prob=prob, degree=degree)
    prob.minimize(r @ N.T @ w)

    sol = solve_sdp(prob)
    if not sol.feasible:
        raise FindWError(f"row program {prob.name} ended as {sol.status.value}: {sol.message}")

    multipliers = {k: v for k, v in sol.values.items() if k not in ("w", "eta")}
    return FindWStep(
        r=r,
        nullspace=N,
        w=sol["w"],
        eta=float(sol["eta"]),
        objective=float(sol.objective),
        status=sol.status,
        solver=sol.solver,
        multipliers=multipliers
    )


def clean_row(w: np.ndarray, zero_tol: float = 1e-6) -> np.ndarray:
    """Zero tiny entries, scale to unit max-norm, make the first largest entry positive."""
    w = np.asarray(w, dtype=float).copy()
    peak = float(np.max(np.abs(w)))
    if peak == 0.0:
        raise FindWError("row program returned w = 0 with a negative objective")
    w[np.abs(w) < zero_tol * peak] = 0.0
    w /= peak
    lead = int(np.flatnonzero(np.abs(w) >= 1.0 - 1e-6)[0])
    return w if w[lead] > 0 else -w


def snap_row(w: np.ndarray, max_denominator: int = 12, snap_tol: float = 1e-2) -> Optional[np.ndarray]:
    """
    Round a cleaned row to small-denominator ratios of its largest entry.

    Args:
        w: Row with unit max-norm
        max_denominator: Largest denominator of the rounded ratios
        snap_tol: Largest entrywise move allowed

    Returns:
        The rounded row, or None when some entry is not within snap_tol of
        such a ratio or the rounding changes nothing
    """
    w = np.asarray(w, dtype=float)
    snapped = np.array([float(Fraction(float(v)).limit_denominator(max_denominator)) for v in w])
    if np.max(np.abs(snapped - w)) > snap_tol or np.array_equal(snapped, w):
        return None
    return clean_row(snapped)


def row_candidates(w: np.ndarray) -> List[np.ndarray]:
    """Cleaned row preceded by its rounded form when rounding applies."""
    cleaned = clean_row(w)
    snapped = snap_row(cleaned)
    return [cleaned] if snapped is None else [snapped, cleaned]


class WFinder:
    """Accumulates certified rows until the objective reaches zero."""

    def __init__(
        self,
        F: np.ndarray,
        seed: Optional[int] = None,
        obj_tol: Optional[float] = None,
        max_rows: Optional[int] = None,
        degree: Optional[int] = None
    ):
        """
        Initialize the search.

        Args:
            F: LCP matrix (m x m)
            seed: Seed of the random objective weights and the oracle samples
            obj_tol: Stop once the optimal objective is >= -obj_tol
            max_rows: Row limit (defaults to m)
            degree: Relaxation degree
        """
        self.F = np.asarray(F, dtype=float)
        if self.F.ndim != 2 or self.F.shape[0] != self.F.shape[1]:
            raise ValueError(f"F must be square, got shape {self.F.shape}")
        self.m = self.F.shape[0]
        self.seed = settings.seed if seed is None else seed
        self.obj_tol = settings.find_w_obj_tol if obj_tol is None else obj_tol
        self.max_rows = self.m if max_rows is None else max_rows
        self.degree = degree
        self.rng = np.random.default_rng(self.seed)

    def run(self) -> FindWResult:
        """
        Run the row search.

        Returns:
            FindWResult; on an oracle rejection W holds the verified prefix
            and oracle_failed is set; when a row program after the first
            fails numerically W holds the accepted rows and partial is set

        Raises:
            FindWError: If the first row program fails numerically
        """
        W = np.zeros((0, self.m))
        result = FindWResult(W=W)
        logger.info(f"Searching uniqueness rows for an {self.m}x{self.m} LCP")

        finished = False
        for _ in range(self.max_rows):
            N = nullspace_basis(W, n_cols=self.m)
            if N.shape[1] == 0:
                finished = True
                break
            r = self.rng.uniform(0.0, 1.0, N.shape[1])
            try:
                step = solve_find_w_step(self.F, W, r, degree=self.degree)
            except FindWError as e:
                if W.shape[0] == 0:
                    raise
                result.partial = True
                result.message = f"{e}; stopping with {W.shape[0]} accepted rows"
                logger.warning(result.message)
                finished = True
                break
            result.steps.append(step)
            logger.debug(f"Row {W.shape[0] + 1}: objective {step.objective:.3g}, eta {step.eta:.3g}")
            if step.objective >= -self.obj_tol:
                finished = True
                break

            accepted = None
            report = None
            for row in row_candidates(step.w):
                candidate = np.vstack([W, row])
                if np.linalg.matrix_rank(candidate) <= W.shape[0]:
                    continue
                report = check_w_uniqueness(
                    self.F, candidate, rng=np.random.default_rng([self.seed, candidate.shape[0]])
                )
                result.oracle_reports.append(report)
                if report.passed:
                    accepted = candidate
                    break
                logger.debug(f"Row {np.array2string(row, precision=4)} rejected, spread {report.max_spread:.3g}")

            if report is None:
                result.message = "cleaned row is dependent on the accepted rows"
                logger.warning(f"{result.message}; stopping with {W.shape[0]} rows")
                finished = True
                break
            if accepted is None:
                result.oracle_failed = True
                result.message = (
                    f"enumeration found spread {report.max_spread:.3g} for row {W.shape[0] + 1}"
                )
                logger.warning(f"{result.message}; keeping {W.shape[0]} verified rows")
                finished = True
                break
            W = accepted
            logger.info(f"Accepted row {W.shape[0]}: {np.array2string(W[-1], precision=4)}")

        if not finished and nullspace_basis(W, n_cols=self.m).shape[1] > 0:
            result.partial = True
            result.message = f"row limit {self.max_rows} reached"
            logger.warning(f"Returning partial W: {result.message}")

        result.W = W
        logger.info(f"✓ Found W with {W.shape[0]} rows")
        return result


def find_w(
    F: np.ndarray,
    seed: Optional[int] = None,
    obj_tol: Optional[float] = None,
    max_rows: Optional[int] = None,
    degree: Optional[int] = None
) -> np.ndarray:
    """
    Convenience function to compute a uniqueness map.

    Args:
        F: LCP matrix
        seed: Random seed
        obj_tol: Objective threshold
        max_rows: Row limit
        degree: Relaxation degree

    Returns:
        W with linearly independent rows (possibly 0 rows)
    """
    return WFinder(F, seed=seed, obj_tol=obj_tol, max_rows=max_rows, degree=degree).run().W
