"""
Small dense SDPs on top of cvxpy, with solver fallback and an independent
eigenvalue re-check of every point a solver claims to be optimal.
"""
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union
import logging

import cvxpy as cp
import numpy as np

from conic.blocks import is_symbolic, sym
from config import settings

logger = logging.getLogger(__name__)


class SDPStatus(str, Enum):
    """Outcome of an SDP solve."""
    FEASIBLE_OPTIMAL = "feasible_optimal"
    INFEASIBLE_CERTIFICATE = "infeasible_certificate"
    UNBOUNDED = "unbounded"
    NUMERICAL_FAILURE = "numerical_failure"


class SDPFailure(RuntimeError):
    """Every configured solver failed numerically."""


@dataclass
class PSDConstraint:
    """Affine matrix expression required to be PSD."""
    name: str
    expr: Any
    size: int


@dataclass
class SDPSolution:
    """Solver result after the independent re-check."""
    status: SDPStatus
    values: Dict[str, np.ndarray] = field(default_factory=dict)
    objective: Optional[float] = None
    margin: Optional[float] = None
    psd_margins: Dict[str, float] = field(default_factory=dict)
    gap: Optional[float] = None
    solver: str = ""
    message: str = ""

    @property
    def feasible(self) -> bool:
        return self.status == SDPStatus.FEASIBLE_OPTIMAL

    def __getitem__(self, name: str) -> np.ndarray:
        return self.values[name]


class SDProblem:
    """Builder for an SDP: variables, PSD and linear constraints, linear objective."""

    def __init__(self, name: str = "sdp"):
        """
        Initialize an empty problem.

        Args:
            name: Label used in logs and dumps
        """
        self.name = name
        self.variables: Dict[str, cp.Variable] = {}
        self.psd: List[PSDConstraint] = []
        self.constraints: List[cp.Constraint] = []
        self.objective: Optional[cp.Expression] = None
        self.sense = "find"
        self.last_status: Optional[str] = None

    def variable(
        self,
        name: str,
        shape: Union[int, Tuple[int, ...]] = (),
        symmetric: bool = False,
        nonneg: bool = False
    ) -> cp.Variable:
        """
        Declare a decision variable.

        Args:
            name: Unique variable name
            shape: Variable shape
            symmetric: Square symmetric matrix variable
            nonneg: Entrywise nonnegative

        Returns:
            cvxpy Variable
        """
        if name in self.variables:
            raise ValueError(f"variable {name!r} already declared in {self.name}")
        if symmetric:
            var = cp.Variable(shape, name=name, symmetric=True)
            if nonneg:
                self.constraints.append(var >= 0)
        else:
            var = cp.Variable(shape, name=name, nonneg=nonneg)
        self.variables[name] = var
        return var

    def add_psd(self, expr: Any, name: Optional[str] = None) -> None:
        """Require the symmetric part of a square affine expression to be PSD."""
        shape = expr.shape
        if len(shape) != 2 or shape[0] != shape[1]:
            raise ValueError(f"PSD constraint needs a square matrix, got shape {shape}")
        name = name or f"psd{len(self.psd)}"
        self.psd.append(PSDConstraint(name=name, expr=expr, size=shape[0]))

    def add_nsd(self, expr: Any, name: Optional[str] = None) -> None:
        self.add_psd(-expr, name)

    def add_eq(self, lhs: Any, rhs: Any = 0.0) -> None:
        self.constraints.append(lhs == rhs)

    def add_le(self, lhs: Any, rhs: Any = 0.0) -> None:
        self.constraints.append(lhs <= rhs)

    def minimize(self, expr: Any) -> None:
        self.objective = expr
        self.sense = "minimize"

    def maximize(self, expr: Any) -> None:
        self.objective = expr
        self.sense = "maximize"

    def compile(self, shift: Optional[cp.Variable] = None) -> cp.Problem:
        """
        Translate to a cvxpy Problem; PSD constraints go through symmetric slack variables.

        Args:
            shift: Scalar added to the diagonal of every PSD block; when
                given, the objective becomes min shift with shift >= -1
        """
        constraints = list(self.constraints)
        for con in self.psd:
            Z = cp.Variable((con.size, con.size), symmetric=True, name=f"{con.name}_slack")
            expr = sym(con.expr) if shift is None else sym(con.expr) + shift * np.eye(con.size)
            constraints += [Z == expr, Z >> 0]
        if shift is not None:
            return cp.Problem(cp.Minimize(shift), constraints + [shift >= -1.0])
        if self.sense == "minimize":
            objective = cp.Minimize(self.objective)
        elif self.sense == "maximize":
            objective = cp.Maximize(self.objective)
        else:
            objective = cp.Minimize(0)
        return cp.Problem(objective, constraints)

    def dump(self, path: Union[str, Path]) -> Path:
        """Write the problem structure (shapes, constraint kinds, last status) as JSON."""
        from output.schema import SDPDump

        doc = SDPDump(
            name=self.name,
            variables={
                name: {"shape": list(var.shape), "attributes": sorted(k for k, v in var.attributes.items() if v is True)}
                for name, var in self.variables.items()
            },
            psd_constraints={con.name: con.size for con in self.psd},
            linear_constraints=len(self.constraints),
            sense=self.sense,
            status=self.last_status
        )
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(doc.model_dump_json(indent=2), encoding="utf-8")
        logger.info(f"✓ SDP dump saved to: {path}")
        return path


def _solver_chain(primary: Optional[str], fallback: Optional[str]) -> List[str]:
    installed = set(cp.installed_solvers())
    chain = []
    for name in (primary or settings.sdp_solver, fallback or settings.sdp_fallback_solver):
        name = name.upper()
        if name in chain:
            continue
        if name not in installed:
            logger.warning(f"Solver {name} is not installed, skipping")
            continue
        chain.append(name)
    if not chain:
        raise SDPFailure(f"none of the configured SDP solvers is installed ({sorted(installed)})")
    return chain


def _solver_options(solver: str, max_iters: int, attempt: int, feas_tol: float) -> Dict[str, Any]:
    """Options of one attempt; every retry gets more iterations and tolerances 100x tighter."""
    iters = max_iters * (4 ** attempt)
    tighten = 0.01 ** attempt
    if solver == "CLARABEL":
        if attempt == 0:
            return {"max_iter": iters}
        tol = max(1e-8 * tighten, 1e-14)
        return {"max_iter": iters, "tol_gap_abs": tol, "tol_gap_rel": tol, "tol_feas": tol, "tol_ktratio": max(1e-6 * tighten, 1e-12)}
    if solver == "SCS":
        eps = max(feas_tol * 0.1 * tighten, 1e-14)
        return {"max_iters": iters * 20, "eps_abs": eps, "eps_rel": eps}
    return {}


def _duality_gap(prob: cp.Problem) -> Optional[float]:
    """Relative primal-dual gap from solver statistics, when the solver reports one."""
    extra = getattr(prob.solver_stats, "extra_stats", None)
    primal = getattr(extra, "obj_val", None)
    dual = getattr(extra, "obj_val_dual", None)
    if primal is None and isinstance(extra, dict):
        info = extra.get("info", {})
        primal, dual = info.get("pobj"), info.get("dobj")
    if primal is None or dual is None:
        return None
    try:
        primal, dual = float(primal), float(dual)
    except (TypeError, ValueError):
        return None
    if not (np.isfinite(primal) and np.isfinite(dual)):
        return None
    return abs(primal - dual) / max(1.0, abs(primal))


def psd_margin(M: np.ndarray) -> float:
    """Smallest eigenvalue of the symmetric part of M."""
    M = np.asarray(M, dtype=float)
    return float(np.linalg.eigvalsh(0.5 * (M + M.T)).min())


def _checked(
    problem: SDProblem,
    prob: cp.Problem,
    solver: str,
    feas_tol: float,
    gap_tol: float
) -> Tuple[Optional[SDPSolution], str]:
    values = {}
    for name, var in problem.variables.items():
        if var.value is None:
            return None, f"variable {name} has no value"
        values[name] = np.array(var.value, dtype=float)

    margins = {}
    for con in problem.psd:
        M = np.atleast_2d(np.asarray(con.expr.value if is_symbolic(con.expr) else con.expr, dtype=float))
        margins[con.name] = psd_margin(M)
        allowed = feas_tol * max(1.0, float(np.max(np.abs(M))))
        if margins[con.name] < -allowed:
            return None, f"{con.name} re-check eigenvalue {margins[con.name]:.3g} below {-allowed:.3g}"

    gap = _duality_gap(prob)
    if gap is not None and gap > gap_tol:
        return None, f"duality gap {gap:.3g} above {gap_tol:.1g}"

    objective = None if prob.value is None else float(prob.value)
    return SDPSolution(
        status=SDPStatus.FEASIBLE_OPTIMAL,
        values=values,
        objective=objective,
        margin=min(margins.values()) if margins else None,
        psd_margins=margins,
        gap=gap,
        solver=solver
    ), ""


def infeasibility_margin(problem: SDProblem, solver: str, max_iters: int) -> Optional[float]:
    """
    Smallest uniform shift s making every PSD block feasible, min s subject to
    block + s I >= 0 and the linear constraints, with s >= -1.

    Returns:
        s (inf when the linear constraints alone are infeasible), or None
        when the phase-one program itself did not solve
    """
    s = cp.Variable(name="phase_one_shift")
    phase_one = problem.compile(shift=s)
    try:
        phase_one.solve(solver=solver, verbose=False, **_solver_options(solver, max_iters, 1, settings.feas_tol))
    except cp.error.SolverError as e:
        logger.warning(f"Phase-one check of {problem.name} failed: {e}")
        return None
    if phase_one.status == cp.INFEASIBLE:
        return float("inf")
    if phase_one.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or s.value is None:
        return None
    return float(s.value)


def solve_sdp(
    problem: SDProblem,
    feas_tol: Optional[float] = None,
    gap_tol: Optional[float] = None,
    max_iters: Optional[int] = None,
    solver: Optional[str] = None,
    fallback: Optional[str] = None,
    max_retries: Optional[int] = None
) -> SDPSolution:
    """
    Solve an SDProblem with the primary solver, falling back on failure.

    A point is returned as feasible_optimal only after the eigenvalue
    re-check. An infeasibility report is only passed on once a phase-one
    program confirms that every PSD block needs a positive shift.

    Args:
        problem: Problem to solve
        feas_tol: Eigenvalue tolerance of the re-check
        gap_tol: Accepted relative duality gap
        max_iters: Iterations of the first attempt (later attempts get more)
        solver: Primary cvxpy solver
        fallback: Fallback cvxpy solver
        max_retries: Attempts per solver

    Returns:
        SDPSolution

    Raises:
        SDPFailure: If no configured solver is installed
    """
    feas_tol = settings.feas_tol if feas_tol is None else feas_tol
    gap_tol = settings.gap_tol if gap_tol is None else gap_tol
    max_iters = settings.sdp_max_iters if max_iters is None else max_iters
    max_retries = settings.sdp_max_retries if max_retries is None else max_retries

    prob = problem.compile()
    message = "no attempt made"
    logger.debug(f"Solving {problem.name}: {len(problem.variables)} variables, {len(problem.psd)} PSD blocks")

    for name in _solver_chain(solver, fallback):
        inaccurate: Optional[SDPSolution] = None
        for attempt in range(max_retries):
            last = attempt == max_retries - 1
            try:
                prob.solve(solver=name, verbose=False, **_solver_options(name, max_iters, attempt, feas_tol))
            except cp.error.SolverError as e:
                message = f"{name} attempt {attempt + 1} failed: {e}"
                logger.warning(message)
                continue

            status = prob.status
            if status == cp.UNBOUNDED or (status == cp.UNBOUNDED_INACCURATE and last):
                problem.last_status = SDPStatus.UNBOUNDED.value
                logger.debug(f"{problem.name}: {name} reports {status}")
                return SDPSolution(status=SDPStatus.UNBOUNDED, solver=name, message=f"{name} reports {status}")

            if status == cp.INFEASIBLE_INACCURATE and not last:
                message = f"{name} attempt {attempt + 1} reports {status}, retrying with tighter tolerances"
                logger.warning(message)
                continue

            if status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
                shift = infeasibility_margin(problem, name, max_iters)
                if shift is not None and shift > feas_tol:
                    problem.last_status = SDPStatus.INFEASIBLE_CERTIFICATE.value
                    logger.debug(f"{problem.name}: {name} reports {status}, phase-one shift {shift:.3g}")
                    return SDPSolution(
                        status=SDPStatus.INFEASIBLE_CERTIFICATE,
                        margin=-shift,
                        solver=name,
                        message=f"{name} reports {status}, confirmed by phase-one shift {shift:.3g}"
                    )
                message = f"{name} attempt {attempt + 1} reports {status} but the phase-one shift is {shift}"
                logger.warning(message)
                continue

            if status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
                solution, message = _checked(problem, prob, name, feas_tol, gap_tol)
                if solution is not None and status == cp.OPTIMAL:
                    problem.last_status = solution.status.value
                    return solution
                if solution is not None:
                    solution.message = f"{name} reports {status}; accepted after re-check"
                    inaccurate = solution
                    message = f"{name} attempt {attempt + 1} reports {status}, retrying with tighter tolerances"
                else:
                    message = f"{name} attempt {attempt + 1} ({status}) rejected: {message}"
            else:
                message = f"{name} attempt {attempt + 1} ended with status {status}"
            logger.warning(message)

        if inaccurate is not None:
            problem.last_status = inaccurate.status.value
            return inaccurate
        logger.info(f"Attempting fallback after {name} failed on {problem.name}")

    problem.last_status = SDPStatus.NUMERICAL_FAILURE.value
    return SDPSolution(status=SDPStatus.NUMERICAL_FAILURE, message=message)

