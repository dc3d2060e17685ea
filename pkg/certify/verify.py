"""
Lyapunov certificates for fixed gains.

The bound and decrease inequalities are imposed with strictness margins
t on the state directions, maximized jointly, and every returned point is
re-assembled in numpy and checked by an eigenvalue routine that does not
trust the solver.
"""
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence
import logging

import numpy as np

from conic.sdp import SDProblem, SDPSolution, SDPStatus, psd_margin, solve_sdp
from certify.lyapunov import LyapunovCandidate, MultiplierSet
from certify.lmis import (
    assemble_bound_lmis,
    assemble_decrease_lmi,
    bound_projector,
    decrease_projector,
)
from lcp.enumerate import check_w_uniqueness, is_p_matrix
from model.lcs import ClosedLoopLCS, Controller, LCSModel, augment_with_filter, close_loop_direct
from config import settings

logger = logging.getLogger(__name__)

# Weight of the summed margins next to the smallest one
MARGIN_SUM_WEIGHT = 1e-3


@dataclass
class VerificationResult:
    """Outcome of a certificate search for fixed gains."""
    status: str
    candidate: Optional[LyapunovCandidate] = None
    multipliers: Optional[MultiplierSet] = None
    margins: Dict[str, float] = field(default_factory=dict)
    recheck: Dict[str, float] = field(default_factory=dict)
    gamma1: float = 0.0
    gamma2: Optional[float] = None
    gamma3: float = 0.0
    upper_dropped: bool = False
    solver: str = ""
    message: str = ""

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"

    @property
    def margin(self) -> Optional[float]:
        return min(self.margins.values()) if self.margins else None


def _resolve(value: Optional[float], default: Optional[float]) -> Optional[float]:
    return default if value is None else value


class CertificateProgram:
    """SDP in (V, multipliers, margins) for one closed loop."""

    def __init__(
        self,
        sys: Any,
        W: np.ndarray,
        gamma1: float,
        gamma2: Optional[float],
        gamma3: float,
        hard_bounds: bool = False,
        name: str = "certificate"
    ):
        """
        Declare variables and constraints.

        Args:
            sys: Closed loop with numeric matrices
            W: Uniqueness map shaping the force terms of V
            gamma1: Lower bound constant
            gamma2: Upper bound constant; a variable >= gamma1 when None
            gamma3: Decrease rate
            hard_bounds: Require the bound margins to reach
                settings.acceptance_margin and maximize only the decrease margin
            name: Problem label
        """
        n, m = sys.n, sys.m
        W = np.asarray(W, dtype=float).reshape(-1, m)
        n_w = W.shape[0]
        self.sys = sys
        self.W = W
        self.gamma1 = gamma1
        self.gamma3 = gamma3
        self.upper_dropped = bool(np.all(sys.c >= 0.0))
        self.prob = prob = SDProblem(name)

        P = prob.variable("P", (n, n), symmetric=True)
        p = prob.variable("p", n)
        if n_w > 0:
            Q_tilde = prob.variable("Q_tilde", (n, n_w))
            R_tilde = prob.variable("R_tilde", (n_w, n_w), symmetric=True)
            r_tilde = prob.variable("r_tilde", n_w)
        else:
            Q_tilde, R_tilde, r_tilde = np.zeros((n, 0)), np.zeros((0, 0)), np.zeros(0)
        z = 0.0 if self.upper_dropped else prob.variable("z")
        self.V = LyapunovCandidate(P=P, Q_tilde=Q_tilde, R_tilde=R_tilde, p=p, r_tilde=r_tilde, z=z, W=W)
        prob.add_psd(settings.certificate_cap * np.eye(n) - P, "P_cap")

        k = 2 * m + 1
        N = n + 4 * m + 1
        upper = not self.upper_dropped
        self.mult = MultiplierSet(
            W1=prob.variable("W1", (k, k), symmetric=True, nonneg=True),
            tau1=prob.variable("tau1", m),
            W3=prob.variable("W3", (k, k), symmetric=True, nonneg=True),
            tau3=prob.variable("tau3", m),
            Y4=prob.variable("Y4", (N, m)),
            Y5=prob.variable("Y5", (N, m)),
            theta7=prob.variable("theta7", m),
            theta8=prob.variable("theta8", m),
            theta9=prob.variable("theta9", m),
            W2=prob.variable("W2", (k, k), symmetric=True, nonneg=True) if upper else None,
            tau2=prob.variable("tau2", m) if upper else None
        )

        if upper and gamma2 is None:
            self.gamma2: Any = prob.variable("gamma2")
            prob.add_le(gamma1, self.gamma2)
            prob.add_le(self.gamma2, 10.0 * settings.certificate_cap)
        else:
            self.gamma2 = gamma2

        self.margin_names = ["lower"] + (["upper"] if upper else []) + ["decrease"]
        self.t = {name: prob.variable(f"t_{name}") for name in self.margin_names}
        for t in self.t.values():
            prob.add_le(t, settings.margin_cap)
            prob.add_le(-t, settings.margin_cap)

        lower, upper_lmi = assemble_bound_lmis(sys, self.V, self.mult, gamma1, self.gamma2)
        decrease = assemble_decrease_lmi(sys, self.V, self.mult, gamma3)
        Pi_b, Pi_d = bound_projector(n, m), decrease_projector(n, m)
        prob.add_psd(lower - self.t["lower"] * Pi_b, "lower")
        if upper_lmi is not None:
            prob.add_psd(upper_lmi - self.t["upper"] * Pi_b, "upper")
        prob.add_psd(decrease - self.t["decrease"] * Pi_d, "decrease")

        if hard_bounds:
            for name in self.margin_names:
                if name != "decrease":
                    prob.add_le(settings.acceptance_margin, self.t[name])
            prob.maximize(self.t["decrease"])
        else:
            s = prob.variable("t_min")
            for t in self.t.values():
                prob.add_le(s, t)
            prob.maximize(s + MARGIN_SUM_WEIGHT * sum(self.t.values()))

    def solve(self) -> SDPSolution:
        return solve_sdp(self.prob)

    def candidate(self, sol: SDPSolution) -> LyapunovCandidate:
        n_w = self.W.shape[0]
        n = self.sys.n
        return LyapunovCandidate(
            P=sol["P"],
            Q_tilde=sol["Q_tilde"].reshape(n, n_w) if n_w else np.zeros((n, 0)),
            R_tilde=sol["R_tilde"].reshape(n_w, n_w) if n_w else np.zeros((0, 0)),
            p=sol["p"].reshape(n),
            r_tilde=sol["r_tilde"].reshape(n_w) if n_w else np.zeros(0),
            z=0.0 if self.upper_dropped else float(sol["z"]),
            W=self.W
        )

    def multipliers(self, sol: SDPSolution) -> MultiplierSet:
        m = self.sys.m
        upper = not self.upper_dropped
        return MultiplierSet(
            W1=sol["W1"],
            tau1=sol["tau1"].reshape(m),
            W3=sol["W3"],
            tau3=sol["tau3"].reshape(m),
            Y4=sol["Y4"],
            Y5=sol["Y5"],
            theta7=sol["theta7"].reshape(m),
            theta8=sol["theta8"].reshape(m),
            theta9=sol["theta9"].reshape(m),
            W2=sol["W2"] if upper else None,
            tau2=sol["tau2"].reshape(m) if upper else None
        )

    def margins(self, sol: SDPSolution) -> Dict[str, float]:
        return {name: float(sol[f"t_{name}"]) for name in self.margin_names}

    def gamma2_value(self, sol: SDPSolution) -> Optional[float]:
        if self.upper_dropped:
            return None
        if self.gamma2 is not None and not isinstance(self.gamma2, (int, float)):
            return float(sol["gamma2"])
        return self.gamma2


def recheck_certificate(
    sys: Any,
    V: LyapunovCandidate,
    mult: MultiplierSet,
    margins: Dict[str, float],
    gamma1: float,
    gamma2: Optional[float],
    gamma3: float
) -> Dict[str, float]:
    """
    Smallest eigenvalue of each inequality minus its margin, from a numpy re-assembly.

    Returns:
        Dict lmi name -> lambda_min(M - t Pi) scaled by max(1, max |M|)
    """
    n, m = sys.n, sys.m
    lower, upper = assemble_bound_lmis(sys, V, mult, gamma1, gamma2)
    decrease = assemble_decrease_lmi(sys, V, mult, gamma3)
    matrices = {"lower": (lower, bound_projector(n, m)), "decrease": (decrease, decrease_projector(n, m))}
    if upper is not None:
        matrices["upper"] = (upper, bound_projector(n, m))
    out = {}
    for name, (M, Pi) in matrices.items():
        M = np.asarray(M, dtype=float)
        out[name] = psd_margin(M - margins.get(name, 0.0) * Pi) / max(1.0, float(np.max(np.abs(M))))
    return out


def accepted(margins: Dict[str, float], gamma3: float, acceptance: float, decrease_slack: float) -> bool:
    """
    Bound margins must reach the acceptance margin, and so must the decrease
    margin when gamma3 > 0. With gamma3 = 0 the decrease margin may fall short
    of zero by at most decrease_slack.
    """
    for name, t in margins.items():
        need = acceptance if (name != "decrease" or gamma3 > 0) else -decrease_slack
        if t < need:
            return False
    return True


def verify_closed_loop(
    sys: ClosedLoopLCS,
    W: np.ndarray,
    gamma1: Optional[float] = None,
    gamma2: Optional[float] = None,
    gamma3: Optional[float] = None
) -> VerificationResult:
    """
    Search a certificate for an already closed loop.

    Args:
        sys: Closed loop
        W: Uniqueness map for the force terms of V
        gamma1: Lower constant (defaults to settings.gamma1)
        gamma2: Upper constant (defaults to settings.gamma2, free when None)
        gamma3: Decrease rate (defaults to settings.gamma3)

    Returns:
        VerificationResult with status feasible, infeasible or solver_failure
    """
    gamma1 = _resolve(gamma1, settings.gamma1)
    gamma2 = _resolve(gamma2, settings.gamma2)
    gamma3 = _resolve(gamma3, settings.gamma3)
    logger.info(f"Verifying {sys.name} ({sys.provenance}): n={sys.n}, m={sys.m}, gamma3={gamma3:g}")

    program = CertificateProgram(sys, W, gamma1, gamma2, gamma3, name=f"verify_{sys.name}")
    sol = program.solve()
    base = dict(gamma1=gamma1, gamma3=gamma3, upper_dropped=program.upper_dropped, solver=sol.solver)

    if sol.status in (SDPStatus.NUMERICAL_FAILURE, SDPStatus.UNBOUNDED):
        logger.warning(f"Certificate search failed numerically: {sol.message}")
        return VerificationResult(status="solver_failure", gamma2=gamma2, message=sol.message, **base)
    if sol.status == SDPStatus.INFEASIBLE_CERTIFICATE:
        return VerificationResult(status="infeasible", gamma2=gamma2, message=sol.message, **base)

    V = program.candidate(sol)
    mult = program.multipliers(sol)
    margins = program.margins(sol)
    gamma2_value = program.gamma2_value(sol)
    recheck = recheck_certificate(sys, V, mult, margins, gamma1, gamma2_value, gamma3)

    result = VerificationResult(
        status="infeasible",
        candidate=V,
        multipliers=mult,
        margins=margins,
        recheck=recheck,
        gamma2=gamma2_value,
        **base
    )
    if min(recheck.values()) < -settings.feas_tol:
        result.status = "solver_failure"
        result.message = f"independent re-check failed: {recheck}"
        logger.warning(result.message)
    elif accepted(margins, gamma3, settings.acceptance_margin, settings.decrease_slack):
        result.status = "feasible"
        result.message = f"margin={result.margin:.6g}"
        if margins["decrease"] < 0.0:
            result.message += f" (decrease margin within slack {settings.decrease_slack:g})"
        logger.info(f"✓ Certificate found: {result.message}")
    else:
        result.message = f"best margins {margins} below acceptance"
        logger.info(f"No certificate: {result.message}")
    return result


def close_loop(model: LCSModel, ctrl: Controller, kappa: Optional[float] = None) -> ClosedLoopLCS:
    """Direct closure when kappa is None, filtered closure otherwise."""
    if kappa is None:
        return close_loop_direct(model, ctrl)
    return augment_with_filter(model, kappa, ctrl)


def check_uniqueness_map(F: np.ndarray, W: np.ndarray) -> None:
    """
    Reject a W whose rows are not single-valued on SOL(q, F).

    Raises:
        ValueError: If the enumeration oracle finds a spread above tolerance
    """
    if W.shape[0] == 0 or is_p_matrix(F):
        return
    report = check_w_uniqueness(F, W)
    if not report.passed:
        raise ValueError(
            f"W is not a uniqueness map for F: spread {report.max_spread:.3g} "
            f"over {report.samples} samples"
        )


def verify_fixed_gains(
    model: LCSModel,
    ctrl: Controller,
    kappa: Optional[float] = None,
    gamma1: Optional[float] = None,
    gamma2: Optional[float] = None,
    gamma3: Optional[float] = None,
    W: Optional[np.ndarray] = None,
    pinned: Sequence[int] = ()
) -> VerificationResult:
    """
    Search a Lyapunov certificate for fixed gains.

    Args:
        model: Open-loop model
        ctrl: Gains
        kappa: Filter bandwidth, or None for the direct closure
        gamma1: Lower constant
        gamma2: Upper constant (free when None)
        gamma3: Decrease rate
        W: Map shaping the force terms of V (defaults to ctrl.W)
        pinned: Contacts whose forces are scheduled from outside; ctrl.W
            only has to be single-valued on the LCP of the other contacts

    Returns:
        VerificationResult

    Raises:
        ValueError: On dimension mismatch, an algebraic loop without a
            filter, or a map that fails the uniqueness check
    """
    model.check_controller(ctrl)
    pinned = sorted(set(int(i) for i in pinned))
    if any(i < 0 or i >= model.m for i in pinned):
        raise ValueError(f"pinned contacts {pinned} out of range for m={model.m}")
    free = [i for i in range(model.m) if i not in pinned]
    if free:
        check_uniqueness_map(model.F_bar[np.ix_(free, free)], ctrl.W[:, free])
    if W is None:
        W = ctrl.W
    else:
        W = np.asarray(W, dtype=float).reshape(-1, model.m)
        check_uniqueness_map(model.F_bar, W)
    sys = close_loop(model, ctrl, kappa)
    return verify_closed_loop(sys, W, gamma1=gamma1, gamma2=gamma2, gamma3=gamma3)
