"""
Gain synthesis by block alternation on the bilinear certificate conditions.

Step (a) fixes the gains and solves for V and all multipliers. Step (b)
fixes V and the multiplier Y4 (which multiplies the gain-dependent E A and
E D blocks) and solves for the gains and the remaining decrease
multipliers. Bound inequalities do not involve the gains and are only
solved in step (a).
"""
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional
import logging

import cvxpy as cp
import numpy as np
from scipy.linalg import solve_continuous_are

from conic.blocks import bmat, eye
from conic.sdp import SDProblem, solve_sdp
from certify.lyapunov import LyapunovCandidate, MultiplierSet
from certify.lmis import LoopMatrices, assemble_decrease_lmi, decrease_projector
from certify.verify import CertificateProgram, VerificationResult, close_loop, verify_fixed_gains
from model.lcs import Controller, LCSModel
from sim.integrator import SimConfig, SimulationAborted, simulate_lcs
from config import settings

logger = logging.getLogger(__name__)

INITS = ("lqr", "paper", "random")


class SynthesisError(RuntimeError):
    """Alternation failed; carries the best decrease margin reached."""

    def __init__(self, message: str, best_margin: float = float("-inf")):
        super().__init__(message)
        self.best_margin = best_margin


@dataclass
class SynthesisResult:
    """Synthesized gains with their independent verification."""
    controller: Controller
    candidate: LyapunovCandidate
    verification: VerificationResult
    init: str
    alternations: int
    margin_history: List[float] = field(default_factory=list)
    validation: Dict[str, Any] = field(default_factory=dict)


def lqr_gain(A: np.ndarray, B: np.ndarray, Q: Optional[np.ndarray] = None, R: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Continuous-time LQR gain for u = K x.

    Args:
        A: State matrix
        B: Input matrix
        Q: State weight (defaults to 100 I)
        R: Input weight (defaults to I)

    Returns:
        K = -R^-1 B' S with S the stabilizing Riccati solution
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    Q = 100.0 * np.eye(A.shape[0]) if Q is None else np.asarray(Q, dtype=float)
    R = np.eye(B.shape[1]) if R is None else np.asarray(R, dtype=float)
    S = solve_continuous_are(A, B, Q, R)
    return -np.linalg.solve(R, B.T @ S)


def initial_controller(
    model: LCSModel,
    W: np.ndarray,
    init: str,
    rng: np.random.Generator,
    K_mask: Optional[np.ndarray] = None,
    paper_gains: Optional[Controller] = None
) -> Controller:
    """
    Starting gains for the alternation.

    Args:
        model: Open-loop model
        W: Uniqueness map
        init: "lqr" (Riccati with Q = 100 I, R = I), "paper" (published gains)
            or "random" (K_ij ~ U[-100, 0])
        rng: Random generator for the random start
        K_mask: Free entries of K; masked entries start at zero
        paper_gains: Published gains for init "paper"

    Returns:
        Controller with L_tilde = 0 except for init "paper"
    """
    n_w = W.shape[0]
    if init == "lqr":
        K = lqr_gain(model.A_bar, model.B)
    elif init == "random":
        K = rng.uniform(-100.0, 0.0, (model.n_k, model.n_x))
    elif init == "paper":
        if paper_gains is None:
            raise ValueError("init 'paper' needs published gains")
        return Controller.from_full_L(paper_gains.K, paper_gains.effective_L, W)
    else:
        raise ValueError(f"unknown init {init!r}, expected one of {INITS}")
    if K_mask is not None:
        K = np.where(K_mask, K, 0.0)
    return Controller(K=K, L_tilde=np.zeros((model.n_k, n_w)), W=W)


def _gain_loop(model: LCSModel, W: np.ndarray, kappa: Optional[float], K: Any, L_tilde: Any) -> LoopMatrices:
    """Closed-loop matrices affine in the gain variables."""
    L = L_tilde @ W if W.shape[0] > 0 else np.zeros((model.n_k, model.m))
    if kappa is None:
        return LoopMatrices(
            A=model.A_bar + model.B @ K,
            D=model.D_bar + model.B @ L,
            a=np.array(model.a),
            E=np.array(model.E_bar),
            F=np.array(model.F_bar),
            c=np.array(model.c)
        )
    n_k = model.n_k
    return LoopMatrices(
        A=bmat([[model.A_bar, model.B], [kappa * K, -kappa * eye(n_k)]]),
        D=bmat([[model.D_bar], [kappa * L]]),
        a=np.concatenate([model.a, np.zeros(n_k)]),
        E=np.hstack([model.E_bar, model.H]),
        F=np.array(model.F_bar),
        c=np.array(model.c)
    )


def gain_step(
    model: LCSModel,
    W: np.ndarray,
    kappa: Optional[float],
    V: LyapunovCandidate,
    Y4: np.ndarray,
    gamma3: float,
    K_mask: Optional[np.ndarray] = None
) -> Optional[Dict[str, Any]]:
    """
    Step (b): maximize the decrease margin over gains with V and Y4 fixed.

    Returns:
        Dict with K, L_tilde and margin, or None when the solver failed
    """
    m, n_k, n_w = model.m, model.n_k, W.shape[0]
    prob = SDProblem("gain_step")
    K_free = prob.variable("K", (n_k, model.n_x))
    K = cp.multiply(K_mask.astype(float), K_free) if K_mask is not None else K_free
    L_tilde = prob.variable("L_tilde", (n_k, n_w)) if n_w > 0 else np.zeros((n_k, 0))
    cap = settings.synth_gain_cap
    prob.add_le(cp.abs(K_free), cap)
    if n_w > 0:
        prob.add_le(cp.abs(L_tilde), cap)

    loop = _gain_loop(model, W, kappa, K, L_tilde)
    k = 2 * m + 1
    N = loop.n + 4 * m + 1
    mult = MultiplierSet(
        W1=np.zeros((k, k)),
        tau1=np.zeros(m),
        W3=prob.variable("W3", (k, k), symmetric=True, nonneg=True),
        tau3=prob.variable("tau3", m),
        Y4=Y4,
        Y5=prob.variable("Y5", (N, m)),
        theta7=prob.variable("theta7", m),
        theta8=prob.variable("theta8", m),
        theta9=prob.variable("theta9", m),
    )
    t = prob.variable("t_decrease")
    prob.add_le(t, settings.margin_cap)
    prob.add_le(-t, settings.margin_cap)
    decrease = assemble_decrease_lmi(loop, V, mult, gamma3)
    prob.add_psd(decrease - t * decrease_projector(loop.n, m), "decrease")
    prob.maximize(t)

    sol = solve_sdp(prob)
    if not sol.feasible:
        logger.warning(f"Gain step ended as {sol.status.value}: {sol.message}")
        return None
    K_value = sol["K"] if K_mask is None else np.where(K_mask, sol["K"], 0.0)
    return {
        "K": K_value.reshape(n_k, model.n_x),
        "L_tilde": sol["L_tilde"].reshape(n_k, n_w) if n_w > 0 else np.zeros((n_k, 0)),
        "margin": float(sol["t_decrease"]),
    }


def validate_by_simulation(
    model: LCSModel,
    ctrl: Controller,
    kappa: Optional[float],
    V: LyapunovCandidate,
    rng: np.random.Generator,
    trials: int,
    ic_low: np.ndarray,
    ic_high: np.ndarray
) -> Dict[str, Any]:
    """Simulate random initial states; each must stay finite and end with V(end) <= V(0)."""
    sys = close_loop(model, ctrl, kappa)
    cfg = SimConfig(dt=settings.synth_validation_dt, T=settings.synth_validation_horizon)
    failures = []
    for trial in range(trials):
        x0 = np.concatenate([rng.uniform(ic_low, ic_high), np.zeros(sys.n - model.n_x)])
        try:
            traj = simulate_lcs(sys, x0, cfg)
        except SimulationAborted as e:
            failures.append({"trial": trial, "reason": str(e)})
            continue
        v0 = V.value(traj.states[0], traj.forces[0])
        v_end = V.value(traj.states[-1], traj.forces[-1])
        if v_end > v0 * (1.0 + settings.monitor_rel_tol) + settings.feas_tol:
            failures.append({"trial": trial, "reason": f"V rose from {v0:.6g} to {v_end:.6g}"})
    return {"trials": trials, "failures": failures, "passed": not failures}


def synthesize(
    model: LCSModel,
    W: np.ndarray,
    kappa: Optional[float] = None,
    gamma1: Optional[float] = None,
    gamma2: Optional[float] = None,
    gamma3: Optional[float] = None,
    max_alternations: Optional[int] = None,
    init: str = "lqr",
    seed: Optional[int] = None,
    K_mask: Optional[np.ndarray] = None,
    paper_gains: Optional[Controller] = None,
    ic_low: Optional[np.ndarray] = None,
    ic_high: Optional[np.ndarray] = None,
    validation_trials: Optional[int] = None
) -> SynthesisResult:
    """
    Find gains (K, L_tilde) and a certificate V by alternation.

    Args:
        model: Open-loop model
        W: Uniqueness map (from find_w, or identity for a P-matrix F)
        kappa: Filter bandwidth, None for the direct closure
        gamma1: Lower constant
        gamma2: Upper constant (free when None)
        gamma3: Decrease rate
        max_alternations: Alternation budget
        init: "lqr", "paper" or "random"
        seed: Seed of the random start and the validation initial states
        K_mask: Boolean mask of free entries of K
        paper_gains: Published gains for init "paper"
        ic_low: Lower corner of the validation box (defaults to -0.1)
        ic_high: Upper corner of the validation box (defaults to 0.1)
        validation_trials: Random-IC simulations of the final gains

    Returns:
        SynthesisResult whose gains passed a fresh verify_fixed_gains

    Raises:
        SynthesisError: On a bad initialization, an exhausted budget, or
            gains that fail the final verification or simulations
    """
    W = np.asarray(W, dtype=float).reshape(-1, model.m)
    gamma1 = settings.gamma1 if gamma1 is None else gamma1
    gamma2 = settings.gamma2 if gamma2 is None else gamma2
    gamma3 = settings.gamma3 if gamma3 is None else gamma3
    max_alternations = settings.synth_max_alternations if max_alternations is None else max_alternations
    trials = settings.synth_validation_trials if validation_trials is None else validation_trials
    seed = settings.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    if model.has_input_coupling() and kappa is None:
        raise ValueError(f"model {model.name!r} couples the input into the contacts; give a filter kappa")
    if K_mask is not None:
        K_mask = np.asarray(K_mask, dtype=bool)

    ctrl = initial_controller(model, W, init, rng, K_mask=K_mask, paper_gains=paper_gains)
    target = settings.synth_target_margin if gamma3 > 0 else -settings.decrease_slack
    history: List[float] = []
    best = float("-inf")
    logger.info(f"Synthesizing gains for {model.name} from {init} start, budget {max_alternations}")

    success = False
    V: Optional[LyapunovCandidate] = None
    iteration = 0
    for iteration in range(max_alternations):
        sys = close_loop(model, ctrl, kappa)
        program = CertificateProgram(sys, W, gamma1, gamma2, gamma3, hard_bounds=True, name=f"synth_a{iteration}")
        sol = program.solve()
        if not sol.feasible:
            if iteration == 0:
                raise SynthesisError(f"bad init: certificate step ended as {sol.status.value}", best)
            logger.warning(f"Certificate step {iteration} ended as {sol.status.value}, stopping")
            break
        V = program.candidate(sol)
        margin = program.margins(sol)["decrease"]
        history.append(margin)
        best = max(best, margin)
        logger.debug(f"Alternation {iteration}: decrease margin {margin:.3g}")
        if margin >= target:
            success = True
            break

        step = gain_step(model, W, kappa, V, sol["Y4"], gamma3, K_mask=K_mask)
        if step is None:
            break
        history.append(step["margin"])
        best = max(best, step["margin"])
        ctrl = Controller(K=step["K"], L_tilde=step["L_tilde"], W=W)

    if not success:
        raise SynthesisError(
            f"no certified gains after {iteration + 1} alternations (best margin {best:.3g})", best
        )

    verification = verify_fixed_gains(model, ctrl, kappa=kappa, gamma1=gamma1, gamma2=gamma2, gamma3=gamma3)
    if not verification.feasible:
        raise SynthesisError(f"synthesized gains failed fresh verification: {verification.message}", best)

    n_x = model.n_x
    low = -0.1 * np.ones(n_x) if ic_low is None else np.asarray(ic_low, dtype=float)
    high = 0.1 * np.ones(n_x) if ic_high is None else np.asarray(ic_high, dtype=float)
    validation = validate_by_simulation(model, ctrl, kappa, verification.candidate, rng, trials, low, high)
    if not validation["passed"]:
        raise SynthesisError(f"validation simulations failed: {validation['failures'][:3]}", best)

    logger.info(f"✓ Synthesized gains after {iteration + 1} alternations, margin {verification.margin:.3g}")
    return SynthesisResult(
        controller=ctrl,
        candidate=verification.candidate,
        verification=verification,
        init=init,
        alternations=iteration + 1,
        margin_history=history,
        validation=validation
    )
