"""
Numerical monitor of a certificate along a simulated trajectory.
"""
from dataclasses import dataclass, field
from typing import List, Optional
import logging

import numpy as np

from certify.lyapunov import LyapunovCandidate
from sim.integrator import Trajectory
from config import settings

logger = logging.getLogger(__name__)


@dataclass
class DecreaseReport:
    """V along a trajectory with the samples where it rose."""
    values: np.ndarray
    violations: List[int] = field(default_factory=list)
    rel_tol: float = 0.0
    max_increase: float = 0.0
    envelope_violations: List[int] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations and not self.envelope_violations


def check_decrease_along_traj(
    V: LyapunovCandidate,
    traj: Trajectory,
    gamma1: Optional[float] = None,
    gamma2: Optional[float] = None,
    gamma3: Optional[float] = None,
    rel_tol: Optional[float] = None
) -> DecreaseReport:
    """
    Evaluate V at every sample and flag increases.

    A step k -> k+1 is a violation when V rises by more than
    rel_tol * max |V|. With all three gammas given, the samples are also
    checked against the exponential envelope

        |x(t)|^2 <= (gamma2 / gamma1) |x(0)|^2 exp(-(gamma3 / gamma2) t)

    Args:
        V: Certificate of the closed loop that produced traj
        traj: Simulated trajectory
        gamma1: Lower bound constant
        gamma2: Upper bound constant
        gamma3: Decrease rate
        rel_tol: Relative tolerance (defaults to settings.monitor_rel_tol)

    Returns:
        DecreaseReport
    """
    rel_tol = settings.monitor_rel_tol if rel_tol is None else rel_tol
    if len(traj) == 0:
        return DecreaseReport(values=np.zeros(0), rel_tol=rel_tol)
    if traj.states.shape[1] != V.n:
        raise ValueError(f"trajectory has {traj.states.shape[1]} states, certificate expects {V.n}")

    values = V.values(traj.states, traj.forces)
    scale = max(float(np.max(np.abs(values))), np.finfo(float).tiny)
    increases = np.diff(values)
    violations = [int(k) for k in np.flatnonzero(increases > rel_tol * scale)]
    max_increase = float(max(np.max(increases, initial=0.0), 0.0))

    envelope: List[int] = []
    if gamma1 is not None and gamma2 is not None and gamma3 is not None:
        norms = np.einsum("ij,ij->i", traj.states, traj.states)
        bound = (gamma2 / gamma1) * norms[0] * np.exp(-(gamma3 / gamma2) * (traj.times - traj.times[0]))
        envelope = [int(k) for k in np.flatnonzero(norms > bound * (1.0 + rel_tol) + 1e-12)]

    if violations:
        logger.warning(f"V increased at {len(violations)} samples (max increase {max_increase:.3g})")
    return DecreaseReport(
        values=values,
        violations=violations,
        rel_tol=rel_tol,
        max_increase=max_increase,
        envelope_violations=envelope
    )
