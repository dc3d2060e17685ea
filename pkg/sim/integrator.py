"""
Fixed-step time stepping of closed-loop linear complementarity systems.

At every step the contact forces are the solution of LCP(E x + c, F) at the
current state; the state is then advanced with an Euler step. The force
recorded at a sample is the one used for the step that starts there.
"""
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple
import logging

import numpy as np

from model.lcs import ClosedLoopLCS
from lcp.problem import LCPInstance, complementarity_residual
from lcp.lemke import LCPRayTermination
from lcp.solver import solve_lcp
from config import settings

logger = logging.getLogger(__name__)

INTEGRATORS = ("semi-implicit-euler", "explicit-euler")


class SimulationAborted(RuntimeError):
    """No LCP solution or a non-finite state; carries the failing step."""

    def __init__(self, message: str, step: int, trajectory: Optional["Trajectory"] = None):
        super().__init__(message)
        self.step = step
        self.trajectory = trajectory


@dataclass
class SimConfig:
    """Step size, horizon and integrator of a simulation."""
    dt: float = field(default_factory=lambda: settings.sim_dt)
    T: float = field(default_factory=lambda: settings.sim_horizon)
    integrator: str = field(default_factory=lambda: settings.sim_integrator)
    lcp_tol: float = field(default_factory=lambda: settings.lcp_tol)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.T < self.dt:
            raise ValueError(f"horizon T={self.T} is shorter than dt={self.dt}")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"unknown integrator {self.integrator!r}, expected one of {INTEGRATORS}")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))


@dataclass
class ExogenousForces:
    """Piecewise-constant schedule pinning a subset of contact forces."""
    indices: Tuple[int, ...]
    breakpoints: Sequence[float]
    values: Sequence[Sequence[float]]

    def __post_init__(self):
        self.indices = tuple(int(i) for i in self.indices)
        self.breakpoints = np.asarray(self.breakpoints, dtype=float)
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.values.shape != (self.breakpoints.size + 1, len(self.indices)):
            raise ValueError(
                f"schedule needs {self.breakpoints.size + 1} rows of {len(self.indices)} values, "
                f"got shape {self.values.shape}"
            )
        if np.any(np.diff(self.breakpoints) <= 0):
            raise ValueError("breakpoints must be strictly increasing")

    def at(self, t: float) -> np.ndarray:
        """Forces on [b_{i-1}, b_i)."""
        return self.values[int(np.searchsorted(self.breakpoints, t, side="right"))]


@dataclass
class Trajectory:
    """Sampled states, forces and inputs of one simulation."""
    times: np.ndarray
    states: np.ndarray
    forces: np.ndarray
    inputs: np.ndarray
    model: str = "lcs"
    seed: Optional[int] = None
    dt: float = 0.0
    integrator: str = "semi-implicit-euler"
    pinned: Tuple[int, ...] = ()
    aborted: bool = False
    message: str = ""

    def __len__(self) -> int:
        return self.times.size

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def max_complementarity_residual(self, sys: ClosedLoopLCS) -> float:
        """Largest LCP residual over the samples, on the contacts that are not pinned."""
        free = [i for i in range(sys.m) if i not in self.pinned]
        if not free or len(self) == 0:
            return 0.0
        pinned = list(self.pinned)
        worst = 0.0
        for x, lam in zip(self.states, self.forces):
            q = sys.E[free] @ x + sys.c[free]
            if pinned:
                q = q + sys.F[np.ix_(free, pinned)] @ lam[pinned]
            worst = max(worst, complementarity_residual(sys.F[np.ix_(free, free)], q, lam[free]))
        return worst


class _ContactSolver:
    """Per-step LCP with warm starts and optional pinned forces."""

    def __init__(self, sys: ClosedLoopLCS, exogenous: Optional[ExogenousForces], tol: float):
        self.sys = sys
        self.exogenous = exogenous
        self.tol = tol
        pinned = exogenous.indices if exogenous is not None else ()
        if any(i < 0 or i >= sys.m for i in pinned):
            raise ValueError(f"pinned contact indices {pinned} out of range for m={sys.m}")
        self.pinned = list(pinned)
        self.free = [i for i in range(sys.m) if i not in pinned]
        self.F_ff = sys.F[np.ix_(self.free, self.free)]
        self.F_fp = sys.F[np.ix_(self.free, self.pinned)]
        self.warm: Optional[Tuple[int, ...]] = None

    def __call__(self, x: np.ndarray, t: float) -> np.ndarray:
        lam = np.zeros(self.sys.m)
        q = self.sys.E[self.free] @ x + self.sys.c[self.free]
        if self.pinned:
            lam_p = self.exogenous.at(t)
            lam[self.pinned] = lam_p
            q = q + self.F_fp @ lam_p
        if self.free:
            res = solve_lcp(LCPInstance(F=self.F_ff, q=q), tol=self.tol, warm_start=self.warm)
            self.warm = res.active_set
            lam[self.free] = res.lam
        return lam


def _step(sys: ClosedLoopLCS, x: np.ndarray, lam: np.ndarray, dt: float, integrator: str) -> np.ndarray:
    x_new = x + dt * sys.flow(x, lam)
    k = sys.n_pos
    if integrator == "semi-implicit-euler" and k > 0:
        # positions move with the updated velocities
        mixed = np.concatenate([x[:k], x_new[k:]])
        x_new[:k] = x[:k] + dt * (sys.A[:k] @ mixed + sys.D[:k] @ lam + sys.a[:k])
    return x_new


def simulate_lcs(
    sys: ClosedLoopLCS,
    x0: Sequence[float],
    cfg: Optional[SimConfig] = None,
    exogenous: Optional[ExogenousForces] = None,
    seed: Optional[int] = None
) -> Trajectory:
    """
    Simulate a closed-loop LCS from x0.

    Args:
        sys: Closed-loop system
        x0: Initial state (length sys.n)
        cfg: Step size, horizon and integrator (defaults from settings)
        exogenous: Schedule pinning some contact forces (the rest solve a reduced LCP)
        seed: Recorded in the trajectory metadata

    Returns:
        Trajectory with n_steps + 1 samples

    Raises:
        ValueError: If x0 has the wrong length
        SimulationAborted: If the LCP has no solution or the state blows up;
            the partial trajectory is attached
    """
    cfg = cfg or SimConfig()
    x = np.array(x0, dtype=float).reshape(-1)
    if x.size != sys.n:
        raise ValueError(f"x0 has length {x.size}, expected {sys.n}")
    if not np.all(np.isfinite(x)):
        raise ValueError("x0 must be finite")

    n_steps = cfg.n_steps
    contacts = _ContactSolver(sys, exogenous, cfg.lcp_tol)
    times = cfg.dt * np.arange(n_steps + 1)
    states = np.zeros((n_steps + 1, sys.n))
    forces = np.zeros((n_steps + 1, sys.m))
    pinned = tuple(contacts.pinned)

    logger.debug(f"Simulating {sys.name}: {n_steps} steps of {cfg.dt:g} s ({cfg.integrator})")

    def partial(k: int, message: str) -> Trajectory:
        return Trajectory(
            times=times[:k],
            states=states[:k],
            forces=forces[:k],
            inputs=states[:k] @ sys.U_x.T + forces[:k] @ sys.U_lam.T,
            model=sys.name,
            seed=seed,
            dt=cfg.dt,
            integrator=cfg.integrator,
            pinned=pinned,
            aborted=True,
            message=message
        )

    for k in range(n_steps + 1):
        try:
            lam = contacts(x, times[k])
        except LCPRayTermination as e:
            message = f"no contact force at step {k} (t={times[k]:.6g}): {e}"
            raise SimulationAborted(message, k, partial(k, message)) from e
        states[k] = x
        forces[k] = lam
        if k == n_steps:
            break
        x = _step(sys, x, lam, cfg.dt, cfg.integrator)
        if not np.all(np.isfinite(x)):
            message = f"non-finite state at step {k + 1} (t={times[k + 1]:.6g})"
            raise SimulationAborted(message, k + 1, partial(k + 1, message))

    return Trajectory(
        times=times,
        states=states,
        forces=forces,
        inputs=states @ sys.U_x.T + forces @ sys.U_lam.T,
        model=sys.name,
        seed=seed,
        dt=cfg.dt,
        integrator=cfg.integrator,
        pinned=pinned
    )


def evaluate_success(
    traj: Trajectory,
    radius: float,
    settle_window: float,
    n_plant: Optional[int] = None
) -> bool:
    """
    Check that the trajectory stays in the ball x'x <= radius over its final window.

    Args:
        traj: Simulated trajectory (non-empty)
        radius: Bound on x'x
        settle_window: Length in seconds of the final window
        n_plant: Only the first n_plant coordinates count (filter states excluded)

    Returns:
        True iff finite everywhere and inside the ball throughout the window
    """
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    if traj.aborted or not np.all(np.isfinite(traj.states)):
        return False
    states = traj.states if n_plant is None else traj.states[:, :n_plant]
    window = traj.times >= traj.times[-1] - settle_window - 1e-12
    norms = np.einsum("ij,ij->i", states[window], states[window])
    return bool(np.all(norms <= radius))
