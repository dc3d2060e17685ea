"""
Nonlinear cart-pole plant with soft walls.

The pole angle phi is measured from upright with the tip at x1 - l sin(phi),
so the linearization about the origin is the cart-pole LCS. Wall forces come
from the model's complementarity rows evaluated at the current state and act
horizontally at the tip.
"""
from dataclasses import dataclass
from typing import Optional, Sequence
import logging

import numpy as np

from model.lcs import LCSModel, Controller
from lcp.problem import LCPInstance
from lcp.lemke import LCPRayTermination
from lcp.solver import solve_lcp
from sim.integrator import SimConfig, SimulationAborted, Trajectory

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CartPoleParams:
    """Physical parameters of the cart-pole with soft walls."""
    g: float = 9.81
    m_p: float = 0.1
    m_c: float = 1.0
    l: float = 0.5
    d: float = 0.1
    k1: float = 10.0
    k2: float = 10.0

    def linear_model(self, name: str = "cartpole") -> LCSModel:
        """Linearization about upright with the two soft-wall contacts."""
        g, m_p, m_c, l, d = self.g, self.m_p, self.m_c, self.l, self.d
        A_bar = np.array([
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [0.0, g * m_p / m_c, 0.0, 0.0],
            [0.0, g * (m_c + m_p) / (l * m_c), 0.0, 0.0],
        ])
        B = np.array([[0.0], [0.0], [1.0 / m_c], [1.0 / (l * m_c)]])
        D_bar = np.zeros((4, 2))
        D_bar[3] = [1.0 / (l * m_p), -1.0 / (l * m_p)]
        E_bar = np.array([
            [-1.0, l, 0.0, 0.0],
            [1.0, -l, 0.0, 0.0],
        ])
        return LCSModel(
            A_bar=A_bar,
            B=B,
            D_bar=D_bar,
            a=np.zeros(4),
            E_bar=E_bar,
            F_bar=np.diag([1.0 / self.k1, 1.0 / self.k2]),
            H=np.zeros((2, 1)),
            c=np.array([d, d]),
            name=name,
            notes=f"cart-pole with soft walls, k1={self.k1:g}, k2={self.k2:g}",
            n_pos=2,
        )


def tip_force_map(params: CartPoleParams, model: LCSModel) -> np.ndarray:
    """Row vector s with horizontal tip force F_h = s lam, read off the angular row of D_bar."""
    return -params.l * params.m_p * model.D_bar[3]


def cartpole_acceleration(params: CartPoleParams, x: np.ndarray, u: float, F_h: float) -> np.ndarray:
    """Cart and pole accelerations from the manipulator equations."""
    g, m_p, m_c, l = params.g, params.m_p, params.m_c, params.l
    phi, phi_dot = x[1], x[3]
    cos_phi, sin_phi = np.cos(phi), np.sin(phi)
    M = np.array([
        [m_c + m_p, -m_p * l * cos_phi],
        [-m_p * l * cos_phi, m_p * l * l],
    ])
    rhs = np.array([
        u + F_h - m_p * l * sin_phi * phi_dot ** 2,
        m_p * g * l * sin_phi - l * cos_phi * F_h,
    ])
    return np.linalg.solve(M, rhs)


def simulate_cartpole_nonlinear(
    params: CartPoleParams,
    ctrl: Controller,
    x0: Sequence[float],
    cfg: Optional[SimConfig] = None,
    model: Optional[LCSModel] = None,
    seed: Optional[int] = None
) -> Trajectory:
    """
    Simulate the nonlinear cart-pole under u = K x + L lam.

    Args:
        params: Physical parameters
        ctrl: Controller acting on (x1, phi, x1_dot, phi_dot)
        x0: Initial state
        cfg: Step size and horizon; integration is always semi-implicit Euler
        model: LCS whose complementarity rows give the wall forces
            (defaults to params.linear_model())
        seed: Recorded in the trajectory metadata

    Returns:
        Trajectory

    Raises:
        SimulationAborted: On a non-finite state or an unsolvable contact LCP
    """
    cfg = cfg or SimConfig()
    model = model or params.linear_model()
    model.check_controller(ctrl)
    if model.n_x != 4 or model.n_k != 1:
        raise ValueError(f"cart-pole plant needs a 4-state single-input model, got {model.name!r}")
    if model.has_input_coupling():
        raise ValueError("cart-pole wall rows must not depend on the input")

    x = np.array(x0, dtype=float).reshape(-1)
    if x.size != 4:
        raise ValueError(f"x0 has length {x.size}, expected 4")

    s = tip_force_map(params, model)
    L = ctrl.effective_L
    n_steps = cfg.n_steps
    times = cfg.dt * np.arange(n_steps + 1)
    states = np.zeros((n_steps + 1, 4))
    forces = np.zeros((n_steps + 1, model.m))
    inputs = np.zeros((n_steps + 1, 1))
    warm = None

    def record(k: int, message: str = "") -> Trajectory:
        return Trajectory(
            times=times[:k],
            states=states[:k],
            forces=forces[:k],
            inputs=inputs[:k],
            model=f"{model.name}-nonlinear",
            seed=seed,
            dt=cfg.dt,
            integrator="semi-implicit-euler",
            aborted=bool(message),
            message=message
        )

    for k in range(n_steps + 1):
        q = model.E_bar @ x + model.c
        try:
            res = solve_lcp(LCPInstance(F=model.F_bar, q=q), tol=cfg.lcp_tol, warm_start=warm)
        except LCPRayTermination as e:
            message = f"no wall force at step {k}: {e}"
            raise SimulationAborted(message, k, record(k, message)) from e
        warm = res.active_set
        lam = res.lam
        u = float(ctrl.K[0] @ x + L[0] @ lam)
        states[k], forces[k], inputs[k] = x, lam, u
        if k == n_steps:
            break

        acc = cartpole_acceleration(params, x, u, float(s @ lam))
        vel = x[2:] + cfg.dt * acc
        x = np.concatenate([x[:2] + cfg.dt * vel, vel])
        if not np.all(np.isfinite(x)):
            message = f"non-finite state at step {k + 1}"
            raise SimulationAborted(message, k + 1, record(k + 1, message))

    return record(n_steps + 1)
