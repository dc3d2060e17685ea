"""
Library of example systems with their published parameters and gains.
"""
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple
import logging

import numpy as np

from model.lcs import LCSModel, Controller
from sim.cartpole import CartPoleParams
from sim.integrator import ExogenousForces

logger = logging.getLogger(__name__)

G = 9.81

BOX_FRICTION_F = np.array([
    [0.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [1.0, -1.0, 1.0],
])


@dataclass(frozen=True, eq=False)
class ExampleDef:
    """An example system with its gains, initial-condition box and success criterion."""
    name: str
    model: LCSModel
    W: np.ndarray
    kappa: Optional[float] = None
    paper_gains: Optional[Controller] = None
    lqr_gains: Optional[Controller] = None
    K_mask: Optional[np.ndarray] = None
    ic_low: Optional[np.ndarray] = None
    ic_high: Optional[np.ndarray] = None
    success_radius: float = 1e-6
    settle_window: float = 1.0
    horizon: float = 10.0
    dt: float = 1e-4
    gamma3: float = 1e-3
    cartpole: Optional[CartPoleParams] = None
    exogenous: Optional[ExogenousForces] = None
    notes: str = ""

    def __post_init__(self):
        n_x = self.model.n_x
        W = np.array(self.W, dtype=float).reshape(-1, self.model.m)
        object.__setattr__(self, "W", W)
        low = np.zeros(n_x) if self.ic_low is None else np.asarray(self.ic_low, dtype=float)
        high = np.zeros(n_x) if self.ic_high is None else np.asarray(self.ic_high, dtype=float)
        if low.shape != (n_x,) or high.shape != (n_x,) or np.any(low > high):
            raise ValueError(f"{self.name}: initial-condition box must be two ordered {n_x}-vectors")
        object.__setattr__(self, "ic_low", low)
        object.__setattr__(self, "ic_high", high)
        for ctrl in (self.paper_gains, self.lqr_gains):
            if ctrl is not None:
                self.model.check_controller(ctrl)
        if self.K_mask is not None:
            mask = np.asarray(self.K_mask, dtype=bool)
            if mask.shape != (self.model.n_k, n_x):
                raise ValueError(f"{self.name}: K_mask must have shape {(self.model.n_k, n_x)}")
            object.__setattr__(self, "K_mask", mask)

    @property
    def pinned(self) -> Tuple[int, ...]:
        """Contacts whose forces follow the exogenous schedule."""
        return () if self.exogenous is None else tuple(self.exogenous.indices)

    @property
    def n_state(self) -> int:
        """Closed-loop state dimension (plant plus filter states)."""
        return self.model.n_x + (self.model.n_k if self.kappa is not None else 0)

    def sample_ic(self, rng: np.random.Generator) -> np.ndarray:
        """Initial closed-loop state: plant state from the box, filter states at zero."""
        x = rng.uniform(self.ic_low, self.ic_high)
        return np.concatenate([x, np.zeros(self.n_state - self.model.n_x)])


def _cartpole(name: str, k: float, K: List[float], L: List[float]) -> ExampleDef:
    params = CartPoleParams(k1=k, k2=k)
    model = params.linear_model(name)
    return ExampleDef(
        name=name,
        model=model,
        W=np.eye(2),
        paper_gains=Controller.from_full_L(np.array([K]), np.array([L]), np.eye(2)),
        lqr_gains=Controller.state_feedback([[10.0, -91.77, 16.28, -22.69]], 2),
        ic_low=np.array([-0.1, 0.0, -4.0, -1.0]),
        ic_high=np.array([0.1, 0.0, 4.0, 1.0]),
        success_radius=1e-4,
        horizon=15.0,
        cartpole=params,
        notes=f"soft walls k={k:g}; nonlinear plant available",
    )


def cartpole() -> ExampleDef:
    return _cartpole("cartpole", 10.0, [3.69, -46.7, 3.39, -5.71], [-13.98, 13.98])


def cartpole_k100() -> ExampleDef:
    return _cartpole("cartpole_k100", 100.0, [3.69, -48.78, 2.36, -9.96], [-14.14, 14.14])


def cartpole_k1000() -> ExampleDef:
    return _cartpole("cartpole_k1000", 1000.0, [0.45, -40.23, 0.86, -25.50], [-14.14, 14.14])


def cartpole_damped() -> ExampleDef:
    """Cart-pole whose walls are spring-dampers; contacts ordered (lam1, gamma1, lam2, gamma2)."""
    params = CartPoleParams(m_p=1.0, m_c=1.0)
    base = params.linear_model("cartpole_damped")
    k, b, M, l, d = 10.0, 1.0, 1000.0, params.l, params.d
    D_bar = np.zeros((4, 4))
    D_bar[3, 0] = 1.0 / (l * params.m_p)
    D_bar[3, 2] = -1.0 / (l * params.m_p)
    E_bar = np.array([
        [-k, k * l, -b, b * l],
        [M, -M * l, 0.0, 0.0],
        [k, -k * l, b, -b * l],
        [-M, M * l, 0.0, 0.0],
    ])
    F_bar = np.array([
        [1.0, 1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 1.0],
        [0.0, 0.0, 0.0, 1.0],
    ])
    model = LCSModel(
        A_bar=base.A_bar,
        B=base.B,
        D_bar=D_bar,
        a=np.zeros(4),
        E_bar=E_bar,
        F_bar=F_bar,
        H=np.zeros((4, 1)),
        c=np.array([k * d, -M * d, k * d, -M * d]),
        name="cartpole_damped",
        notes="spring-damper walls, b=1, k=10, M=1000",
        n_pos=2,
    )
    return ExampleDef(
        name="cartpole_damped",
        model=model,
        W=np.eye(4),
        paper_gains=Controller.from_full_L(
            [[8.47, -64.54, 10.36, -9.69]], [[-4.8, 0.0, 4.76, 0.0]], np.eye(4)
        ),
        ic_low=np.array([-0.1, 0.0, -4.0, -1.0]),
        ic_high=np.array([0.1, 0.0, 4.0, 1.0]),
        cartpole=params,
        notes=model.notes,
    )


def partial_carts() -> ExampleDef:
    """Three carts and a pole; the middle cart is neither actuated nor observed."""
    m1 = m2 = m3 = 1.0
    m_p, l, k1, k2 = 1.5, 0.5, 20.0, 20.0
    A_bar = np.zeros((8, 8))
    A_bar[:4, 4:] = np.eye(4)
    A_bar[4, 3] = G * m_p / m1
    A_bar[7, 3] = G * (m1 + m_p) / (m1 * l)
    B = np.zeros((8, 2))
    B[4, 0] = 1.0 / m1
    B[7, 0] = 1.0 / (m1 * l)
    B[6, 1] = 1.0 / m3
    D_bar = np.zeros((8, 2))
    D_bar[4, 0] = -1.0 / m1
    D_bar[5] = [1.0 / m2, -1.0 / m2]
    D_bar[6, 1] = 1.0 / m3
    D_bar[7, 0] = -1.0 / (m1 * l)
    E_bar = np.zeros((2, 8))
    E_bar[0, :3] = [-1.0, 1.0, 0.0]
    E_bar[1, :3] = [0.0, -1.0, 1.0]
    model = LCSModel(
        A_bar=A_bar,
        B=B,
        D_bar=D_bar,
        a=np.zeros(8),
        E_bar=E_bar,
        F_bar=np.diag([1.0 / k1, 1.0 / k2]),
        H=np.zeros((2, 2)),
        c=np.zeros(2),
        name="partial_carts",
        notes="no feedback from the middle cart (x2, x2_dot)",
        n_pos=4,
    )
    K = np.array([
        [-2.8, 0.0, 6.6, -263.1, 6.4, 0.0, -2.1, -30.2],
        [11.5, 0.0, -12.1, 12.1, 2.6, 0.0, -4.7, 6.6],
    ])
    L = np.array([[-3.7, -0.6], [-0.6, 7.2]])
    mask = np.ones((2, 8), dtype=bool)
    mask[:, [1, 5]] = False
    return ExampleDef(
        name="partial_carts",
        model=model,
        W=np.eye(2),
        paper_gains=Controller.from_full_L(K, L, np.eye(2)),
        K_mask=mask,
        ic_low=np.full(8, -0.05),
        ic_high=np.full(8, 0.05),
        horizon=60.0,
        dt=1e-3,
        notes=model.notes,
    )


def acrobot_matrices(
    m1: float = 0.5,
    m2: float = 1.0,
    l1: float = 0.5,
    l2: float = 1.0,
    g: float = G
) -> Dict[str, np.ndarray]:
    """Upright linearization of an acrobot with point masses at the link ends; theta2 is relative to link 1."""
    lc1, lc2 = l1, l2
    d11 = m1 * lc1 ** 2 + m2 * (l1 ** 2 + lc2 ** 2 + 2.0 * l1 * lc2)
    d12 = m2 * (lc2 ** 2 + l1 * lc2)
    d22 = m2 * lc2 ** 2
    M_inv = np.linalg.inv(np.array([[d11, d12], [d12, d22]]))
    gravity = np.array([
        [(m1 * lc1 + m2 * l1 + m2 * lc2) * g, m2 * lc2 * g],
        [m2 * lc2 * g, m2 * lc2 * g],
    ])
    J_T = np.array([[-1.0, 1.0], [0.0, 0.0]])
    A = np.zeros((4, 4))
    A[:2, 2:] = np.eye(2)
    A[2:, :2] = M_inv @ gravity
    B = np.zeros((4, 1))
    B[2:, 0] = M_inv @ np.array([0.0, 1.0])
    D = np.zeros((4, 2))
    D[2:] = M_inv @ J_T
    return {"A": A, "B": B, "D": D}


def acrobot() -> ExampleDef:
    k, d = 1.0, 0.2
    mats = acrobot_matrices()
    model = LCSModel(
        A_bar=mats["A"],
        B=mats["B"],
        D_bar=mats["D"],
        a=np.zeros(4),
        E_bar=np.array([[-1.0, 0.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0]]),
        F_bar=np.eye(2) / k,
        H=np.zeros((2, 1)),
        c=np.array([d, d]),
        name="acrobot",
        notes="soft joint limits on theta1, k=1, d=0.2",
        n_pos=2,
    )
    return ExampleDef(
        name="acrobot",
        model=model,
        W=np.eye(2),
        paper_gains=Controller.from_full_L([[73.07, 38.11, 30.41, 18.95]], [[-4.13, 4.13]], np.eye(2)),
        lqr_gains=Controller.state_feedback([[1476.3, 851.68, 548.81, 334.43]], 2),
        ic_low=np.array([0.0, 0.0, -0.05, -0.05]),
        ic_high=np.array([0.0, 0.0, 0.05, 0.05]),
        notes=model.notes,
    )


def box_friction() -> ExampleDef:
    """Quasi-static box with Coulomb friction; contacts ordered (gamma, lam+, lam-)."""
    mu, m, alpha = 0.1, 1.0, 4.0
    model = LCSModel(
        A_bar=np.zeros((1, 1)),
        B=np.array([[1.0 / alpha]]),
        D_bar=np.array([[0.0, 1.0 / alpha, -1.0 / alpha]]),
        a=np.zeros(1),
        E_bar=np.zeros((3, 1)),
        F_bar=BOX_FRICTION_F,
        H=np.array([[0.0], [1.0], [-1.0]]),
        c=np.array([mu * m * G, 0.0, 0.0]),
        name="box_friction",
        notes="mu=0.1, alpha=4; input enters the friction rows, so the loop is closed through a filter",
    )
    W = np.array([[0.0, 1.0, -1.0]])
    return ExampleDef(
        name="box_friction",
        model=model,
        W=W,
        kappa=100.0,
        paper_gains=Controller.from_full_L([[-10.58]], [[0.0, 0.7, -0.7]], W),
        ic_low=np.array([-1.0]),
        ic_high=np.array([1.0]),
        success_radius=1.0,
        horizon=10.0,
        dt=1e-3,
        gamma3=0.0,
        notes=model.notes,
    )


def table3() -> ExampleDef:
    """Three-legged table; contacts (gamma, lam+, lam-, N1, N2, N3) with normal forces scheduled."""
    mus = (0.1, 0.5, 1.0)
    m, alpha = 1.0, 4.0
    F_bar = np.zeros((6, 6))
    F_bar[0] = [0.0, -1.0, -1.0, *mus]
    F_bar[1, :3] = BOX_FRICTION_F[1]
    F_bar[2, :3] = BOX_FRICTION_F[2]
    F_bar[3:, 3:] = 1.0
    model = LCSModel(
        A_bar=np.zeros((1, 1)),
        B=np.array([[1.0 / alpha]]),
        D_bar=np.array([[0.0, 1.0 / alpha, -1.0 / alpha, 0.0, 0.0, 0.0]]),
        a=np.zeros(1),
        E_bar=np.zeros((6, 1)),
        F_bar=F_bar,
        H=np.array([[0.0], [1.0], [-1.0], [0.0], [0.0], [0.0]]),
        c=np.array([0.0, 0.0, 0.0, -m * G, -m * G, -m * G]),
        name="table3",
        notes="friction (0.1, 0.5, 1) per leg; N1+N2+N3 = mg",
    )
    schedule = ExogenousForces(
        indices=(3, 4, 5),
        breakpoints=[0.2992, 0.5455],
        values=[
            [4.0910, 4.1195, 1.5995],
            [5.4033, 3.1206, 1.2861],
            [9.4866, 0.1770, 0.1464],
        ],
    )
    # the total normal force shapes V; the friction difference is only
    # single-valued once the normal forces are pinned, so it drives the feedback
    friction = np.array([[0.0, 1.0, -1.0, 0.0, 0.0, 0.0]])
    return ExampleDef(
        name="table3",
        model=model,
        W=[[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]],
        kappa=100.0,
        paper_gains=Controller.from_full_L([[-20.75]], [[0.0, 0.36, -0.36, 0.0, 0.0, 0.0]], friction),
        ic_low=np.array([-1.0]),
        ic_high=np.array([1.0]),
        success_radius=1.0,
        dt=1e-3,
        gamma3=0.0,
        exogenous=schedule,
        notes=model.notes,
    )


def table3_normal_forces() -> np.ndarray:
    """The decoupled normal-force block of the table's F."""
    return np.ones((3, 3))


def manip2d() -> ExampleDef:
    """Box pushed by two velocity-controlled fingers; contacts (lam1, lam2, gamma, lam+, lam-)."""
    mu, m, alpha, k = 0.1, 1.0, 1.0, 100.0
    D_bar = np.zeros((3, 5))
    D_bar[0] = np.array([1.0, -1.0, 0.0, 1.0, -1.0]) / alpha
    E_bar = np.zeros((5, 3))
    E_bar[0] = [1.0, -1.0, 0.0]
    E_bar[1] = [-1.0, 0.0, 1.0]
    F_bar = np.array([
        [1.0 / k, 0.0, 0.0, 0.0, 0.0],
        [0.0, 1.0 / k, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, -1.0, -1.0],
        [1.0, -1.0, 1.0, 1.0, -1.0],
        [-1.0, 1.0, 1.0, -1.0, 1.0],
    ])
    model = LCSModel(
        A_bar=np.zeros((3, 3)),
        B=np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
        D_bar=D_bar,
        a=np.zeros(3),
        E_bar=E_bar,
        F_bar=F_bar,
        H=np.zeros((5, 2)),
        c=np.array([0.0, 0.0, mu * m * G, 0.0, 0.0]),
        name="manip2d",
        notes="box position is not observed; only finger contact forces are",
    )
    W = np.array([
        [1.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0, -1.0],
    ])
    K = np.array([[0.0, -2.33, -0.82], [0.0, -0.89, -2.44]])
    L = np.array([[-0.26, 0.06, 0.0, 0.0, 0.0], [-0.06, 0.27, 0.0, 0.0, 0.0]])
    mask = np.ones((2, 3), dtype=bool)
    mask[:, 0] = False
    return ExampleDef(
        name="manip2d",
        model=model,
        W=W,
        kappa=100.0,
        paper_gains=Controller.from_full_L(K, L, W),
        K_mask=mask,
        ic_low=np.full(3, -0.2),
        ic_high=np.full(3, 0.2),
        success_radius=0.1,
        dt=1e-3,
        gamma3=0.0,
        notes=model.notes,
    )


def four_carts() -> ExampleDef:
    """Eight states, ten contacts, five inputs; unstable without control."""
    B = np.zeros((8, 5))
    B[0, 0] = 1.0
    B[2, 1] = 1.0
    B[5:, 2:] = np.eye(3)
    D_bar = np.array([
        [0, 0, 0, 0, -1, 0, 0, 0, 0, -1],
        [-1, 0, 0, 0, 0, 0, 1, 0, 0, 0],
        [0, 0, 1, 0, 0, 0, 0, 0, 0, 1],
        [0, -1, 0, 0, 0, 0, 0, 1, 0, 0],
        [0, 0, 0, 0, 0, -1, 0, 0, -1, 0],
        [0, 0, 0, 0, 0, 0, -1, 0, 0, 0],
        [0, 0, 0, 1, 0, 0, 0, 0, 1, 0],
        [0, 0, 0, 0, 0, 0, 0, -1, 0, 0],
    ], dtype=float)
    E_bar = np.array([
        [0, -1, 0, 0, 0, 0, 0, 0],
        [0, 0, 0, -1, 0, 0, 0, 0],
        [0, 0, -1, 0, 0, 0, 0, 0],
        [0, 0, 0, 0, 0, 0, -1, 0],
        [1, 0, 0, 0, 0, 0, 0, 0],
        [0, 0, 0, 0, 1, 0, 0, 0],
        [0, 1, 0, 0, 0, -1, 0, 0],
        [0, 0, 0, 1, 0, 0, 0, -1],
        [0, 0, 0, 0, -1, 0, 1, 0],
        [-1, 0, 1, 0, 0, 0, 0, 0],
    ], dtype=float)
    model = LCSModel(
        A_bar=np.zeros((8, 8)),
        B=B,
        D_bar=D_bar,
        a=np.zeros(8),
        E_bar=E_bar,
        F_bar=np.eye(10),
        H=np.zeros((10, 5)),
        c=np.zeros(10),
        name="four_carts",
        notes="force-balance carts with springs and magnetic wall contacts",
    )
    return ExampleDef(
        name="four_carts",
        model=model,
        W=np.eye(10),
        ic_low=np.full(8, -0.1),
        ic_high=np.full(8, 0.1),
        success_radius=1e-4,
        settle_window=0.0,
        dt=1e-3,
        notes=model.notes,
    )


def jump_example() -> LCSModel:
    """dx/dt = -x + lam1 + lam2 with 0 <= lam_i _|_ x + lam1 + lam2 >= 0."""
    return LCSModel(
        A_bar=[[-1.0]],
        B=np.zeros((1, 1)),
        D_bar=[[1.0, 1.0]],
        a=[0.0],
        E_bar=[[1.0], [1.0]],
        F_bar=np.ones((2, 2)),
        H=np.zeros((2, 1)),
        c=[0.0, 0.0],
        name="jump",
        notes="two force solutions at x < 0 with the same lam1 + lam2",
    )


EXAMPLES: Dict[str, Callable[[], ExampleDef]] = {
    "cartpole": cartpole,
    "cartpole_k100": cartpole_k100,
    "cartpole_k1000": cartpole_k1000,
    "cartpole_damped": cartpole_damped,
    "partial_carts": partial_carts,
    "acrobot": acrobot,
    "box_friction": box_friction,
    "table3": table3,
    "manip2d": manip2d,
    "four_carts": four_carts,
}


def list_examples() -> List[str]:
    return list(EXAMPLES)


def build_example(name: str) -> ExampleDef:
    """
    Build a named example.

    Args:
        name: One of list_examples()

    Returns:
        ExampleDef

    Raises:
        ValueError: For an unknown name
    """
    try:
        builder = EXAMPLES[name]
    except KeyError:
        raise ValueError(f"unknown example {name!r}; choose from {', '.join(EXAMPLES)}") from None
    example = builder()
    logger.debug(f"Built example {name}: n_x={example.model.n_x}, m={example.model.m}")
    return example
