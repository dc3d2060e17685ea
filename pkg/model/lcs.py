"""
Open- and closed-loop linear complementarity systems.

An open-loop model reads

    dx/dt = A_bar x + B u + D_bar lam + a
    0 <= lam  _|_  E_bar x + F_bar lam + H u + c >= 0

and tactile feedback closes it with u = K x + L lam.
"""
from dataclasses import dataclass
from typing import Optional, Tuple
import logging

import numpy as np

logger = logging.getLogger(__name__)


def _matrix(name: str, value, rows: Optional[int] = None, cols: Optional[int] = None) -> np.ndarray:
    """Coerce to a read-only float matrix, reshaping vectors only when unambiguous."""
    arr = np.array(value, dtype=float)
    if arr.ndim < 2:
        if rows is None or cols is None or arr.size != rows * cols:
            raise ValueError(f"{name} must be a 2-D matrix, got shape {arr.shape}")
        arr = arr.reshape(rows, cols)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got {arr.ndim}-D")
    if rows is not None and arr.shape[0] != rows:
        raise ValueError(f"{name} has {arr.shape[0]} rows, expected {rows}")
    if cols is not None and arr.shape[1] != cols:
        raise ValueError(f"{name} has {arr.shape[1]} columns, expected {cols}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


def _vector(name: str, value, size: int) -> np.ndarray:
    arr = np.array(value, dtype=float).reshape(-1)
    if arr.size != size:
        raise ValueError(f"{name} has length {arr.size}, expected {size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LCSModel:
    """Open-loop LCS with contact-dependent input coupling H."""
    A_bar: np.ndarray
    B: np.ndarray
    D_bar: np.ndarray
    a: np.ndarray
    E_bar: np.ndarray
    F_bar: np.ndarray
    H: np.ndarray
    c: np.ndarray
    name: str = "lcs"
    notes: str = ""
    n_pos: int = 0

    def __post_init__(self):
        A_bar = _matrix("A_bar", self.A_bar)
        n_x = A_bar.shape[0]
        if A_bar.shape[1] != n_x:
            raise ValueError(f"A_bar must be square, got shape {A_bar.shape}")

        B_raw = np.array(self.B, dtype=float)
        n_k = B_raw.shape[1] if B_raw.ndim == 2 else 1
        F_bar = _matrix("F_bar", self.F_bar)
        m = F_bar.shape[0]
        if F_bar.shape[1] != m:
            raise ValueError(f"F_bar must be square, got shape {F_bar.shape}")

        object.__setattr__(self, "A_bar", A_bar)
        object.__setattr__(self, "B", _matrix("B", self.B, n_x, n_k))
        object.__setattr__(self, "D_bar", _matrix("D_bar", self.D_bar, n_x, m))
        object.__setattr__(self, "a", _vector("a", self.a, n_x))
        object.__setattr__(self, "E_bar", _matrix("E_bar", self.E_bar, m, n_x))
        object.__setattr__(self, "F_bar", F_bar)
        object.__setattr__(self, "H", _matrix("H", self.H, m, n_k))
        object.__setattr__(self, "c", _vector("c", self.c, m))

        if not 0 <= self.n_pos <= n_x // 2:
            raise ValueError(f"n_pos={self.n_pos} must lie in [0, n_x/2]")

    @property
    def n_x(self) -> int:
        return self.A_bar.shape[0]

    @property
    def n_k(self) -> int:
        return self.B.shape[1]

    @property
    def m(self) -> int:
        return self.F_bar.shape[0]

    def has_input_coupling(self) -> bool:
        """True when the input enters the complementarity constraint."""
        return bool(np.any(self.H != 0.0))

    def check_controller(self, ctrl: "Controller", n_state: Optional[int] = None) -> None:
        """
        Validate controller dimensions against the model.

        Args:
            ctrl: Controller to check
            n_state: Columns expected in K (defaults to n_x)

        Raises:
            ValueError: On any dimension mismatch
        """
        n_state = self.n_x if n_state is None else n_state
        if ctrl.K.shape != (self.n_k, n_state):
            raise ValueError(f"K has shape {ctrl.K.shape}, expected {(self.n_k, n_state)}")
        if ctrl.W.shape[1] != self.m:
            raise ValueError(f"W has {ctrl.W.shape[1]} columns, expected m={self.m}")
        if ctrl.L_tilde.shape[0] != self.n_k:
            raise ValueError(f"L_tilde has {ctrl.L_tilde.shape[0]} rows, expected n_k={self.n_k}")


@dataclass(frozen=True, eq=False)
class Controller:
    """Tactile feedback gains u = K x + L_tilde W lam."""
    K: np.ndarray
    L_tilde: np.ndarray
    W: np.ndarray

    def __post_init__(self):
        K = _matrix("K", self.K)
        W_raw = np.array(self.W, dtype=float)
        if W_raw.ndim != 2:
            raise ValueError(f"W must be 2-D (use shape (0, m) for no rows), got {W_raw.ndim}-D")
        W = _matrix("W", W_raw)
        n_w = W.shape[0]
        L_tilde = _matrix("L_tilde", np.array(self.L_tilde, dtype=float).reshape(K.shape[0], n_w))

        if n_w > 0:
            rank = np.linalg.matrix_rank(W)
            if rank != n_w:
                raise ValueError(f"rows of W must be linearly independent (rank {rank} < {n_w})")

        object.__setattr__(self, "K", K)
        object.__setattr__(self, "L_tilde", L_tilde)
        object.__setattr__(self, "W", W)

    @property
    def n_k(self) -> int:
        return self.K.shape[0]

    @property
    def n_w(self) -> int:
        return self.W.shape[0]

    @property
    def effective_L(self) -> np.ndarray:
        """Force gain L = L_tilde W."""
        return self.L_tilde @ self.W

    @classmethod
    def from_full_L(cls, K, L, W, tol: float = 1e-9) -> "Controller":
        """
        Build a controller from a full force gain L.

        Args:
            K: State gain
            L: Force gain (n_k x m)
            W: Uniqueness map (n_w x m)
            tol: Relative residual allowed when factoring L = L_tilde W

        Returns:
            Controller

        Raises:
            ValueError: If a row of L lies outside rowspace(W)
        """
        K = np.atleast_2d(np.array(K, dtype=float))
        W = np.array(W, dtype=float)
        L = np.array(L, dtype=float).reshape(K.shape[0], W.shape[1])
        if W.shape[0] == 0:
            if np.any(L != 0.0):
                raise ValueError("nonzero L needs at least one row in W")
            return cls(K=K, L_tilde=np.zeros((K.shape[0], 0)), W=W)

        L_tilde = np.linalg.lstsq(W.T, L.T, rcond=None)[0].T
        residual = np.max(np.abs(L_tilde @ W - L))
        if residual > tol * max(1.0, np.max(np.abs(L))):
            raise ValueError(f"rows of L must lie in rowspace(W) (residual {residual:.3g})")
        return cls(K=K, L_tilde=L_tilde, W=W)

    @classmethod
    def state_feedback(cls, K, m: int) -> "Controller":
        """Controller without force feedback."""
        K = np.atleast_2d(np.array(K, dtype=float))
        return cls(K=K, L_tilde=np.zeros((K.shape[0], 0)), W=np.zeros((0, m)))


@dataclass(frozen=True, eq=False)
class ClosedLoopLCS:
    """Autonomous LCS dx/dt = A x + D lam + a, 0 <= lam _|_ E x + F lam + c >= 0."""
    A: np.ndarray
    D: np.ndarray
    a: np.ndarray
    E: np.ndarray
    F: np.ndarray
    c: np.ndarray
    U_x: np.ndarray
    U_lam: np.ndarray
    provenance: str = "direct"
    kappa: Optional[float] = None
    n_pos: int = 0
    name: str = "lcs"

    def __post_init__(self):
        for name in ("A", "D", "a", "E", "F", "c", "U_x", "U_lam"):
            object.__setattr__(self, name, np.array(getattr(self, name), dtype=float))
        n = self.A.shape[0]
        m = self.F.shape[0]
        if self.A.shape != (n, n) or self.D.shape != (n, m) or self.E.shape != (m, n):
            raise ValueError(
                f"inconsistent closed loop: A{self.A.shape}, D{self.D.shape}, E{self.E.shape}, F{self.F.shape}"
            )
        if self.a.shape != (n,) or self.c.shape != (m,):
            raise ValueError(f"a must have length {n} and c length {m}")
        if self.provenance not in ("direct", "filtered"):
            raise ValueError(f"unknown provenance {self.provenance!r}")
        for arr in (self.A, self.D, self.a, self.E, self.F, self.c, self.U_x, self.U_lam):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.F.shape[0]

    @property
    def n_u(self) -> int:
        return self.U_x.shape[0]

    def flow(self, x: np.ndarray, lam: np.ndarray) -> np.ndarray:
        return self.A @ x + self.D @ lam + self.a

    def gap(self, x: np.ndarray) -> np.ndarray:
        """The LCP vector q = E x + c at state x."""
        return self.E @ x + self.c

    def input(self, x: np.ndarray, lam: np.ndarray) -> np.ndarray:
        return self.U_x @ x + self.U_lam @ lam


def close_loop_direct(model: LCSModel, ctrl: Controller) -> ClosedLoopLCS:
    """
    Substitute u = K x + L lam into a model without input coupling.

    Args:
        model: Open-loop model with H = 0
        ctrl: Controller acting on the plant state

    Returns:
        ClosedLoopLCS with A = A_bar + B K and D = D_bar + B L

    Raises:
        ValueError: If H is nonzero (algebraic loop) or dimensions mismatch
    """
    if model.has_input_coupling():
        raise ValueError(
            f"model {model.name!r} has H != 0: u = K x + L lam forms an algebraic loop, "
            "use augment_with_filter"
        )
    model.check_controller(ctrl)
    L = ctrl.effective_L

    return ClosedLoopLCS(
        A=model.A_bar + model.B @ ctrl.K,
        D=model.D_bar + model.B @ L,
        a=np.array(model.a),
        E=np.array(model.E_bar),
        F=np.array(model.F_bar),
        c=np.array(model.c),
        U_x=np.array(ctrl.K),
        U_lam=np.array(L),
        provenance="direct",
        kappa=None,
        n_pos=model.n_pos,
        name=model.name,
    )


def augment_with_filter(model: LCSModel, kappa: float, ctrl: Controller) -> ClosedLoopLCS:
    """
    Close the loop through the input filter d(tau)/dt = kappa (u - tau).

    The state becomes [x_bar; tau] and the plant sees tau instead of u, which
    removes the input from the complementarity constraint's algebraic loop.

    Args:
        model: Open-loop model (H may be nonzero)
        kappa: Filter bandwidth, positive
        ctrl: Controller acting on the plant state x_bar

    Returns:
        Filtered ClosedLoopLCS; its F equals F_bar entry for entry

    Raises:
        ValueError: If kappa is not positive or dimensions mismatch
    """
    if not kappa > 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    model.check_controller(ctrl)
    n_x, n_k, m = model.n_x, model.n_k, model.m
    L = ctrl.effective_L

    A = np.block([
        [model.A_bar, model.B],
        [kappa * ctrl.K, -kappa * np.eye(n_k)],
    ])
    D = np.vstack([model.D_bar, kappa * L])
    E = np.hstack([model.E_bar, model.H])
    a = np.concatenate([model.a, np.zeros(n_k)])

    U_x = np.hstack([np.zeros((n_k, n_x)), np.eye(n_k)])
    U_lam = np.zeros((n_k, m))

    return ClosedLoopLCS(
        A=A,
        D=D,
        a=a,
        E=E,
        F=np.array(model.F_bar),
        c=np.array(model.c),
        U_x=U_x,
        U_lam=U_lam,
        provenance="filtered",
        kappa=float(kappa),
        n_pos=model.n_pos,
        name=model.name,
    )


def filter_blocks(sys: ClosedLoopLCS, n_x: int) -> Tuple[np.ndarray, np.ndarray]:
    """Return the raw (kappa K, kappa L) blocks of a filtered closed loop."""
    if sys.provenance != "filtered":
        raise ValueError("filter blocks exist only for filtered closed loops")
    return np.array(sys.A[n_x:, :n_x]), np.array(sys.D[n_x:, :])


def extract_filter_gains(sys: ClosedLoopLCS, n_x: int, kappa: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Recover (K, L) from a filtered closed loop.

    Args:
        sys: Filtered closed loop
        n_x: Plant state dimension
        kappa: Filter bandwidth (defaults to the one recorded on sys)

    Returns:
        Tuple (K, L)
    """
    kappa = sys.kappa if kappa is None else kappa
    kK, kL = filter_blocks(sys, n_x)
    return kK / kappa, kL / kappa
