"""
Matrix inequalities for the bound and decrease conditions of a candidate V.

Bound inequalities act on zeta = (x, lam, 1) over complementarity-consistent
points; the decrease inequality acts on xi = (x, lam, lam_dot, 1, rho, mu)
over their consistent derivatives. Every function returns the matrix that
must be PSD, as numpy when all inputs are numeric and as an affine cvxpy
expression otherwise.
"""
from dataclasses import dataclass
from typing import Any, Optional, Tuple

import numpy as np

from conic.blocks import bmat, col, diag, eye, scalar_block, sym, symmetric_from_upper, zeros
from certify.lyapunov import LyapunovCandidate, MultiplierSet


@dataclass(eq=False)
class LoopMatrices:
    """Closed-loop matrices whose entries may be affine in free gains."""
    A: Any
    D: Any
    a: np.ndarray
    E: np.ndarray
    F: np.ndarray
    c: np.ndarray

    @property
    def n(self) -> int:
        return int(self.A.shape[0])

    @property
    def m(self) -> int:
        return int(self.F.shape[0])


def _check(sys: Any, V: LyapunovCandidate) -> Tuple[int, int]:
    n, m = sys.n, sys.m
    if m < 1:
        raise ValueError("certificates need at least one contact")
    if V.n != n or V.m != m:
        raise ValueError(f"candidate is for n={V.n}, m={V.m}; system has n={n}, m={m}")
    return n, m


def selector(sizes: Tuple[int, ...], slot: int) -> np.ndarray:
    """Rows picking block `slot` out of a vector partitioned by sizes."""
    start = int(sum(sizes[:slot]))
    S = np.zeros((sizes[slot], int(sum(sizes))))
    S[:, start:start + sizes[slot]] = np.eye(sizes[slot])
    return S


def state_projector(n: int, size: int) -> np.ndarray:
    """Identity on the leading x slot, zero elsewhere."""
    Pi = np.zeros((size, size))
    Pi[:n, :n] = np.eye(n)
    return Pi


def _bound_T(V: LyapunovCandidate, gamma: Any) -> Any:
    n, m = V.n, V.m
    return symmetric_from_upper(
        [
            [V.P - gamma * eye(n), V.Q, col(V.p) / 2],
            [None, V.R, col(V.r) / 2],
            [None, None, scalar_block(V.z)],
        ],
        (n, m, 1),
    )


def _bound_S1(sys: Any) -> np.ndarray:
    n, m = sys.n, sys.m
    return bmat([
        [sys.E, sys.F, col(sys.c)],
        [zeros(m, n), eye(m), zeros(m, 1)],
        [zeros(1, n), zeros(1, m), np.ones((1, 1))],
    ])


def _bound_S2(sys: Any, tau: Any) -> Any:
    n, m = sys.n, sys.m
    sizes = (n, m, 1)
    gap = np.hstack([sys.E, sys.F, col(sys.c)])
    return selector(sizes, 1).T @ diag(tau) @ gap


def assemble_bound_lmis(
    sys: Any,
    V: LyapunovCandidate,
    mult: MultiplierSet,
    gamma1: Any,
    gamma2: Any = None
) -> Tuple[Any, Optional[Any]]:
    """
    Lower and upper bound inequalities gamma1 |x|^2 <= V <= gamma2 |x|^2.

    Args:
        sys: Closed loop (ClosedLoopLCS or LoopMatrices)
        V: Candidate
        mult: Multipliers; the upper inequality is built only when mult.W2 is set
        gamma1: Lower constant
        gamma2: Upper constant (number or cvxpy scalar)

    Returns:
        Tuple (lower, upper) of matrices over (x, lam, 1) that must be PSD:
        lower = T1 - S1'W1 S1 - sym(S2(tau1)), upper = -(T2 + S1'W2 S1 + sym(S2(tau2))),
        upper is None when dropped

    Raises:
        ValueError: On dimension mismatch
    """
    _check(sys, V)
    S1 = _bound_S1(sys)
    lower = _bound_T(V, gamma1) - S1.T @ mult.W1 @ S1 - sym(_bound_S2(sys, mult.tau1))
    if mult.W2 is None:
        return lower, None
    if gamma2 is None:
        raise ValueError("gamma2 is required for the upper bound inequality")
    upper = -(_bound_T(V, gamma2) + S1.T @ mult.W2 @ S1 + sym(_bound_S2(sys, mult.tau2)))
    return lower, upper


def decrease_sizes(n: int, m: int) -> Tuple[int, ...]:
    return (n, m, m, 1, m, m)


def _decrease_T(sys: Any, V: LyapunovCandidate, gamma3: float) -> Any:
    n, m = sys.n, sys.m
    A, D, a = sys.A, sys.D, col(sys.a)
    P, Q, R = V.P, V.Q, V.R
    p, r = col(V.p), col(V.r)
    return symmetric_from_upper(
        [
            [P @ A + A.T @ P + gamma3 * eye(n), P @ D + A.T @ Q, Q, P @ a + A.T @ p / 2, None, None],
            [None, D.T @ Q + Q.T @ D, R, Q.T @ a + D.T @ p / 2, None, None],
            [None, None, None, r / 2, None, None],
            [None, None, None, p.T @ a, None, None],
            [None] * 6,
            [None] * 6,
        ],
        decrease_sizes(n, m),
    )


def assemble_decrease_lmi(sys: Any, V: LyapunovCandidate, mult: MultiplierSet, gamma3: float) -> Any:
    """
    Decrease inequality dV/dt <= -gamma3 |x|^2 along consistent motions.

    With xi = (x, lam, lam_dot, 1, rho, mu), xi'T3 xi = dV/dt + gamma3 |x|^2
    where dx/dt = A x + D lam + a. The multiplier terms vanish or are
    nonnegative on consistent motions:

        S3 xi = (E x + F lam + c, lam, 1) >= 0            weight W3
        lam_i (E x + F lam + c)_i = 0                     tau3
        E dx/dt + F lam_dot + rho = 0                     Y4
        lam_dot + mu = 0                                  Y5
        lam_i rho_i = 0, rho_i mu_i = 0, mu_i y_i = 0     theta7..theta9

    Args:
        sys: Closed loop (ClosedLoopLCS or LoopMatrices with affine gains)
        V: Candidate
        mult: Multipliers
        gamma3: Decrease rate, >= 0

    Returns:
        -M3 with M3 = T3 + S3'W3 S3 + sym(J3) + sym(Y4 G4) + sym(Y5 G5) + sym(theta terms),
        which must be PSD

    Raises:
        ValueError: On dimension mismatch or gamma3 < 0
    """
    n, m = _check(sys, V)
    if gamma3 < 0:
        raise ValueError(f"gamma3 must be >= 0, got {gamma3}")
    sizes = decrease_sizes(n, m)
    N = int(sum(sizes))
    if mult.Y4.shape != (N, m) or mult.Y5.shape != (N, m):
        raise ValueError(f"Y4 and Y5 must have shape ({N}, {m})")
    Sx, Slam, Sdot, Sone, Srho, Smu = (selector(sizes, k) for k in range(6))
    Zm = zeros(m, m)

    gap = np.hstack([sys.E, sys.F, Zm, col(sys.c), Zm, Zm])
    S3 = np.vstack([gap, Slam, Sone])
    G4 = bmat([[sys.E @ sys.A, sys.E @ sys.D, sys.F, sys.E @ col(sys.a), eye(m), Zm]])
    G5 = Sdot + Smu

    M3 = (
        _decrease_T(sys, V, gamma3)
        + S3.T @ mult.W3 @ S3
        + sym(Slam.T @ diag(mult.tau3) @ gap)
        + sym(mult.Y4 @ G4)
        + sym(mult.Y5 @ G5)
        + sym(Slam.T @ diag(mult.theta7) @ Srho)
        + sym(Srho.T @ diag(mult.theta8) @ Smu)
        + sym(Smu.T @ diag(mult.theta9) @ gap)
    )
    return -M3


def bound_projector(n: int, m: int) -> np.ndarray:
    return state_projector(n, n + m + 1)


def decrease_projector(n: int, m: int) -> np.ndarray:
    return state_projector(n, n + 4 * m + 1)
