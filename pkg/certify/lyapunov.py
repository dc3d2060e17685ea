"""
Piecewise-quadratic Lyapunov candidates and S-procedure multipliers.

A candidate is

    V(x, lam) = x'P x + 2 x'Q_tilde W lam + lam'W'R_tilde W lam
                + p'x + r_tilde'W lam + z

Force terms only enter through W lam, so V is single-valued whenever
W SOL(q, F) is. The fields may hold numpy arrays or cvxpy expressions.
"""
from dataclasses import dataclass
from typing import Any, Dict, Optional
import logging

import numpy as np

from conic.blocks import is_symbolic

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class LyapunovCandidate:
    """Coefficients of V; derived Q = Q_tilde W, R = W'R_tilde W, r = W'r_tilde."""
    P: Any
    Q_tilde: Any
    R_tilde: Any
    p: Any
    r_tilde: Any
    z: Any
    W: np.ndarray

    @property
    def n(self) -> int:
        return int(self.P.shape[0])

    @property
    def n_w(self) -> int:
        return int(self.W.shape[0])

    @property
    def m(self) -> int:
        return int(self.W.shape[1])

    @property
    def Q(self) -> Any:
        return self.Q_tilde @ self.W

    @property
    def R(self) -> Any:
        return self.W.T @ self.R_tilde @ self.W

    @property
    def r(self) -> Any:
        return self.W.T @ self.r_tilde

    @property
    def is_numeric(self) -> bool:
        return not any(is_symbolic(v) for v in (self.P, self.Q_tilde, self.R_tilde, self.p, self.r_tilde, self.z))

    @classmethod
    def quadratic(cls, P, W: np.ndarray) -> "LyapunovCandidate":
        """V = x'P x with all force terms zero."""
        P = np.asarray(P, dtype=float)
        W = np.asarray(W, dtype=float)
        n, n_w = P.shape[0], W.shape[0]
        return cls(
            P=P,
            Q_tilde=np.zeros((n, n_w)),
            R_tilde=np.zeros((n_w, n_w)),
            p=np.zeros(n),
            r_tilde=np.zeros(n_w),
            z=0.0,
            W=W
        )

    def value(self, x: np.ndarray, lam: np.ndarray) -> float:
        """V at one point."""
        x = np.asarray(x, dtype=float)
        lam = np.asarray(lam, dtype=float)
        return float(self.values(x[None, :], lam[None, :])[0])

    def values(self, X: np.ndarray, Lam: np.ndarray) -> np.ndarray:
        """V at each row of (X, Lam)."""
        if not self.is_numeric:
            raise ValueError("candidate holds unsolved variables")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Lam = np.atleast_2d(np.asarray(Lam, dtype=float))
        P, Q, R = np.asarray(self.P), np.asarray(self.Q), np.asarray(self.R)
        return (
            np.einsum("ki,ij,kj->k", X, P, X)
            + 2.0 * np.einsum("ki,ij,kj->k", X, Q, Lam)
            + np.einsum("ki,ij,kj->k", Lam, R, Lam)
            + X @ np.asarray(self.p)
            + Lam @ np.asarray(self.r)
            + float(self.z)
        )

    def as_arrays(self) -> Dict[str, np.ndarray]:
        return {
            "P": np.asarray(self.P, dtype=float),
            "Q_tilde": np.asarray(self.Q_tilde, dtype=float),
            "R_tilde": np.asarray(self.R_tilde, dtype=float),
            "p": np.asarray(self.p, dtype=float),
            "r_tilde": np.asarray(self.r_tilde, dtype=float),
            "z": np.asarray(float(self.z)),
            "W": np.asarray(self.W, dtype=float),
        }


@dataclass(eq=False)
class MultiplierSet:
    """
    S-procedure multipliers of the three matrix inequalities.

    W1, W2, W3 are entrywise nonnegative (2m+1) x (2m+1) weights on products
    of (E x + F lam + c, lam, 1); tau1..tau3 are free diagonals on the
    complementarity products; Y4, Y5 (N x m) multiply the derivative
    equalities; theta7..theta9 are free diagonals on the derivative
    complementarity products. W2 and tau2 are None when the upper bound
    inequality is dropped.
    """
    W1: Any
    tau1: Any
    W3: Any
    tau3: Any
    Y4: Any
    Y5: Any
    theta7: Any
    theta8: Any
    theta9: Any
    W2: Optional[Any] = None
    tau2: Optional[Any] = None

    @classmethod
    def zeros(cls, n: int, m: int, upper: bool = True) -> "MultiplierSet":
        k = 2 * m + 1
        N = n + 4 * m + 1
        return cls(
            W1=np.zeros((k, k)),
            tau1=np.zeros(m),
            W3=np.zeros((k, k)),
            tau3=np.zeros(m),
            Y4=np.zeros((N, m)),
            Y5=np.zeros((N, m)),
            theta7=np.zeros(m),
            theta8=np.zeros(m),
            theta9=np.zeros(m),
            W2=np.zeros((k, k)) if upper else None,
            tau2=np.zeros(m) if upper else None
        )

    def as_arrays(self) -> Dict[str, np.ndarray]:
        out = {}
        for name in ("W1", "tau1", "W2", "tau2", "W3", "tau3", "Y4", "Y5", "theta7", "theta8", "theta9"):
            value = getattr(self, name)
            if value is not None:
                out[name] = np.asarray(value, dtype=float)
        return out


@dataclass(eq=False)
class GammaPrimePoint:
    """A state, force and their consistent derivatives with the slacks rho, mu."""
    x: np.ndarray
    lam: np.ndarray
    lam_dot: np.ndarray
    rho: np.ndarray
    mu: np.ndarray

    @classmethod
    def from_motion(cls, sys: Any, x, lam, lam_dot) -> "GammaPrimePoint":
        """Fill in rho = -(E dx/dt + F dlam/dt) and mu = -dlam/dt."""
        x = np.asarray(x, dtype=float)
        lam = np.asarray(lam, dtype=float)
        lam_dot = np.asarray(lam_dot, dtype=float)
        x_dot = sys.A @ x + sys.D @ lam + sys.a
        return cls(x=x, lam=lam, lam_dot=lam_dot, rho=-(sys.E @ x_dot + sys.F @ lam_dot), mu=-lam_dot)

    def xi(self) -> np.ndarray:
        """Stacked vector (x, lam, lam_dot, 1, rho, mu)."""
        return np.concatenate([self.x, self.lam, self.lam_dot, [1.0], self.rho, self.mu])

    def residuals(self, sys: Any) -> Dict[str, float]:
        """Violation of each defining relation."""
        y = sys.E @ self.x + sys.F @ self.lam + sys.c
        x_dot = sys.A @ self.x + sys.D @ self.lam + sys.a
        return {
            "sign": float(max(0.0, -np.min(self.lam), -np.min(y))),
            "complementarity": float(np.max(np.abs(self.lam * y))),
            "rho": float(np.max(np.abs(sys.E @ x_dot + sys.F @ self.lam_dot + self.rho))),
            "mu": float(np.max(np.abs(self.lam_dot + self.mu))),
            "lam_rho": float(np.max(np.abs(self.lam * self.rho))),
            "rho_mu": float(np.max(np.abs(self.rho * self.mu))),
            "mu_gap": float(np.max(np.abs(self.mu * y))),
        }

    def is_member(self, sys: Any, tol: float = 1e-9) -> bool:
        return max(self.residuals(sys).values()) <= tol


def lyapunov_jump(V: LyapunovCandidate, x, lam_a, lam_b) -> float:
    """Change of V when the force jumps from lam_a to lam_b at fixed x."""
    return V.value(x, lam_b) - V.value(x, lam_a)
