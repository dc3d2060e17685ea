"""
Uniqueness programs: a row w is admissible when

    eta + s w'(lam1 - lam2) >= 0   for s = +1 and s = -1

for every pair lam1, lam2 in SOL(q, F) and every q. By positive homogeneity
of the solution set this forces w'lam1 = w'lam2. Nonnegativity over the
complementarity set is certified with S-procedure multipliers and a PSD Gram
matrix in the basis [1; lam1; lam2; q].
"""
from typing import Any, Dict, List, Optional, Tuple
import logging

import numpy as np

from conic.blocks import sym, zeros, eye, is_symbolic
from conic.sdp import SDProblem
from config import settings

logger = logging.getLogger(__name__)

# Largest contact count per relaxation degree
MAX_CONTACTS = {2: 8, 4: 3}


def _check_degree(degree: int, m: int) -> None:
    if degree not in MAX_CONTACTS:
        raise ValueError(f"unsupported relaxation degree {degree}, expected 2 or 4")
    if m > MAX_CONTACTS[degree]:
        raise ValueError(
            f"degree-{degree} programs are limited to m <= {MAX_CONTACTS[degree]}, got m={m}"
            + ("; use degree 2 (--degree 2 or sos_degree=2)" if degree == 4 else "")
        )


def selectors(F: np.ndarray) -> Dict[str, np.ndarray]:
    """Row selectors of 1, lam1, lam2, y1 = F lam1 + q and y2 = F lam2 + q in [1; lam1; lam2; q]."""
    m = F.shape[0]
    N = 3 * m + 1
    e0 = np.zeros((1, N))
    e0[0, 0] = 1.0
    Z, I = zeros(m, m), eye(m)
    z = np.zeros((m, 1))
    return {
        "e0": e0,
        "L1": np.hstack([z, I, Z, Z]),
        "L2": np.hstack([z, Z, I, Z]),
        "Y1": np.hstack([z, F, Z, I]),
        "Y2": np.hstack([z, Z, F, I]),
    }


def phi_gram(
    prob: SDProblem,
    F: np.ndarray,
    w: Any,
    eta: Any,
    sign: float,
    first: int
) -> Tuple[Any, List[str]]:
    """
    Gram matrix of one degree-2 condition with its multipliers declared on prob.

    Multipliers p{first}..p{first+7} are entrywise nonnegative, the two
    complementarity multipliers s are free.

    Returns:
        Tuple (Gram expression, multiplier names)
    """
    m = F.shape[0]
    sel = selectors(F)
    e0, L1, L2, Y1, Y2 = sel["e0"], sel["L1"], sel["L2"], sel["Y1"], sel["Y2"]
    k = first
    p_lam1 = prob.variable(f"p{k}", m, nonneg=True)
    p_lam2 = prob.variable(f"p{k + 1}", m, nonneg=True)
    P_lam1_lam1 = prob.variable(f"p{k + 2}", (m, m), symmetric=True, nonneg=True)
    p_y1 = prob.variable(f"p{k + 3}", m, nonneg=True)
    p_y2 = prob.variable(f"p{k + 4}", m, nonneg=True)
    P_y1_y2 = prob.variable(f"p{k + 5}", (m, m), nonneg=True)
    P_y2_lam1 = prob.variable(f"p{k + 6}", (m, m), nonneg=True)
    P_y1_lam2 = prob.variable(f"p{k + 7}", (m, m), nonneg=True)
    j = 1 if sign > 0 else 3
    s_1 = prob.variable(f"s{j}", m)
    s_2 = prob.variable(f"s{j + 1}", m)

    base = eta * (e0.T @ e0)
    w_row = w[None, :] if not is_symbolic(w) else _row(w)
    gram = (
        base
        + sign * sym(e0.T @ (w_row @ (L1 - L2)))
        - sym(e0.T @ (_row(p_lam1) @ L1 + _row(p_lam2) @ L2 + _row(p_y1) @ Y1 + _row(p_y2) @ Y2))
        - sym(L1.T @ P_lam1_lam1 @ L1)
        - sym(Y1.T @ P_y1_y2 @ Y2)
        - sym(Y2.T @ P_y2_lam1 @ L1)
        - sym(Y1.T @ P_y1_lam2 @ L2)
        - sym(L1.T @ _diag(s_1) @ Y1)
        - sym(L2.T @ _diag(s_2) @ Y2)
    )
    names = [f"p{k + i}" for i in range(8)] + [f"s{j}", f"s{j + 1}"]
    return gram, names


def _row(v: Any) -> Any:
    import cvxpy as cp
    return cp.reshape(v, (1, v.shape[0]), order="F")


def _diag(v: Any) -> Any:
    import cvxpy as cp
    return cp.diag(v)


def build_phi_constraints(
    F: np.ndarray,
    w: Any,
    eta: Any,
    prob: Optional[SDProblem] = None,
    degree: Optional[int] = None
) -> SDProblem:
    """
    Add the two uniqueness conditions for row w to an SDProblem.

    Args:
        F: LCP matrix (m x m)
        w: Row, a numpy vector or a cvxpy variable of length m
        eta: Slack, a number or a cvxpy scalar
        prob: Problem to extend (a new one is created when omitted)
        degree: 2 for the Gram form in [1; lam1; lam2; q], 4 for the full
            product form (defaults to settings.sos_degree)

    Returns:
        The problem carrying both PSD conditions ("phi1", "phi2")

    Raises:
        ValueError: On dimension mismatch or an unsupported degree
    """
    F = np.asarray(F, dtype=float)
    if F.ndim != 2 or F.shape[0] != F.shape[1]:
        raise ValueError(f"F must be square, got shape {F.shape}")
    m = F.shape[0]
    if w.shape != (m,):
        raise ValueError(f"w must have shape ({m},), got {w.shape}")
    degree = settings.sos_degree if degree is None else degree
    _check_degree(degree, m)
    prob = prob or SDProblem("phi")

    if degree == 4:
        from sos.polynomial import add_product_conditions
        add_product_conditions(prob, F, w, eta)
        return prob

    for sign, first, name in ((1.0, 1, "phi1"), (-1.0, 9, "phi2")):
        gram, _ = phi_gram(prob, F, w, eta, sign, first)
        prob.add_psd(gram, name)
    logger.debug(f"Built degree-2 uniqueness conditions for m={m}")
    return prob
