"""
Degree-4 uniqueness conditions over the monomials of degree <= 2 in
(lam1, lam2, q).

The degree-2 form is strengthened by scaling the target with
ell = |lam1|^2 + |lam2|^2 and letting every constraint multiplier carry
a constant and an ell term:

    (eta + s w'(lam1 - lam2)) ell
        - sum (a_k + b_k ell) g_k          g_k in {lam1, lam2, y1, y2}
        - sum (c_kl + e_kl ell) g_k g_l    all pairs of those
        - sum (f_i + h_i ell) lam_ji y_ji  complementarity, free sign
    = z' G z,   G PSD

Coefficients are matched monomial by monomial with sympy.
"""
from typing import Any, Dict, List, Tuple
import itertools
import logging

import cvxpy as cp
import numpy as np
import sympy
from sympy.polys.monomials import itermonomials
from sympy.polys.orderings import monomial_key

from conic.sdp import SDProblem

logger = logging.getLogger(__name__)

Monomial = Tuple[int, ...]


class ProductBasis:
    """Indeterminates, constraint polynomials and the Gram monomial basis for one F."""

    def __init__(self, F: np.ndarray):
        m = F.shape[0]
        self.m = m
        self.lam1 = list(sympy.symbols(f"a0:{m}"))
        self.lam2 = list(sympy.symbols(f"b0:{m}"))
        self.q = list(sympy.symbols(f"q0:{m}"))
        self.gens = self.lam1 + self.lam2 + self.q
        F_sym = sympy.Matrix(F.tolist())
        q = sympy.Matrix(self.q)
        y1 = F_sym * sympy.Matrix(self.lam1) + q
        y2 = F_sym * sympy.Matrix(self.lam2) + q
        self.y1 = list(y1)
        self.y2 = list(y2)
        self.linear = self.lam1 + self.lam2 + self.y1 + self.y2
        self.complementarity = [self.lam1[i] * self.y1[i] for i in range(m)] + [
            self.lam2[i] * self.y2[i] for i in range(m)
        ]
        self.ell = sum(v ** 2 for v in self.lam1 + self.lam2)
        self.delta = [self.lam1[i] - self.lam2[i] for i in range(m)]

        monomials = sorted(itermonomials(self.gens, 2), key=monomial_key("grlex", self.gens))
        self.basis = monomials
        self.pair_index: Dict[Monomial, List[Tuple[int, int]]] = {}
        for i, zi in enumerate(monomials):
            for j, zj in enumerate(monomials):
                self.pair_index.setdefault(self.exponent(zi * zj), []).append((i, j))

    def exponent(self, expr: Any) -> Monomial:
        return sympy.Poly(expr, *self.gens).monoms()[0]

    def coefficients(self, expr: Any) -> Dict[Monomial, float]:
        """Monomial exponent -> coefficient of a polynomial in the indeterminates."""
        poly = sympy.Poly(sympy.expand(expr), *self.gens)
        return {k: float(v) for k, v in poly.as_dict().items() if v != 0}


def _terms(
    prob: SDProblem,
    basis: ProductBasis,
    w: Any,
    eta: Any,
    sign: float,
    tag: str
) -> List[Tuple[Any, Any]]:
    """(decision value, polynomial) pairs whose sum is the certified polynomial."""
    terms: List[Tuple[Any, Any]] = [(eta, basis.ell)]
    for i, d in enumerate(basis.delta):
        terms.append((w[i], sign * d * basis.ell))

    n_lin = len(basis.linear)
    a = prob.variable(f"{tag}_lin", n_lin, nonneg=True)
    b = prob.variable(f"{tag}_lin_ell", n_lin, nonneg=True)
    for k, g in enumerate(basis.linear):
        terms.append((-a[k], g))
        terms.append((-b[k], g * basis.ell))

    pairs = list(itertools.combinations_with_replacement(range(n_lin), 2))
    c = prob.variable(f"{tag}_pair", len(pairs), nonneg=True)
    e = prob.variable(f"{tag}_pair_ell", len(pairs), nonneg=True)
    for idx, (k, l) in enumerate(pairs):
        product = basis.linear[k] * basis.linear[l]
        terms.append((-c[idx], product))
        terms.append((-e[idx], product * basis.ell))

    n_comp = len(basis.complementarity)
    f = prob.variable(f"{tag}_comp", n_comp)
    h = prob.variable(f"{tag}_comp_ell", n_comp)
    for i, g in enumerate(basis.complementarity):
        terms.append((-f[i], g))
        terms.append((-h[i], g * basis.ell))
    return terms


def _match(prob: SDProblem, basis: ProductBasis, terms: List[Tuple[Any, Any]], name: str) -> None:
    n = len(basis.basis)
    G = prob.variable(f"{name}_gram", (n, n), symmetric=True)
    prob.add_psd(G, name)

    rhs: Dict[Monomial, List[Any]] = {}
    for value, poly in terms:
        for mono, coeff in basis.coefficients(poly).items():
            rhs.setdefault(mono, []).append(coeff * value)

    for mono in set(basis.pair_index) | set(rhs):
        A = np.zeros((n, n))
        for i, j in basis.pair_index.get(mono, []):
            A[i, j] += 1.0
        parts = rhs.get(mono, [])
        right = sum(parts[1:], parts[0]) if parts else 0.0
        prob.add_eq(cp.sum(cp.multiply(A, G)), right)


def add_product_conditions(prob: SDProblem, F: np.ndarray, w: Any, eta: Any) -> SDProblem:
    """Add the two degree-4 conditions ("phi1", "phi2") for row w to prob."""
    basis = ProductBasis(np.asarray(F, dtype=float))
    for sign, tag in ((1.0, "phi1"), (-1.0, "phi2")):
        _match(prob, basis, _terms(prob, basis, w, eta, sign, tag), tag)
    logger.debug(f"Built degree-4 uniqueness conditions: {len(basis.basis)} monomials, m={basis.m}")
    return prob
