"""
Tests for the uniqueness programs and the Find-W row search.
"""
import numpy as np
import pytest

from conic.sdp import SDProblem, SDPStatus, solve_sdp
from lcp.enumerate import WUniquenessReport
from sos.programs import build_phi_constraints, selectors
from sos.find_w import FindWError, FindWStep, WFinder, clean_row, find_w, row_candidates, snap_row, solve_find_w_step
from bench.examples import BOX_FRICTION_F, table3_normal_forces


def parallel(u, v):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return abs(u @ v) >= (1.0 - 1e-6) * np.linalg.norm(u) * np.linalg.norm(v)


class TestPhiConstraints:
    """Tests for the fixed-row uniqueness programs."""

    def test_selectors(self):
        """Test the row selectors of y1 = F lam1 + q."""
        F = np.array([[1.0, 2.0], [3.0, 4.0]])
        sel = selectors(F)
        b = np.array([1.0, 0.5, 0.25, -1.0, 2.0, 7.0, 8.0])
        np.testing.assert_allclose(sel["Y1"] @ b, F @ [0.5, 0.25] + [7.0, 8.0])
        np.testing.assert_allclose(sel["L2"] @ b, [-1.0, 2.0])

    def test_zero_row_feasible(self):
        """Test that w = 0 is always admissible."""
        prob = build_phi_constraints(BOX_FRICTION_F, np.zeros(3), 0.5)
        assert solve_sdp(prob).feasible

    def test_friction_difference_feasible(self):
        """Test that lam+ - lam- is certified unique for the box."""
        prob = build_phi_constraints(BOX_FRICTION_F, np.array([0.0, 1.0, -1.0]), 1.0)
        assert solve_sdp(prob).feasible

    def test_slack_row_infeasible(self):
        """Test that the non-unique first coordinate is rejected."""
        prob = build_phi_constraints(BOX_FRICTION_F, np.array([1.0, 0.0, 0.0]), 1.0)
        assert not solve_sdp(prob).feasible

    def test_extends_given_problem(self):
        """Test that the conditions are added to an existing problem."""
        prob = SDProblem("host")
        out = build_phi_constraints(np.eye(2), np.array([1.0, 0.0]), 1.0, prob=prob, degree=2)
        assert out is prob
        assert [con.name for con in prob.psd] == ["phi1", "phi2"]
        assert "p1" in prob.variables and "p16" in prob.variables

    def test_default_is_product_form(self):
        """Test that the default builds Gram matrices over all monomials of degree <= 2."""
        prob = build_phi_constraints(BOX_FRICTION_F, np.zeros(3), 0.5)
        assert [con.size for con in prob.psd] == [55, 55]
        prob = build_phi_constraints(BOX_FRICTION_F, np.zeros(3), 0.5, degree=2)
        assert [con.size for con in prob.psd] == [10, 10]

    def test_wrong_row_length(self):
        """Test the dimension check on w."""
        with pytest.raises(ValueError):
            build_phi_constraints(np.eye(2), np.zeros(3), 1.0)

    def test_degree_limits(self):
        """Test that the product form is limited to small LCPs."""
        with pytest.raises(ValueError):
            build_phi_constraints(np.eye(4), np.zeros(4), 1.0, degree=4)
        with pytest.raises(ValueError):
            build_phi_constraints(np.eye(2), np.zeros(2), 1.0, degree=3)


class TestProductForm:
    """Tests for the degree-4 conditions on scalar LCPs."""

    def test_positive_scalar_feasible(self):
        """Test w = 1 for F = 1, where the solution is unique."""
        prob = build_phi_constraints(np.array([[1.0]]), np.array([1.0]), 1.0, degree=4)
        assert [con.name for con in prob.psd] == ["phi1", "phi2"]
        assert solve_sdp(prob).feasible

    def test_zero_scalar_infeasible(self):
        """Test w = 1 for F = 0, where lam is free at q = 0."""
        prob = build_phi_constraints(np.array([[0.0]]), np.array([1.0]), 1.0, degree=4)
        assert not solve_sdp(prob).feasible


class TestSolveFindWStep:
    """Tests for one row program."""

    def test_full_rank_rows(self):
        """Test that a full-rank W_d returns objective 0 without a solve."""
        step = solve_find_w_step(np.eye(2), np.eye(2), np.zeros(0))
        assert step.objective == 0.0
        assert step.nullspace.shape == (2, 0)

    def test_scalar_row(self):
        """Test F = 1: the optimum sits at the bound with sign set by r."""
        step = solve_find_w_step(np.array([[1.0]]), np.zeros((0, 1)), np.array([0.5]))
        assert step.status == SDPStatus.FEASIBLE_OPTIMAL
        assert step.w[0] == pytest.approx(-1.0, abs=1e-5)
        assert step.objective == pytest.approx(-0.5, abs=1e-5)

    def test_weight_length(self):
        """Test that r must match the nullspace dimension."""
        with pytest.raises(ValueError):
            solve_find_w_step(np.eye(2), np.zeros((0, 2)), np.ones(3))


class TestCleanRow:
    """Tests for row normalization."""

    def test_normalizes(self):
        """Test scaling, zeroing and sign."""
        np.testing.assert_allclose(clean_row([1e-9, -0.5, 0.5]), [0.0, 1.0, -1.0])

    def test_zero_row(self):
        """Test that a zero row is an error."""
        with pytest.raises(FindWError):
            clean_row([0.0, 0.0])

    def test_snaps_solver_noise(self):
        """Test that solver noise on a friction row is rounded away."""
        w = clean_row([-0.00105, -0.99994, 0.99905])
        np.testing.assert_array_equal(snap_row(w), [0.0, 1.0, -1.0])

    def test_snap_needs_nearby_ratio(self):
        """Test that entries far from small ratios are left alone."""
        assert snap_row(np.array([1.0, 0.3141])) is None

    def test_exact_row_has_one_candidate(self):
        """Test that an already rounded row is not duplicated."""
        candidates = row_candidates(np.array([0.0, -0.5, 0.5]))
        assert len(candidates) == 1
        np.testing.assert_array_equal(candidates[0], [0.0, 1.0, -1.0])

    def test_rounded_candidate_first(self):
        """Test that the rounded row is tried before the raw one."""
        candidates = row_candidates(np.array([0.002, 0.998, -1.0]))
        np.testing.assert_array_equal(candidates[0], [0.0, 1.0, -1.0])
        assert candidates[1][0] == pytest.approx(-0.002)


class TestFindW:
    """Tests for the row search."""

    def test_box_friction(self):
        """Test that the box yields the friction difference."""
        W = find_w(BOX_FRICTION_F, seed=0)
        assert W.shape == (1, 3)
        assert parallel(W[0], [0.0, 1.0, -1.0])

    def test_table_normal_forces(self):
        """Test that a rank-one F yields the total force."""
        W = find_w(table3_normal_forces(), seed=1)
        assert W.shape == (1, 3)
        assert parallel(W[0], [1.0, 1.0, 1.0])

    @staticmethod
    def scripted_steps(monkeypatch, rows):
        """Replace the row program by a script; None entries fail numerically."""
        calls = []

        def scripted(F, W_d, r, eta_cap=None, degree=None):
            calls.append(W_d.shape[0])
            w = rows[len(calls) - 1]
            if w is None:
                raise FindWError("row program ended as numerical_failure")
            w = np.asarray(w, dtype=float)
            objective = -1.0 if np.any(w) else 0.0
            return FindWStep(r=r, nullspace=np.eye(len(w)), w=w, eta=0.0, objective=objective,
                             status=SDPStatus.FEASIBLE_OPTIMAL)

        monkeypatch.setattr("sos.find_w.solve_find_w_step", scripted)
        return calls

    def test_noisy_row_accepted_after_rounding(self, monkeypatch):
        """Test that a friction row with solver noise still passes the oracle."""
        self.scripted_steps(monkeypatch, [[-0.00105, -0.99994, 0.99905], [0.0, 0.0, 0.0]])
        result = WFinder(BOX_FRICTION_F, seed=0).run()
        assert not result.oracle_failed
        np.testing.assert_array_equal(result.W, [[0.0, 1.0, -1.0]])

    def test_numerical_failure_keeps_accepted_rows(self, monkeypatch):
        """Test that a failing second program stops with the first row."""
        self.scripted_steps(monkeypatch, [[0.9999, 1.0, 1.0003], None])
        result = WFinder(table3_normal_forces(), seed=1).run()
        assert result.partial
        assert not result.oracle_failed
        np.testing.assert_array_equal(result.W, [[1.0, 1.0, 1.0]])
        assert "numerical_failure" in result.message

    def test_first_numerical_failure_raises(self, monkeypatch):
        """Test that a failing first program is an error."""
        self.scripted_steps(monkeypatch, [None])
        with pytest.raises(FindWError):
            WFinder(table3_normal_forces(), seed=1).run()

    def test_scalar_unique(self):
        """Test F = 1."""
        W = find_w(np.array([[1.0]]), seed=0)
        np.testing.assert_allclose(np.abs(W), [[1.0]])

    def test_scalar_zero(self):
        """Test F = 0: nothing is unique."""
        W = find_w(np.array([[0.0]]), seed=0)
        assert W.shape == (0, 1)

    def test_p_matrix_full_rank(self):
        """Test that a P-matrix gets a full-rank W."""
        W = find_w(np.array([[2.0, 1.0], [0.0, 2.0]]), seed=3)
        assert np.linalg.matrix_rank(W) == 2

    def test_seed_determinism(self):
        """Test that the same seed gives the same rows."""
        np.testing.assert_array_equal(find_w(np.eye(2), seed=5), find_w(np.eye(2), seed=5))

    def test_partial_result(self):
        """Test the row limit."""
        result = WFinder(np.eye(3), seed=0, max_rows=1).run()
        assert result.rank == 1
        assert result.partial

    def test_oracle_rejection(self, monkeypatch):
        """Test that a rejected row leaves the verified prefix."""
        rejected = WUniquenessReport(samples=1, max_spread=1.0, multi_solution_samples=1, empty_samples=0, tol=1e-6)
        monkeypatch.setattr("sos.find_w.check_w_uniqueness", lambda *args, **kwargs: rejected)
        result = WFinder(np.eye(2), seed=0).run()
        assert result.oracle_failed
        assert result.W.shape == (0, 2)

    def test_rejects_non_square(self):
        """Test that F must be square."""
        with pytest.raises(ValueError):
            WFinder(np.ones((2, 3)))


if __name__ == '__main__':
    pytest.main([__file__, '-v'])
