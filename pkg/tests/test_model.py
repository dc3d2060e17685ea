"""
Tests for the LCS model types and closed-loop constructions.
"""
import numpy as np
import pytest

from model.lcs import (
    LCSModel,
    Controller,
    close_loop_direct,
    augment_with_filter,
    filter_blocks,
    extract_filter_gains,
)
from sim.cartpole import CartPoleParams
from bench.examples import build_example


class TestLCSModel:
    """Tests for LCSModel validation."""

    def test_dimension_mismatch(self):
        """Test that D_bar must have m columns."""
        with pytest.raises(ValueError):
            LCSModel(
                A_bar=np.eye(2), B=np.ones((2, 1)), D_bar=np.ones((2, 3)), a=np.zeros(2),
                E_bar=np.zeros((2, 2)), F_bar=np.eye(2), H=np.zeros((2, 1)), c=np.zeros(2)
            )

    def test_non_finite(self):
        """Test that NaN entries are rejected."""
        with pytest.raises(ValueError):
            LCSModel(
                A_bar=[[np.nan]], B=[[1.0]], D_bar=[[0.0]], a=[0.0],
                E_bar=[[0.0]], F_bar=[[1.0]], H=[[0.0]], c=[0.0]
            )

    def test_cartpole_shapes(self):
        """Test the cart-pole dimensions."""
        model = CartPoleParams().linear_model()
        assert (model.n_x, model.n_k, model.m) == (4, 1, 2)
        np.testing.assert_allclose(model.F_bar, np.diag([0.1, 0.1]))
        np.testing.assert_allclose(model.c, [0.1, 0.1])

    def test_arrays_read_only(self):
        """Test immutability of stored matrices."""
        model = CartPoleParams().linear_model()
        with pytest.raises(ValueError):
            model.A_bar[0, 0] = 1.0


class TestController:
    """Tests for Controller."""

    def test_dependent_rows_rejected(self):
        """Test that W must have independent rows."""
        with pytest.raises(ValueError):
            Controller(K=[[1.0]], L_tilde=[[0.0, 0.0]], W=[[1.0, 0.0], [2.0, 0.0]])

    def test_effective_L(self):
        """Test L = L_tilde W."""
        ctrl = Controller(K=[[1.0]], L_tilde=[[0.7]], W=[[0.0, 1.0, -1.0]])
        np.testing.assert_allclose(ctrl.effective_L, [[0.0, 0.7, -0.7]])

    def test_from_full_L(self):
        """Test factoring a published L through W."""
        ctrl = Controller.from_full_L([[-10.58]], [[0.0, 0.7, -0.7]], [[0.0, 1.0, -1.0]])
        np.testing.assert_allclose(ctrl.L_tilde, [[0.7]])

    def test_from_full_L_outside_rowspace(self):
        """Test that L must lie in rowspace(W)."""
        with pytest.raises(ValueError):
            Controller.from_full_L([[1.0]], [[0.0, 1.0, 1.0]], [[0.0, 1.0, -1.0]])

    def test_state_feedback(self):
        """Test a controller without force feedback."""
        ctrl = Controller.state_feedback([[1.0, 2.0]], 3)
        assert ctrl.n_w == 0
        np.testing.assert_array_equal(ctrl.effective_L, np.zeros((1, 3)))


class TestCloseLoopDirect:
    """Tests for close_loop_direct."""

    def test_cartpole_paper_gains(self):
        """Test A = A_bar + B K and D = D_bar + B L on the cart-pole."""
        example = build_example("cartpole")
        sys = close_loop_direct(example.model, example.paper_gains)
        np.testing.assert_allclose(sys.A[2], [3.69, 0.981 - 46.7, 3.39, -5.71], atol=1e-12)
        np.testing.assert_allclose(sys.A[3], [3.69 / 0.5, 21.582 - 46.7 / 0.5, 3.39 / 0.5, -5.71 / 0.5], atol=1e-12)
        np.testing.assert_allclose(sys.D[2], [-13.98, 13.98], atol=1e-12)
        np.testing.assert_allclose(sys.D[3], [20.0 - 13.98 / 0.5, -20.0 + 13.98 / 0.5], atol=1e-12)
        assert sys.provenance == "direct"

    def test_zero_gains(self):
        """Test that K = 0, L = 0 leaves A and D unchanged."""
        model = CartPoleParams().linear_model()
        sys = close_loop_direct(model, Controller.from_full_L(np.zeros((1, 4)), np.zeros((1, 2)), np.eye(2)))
        np.testing.assert_array_equal(sys.A, model.A_bar)
        np.testing.assert_array_equal(sys.D, model.D_bar)
        np.testing.assert_array_equal(sys.F, model.F_bar)

    def test_rejects_input_coupling(self):
        """Test that H != 0 is refused."""
        example = build_example("box_friction")
        with pytest.raises(ValueError):
            close_loop_direct(example.model, example.paper_gains)

    def test_wrong_gain_shape(self):
        """Test that K must match the state dimension."""
        model = CartPoleParams().linear_model()
        with pytest.raises(ValueError):
            close_loop_direct(model, Controller.state_feedback([[1.0, 2.0]], 2))


class TestAugmentWithFilter:
    """Tests for augment_with_filter."""

    def test_box_friction_blocks(self):
        """Test the filtered box: the tau column of E is H."""
        example = build_example("box_friction")
        sys = augment_with_filter(example.model, 100.0, example.paper_gains)
        assert sys.n == 2 and sys.provenance == "filtered"
        np.testing.assert_array_equal(sys.E[:, 1], [0.0, 1.0, -1.0])
        np.testing.assert_array_equal(sys.E[:, 0], [0.0, 0.0, 0.0])
        np.testing.assert_array_equal(sys.A[0], [0.0, 0.25])
        np.testing.assert_allclose(sys.A[1], [-1058.0, -100.0])
        np.testing.assert_allclose(sys.D[1], [0.0, 70.0, -70.0])

    def test_zero_gains_unit_bandwidth(self):
        """Test K = 0, L = 0, kappa = 1."""
        model = CartPoleParams().linear_model()
        ctrl = Controller.from_full_L(np.zeros((1, 4)), np.zeros((1, 2)), np.eye(2))
        sys = augment_with_filter(model, 1.0, ctrl)
        np.testing.assert_array_equal(sys.A[4:, 4:], -np.eye(1))
        np.testing.assert_array_equal(sys.D[4:], np.zeros((1, 2)))
        np.testing.assert_array_equal(sys.a, np.zeros(5))

    def test_F_untouched(self):
        """Test that F equals F_bar bit for bit for any gains."""
        rng = np.random.default_rng(2)
        example = build_example("manip2d")
        for _ in range(5):
            K = rng.standard_normal((2, 3))
            L_tilde = rng.standard_normal((2, 3))
            sys = augment_with_filter(example.model, 100.0, Controller(K=K, L_tilde=L_tilde, W=example.W))
            assert np.array_equal(sys.F, example.model.F_bar)

    def test_round_trip(self):
        """Test that the filter blocks are kappa K and kappa L."""
        example = build_example("box_friction")
        ctrl = example.paper_gains
        sys = augment_with_filter(example.model, 100.0, ctrl)
        kK, kL = filter_blocks(sys, 1)
        assert np.array_equal(kK, 100.0 * ctrl.K)
        assert np.array_equal(kL, 100.0 * ctrl.effective_L)
        K, L = extract_filter_gains(sys, 1)
        np.testing.assert_allclose(K, ctrl.K, rtol=1e-15)
        np.testing.assert_allclose(L, ctrl.effective_L, rtol=1e-15, atol=1e-15)

    def test_rejects_nonpositive_kappa(self):
        """Test that kappa must be positive."""
        example = build_example("box_friction")
        with pytest.raises(ValueError):
            augment_with_filter(example.model, 0.0, example.paper_gains)

    def test_input_reconstruction(self):
        """Test that the recorded input of a filtered loop is tau."""
        example = build_example("box_friction")
        sys = augment_with_filter(example.model, 100.0, example.paper_gains)
        np.testing.assert_array_equal(sys.input(np.array([0.3, -0.2]), np.zeros(3)), [-0.2])


if __name__ == '__main__':
    pytest.main([__file__, '-v'])
