"""
Tests for Lyapunov certificates: matrix inequalities, verification, synthesis
and the trajectory monitor.
"""
import cvxpy as cp
import numpy as np
import pytest

from conic.sdp import psd_margin
from certify.lyapunov import GammaPrimePoint, LyapunovCandidate, MultiplierSet, lyapunov_jump
from certify.lmis import assemble_bound_lmis, assemble_decrease_lmi
from certify.verify import accepted, check_uniqueness_map, close_loop, verify_closed_loop, verify_fixed_gains
from certify.synthesis import SynthesisError, lqr_gain, synthesize
from certify.monitor import check_decrease_along_traj
from model.lcs import ClosedLoopLCS, Controller, LCSModel
from sim.integrator import SimConfig, Trajectory, simulate_lcs
from bench.examples import build_example, jump_example
from bench.runner import run_success_rate


def closed_loop(A, D, a, E, F, c):
    A = np.asarray(A, dtype=float)
    F = np.asarray(F, dtype=float)
    return ClosedLoopLCS(
        A=A, D=D, a=a, E=E, F=F, c=c,
        U_x=np.zeros((1, A.shape[0])),
        U_lam=np.zeros((1, F.shape[0])),
        name="test"
    )


def stable_model(c=(1.0,)):
    """dx/dt = -x with one contact that never touches the state."""
    return LCSModel(
        A_bar=-np.eye(2),
        B=np.zeros((2, 1)),
        D_bar=np.zeros((2, 1)),
        a=np.zeros(2),
        E_bar=np.zeros((1, 2)),
        F_bar=[[1.0]],
        H=np.zeros((1, 1)),
        c=list(c),
        name="stable"
    )


def scalar_model(c=1.0, H=0.0):
    """dx/dt = x + u with a single inactive or pinned contact."""
    return LCSModel(
        A_bar=[[1.0]],
        B=[[1.0]],
        D_bar=[[0.0]],
        a=[0.0],
        E_bar=[[0.0]],
        F_bar=[[1.0]],
        H=[[H]],
        c=[c],
        name="scalar"
    )


def random_candidate(rng, n, W):
    n_w = W.shape[0]
    P = rng.normal(size=(n, n))
    R_tilde = rng.normal(size=(n_w, n_w))
    return LyapunovCandidate(
        P=P + P.T,
        Q_tilde=rng.normal(size=(n, n_w)),
        R_tilde=R_tilde + R_tilde.T,
        p=rng.normal(size=n),
        r_tilde=rng.normal(size=n_w),
        z=0.3,
        W=W
    )


@pytest.fixture
def consistent_point():
    """A loop with contact 1 sticking and contact 2 separated, and its motion."""
    rng = np.random.default_rng(3)
    A = rng.normal(size=(3, 3))
    D = rng.normal(size=(3, 2))
    a = rng.normal(size=3)
    E = rng.normal(size=(2, 3))
    F = np.array([[2.0, 0.5], [0.3, 1.0]])
    x = rng.normal(size=3)
    lam = np.array([0.7, 0.0])
    y = np.array([0.0, 1.5])
    c = y - E @ x - F @ lam
    sys = closed_loop(A, D, a, E, F, c)
    x_dot = sys.flow(x, lam)
    lam_dot = np.array([-(E @ x_dot)[0] / F[0, 0], 0.0])
    point = GammaPrimePoint.from_motion(sys, x, lam, lam_dot)
    return sys, point, x_dot


class TestLyapunovCandidate:
    """Tests for candidate evaluation and force jumps."""

    def test_quadratic_value(self):
        """Test V = x'P x for the pure quadratic candidate."""
        V = LyapunovCandidate.quadratic(np.diag([1.0, 2.0]), np.eye(2))
        assert V.value([1.0, 1.0], [5.0, 5.0]) == pytest.approx(3.0)
        np.testing.assert_allclose(V.values([[1.0, 0.0], [0.0, 2.0]], np.zeros((2, 2))), [1.0, 8.0])

    def test_values_need_solved_candidate(self):
        """Test that a candidate with cvxpy variables cannot be evaluated."""
        V = LyapunovCandidate.quadratic(np.eye(1), np.eye(1))
        V.P = cp.Variable((1, 1))
        with pytest.raises(ValueError):
            V.value([1.0], [0.0])

    def test_jump_with_generic_force_terms(self):
        """Test that V jumps between equal-sum force solutions when R ignores W."""
        V = LyapunovCandidate.quadratic(np.eye(1), np.eye(2))
        V.R_tilde = np.diag([1.0, 0.0])
        x = [-1.0]
        lam_a, lam_b = [1.0, 0.0], [0.0, 1.0]
        up = lyapunov_jump(V, x, lam_a, lam_b)
        assert up == pytest.approx(-1.0)
        assert lyapunov_jump(V, x, lam_b, lam_a) == pytest.approx(-up)

    def test_no_jump_through_uniqueness_map(self):
        """Test that force terms through W = [1, 1] see only lam1 + lam2."""
        V = LyapunovCandidate(
            P=np.eye(1),
            Q_tilde=np.array([[0.4]]),
            R_tilde=np.array([[2.0]]),
            p=np.zeros(1),
            r_tilde=np.array([0.5]),
            z=0.0,
            W=np.array([[1.0, 1.0]])
        )
        assert lyapunov_jump(V, [-1.0], [1.0, 0.0], [0.0, 1.0]) == pytest.approx(0.0)
        assert lyapunov_jump(V, [-1.0], [0.3, 0.7], [0.9, 0.1]) == pytest.approx(0.0)

    def test_jump_example_has_two_solutions(self):
        """Test that the jump system admits both force splits at x < 0."""
        model = jump_example()
        x = np.array([-1.0])
        for lam in ([1.0, 0.0], [0.0, 1.0]):
            y = model.E_bar @ x + model.F_bar @ lam + model.c
            assert np.all(y >= -1e-12)
            assert np.allclose(np.asarray(lam) * y, 0.0)


class TestGammaPrimePoint:
    """Tests for consistent derivative points."""

    def test_constructed_point_is_member(self, consistent_point):
        """Test that a sticking/separated motion satisfies all relations."""
        sys, point, _ = consistent_point
        assert point.is_member(sys)
        assert point.xi().size == sys.n + 4 * sys.m + 1

    def test_arbitrary_rate_is_not_member(self, consistent_point):
        """Test that a force rate on the separated contact is rejected."""
        sys, point, _ = consistent_point
        bad = GammaPrimePoint.from_motion(sys, point.x, point.lam, point.lam_dot + np.array([0.0, 1.0]))
        assert not bad.is_member(sys)


class TestBoundLMIs:
    """Tests for the lower and upper bound inequalities."""

    def test_multiplier_free_reduction(self):
        """Test V = x'x with gamma1 = 1/2, gamma2 = 2 and zero multipliers."""
        sys = closed_loop(-np.eye(2), np.zeros((2, 2)), np.zeros(2), np.zeros((2, 2)), np.eye(2), np.zeros(2))
        V = LyapunovCandidate.quadratic(np.eye(2), np.eye(2))
        lower, upper = assemble_bound_lmis(sys, V, MultiplierSet.zeros(2, 2), 0.5, 2.0)
        expected = np.zeros((5, 5))
        expected[:2, :2] = 0.5 * np.eye(2)
        np.testing.assert_allclose(lower, expected)
        expected[:2, :2] = np.eye(2)
        np.testing.assert_allclose(upper, expected)
        assert psd_margin(lower) >= 0.0 and psd_margin(upper) >= 0.0

    def test_upper_dropped_without_W2(self):
        """Test that the upper inequality is skipped without its multiplier."""
        sys = closed_loop(-np.eye(1), np.zeros((1, 1)), np.zeros(1), np.zeros((1, 1)), np.eye(1), np.ones(1))
        V = LyapunovCandidate.quadratic(np.eye(1), np.eye(1))
        _, upper = assemble_bound_lmis(sys, V, MultiplierSet.zeros(1, 1, upper=False), 0.5)
        assert upper is None

    def test_upper_needs_gamma2(self):
        """Test that the upper inequality requires its constant."""
        sys = closed_loop(-np.eye(1), np.zeros((1, 1)), np.zeros(1), np.zeros((1, 1)), np.eye(1), np.ones(1))
        V = LyapunovCandidate.quadratic(np.eye(1), np.eye(1))
        with pytest.raises(ValueError):
            assemble_bound_lmis(sys, V, MultiplierSet.zeros(1, 1), 0.5)

    def test_quadratic_form_on_complementary_point(self, consistent_point):
        """Test zeta' lower zeta = V - gamma1 |x|^2 - g'W1 g at a solution."""
        sys, point, _ = consistent_point
        rng = np.random.default_rng(7)
        V = random_candidate(rng, 3, np.eye(2))
        mult = MultiplierSet.zeros(3, 2)
        mult.W1 = rng.uniform(0.0, 1.0, (5, 5))
        mult.W1 = mult.W1 + mult.W1.T
        mult.tau1 = rng.normal(size=2)
        lower, _ = assemble_bound_lmis(sys, V, mult, 0.25, 4.0)

        zeta = np.concatenate([point.x, point.lam, [1.0]])
        g = np.concatenate([sys.E @ point.x + sys.F @ point.lam + sys.c, point.lam, [1.0]])
        expected = V.value(point.x, point.lam) - 0.25 * point.x @ point.x - g @ mult.W1 @ g
        assert zeta @ lower @ zeta == pytest.approx(expected, rel=1e-9, abs=1e-9)

    def test_dimension_mismatch(self):
        """Test that a candidate for another system is rejected."""
        sys = closed_loop(-np.eye(2), np.zeros((2, 1)), np.zeros(2), np.zeros((1, 2)), np.eye(1), np.ones(1))
        V = LyapunovCandidate.quadratic(np.eye(3), np.eye(1))
        with pytest.raises(ValueError):
            assemble_bound_lmis(sys, V, MultiplierSet.zeros(3, 1), 0.5, 2.0)


class TestDecreaseLMI:
    """Tests for the decrease inequality."""

    def test_stable_reduction(self):
        """Test A = -I, P = I, gamma3 = 1 gives the x block 2I - I."""
        sys = closed_loop(-np.eye(2), np.zeros((2, 1)), np.zeros(2), np.zeros((1, 2)), np.eye(1), np.zeros(1))
        V = LyapunovCandidate.quadratic(np.eye(2), np.eye(1))
        M = assemble_decrease_lmi(sys, V, MultiplierSet.zeros(2, 1), 1.0)
        assert M.shape == (7, 7)
        np.testing.assert_allclose(M[:2, :2], np.eye(2))
        np.testing.assert_allclose(M[2:, 2:], 0.0)
        assert psd_margin(M) >= -1e-12

    def test_unstable_not_psd(self):
        """Test that A = +I with P = I cannot decrease."""
        sys = closed_loop(np.eye(2), np.zeros((2, 1)), np.zeros(2), np.zeros((1, 2)), np.eye(1), np.zeros(1))
        V = LyapunovCandidate.quadratic(np.eye(2), np.eye(1))
        M = assemble_decrease_lmi(sys, V, MultiplierSet.zeros(2, 1), 0.0)
        assert psd_margin(M) == pytest.approx(-2.0)

    def test_form_matches_derivative(self, consistent_point):
        """Test xi'(-M3) xi = -(dV/dt + gamma3 |x|^2) with zero multipliers."""
        sys, point, x_dot = consistent_point
        V = random_candidate(np.random.default_rng(11), 3, np.eye(2))
        M = assemble_decrease_lmi(sys, V, MultiplierSet.zeros(3, 2), 0.5)
        h = 1e-3
        dV = (
            V.value(point.x + h * x_dot, point.lam + h * point.lam_dot)
            - V.value(point.x - h * x_dot, point.lam - h * point.lam_dot)
        ) / (2 * h)
        xi = point.xi()
        assert xi @ M @ xi == pytest.approx(-(dV + 0.5 * point.x @ point.x), rel=1e-6, abs=1e-8)

    def test_equality_multipliers_vanish(self, consistent_point):
        """Test that free multipliers do not change the form on consistent motions."""
        sys, point, _ = consistent_point
        rng = np.random.default_rng(5)
        V = random_candidate(rng, 3, np.eye(2))
        base = assemble_decrease_lmi(sys, V, MultiplierSet.zeros(3, 2), 0.1)
        mult = MultiplierSet.zeros(3, 2)
        mult.tau3 = rng.normal(size=2)
        mult.Y4 = rng.normal(size=(12, 2))
        mult.Y5 = rng.normal(size=(12, 2))
        mult.theta7 = rng.normal(size=2)
        mult.theta8 = rng.normal(size=2)
        mult.theta9 = rng.normal(size=2)
        M = assemble_decrease_lmi(sys, V, mult, 0.1)
        xi = point.xi()
        assert xi @ M @ xi == pytest.approx(xi @ base @ xi, rel=1e-9, abs=1e-9)

    def test_sign_multiplier_only_tightens(self, consistent_point):
        """Test that a nonnegative W3 can only lower the form on consistent motions."""
        sys, point, _ = consistent_point
        rng = np.random.default_rng(6)
        V = random_candidate(rng, 3, np.eye(2))
        base = assemble_decrease_lmi(sys, V, MultiplierSet.zeros(3, 2), 0.1)
        mult = MultiplierSet.zeros(3, 2)
        mult.W3 = rng.uniform(0.0, 1.0, (5, 5))
        mult.W3 = mult.W3 + mult.W3.T
        M = assemble_decrease_lmi(sys, V, mult, 0.1)
        xi = point.xi()
        assert xi @ M @ xi <= xi @ base @ xi + 1e-12

    def test_negative_rate_rejected(self):
        """Test that gamma3 < 0 is an error."""
        sys = closed_loop(-np.eye(1), np.zeros((1, 1)), np.zeros(1), np.zeros((1, 1)), np.eye(1), np.zeros(1))
        V = LyapunovCandidate.quadratic(np.eye(1), np.eye(1))
        with pytest.raises(ValueError):
            assemble_decrease_lmi(sys, V, MultiplierSet.zeros(1, 1), -1.0)

    def test_multiplier_shape_checked(self):
        """Test that Y4 must match the stacked vector length."""
        sys = closed_loop(-np.eye(1), np.zeros((1, 1)), np.zeros(1), np.zeros((1, 1)), np.eye(1), np.zeros(1))
        V = LyapunovCandidate.quadratic(np.eye(1), np.eye(1))
        mult = MultiplierSet.zeros(1, 1)
        mult.Y4 = np.zeros((4, 1))
        with pytest.raises(ValueError):
            assemble_decrease_lmi(sys, V, mult, 0.0)


class TestVerify:
    """Tests for certificate search with fixed gains."""

    def test_stable_system_feasible(self):
        """Test that a stable A with an idle contact is certified."""
        model = stable_model()
        ctrl = Controller(K=np.zeros((1, 2)), L_tilde=[[0.0]], W=[[1.0]])
        result = verify_fixed_gains(model, ctrl)
        assert result.feasible
        assert result.upper_dropped
        assert result.margin >= 1e-8
        assert min(result.recheck.values()) >= -1e-7
        assert result.message.startswith("margin=")

    def test_bound_ordering_infeasible(self):
        """Test that gamma1 > gamma2 cannot be certified."""
        model = stable_model(c=(-1.0,))
        ctrl = Controller(K=np.zeros((1, 2)), L_tilde=[[0.0]], W=[[1.0]])
        sys = close_loop(model, ctrl)
        result = verify_closed_loop(sys, ctrl.W, gamma1=3.0, gamma2=2.0, gamma3=1e-3)
        assert not result.feasible
        assert not result.upper_dropped

    def test_cartpole_published_gains(self):
        """Test that the published cart-pole gains are certified."""
        example = build_example("cartpole")
        result = verify_fixed_gains(example.model, example.paper_gains)
        assert result.feasible
        assert min(result.recheck.values()) >= -1e-7

    def test_cartpole_open_loop_infeasible(self):
        """Test that the unstable open loop has no certificate."""
        example = build_example("cartpole")
        ctrl = Controller(K=np.zeros((1, 4)), L_tilde=np.zeros((1, 2)), W=np.eye(2))
        result = verify_fixed_gains(example.model, ctrl)
        assert not result.feasible
        assert result.status in ("infeasible", "solver_failure")

    def test_non_unique_map_rejected(self):
        """Test that W selecting lam1 alone is refused for the jump system."""
        model = jump_example()
        ctrl = Controller(K=[[0.0]], L_tilde=[[0.0]], W=[[1.0, 0.0]])
        with pytest.raises(ValueError):
            verify_fixed_gains(model, ctrl)

    def test_acrobot_published_gains(self):
        """Test that the published acrobot gains are certified."""
        example = build_example("acrobot")
        result = verify_fixed_gains(example.model, example.paper_gains, gamma3=example.gamma3)
        assert result.feasible
        assert min(result.recheck.values()) >= -1e-7

    def test_box_published_gains(self):
        """Test that the box gains are certified through the filter with gamma3 = 0."""
        example = build_example("box_friction")
        result = verify_fixed_gains(example.model, example.paper_gains, kappa=example.kappa, gamma3=example.gamma3)
        assert result.feasible
        assert result.gamma3 == 0.0

    def test_table_friction_map_single_valued_on_free_contacts(self):
        """Test that the friction row is unique once the normal forces are pinned, and not before."""
        example = build_example("table3")
        free = [0, 1, 2]
        check_uniqueness_map(example.model.F_bar[np.ix_(free, free)], example.paper_gains.W[:, free])
        with pytest.raises(ValueError):
            check_uniqueness_map(example.model.F_bar, example.paper_gains.W)
        check_uniqueness_map(example.model.F_bar, example.W)

    def test_table_published_gains_run(self):
        """Test that the table gains go through verification with the total-force certificate map."""
        example = build_example("table3")
        result = verify_fixed_gains(
            example.model,
            example.paper_gains,
            kappa=example.kappa,
            gamma3=example.gamma3,
            W=example.W,
            pinned=example.pinned
        )
        assert result.status in ("feasible", "infeasible")
        if result.candidate is not None:
            np.testing.assert_array_equal(result.candidate.W, example.W)

    def test_pinned_out_of_range(self):
        """Test that pinned contact indices are range checked."""
        example = build_example("table3")
        with pytest.raises(ValueError):
            verify_fixed_gains(example.model, example.paper_gains, kappa=100.0, pinned=(6,))


class TestAccepted:
    """Tests for the acceptance rule on re-checked margins."""

    def test_decrease_slack_only_without_rate(self):
        """Test that a slightly negative decrease margin passes only when gamma3 = 0."""
        margins = {"lower": 1e-3, "decrease": -5e-9}
        assert accepted(margins, 0.0, 1e-8, 1e-8)
        assert not accepted(margins, 1e-3, 1e-8, 1e-8)

    def test_slack_bounds_the_shortfall(self):
        """Test that a shortfall beyond the slack is rejected."""
        margins = {"lower": 1e-3, "decrease": -1e-7}
        assert not accepted(margins, 0.0, 1e-8, 1e-8)
        assert accepted(margins, 0.0, 1e-8, 1e-6)

    def test_bound_margins_need_acceptance(self):
        """Test that the slack never applies to the bound inequalities."""
        assert not accepted({"lower": -1e-9, "decrease": 1.0}, 0.0, 1e-8, 1e-6)


@pytest.mark.slow
class TestPublishedExamples:
    """Reproduction checks on the published examples."""

    def test_decrease_along_cartpole_trajectories(self):
        """Test that the cart-pole certificate decreases along 50 random trajectories."""
        example = build_example("cartpole")
        result = verify_fixed_gains(example.model, example.paper_gains)
        assert result.feasible
        sys = close_loop(example.model, example.paper_gains)
        rng = np.random.default_rng(0)
        for _ in range(50):
            traj = simulate_lcs(sys, example.sample_ic(rng), SimConfig(dt=1e-3, T=3.0))
            assert check_decrease_along_traj(result.candidate, traj).passed

    def test_box_certificate_through_stiction(self):
        """Test that V never rises while the box slides and then sticks."""
        example = build_example("box_friction")
        result = verify_fixed_gains(example.model, example.paper_gains, kappa=example.kappa, gamma3=0.0)
        assert result.feasible
        sys = close_loop(example.model, example.paper_gains, example.kappa)
        traj = simulate_lcs(sys, [1.0, 0.0], SimConfig(dt=1e-3, T=5.0))
        assert not traj.aborted
        assert check_decrease_along_traj(result.candidate, traj).passed

    def test_synthesize_cartpole(self):
        """Test that synthesis from LQR certifies the cart-pole."""
        example = build_example("cartpole")
        result = synthesize(
            example.model, example.W, init="lqr", validation_trials=5,
            ic_low=example.ic_low, ic_high=example.ic_high
        )
        assert result.verification.feasible
        assert result.validation["passed"]

    def test_synthesize_box(self):
        """Test that synthesis certifies the box through its filter."""
        example = build_example("box_friction")
        result = synthesize(
            example.model, example.W, kappa=example.kappa, gamma3=0.0, init="lqr",
            validation_trials=3, ic_low=example.ic_low, ic_high=example.ic_high
        )
        assert result.verification.feasible

    def test_four_carts_from_random_start(self):
        """Test that some seed of the random start yields gains that settle the carts."""
        example = build_example("four_carts")
        for seed in range(5):
            try:
                result = synthesize(
                    example.model, example.W, init="random", seed=seed, validation_trials=3,
                    ic_low=example.ic_low, ic_high=example.ic_high
                )
            except SynthesisError:
                continue
            summary = run_success_rate(example, controller="file", ctrl=result.controller, n_trials=5, seed=seed)
            assert summary.rate == 1.0
            return
        pytest.fail("no seed in 0..4 produced certified four-cart gains")


class TestLQR:
    """Tests for the LQR starting gain."""

    def test_scalar_closed_form(self):
        """Test K = -(1 + sqrt(101)) for A = B = 1, Q = 100, R = 1."""
        K = lqr_gain(np.array([[1.0]]), np.array([[1.0]]))
        assert K[0, 0] == pytest.approx(-(1.0 + np.sqrt(101.0)))

    def test_acrobot_reproduces_published_gain(self):
        """Test the acrobot LQR gain for Q = 100 I, R = 1 on the point-mass model."""
        model = build_example("acrobot").model
        K = lqr_gain(model.A_bar, model.B)
        np.testing.assert_allclose(K, [[1476.3, 851.68, 548.81, 334.43]], rtol=1e-3)

    def test_cartpole_stabilized(self):
        """Test that the LQR gain makes the linear cart-pole Hurwitz."""
        model = build_example("cartpole").model
        K = lqr_gain(model.A_bar, model.B)
        assert np.max(np.linalg.eigvals(model.A_bar + model.B @ K).real) < 0.0


class TestSynthesize:
    """Tests for gain synthesis by alternation."""

    def test_lqr_start_certified_immediately(self):
        """Test that a stabilizing LQR start is accepted in one alternation."""
        result = synthesize(scalar_model(), np.eye(1), init="lqr", validation_trials=2)
        assert result.alternations == 1
        assert result.verification.feasible
        assert result.controller.K[0, 0] == pytest.approx(-(1.0 + np.sqrt(101.0)))
        assert result.validation["passed"]

    def test_unstable_start_repaired(self):
        """Test that the gain step turns a destabilizing start into certified gains."""
        start = Controller(K=[[0.5]], L_tilde=[[0.0]], W=[[1.0]])
        result = synthesize(scalar_model(), np.eye(1), init="paper", paper_gains=start, validation_trials=2)
        assert result.alternations >= 2
        assert result.controller.K[0, 0] < -1.0
        assert result.verification.feasible

    def test_bad_init(self):
        """Test that an infeasible first certificate step is reported as a bad init."""
        with pytest.raises(SynthesisError, match="bad init"):
            synthesize(scalar_model(c=-1.0), np.eye(1), gamma1=3.0, gamma2=2.0, validation_trials=0)

    def test_input_coupling_needs_filter(self):
        """Test that H != 0 without a filter is rejected."""
        with pytest.raises(ValueError):
            synthesize(scalar_model(H=1.0), np.eye(1))

    def test_unknown_init(self):
        """Test that an unknown start name is rejected."""
        with pytest.raises(ValueError):
            synthesize(scalar_model(), np.eye(1), init="guess")


class TestMonitor:
    """Tests for the decrease monitor."""

    @staticmethod
    def trajectory(states):
        states = np.asarray(states, dtype=float).reshape(-1, 1)
        k = states.shape[0]
        return Trajectory(
            times=0.1 * np.arange(k),
            states=states,
            forces=np.zeros((k, 1)),
            inputs=np.zeros((k, 0))
        )

    def test_decreasing_passes(self):
        """Test that an exponentially decaying state passes."""
        V = LyapunovCandidate.quadratic(np.eye(1), np.zeros((0, 1)))
        traj = self.trajectory(np.exp(-0.1 * np.arange(20)))
        report = check_decrease_along_traj(V, traj, gamma1=1.0, gamma2=1.0, gamma3=2.0)
        assert report.passed
        assert report.max_increase == 0.0

    def test_increase_flagged(self):
        """Test that a rising V is reported at the right sample."""
        V = LyapunovCandidate.quadratic(np.eye(1), np.zeros((0, 1)))
        traj = self.trajectory([1.0, 0.5, 0.8, 0.2])
        report = check_decrease_along_traj(V, traj)
        assert report.violations == [1]
        assert report.max_increase == pytest.approx(0.64 - 0.25)
        assert not report.passed

    def test_envelope_flagged(self):
        """Test that decay slower than the certified rate breaks the envelope."""
        V = LyapunovCandidate.quadratic(np.eye(1), np.zeros((0, 1)))
        traj = self.trajectory(np.exp(-0.1 * np.arange(20)))
        report = check_decrease_along_traj(V, traj, gamma1=1.0, gamma2=1.0, gamma3=4.0)
        assert report.violations == []
        assert report.envelope_violations
        assert 0 not in report.envelope_violations

    def test_empty_trajectory(self):
        """Test that an empty trajectory has nothing to flag."""
        V = LyapunovCandidate.quadratic(np.eye(1), np.zeros((0, 1)))
        report = check_decrease_along_traj(V, self.trajectory([]))
        assert report.passed and report.values.size == 0

    def test_dimension_mismatch(self):
        """Test that the state dimension must match the certificate."""
        V = LyapunovCandidate.quadratic(np.eye(2), np.zeros((0, 1)))
        with pytest.raises(ValueError):
            check_decrease_along_traj(V, self.trajectory([1.0, 0.5]))

    def test_certified_simulation(self):
        """Test that a certificate from verification decreases along simulations."""
        model = stable_model()
        ctrl = Controller(K=np.zeros((1, 2)), L_tilde=[[0.0]], W=[[1.0]])
        result = verify_fixed_gains(model, ctrl)
        sys = close_loop(model, ctrl)
        traj = simulate_lcs(sys, [0.1, -0.05], SimConfig(dt=1e-3, T=2.0))
        report = check_decrease_along_traj(result.candidate, traj)
        assert report.passed


if __name__ == '__main__':
    pytest.main([__file__, '-v'])
