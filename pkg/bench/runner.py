"""
Monte-Carlo success-rate experiments over random initial conditions.
"""
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional
import logging

import numpy as np

from bench.examples import ExampleDef
from certify.synthesis import lqr_gain
from certify.verify import close_loop
from model.lcs import Controller
from output.schema import BenchSummary, TrialRecord
from sim.cartpole import simulate_cartpole_nonlinear
from sim.integrator import SimConfig, SimulationAborted, evaluate_success, simulate_lcs
from config import settings

logger = logging.getLogger(__name__)

CONTROLLERS = ("paper", "lqr", "file")
PLANTS = ("lcs", "nonlinear")


def select_controller(example: ExampleDef, controller: str, ctrl: Optional[Controller] = None) -> Controller:
    """
    Gains for a bench run.

    Args:
        example: Example definition
        controller: "paper" (published gains), "lqr" (published LQR gains, or
            the Riccati gain with Q = 100 I, R = I and L = 0) or "file"
        ctrl: Gains for controller "file"

    Returns:
        Controller

    Raises:
        ValueError: If the requested gains are not available
    """
    if controller == "paper":
        if example.paper_gains is None:
            raise ValueError(f"{example.name} has no published gains")
        return example.paper_gains
    if controller == "lqr":
        if example.lqr_gains is not None:
            return example.lqr_gains
        model = example.model
        return Controller.state_feedback(lqr_gain(model.A_bar, model.B), model.m)
    if controller == "file":
        if ctrl is None:
            raise ValueError("controller 'file' needs gains")
        return ctrl
    raise ValueError(f"unknown controller {controller!r}, expected one of {CONTROLLERS}")


def trial_seeds(seed: int, n_trials: int) -> List[int]:
    """One integer seed per trial, spawned from the master seed."""
    return [int(child.generate_state(1)[0]) for child in np.random.SeedSequence(seed).spawn(n_trials)]


def run_trial(
    example: ExampleDef,
    ctrl: Controller,
    plant: str,
    trial: int,
    seed: int,
    ic_scale: float = 1.0
) -> TrialRecord:
    """Simulate one trial from an initial state drawn with its own seed."""
    rng = np.random.default_rng(seed)
    x0 = ic_scale * example.sample_ic(rng)
    cfg = SimConfig(dt=example.dt, T=example.horizon)
    try:
        if plant == "nonlinear":
            traj = simulate_cartpole_nonlinear(example.cartpole, ctrl, x0, cfg, model=example.model, seed=seed)
        else:
            sys = close_loop(example.model, ctrl, example.kappa)
            traj = simulate_lcs(sys, x0, cfg, exogenous=example.exogenous, seed=seed)
    except SimulationAborted as e:
        logger.warning(f"Trial {trial} aborted: {e}")
        return TrialRecord(trial=trial, seed=seed, x0=x0.tolist(), outcome="aborted", message=str(e))

    n_x = example.model.n_x
    ok = evaluate_success(traj, example.success_radius, example.settle_window, n_plant=n_x)
    final = traj.final_state[:n_x]
    return TrialRecord(
        trial=trial,
        seed=seed,
        x0=x0.tolist(),
        final_norm=float(np.linalg.norm(final)) if np.all(np.isfinite(final)) else None,
        outcome="success" if ok else "failure"
    )


def run_success_rate(
    example: ExampleDef,
    controller: str = "paper",
    n_trials: Optional[int] = None,
    seed: Optional[int] = None,
    plant: str = "lcs",
    ctrl: Optional[Controller] = None,
    workers: Optional[int] = None,
    ic_scale: float = 1.0
) -> BenchSummary:
    """
    Fraction of random initial conditions from which the closed loop settles.

    Each trial draws x0 from the example's box with a seed spawned from the
    master seed, simulates, and applies the example's success test. Aborted
    simulations count as failures.

    Args:
        example: Example definition
        controller: "paper", "lqr" or "file"
        n_trials: Number of trials (defaults to settings.bench_trials)
        seed: Master seed (defaults to settings.seed)
        plant: "lcs" or "nonlinear" (cart-pole variants only)
        ctrl: Gains for controller "file"
        workers: Worker processes (defaults to settings.bench_workers)
        ic_scale: Factor applied to every sampled initial state

    Returns:
        BenchSummary with per-trial records ordered by trial index

    Raises:
        ValueError: On an unknown plant or controller, or a nonlinear plant
            requested for a non cart-pole example
    """
    n_trials = settings.bench_trials if n_trials is None else n_trials
    seed = settings.seed if seed is None else seed
    workers = settings.bench_workers if workers is None else workers
    if plant not in PLANTS:
        raise ValueError(f"unknown plant {plant!r}, expected one of {PLANTS}")
    if plant == "nonlinear" and example.cartpole is None:
        raise ValueError(f"{example.name} has no nonlinear plant")
    if n_trials < 1:
        raise ValueError(f"n_trials must be positive, got {n_trials}")
    gains = select_controller(example, controller, ctrl)
    example.model.check_controller(gains)

    seeds = trial_seeds(seed, n_trials)
    logger.info(f"Running {n_trials} trials of {example.name} ({controller} gains, {plant} plant, {workers} workers)")

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(run_trial, example, gains, plant, k, s, ic_scale)
                for k, s in enumerate(seeds)
            ]
            records = [f.result() for f in futures]
    else:
        records = [run_trial(example, gains, plant, k, s, ic_scale) for k, s in enumerate(seeds)]

    successes = sum(1 for r in records if r.outcome == "success")
    summary = BenchSummary(
        example=example.name,
        controller=controller,
        plant=plant,
        trials=n_trials,
        seed=seed,
        successes=successes,
        rate=successes / n_trials,
        radius=example.success_radius,
        settle_window=example.settle_window,
        records=records
    )
    logger.info(f"✓ Success rate {summary.rate:.2f} ({successes}/{n_trials})")
    return summary


def write_trials_csv(summary: BenchSummary, path: Path) -> None:
    """Per-trial outcomes as CSV: trial,seed,outcome,final_norm,x0_1..x0_n."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = len(summary.records[0].x0) if summary.records else 0
    lines = [",".join(["trial", "seed", "outcome", "final_norm"] + [f"x0_{i + 1}" for i in range(n)])]
    for r in summary.records:
        norm = "" if r.final_norm is None else f"{r.final_norm:.17g}"
        lines.append(",".join([str(r.trial), str(r.seed), r.outcome, norm] + [f"{v:.17g}" for v in r.x0]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.info(f"✓ Trials saved to: {path}")
