#!/usr/bin/env python3
"""
Tactile LCS Toolkit - Command Line Interface
"""
import argparse
import sys
import logging
import platform
from importlib import metadata
from pathlib import Path
from typing import Any, Callable, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from bench.examples import build_example, list_examples
from bench.runner import CONTROLLERS, PLANTS, run_success_rate, write_trials_csv
from certify.synthesis import synthesize
from certify.verify import close_loop, verify_fixed_gains
from lcp.enumerate import is_p_matrix
from model.lcs import LCSModel
from output.files import (
    read_gains,
    read_gains_file,
    read_json,
    read_model,
    sha256_file,
    write_gains,
    write_json,
    write_model,
    write_trajectory_csv,
)
from output.schema import BenchSummary, CertificateFile, FindWReport, RunManifest, SynthesisConfigFile
from sim.cartpole import simulate_cartpole_nonlinear
from sim.integrator import SimConfig, SimulationAborted, simulate_lcs
from sos.find_w import WFinder
from config import override_settings, settings

logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

COMMANDS = ("simulate", "verify", "find-w", "synthesize", "bench", "export-example")
VERSIONED_PACKAGES = ("numpy", "scipy", "cvxpy", "sympy", "pydantic", "pydantic-settings")


class RunConfig(BaseModel):
    """Validated command line of one run."""

    model_config = ConfigDict(extra="forbid")

    command: Literal["simulate", "verify", "find-w", "synthesize", "bench", "export-example"]
    output_dir: Path = Field(description="Directory for every file the run writes")
    overrides: Dict[str, str] = Field(default_factory=dict, description="Settings given with --set")
    seed: Optional[int] = Field(default=None, ge=0)
    verbose: bool = False

    model: Optional[Path] = None
    gains: Optional[Path] = None
    config: Optional[Path] = None
    name: Optional[str] = None
    example: Optional[str] = None

    kappa: Optional[float] = Field(default=None, gt=0.0)
    x0: Optional[List[float]] = None
    dt: Optional[float] = Field(default=None, gt=0.0)
    T: Optional[float] = Field(default=None, gt=0.0)
    plant: Literal["lcs", "nonlinear"] = "lcs"
    gamma1: Optional[float] = Field(default=None, gt=0.0)
    gamma2: Optional[float] = Field(default=None, gt=0.0)
    gamma3: Optional[float] = Field(default=None, ge=0.0)
    degree: Optional[Literal[2, 4]] = None
    max_rows: Optional[int] = Field(default=None, ge=1)
    controller: Literal["paper", "lqr", "file"] = "paper"
    trials: Optional[int] = Field(default=None, ge=1)
    workers: Optional[int] = Field(default=None, ge=1)

    def inputs(self) -> List[Path]:
        return [p for p in (self.model, self.gains, self.config) if p is not None]

    def run_overrides(self) -> Dict[str, Any]:
        """Settings changed for this run: --set pairs plus the master seed."""
        overrides: Dict[str, Any] = dict(self.overrides)
        if self.seed is not None:
            overrides["seed"] = self.seed
        return overrides


def parse_vector(text: str) -> List[float]:
    """Comma-separated floats."""
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def parse_overrides(items: List[str]) -> Dict[str, str]:
    """KEY=VALUE pairs from --set."""
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ValueError(f"--set expects KEY=VALUE, got {item!r}")
        out[key.strip().lower()] = value.strip()
    return out


def apply_overrides(overrides: Dict[str, Any]) -> Dict[str, Any]:
    """
    Validate overrides as a whole Settings instance, then install them on the
    global settings.

    Returns:
        Previous values of the overridden keys, for restore_settings
    """
    validated = override_settings(settings, overrides)
    previous = {key: getattr(settings, key) for key in overrides}
    for key in overrides:
        setattr(settings, key, getattr(validated, key))
    return previous


def restore_settings(previous: Dict[str, Any]) -> None:
    for key, value in previous.items():
        setattr(settings, key, value)


def package_versions() -> Dict[str, str]:
    versions = {"python": platform.python_version()}
    for name in VERSIONED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "not installed"
    return versions


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subparser per command."""
    parser = argparse.ArgumentParser(
        description="Simulate, certify and synthesize tactile feedback for linear complementarity systems",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Write the cart-pole model and its published gains
  python app.py -o runs/cartpole export-example cartpole

  # Simulate the exported model (use --x0= for negative entries)
  python app.py simulate --model runs/cartpole/cartpole.model.json \\
      --gains runs/cartpole/cartpole.gains.json --x0=0.05,0,-1,0.2

  # Search a Lyapunov certificate for fixed gains
  python app.py verify --model cartpole.model.json --gains cartpole.gains.json

  # Find a uniqueness map for the contact LCP
  python app.py find-w --model box_friction.model.json --seed 0

  # Synthesize gains from an LQR start
  python app.py synthesize --model cartpole.model.json --config synth.json

  # Success rate of the published gains on the nonlinear cart-pole
  python app.py bench --example cartpole --controller paper --trials 100 --plant nonlinear

  # Override a tolerance for one run
  python app.py --set feas_tol=1e-6 verify --model m.json --gains g.json
        """
    )
    parser.add_argument('-o', '--output-dir', type=str, default=None,
                        help=f'Output directory (default: {settings.output_dir}/<command>)')
    parser.add_argument('--seed', type=int, default=None, help=f'Master seed (default: {settings.seed})')
    parser.add_argument('--set', dest='overrides', action='append', default=[], metavar='KEY=VALUE',
                        help='Override a setting for this run (repeatable)')
    parser.add_argument('-v', '--verbose', action='store_true', help='Enable verbose logging')

    sub = parser.add_subparsers(dest='command', required=True, metavar='command')

    p = sub.add_parser('simulate', help='Simulate a closed loop and write trajectory.csv')
    p.add_argument('--model', required=True, help='Model file')
    p.add_argument('--gains', required=True, help='Gains file')
    p.add_argument('--kappa', type=float, default=None, help='Filter bandwidth (default: from the gains file)')
    p.add_argument('--x0', type=parse_vector, required=True, help='Initial state, comma-separated')
    p.add_argument('--dt', type=float, default=None, help=f'Step size (default: {settings.sim_dt})')
    p.add_argument('--T', type=float, default=None, help=f'Horizon (default: {settings.sim_horizon})')
    p.add_argument('--plant', choices=PLANTS, default='lcs', help='Plant (nonlinear: cart-pole only)')

    p = sub.add_parser('verify', help='Search a Lyapunov certificate for fixed gains')
    p.add_argument('--model', required=True, help='Model file')
    p.add_argument('--gains', required=True, help='Gains file')
    p.add_argument('--kappa', type=float, default=None, help='Filter bandwidth (default: from the gains file)')
    p.add_argument('--gamma1', type=float, default=None, help=f'Lower constant (default: {settings.gamma1})')
    p.add_argument('--gamma2', type=float, default=None, help='Upper constant (default: free)')
    p.add_argument('--gamma3', type=float, default=None,
                   help=f'Decrease rate (default: from the gains file, else {settings.gamma3})')

    p = sub.add_parser('find-w', help='Find a uniqueness map W for the contact LCP')
    p.add_argument('--model', required=True, help='Model file')
    p.add_argument('--degree', type=int, choices=(2, 4), default=None,
                   help=f'Relaxation degree (default: {settings.sos_degree})')
    p.add_argument('--max-rows', type=int, default=None, help='Row limit (default: m)')
    p.add_argument('--seed', type=int, default=argparse.SUPPRESS, help='Master seed (same as the global --seed)')

    p = sub.add_parser('synthesize', help='Synthesize certified gains by alternation')
    p.add_argument('--model', required=True, help='Model file')
    p.add_argument('--config', required=True, help='Synthesis configuration file')

    p = sub.add_parser('bench', help='Monte-Carlo success rate of a controller')
    p.add_argument('--example', required=True, choices=list_examples(), help='Example name')
    p.add_argument('--controller', choices=CONTROLLERS, default='paper', help='Gains to test')
    p.add_argument('--gains', default=None, help='Gains file for --controller file')
    p.add_argument('--trials', type=int, default=None, help=f'Trials (default: {settings.bench_trials})')
    p.add_argument('--plant', choices=PLANTS, default='lcs', help='Plant (nonlinear: cart-pole only)')
    p.add_argument('--workers', type=int, default=None,
                   help=f'Worker processes (default: {settings.bench_workers})')
    p.add_argument('--seed', type=int, default=argparse.SUPPRESS, help='Master seed (same as the global --seed)')

    p = sub.add_parser('export-example', help='Write an example model and its published gains')
    p.add_argument('name', choices=list_examples(), help='Example name')
    return parser


def run_config_from_args(args: argparse.Namespace) -> RunConfig:
    values = {k: v for k, v in vars(args).items() if v is not None}
    values["overrides"] = parse_overrides(args.overrides)
    values["output_dir"] = Path(args.output_dir) if args.output_dir else Path(settings.output_dir) / args.command
    return RunConfig(**values)


def _nonlinear_params(model: LCSModel):
    if model.name in list_examples():
        params = build_example(model.name).cartpole
        if params is not None:
            return params
    raise ValueError(f"model {model.name!r} has no nonlinear plant")


def cmd_simulate(cfg: RunConfig, outputs: List[Path]) -> int:
    model = read_model(cfg.model)
    ctrl, file_kappa = read_gains(cfg.gains)
    kappa = cfg.kappa if cfg.kappa is not None else file_kappa
    sim_cfg = SimConfig(
        dt=settings.sim_dt if cfg.dt is None else cfg.dt,
        T=settings.sim_horizon if cfg.T is None else cfg.T
    )
    x0 = np.array(cfg.x0, dtype=float)
    path = cfg.output_dir / "trajectory.csv"

    try:
        if cfg.plant == "nonlinear":
            if kappa is not None:
                raise ValueError("the nonlinear plant is closed directly; drop --kappa")
            traj = simulate_cartpole_nonlinear(_nonlinear_params(model), ctrl, x0, sim_cfg, model=model, seed=cfg.seed)
        else:
            sys_cl = close_loop(model, ctrl, kappa)
            if kappa is not None and x0.size == model.n_x:
                x0 = np.concatenate([x0, np.zeros(sys_cl.n - model.n_x)])
            traj = simulate_lcs(sys_cl, x0, sim_cfg, seed=cfg.seed)
    except SimulationAborted as e:
        if e.trajectory is not None and len(e.trajectory) > 0:
            outputs.append(write_trajectory_csv(e.trajectory, path))
        logger.error(f"Simulation aborted: {e}")
        return 1

    outputs.append(write_trajectory_csv(traj, path))
    print(f"{len(traj)} samples, |x(T)| = {np.linalg.norm(traj.final_state):.6g}")
    return 0


def cmd_verify(cfg: RunConfig, outputs: List[Path]) -> int:
    model = read_model(cfg.model)
    gains = read_gains_file(cfg.gains)
    ctrl = gains.to_controller()
    kappa = cfg.kappa if cfg.kappa is not None else gains.kappa
    gamma3 = cfg.gamma3 if cfg.gamma3 is not None else gains.gamma3
    result = verify_fixed_gains(
        model,
        ctrl,
        kappa=kappa,
        gamma1=cfg.gamma1,
        gamma2=cfg.gamma2,
        gamma3=gamma3,
        W=gains.certificate_map(),
        pinned=gains.pinned
    )
    doc = CertificateFile.from_result(
        result,
        model=model.name,
        provenance="direct" if kappa is None else "filtered",
        kappa=kappa
    )
    outputs.append(write_json(doc, cfg.output_dir / "certificate.json"))
    margin = "n/a" if result.margin is None else f"{result.margin:.6g}"
    print(f"{result.status}, margin={margin}")
    return 0 if result.feasible else 1


def cmd_find_w(cfg: RunConfig, outputs: List[Path]) -> int:
    model = read_model(cfg.model)
    seed = settings.seed if cfg.seed is None else cfg.seed
    result = WFinder(model.F_bar, seed=seed, max_rows=cfg.max_rows, degree=cfg.degree).run()
    report = FindWReport.from_result(
        result,
        model=model.name,
        seed=seed,
        degree=settings.sos_degree if cfg.degree is None else cfg.degree,
        m=model.m
    )
    outputs.append(write_json(report, cfg.output_dir / "find_w.json"))
    print(report.to_markdown())
    return 1 if result.oracle_failed else 0


def cmd_synthesize(cfg: RunConfig, outputs: List[Path]) -> int:
    model = read_model(cfg.model)
    sc = read_json(cfg.config, SynthesisConfigFile)
    seed = sc.seed if sc.seed is not None else (settings.seed if cfg.seed is None else cfg.seed)
    if sc.W is not None:
        W = np.array(sc.W, dtype=float).reshape(-1, model.m)
    elif is_p_matrix(model.F_bar):
        W = np.eye(model.m)
    else:
        W = WFinder(model.F_bar, seed=seed).run().W

    result = synthesize(
        model,
        W,
        kappa=sc.kappa,
        gamma1=sc.gamma1,
        gamma2=sc.gamma2,
        gamma3=sc.gamma3,
        max_alternations=sc.max_alternations,
        init=sc.init,
        seed=seed,
        K_mask=None if sc.K_mask is None else np.array(sc.K_mask, dtype=bool),
        paper_gains=None if sc.paper_gains is None else sc.paper_gains.to_controller(),
        ic_low=sc.ic_low,
        ic_high=sc.ic_high,
        validation_trials=sc.validation_trials
    )
    outputs.append(write_gains(
        result.controller, cfg.output_dir / "gains.json", model=model.name, source="synthesized", kappa=sc.kappa
    ))
    doc = CertificateFile.from_result(
        result.verification,
        model=model.name,
        provenance="direct" if sc.kappa is None else "filtered",
        kappa=sc.kappa
    )
    outputs.append(write_json(doc, cfg.output_dir / "certificate.json"))
    print(f"synthesized after {result.alternations} alternations, margin={result.verification.margin:.6g}")
    return 0


def cmd_bench(cfg: RunConfig, outputs: List[Path]) -> int:
    example = build_example(cfg.example)
    ctrl = None
    if cfg.controller == "file":
        if cfg.gains is None:
            raise ValueError("--controller file needs --gains")
        ctrl, _ = read_gains(cfg.gains)
    summary: BenchSummary = run_success_rate(
        example,
        controller=cfg.controller,
        n_trials=cfg.trials,
        seed=cfg.seed,
        plant=cfg.plant,
        ctrl=ctrl,
        workers=cfg.workers
    )
    outputs.append(write_json(summary, cfg.output_dir / "bench.json"))
    md_path = cfg.output_dir / "bench.md"
    md_path.write_text(summary.to_markdown(), encoding="utf-8")
    outputs.append(md_path)
    trials_path = cfg.output_dir / "trials.csv"
    write_trials_csv(summary, trials_path)
    outputs.append(trials_path)
    print(summary.to_markdown())
    return 0


def cmd_export_example(cfg: RunConfig, outputs: List[Path]) -> int:
    example = build_example(cfg.name)
    outputs.append(write_model(example.model, cfg.output_dir / f"{cfg.name}.model.json"))
    if example.paper_gains is not None:
        outputs.append(write_gains(
            example.paper_gains,
            cfg.output_dir / f"{cfg.name}.gains.json",
            model=cfg.name,
            source="paper",
            kappa=example.kappa,
            gamma3=example.gamma3,
            certificate_W=None if np.array_equal(example.W, example.paper_gains.W) else example.W,
            pinned=example.pinned
        ))
    for path in outputs:
        print(path)
    return 0


HANDLERS: Dict[str, Callable[[RunConfig, List[Path]], int]] = {
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "find-w": cmd_find_w,
    "synthesize": cmd_synthesize,
    "bench": cmd_bench,
    "export-example": cmd_export_example,
}


def _validate(argv: List[str]) -> Tuple[Optional[RunConfig], int]:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return None, int(e.code or 0)
    try:
        cfg = run_config_from_args(args)
        override_settings(settings, cfg.run_overrides())
    except (ValidationError, ValueError) as e:
        logger.error(f"Invalid arguments: {e}")
        return None, 2
    return cfg, 0


def dispatch(argv: Optional[List[str]] = None) -> int:
    """
    Run one command.

    Args:
        argv: Arguments without the program name (defaults to sys.argv[1:])

    Returns:
        Exit code: 0 success, 1 domain failure, 2 usage or validation error,
        130 when interrupted
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    cfg, code = _validate(argv)
    if cfg is None:
        return code

    if cfg.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    previous = apply_overrides(cfg.run_overrides())
    try:
        return _run(cfg, argv)
    finally:
        restore_settings(previous)


def _run(cfg: RunConfig, argv: List[str]) -> int:
    manifest = RunManifest(
        command=cfg.command,
        argv=argv,
        seeds={"seed": settings.seed},
        settings=settings.model_dump(),
        versions=package_versions()
    )
    outputs: List[Path] = []
    try:
        cfg.output_dir.mkdir(parents=True, exist_ok=True)
        for path in cfg.inputs():
            if not path.exists():
                raise FileNotFoundError(f"Input file not found: {path}")
            manifest.inputs[str(path)] = sha256_file(path)
        logger.info(f"Running {cfg.command} -> {cfg.output_dir}")
        code = HANDLERS[cfg.command](cfg, outputs)
        if code == 0:
            logger.info(f"✓ {cfg.command} complete!")
    except KeyboardInterrupt:
        logger.warning("Interrupted by user")
        code = 130
    except (ValidationError, ValueError, FileNotFoundError) as e:
        logger.error(f"Error: {e}", exc_info=cfg.verbose)
        code = 2
    except RuntimeError as e:
        logger.error(f"Error: {e}", exc_info=cfg.verbose)
        code = 1
    except Exception as e:
        logger.error(f"Error: {e}", exc_info=cfg.verbose)
        code = 1

    if cfg.output_dir.exists():
        manifest.outputs = [str(p) for p in outputs]
        manifest.exit_code = code
        (cfg.output_dir / "manifest.json").write_text(manifest.model_dump_json(indent=2), encoding="utf-8")
    return code


def main():
    """Main CLI entry point."""
    sys.exit(dispatch())


if __name__ == '__main__':
    main()
