"""
Output schemas for models, gains, certificates and experiment reports.
"""
from pydantic import BaseModel, ConfigDict, Field, field_validator
from typing import Any, Dict, List, Literal, Optional, Sequence
from datetime import datetime
import math

import numpy as np

from model.lcs import Controller, LCSModel

Matrix = List[List[float]]
Vector = List[float]


def _matrix(arr) -> Matrix:
    return np.atleast_2d(np.asarray(arr, dtype=float)).tolist()


def _vector(arr) -> Vector:
    return [float(v) for v in np.asarray(arr, dtype=float).reshape(-1)]


def _check_rectangular(v: Matrix) -> Matrix:
    """Reject ragged or non-finite nested lists."""
    if v and len({len(row) for row in v}) > 1:
        raise ValueError("matrix rows must all have the same length")
    if any(not math.isfinite(x) for row in v for x in row):
        raise ValueError("matrix entries must be finite")
    return v


def _format_matrix(M: Matrix, digits: int = 4) -> str:
    if not M:
        return "(empty)"
    return "\n".join("    [" + ", ".join(f"{x:.{digits}g}" for x in row) + "]" for row in M)


class SDPDump(BaseModel):
    """Structure of an SDProblem for debugging."""

    name: str = Field(description="Problem label")
    variables: Dict[str, Dict[str, Any]] = Field(
        description="Variable name -> shape and cvxpy attributes"
    )
    psd_constraints: Dict[str, int] = Field(
        description="PSD constraint name -> matrix size"
    )
    linear_constraints: int = Field(
        description="Number of linear equality and inequality constraints"
    )
    sense: Optional[str] = Field(default=None, description="minimize, maximize or None for feasibility")
    status: Optional[str] = Field(default=None, description="Status of the last solve")

    class Config:
        """Pydantic configuration."""
        json_schema_extra = {
            "example": {
                "name": "verify_cartpole",
                "variables": {"P": {"shape": [4, 4], "attributes": ["symmetric"]}},
                "psd_constraints": {"lower": 7, "decrease": 13},
                "linear_constraints": 12,
                "sense": "maximize",
                "status": "feasible_optimal"
            }
        }


class ModelFile(BaseModel):
    """Open-loop LCS model as stored on disk."""

    model_config = ConfigDict(
        extra="forbid",
        json_schema_extra={
            "example": {
                "name": "scalar",
                "notes": "",
                "n_pos": 0,
                "A_bar": [[1.0]],
                "B": [[1.0]],
                "D_bar": [[0.0]],
                "a": [0.0],
                "E_bar": [[0.0]],
                "F_bar": [[1.0]],
                "H": [[0.0]],
                "c": [1.0]
            }
        }
    )

    name: str = Field(description="Model name")
    notes: str = Field(default="", description="Provenance and modelling notes")
    n_pos: int = Field(default=0, ge=0, description="Leading position coordinates for semi-implicit stepping")
    A_bar: Matrix = Field(description="State matrix (n_x x n_x)")
    B: Matrix = Field(description="Input matrix (n_x x n_k)")
    D_bar: Matrix = Field(description="Contact force matrix (n_x x m)")
    a: Vector = Field(description="Constant drift (n_x)")
    E_bar: Matrix = Field(description="State-to-gap matrix (m x n_x)")
    F_bar: Matrix = Field(description="LCP matrix (m x m)")
    H: Matrix = Field(description="Input-to-gap matrix (m x n_k)")
    c: Vector = Field(description="Constant gap offset (m)")

    @field_validator("A_bar", "B", "D_bar", "E_bar", "F_bar", "H")
    @classmethod
    def validate_matrix(cls, v: Matrix) -> Matrix:
        """Ensure matrices are rectangular and finite."""
        return _check_rectangular(v)

    @classmethod
    def from_model(cls, model: LCSModel) -> "ModelFile":
        return cls(
            name=model.name,
            notes=model.notes,
            n_pos=model.n_pos,
            A_bar=_matrix(model.A_bar),
            B=_matrix(model.B),
            D_bar=_matrix(model.D_bar),
            a=_vector(model.a),
            E_bar=_matrix(model.E_bar),
            F_bar=_matrix(model.F_bar),
            H=_matrix(model.H),
            c=_vector(model.c)
        )

    def to_model(self) -> LCSModel:
        """Build the LCSModel; dimension errors surface as ValueError."""
        return LCSModel(
            A_bar=self.A_bar,
            B=self.B,
            D_bar=self.D_bar,
            a=self.a,
            E_bar=self.E_bar,
            F_bar=self.F_bar,
            H=self.H,
            c=self.c,
            name=self.name,
            notes=self.notes,
            n_pos=self.n_pos
        )


class GainsFile(BaseModel):
    """Tactile feedback gains u = K x + L_tilde W lam."""

    model_config = ConfigDict(
        extra="forbid",
        json_schema_extra={
            "example": {
                "model": "cartpole",
                "source": "paper",
                "K": [[3.69, -46.7, 3.39, -5.71]],
                "L_tilde": [[-13.98, 13.98]],
                "W": [[1.0, 0.0], [0.0, 1.0]],
                "kappa": None
            }
        }
    )

    model: str = Field(default="", description="Name of the model the gains were made for")
    source: Literal["paper", "lqr", "synthesized", "file"] = Field(
        default="file",
        description="Where the gains came from"
    )
    K: Matrix = Field(description="State gain (n_k x n_x)")
    L_tilde: Matrix = Field(description="Reduced force gain (n_k x n_w)")
    W: Matrix = Field(description="Uniqueness map (n_w x m); an empty list means no force feedback")
    m: Optional[int] = Field(default=None, ge=1, description="Contact count, required when W has no rows")
    kappa: Optional[float] = Field(default=None, gt=0.0, description="Filter bandwidth; None for direct closure")
    gamma3: Optional[float] = Field(
        default=None,
        ge=0.0,
        description="Decrease rate the gains are meant to be certified with; None uses the settings"
    )
    certificate_W: Optional[Matrix] = Field(
        default=None,
        description="Map shaping the force terms of V when it differs from W"
    )
    pinned: List[int] = Field(
        default_factory=list,
        description="Contacts whose forces are scheduled from outside the LCP"
    )

    @field_validator("K", "L_tilde", "W")
    @classmethod
    def validate_matrix(cls, v: Matrix) -> Matrix:
        """Ensure matrices are rectangular and finite."""
        return _check_rectangular(v)

    @field_validator("certificate_W")
    @classmethod
    def validate_certificate_map(cls, v: Optional[Matrix]) -> Optional[Matrix]:
        return None if v is None else _check_rectangular(v)

    @classmethod
    def from_controller(
        cls,
        ctrl: Controller,
        model: str = "",
        source: str = "file",
        kappa: Optional[float] = None,
        gamma3: Optional[float] = None,
        certificate_W: Optional[np.ndarray] = None,
        pinned: Sequence[int] = ()
    ) -> "GainsFile":
        return cls(
            model=model,
            source=source,
            K=_matrix(ctrl.K),
            L_tilde=[_vector(row) for row in ctrl.L_tilde],
            W=[_vector(row) for row in ctrl.W],
            m=int(ctrl.W.shape[1]),
            kappa=kappa,
            gamma3=gamma3,
            certificate_W=None if certificate_W is None else _matrix(certificate_W),
            pinned=[int(i) for i in pinned]
        )

    def certificate_map(self) -> Optional[np.ndarray]:
        """The map for V when one is stored, else None (V then uses W)."""
        return None if self.certificate_W is None else np.array(self.certificate_W, dtype=float)

    def to_controller(self) -> Controller:
        """Build the Controller; dimension errors surface as ValueError."""
        n_k = len(self.K)
        if self.W:
            W = np.array(self.W, dtype=float)
        elif self.m is not None:
            W = np.zeros((0, self.m))
        else:
            raise ValueError("gains without W rows must state the contact count m")
        L_tilde = np.array(self.L_tilde, dtype=float).reshape(n_k, W.shape[0])
        return Controller(K=self.K, L_tilde=L_tilde, W=W)


class CertificateFile(BaseModel):
    """Outcome of a certificate search, with V and the multipliers when found."""

    model_config = ConfigDict(
        extra="forbid",
        json_schema_extra={
            "example": {
                "model": "cartpole",
                "status": "feasible",
                "provenance": "direct",
                "kappa": None,
                "gamma1": 0.001,
                "gamma2": 12.5,
                "gamma3": 0.001,
                "upper_dropped": True,
                "margins": {"lower": 0.41, "decrease": 0.02},
                "recheck": {"lower": 1.2e-9, "decrease": 3.1e-10},
                "solver": "CLARABEL",
                "message": "margin=0.02"
            }
        }
    )

    model: str = Field(description="Model name")
    status: Literal["feasible", "infeasible", "solver_failure"] = Field(description="Verification outcome")
    provenance: str = Field(default="direct", description="direct or filtered closure")
    kappa: Optional[float] = Field(default=None, description="Filter bandwidth of the filtered closure")
    gamma1: float = Field(description="Lower bound constant")
    gamma2: Optional[float] = Field(default=None, description="Upper bound constant (None when dropped)")
    gamma3: float = Field(description="Decrease rate")
    upper_dropped: bool = Field(default=False, description="True when c >= 0 made the upper bound vacuous")
    margins: Dict[str, float] = Field(default_factory=dict, description="Strictness margin per inequality")
    recheck: Dict[str, float] = Field(
        default_factory=dict,
        description="Independent eigenvalue re-check per inequality"
    )
    candidate: Optional[Dict[str, Any]] = Field(
        default=None,
        description="P, Q_tilde, R_tilde, p, r_tilde, z and W of the Lyapunov function"
    )
    multipliers: Optional[Dict[str, Any]] = Field(default=None, description="S-procedure multipliers")
    solver: str = Field(default="", description="Solver that produced the certificate")
    message: str = Field(default="", description="Human-readable outcome")
    created: datetime = Field(default_factory=datetime.now, description="When the certificate was computed")

    @classmethod
    def from_result(cls, result, model: str, provenance: str = "direct", kappa: Optional[float] = None) -> "CertificateFile":
        """Build from a VerificationResult."""

        def lists(arrays: Dict[str, np.ndarray]) -> Dict[str, Any]:
            return {k: np.asarray(v, dtype=float).tolist() for k, v in arrays.items()}

        return cls(
            model=model,
            status=result.status,
            provenance=provenance,
            kappa=kappa,
            gamma1=result.gamma1,
            gamma2=result.gamma2,
            gamma3=result.gamma3,
            upper_dropped=result.upper_dropped,
            margins=result.margins,
            recheck=result.recheck,
            candidate=lists(result.candidate.as_arrays()) if result.candidate is not None else None,
            multipliers=lists(result.multipliers.as_arrays()) if result.multipliers is not None else None,
            solver=result.solver,
            message=result.message
        )

    def to_candidate(self):
        """LyapunovCandidate stored in the file."""
        from certify.lyapunov import LyapunovCandidate

        if self.candidate is None:
            raise ValueError(f"certificate for {self.model} has status {self.status} and no candidate")
        W = np.array(self.candidate["W"], dtype=float)
        n = len(self.candidate["P"])
        n_w = W.shape[0]
        return LyapunovCandidate(
            P=np.array(self.candidate["P"], dtype=float),
            Q_tilde=np.array(self.candidate["Q_tilde"], dtype=float).reshape(n, n_w),
            R_tilde=np.array(self.candidate["R_tilde"], dtype=float).reshape(n_w, n_w),
            p=np.array(self.candidate["p"], dtype=float),
            r_tilde=np.array(self.candidate["r_tilde"], dtype=float).reshape(n_w),
            z=float(self.candidate["z"]),
            W=W
        )

    def to_markdown(self) -> str:
        """Convert the certificate summary to markdown."""
        md = f"""# Certificate: {self.model}

**Status:** {self.status}
**Closure:** {self.provenance}{f" (kappa={self.kappa:g})" if self.kappa is not None else ""}
**Constants:** gamma1={self.gamma1:g}, gamma2={"dropped" if self.gamma2 is None else f"{self.gamma2:g}"}, gamma3={self.gamma3:g}

## Margins
"""
        for name, t in self.margins.items():
            md += f"- {name}: {t:.6g} (re-check {self.recheck.get(name, float('nan')):.3g})\n"
        if self.candidate is not None:
            md += f"\n## P\n{_format_matrix(self.candidate['P'])}\n"
        md += f"""
---

**Solver:** {self.solver}
**Computed:** {self.created.strftime("%Y-%m-%d %H:%M:%S")}
"""
        return md


class FindWReport(BaseModel):
    """Rows found by the uniqueness-map search with the oracle verdict."""

    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "model": "box_friction",
                "seed": 0,
                "degree": 4,
                "W": [[0.0, 1.0, -1.0]],
                "objectives": [-0.93, 0.0],
                "oracle": {"samples": 100, "max_spread": 0.0, "passed": True},
                "partial": False,
                "oracle_failed": False,
                "message": ""
            }
        }
    )

    model: str = Field(description="Model name")
    seed: int = Field(description="Seed of the random objective directions")
    degree: int = Field(description="Relaxation degree")
    W: Matrix = Field(description="Accepted rows")
    m: int = Field(default=0, ge=0, description="Contact count")
    objectives: List[float] = Field(default_factory=list, description="Objective value of each step")
    etas: List[float] = Field(default_factory=list, description="Bound eta of each step")
    spreads: List[float] = Field(default_factory=list, description="Oracle spread of W after each checked row")
    oracle: Dict[str, Any] = Field(default_factory=dict, description="Enumeration oracle report of the final W")
    partial: bool = Field(default=False, description="Row budget ran out before the nullspace closed")
    oracle_failed: bool = Field(default=False, description="A candidate row failed the oracle")
    message: str = Field(default="", description="Human-readable outcome")

    @classmethod
    def from_result(cls, result, model: str, seed: int, degree: int, m: int) -> "FindWReport":
        """Build from a FindWResult."""
        oracle = result.oracle_reports[-1] if result.oracle_reports else None
        return cls(
            model=model,
            seed=seed,
            degree=degree,
            W=_matrix(result.W) if result.W.size else [],
            m=m,
            objectives=[float(s.objective) for s in result.steps],
            etas=[float(s.eta) for s in result.steps],
            spreads=[float(r.max_spread) for r in result.oracle_reports],
            oracle={} if oracle is None else {
                "samples": oracle.samples,
                "max_spread": oracle.max_spread,
                "multi_solution_samples": oracle.multi_solution_samples,
                "empty_samples": oracle.empty_samples,
                "passed": oracle.passed,
            },
            partial=result.partial,
            oracle_failed=result.oracle_failed,
            message=result.message
        )

    @property
    def rank(self) -> int:
        return len(self.W)

    def W_array(self) -> np.ndarray:
        return np.array(self.W, dtype=float).reshape(-1, self.m)

    def to_markdown(self) -> str:
        """Convert the search outcome to markdown."""
        md = f"# Uniqueness map: {self.model}\n\n**Rank:** {self.rank} (seed {self.seed}, degree {self.degree})\n\n"
        md += "## Rows\n"
        md += _format_matrix(self.W) + "\n"
        if self.oracle:
            md += f"\n## Oracle\nmax spread {self.oracle.get('max_spread', 0.0):.3g} over {self.oracle.get('samples', 0)} samples\n"
        if self.partial:
            md += "\n⚠️ **Row budget exhausted; W may be incomplete.**\n"
        if self.oracle_failed:
            md += "\n⚠️ **A candidate row failed the enumeration oracle and was dropped.**\n"
        return md


class TrialRecord(BaseModel):
    """One Monte-Carlo trial."""

    trial: int = Field(ge=0, description="Trial index")
    seed: int = Field(description="Seed of the trial's initial-condition generator")
    x0: Vector = Field(description="Initial state")
    final_norm: Optional[float] = Field(default=None, description="Norm of the final plant state")
    outcome: Literal["success", "failure", "aborted"] = Field(description="Trial outcome")
    message: str = Field(default="", description="Abort reason")


class BenchSummary(BaseModel):
    """Success rate of a controller over random initial conditions."""

    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "example": "cartpole",
                "controller": "paper",
                "plant": "nonlinear",
                "trials": 100,
                "seed": 0,
                "successes": 87,
                "rate": 0.87,
                "records": []
            }
        }
    )

    example: str = Field(description="Example name")
    controller: str = Field(description="paper, lqr or file")
    plant: Literal["lcs", "nonlinear"] = Field(description="Simulated plant")
    trials: int = Field(ge=1, description="Number of trials")
    seed: int = Field(description="Master seed")
    successes: int = Field(ge=0, description="Successful trials")
    rate: float = Field(ge=0.0, le=1.0, description="successes / trials")
    radius: float = Field(default=0.0, description="Success radius")
    settle_window: float = Field(default=0.0, description="Settle window in seconds")
    records: List[TrialRecord] = Field(default_factory=list, description="Per-trial outcomes ordered by index")

    @property
    def aborted(self) -> int:
        return sum(1 for r in self.records if r.outcome == "aborted")

    def to_markdown(self) -> str:
        """Convert the bench summary to markdown."""
        return f"""# Success rate: {self.example}

| controller | plant | trials | successes | rate | aborted |
|------------|-------|--------|-----------|------|---------|
| {self.controller} | {self.plant} | {self.trials} | {self.successes} | {self.rate:.2f} | {self.aborted} |

Success: x'x <= {self.radius:g} over the final {self.settle_window:g} s; master seed {self.seed}.
"""


class RunManifest(BaseModel):
    """Everything needed to reproduce a CLI run."""

    command: str = Field(description="Subcommand")
    argv: List[str] = Field(description="Command-line arguments")
    created: datetime = Field(default_factory=datetime.now, description="Run start time")
    inputs: Dict[str, str] = Field(default_factory=dict, description="Input path -> SHA-256 digest")
    seeds: Dict[str, int] = Field(default_factory=dict, description="Seeds used by the run")
    settings: Dict[str, Any] = Field(default_factory=dict, description="Resolved settings")
    versions: Dict[str, str] = Field(default_factory=dict, description="Package versions")
    outputs: List[str] = Field(default_factory=list, description="Files written by the run")
    exit_code: Optional[int] = Field(default=None, description="Exit code of the run")


class SynthesisConfigFile(BaseModel):
    """Options of a synthesis run; omitted values fall back to settings."""

    model_config = ConfigDict(
        extra="forbid",
        json_schema_extra={
            "example": {
                "init": "lqr",
                "gamma3": 0.001,
                "kappa": None,
                "max_alternations": 50,
                "seed": 0,
                "W": [[1.0, 0.0], [0.0, 1.0]]
            }
        }
    )

    init: Literal["lqr", "paper", "random"] = Field(default="lqr", description="Starting gains")
    gamma1: Optional[float] = Field(default=None, gt=0.0, description="Lower bound constant")
    gamma2: Optional[float] = Field(default=None, gt=0.0, description="Upper bound constant")
    gamma3: Optional[float] = Field(default=None, ge=0.0, description="Decrease rate")
    kappa: Optional[float] = Field(default=None, gt=0.0, description="Filter bandwidth; None for direct closure")
    max_alternations: Optional[int] = Field(default=None, ge=1, description="Alternation budget")
    seed: Optional[int] = Field(default=None, ge=0, description="Seed of the random start and validation")
    W: Optional[Matrix] = Field(
        default=None,
        description="Uniqueness map; searched with find_w when omitted (identity for a P-matrix F)"
    )
    K_mask: Optional[List[List[bool]]] = Field(default=None, description="Free entries of K")
    paper_gains: Optional[GainsFile] = Field(default=None, description="Starting gains for init 'paper'")
    validation_trials: Optional[int] = Field(default=None, ge=0, description="Random-IC validation simulations")
    ic_low: Optional[Vector] = Field(default=None, description="Lower corner of the validation box")
    ic_high: Optional[Vector] = Field(default=None, description="Upper corner of the validation box")

    @field_validator("gamma2")
    @classmethod
    def validate_gamma2(cls, v: Optional[float], info) -> Optional[float]:
        """Ensure the upper bound constant exceeds the lower one."""
        gamma1 = info.data.get("gamma1")
        if v is not None and gamma1 is not None and v <= gamma1:
            raise ValueError("gamma2 must be greater than gamma1")
        return v
