"""
Configuration management for the tactile LCS toolkit.
"""
from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import Field, field_validator
from typing import Any, Dict, Literal, Optional


class Settings(BaseSettings):
    """Toolkit settings with validation."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="forbid"
    )

    # LCP Configuration
    lcp_tol: float = Field(
        default=1e-9,
        gt=0.0,
        le=1e-3,
        description="Absolute complementarity tolerance"
    )
    lcp_max_pivots: int = Field(
        default=1000,
        ge=10,
        le=100000,
        description="Pivot budget before Lemke reports cycling"
    )
    enum_max_contacts: int = Field(
        default=16,
        ge=1,
        le=16,
        description="Largest LCP size handled by exhaustive enumeration"
    )

    # Simulation Configuration
    sim_dt: float = Field(
        default=1e-4,
        gt=0.0,
        le=0.1,
        description="Integration step in seconds"
    )
    sim_horizon: float = Field(
        default=10.0,
        gt=0.0,
        le=1000.0,
        description="Simulation horizon in seconds"
    )
    sim_integrator: Literal["semi-implicit-euler", "explicit-euler"] = Field(
        default="semi-implicit-euler",
        description="Fixed-step integrator"
    )

    # SDP Configuration
    feas_tol: float = Field(
        default=1e-7,
        gt=0.0,
        le=1e-2,
        description="PSD feasibility tolerance on re-checked eigenvalues"
    )
    gap_tol: float = Field(
        default=1e-7,
        gt=0.0,
        le=1e-2,
        description="Accepted relative duality gap"
    )
    rank_tol: float = Field(
        default=1e-10,
        gt=0.0,
        le=1e-3,
        description="Rank tolerance, scaled by the largest matrix dimension"
    )
    sdp_solver: str = Field(
        default="CLARABEL",
        description="Primary cvxpy solver"
    )
    sdp_fallback_solver: str = Field(
        default="SCS",
        description="Fallback cvxpy solver"
    )
    sdp_max_iters: int = Field(
        default=500,
        ge=10,
        le=100000,
        description="Iteration limit per solver attempt"
    )
    sdp_max_retries: int = Field(
        default=2,
        ge=1,
        le=10,
        description="Attempts per solver"
    )

    # Certificate Configuration
    gamma1: float = Field(
        default=1e-3,
        gt=0.0,
        description="Lower bound constant of the Lyapunov function"
    )
    gamma2: Optional[float] = Field(
        default=None,
        description="Upper bound constant (free when omitted)"
    )
    gamma3: float = Field(
        default=1e-3,
        ge=0.0,
        description="Decrease rate (0 asks for Lyapunov stability only)"
    )
    certificate_cap: float = Field(
        default=1e4,
        gt=0.0,
        description="Upper bound on the eigenvalues of P"
    )
    margin_cap: float = Field(
        default=1.0,
        gt=0.0,
        description="Bound on the maximized strictness margins"
    )
    acceptance_margin: float = Field(
        default=1e-8,
        ge=0.0,
        description="Margin required to accept a certificate"
    )
    decrease_slack: float = Field(
        default=1e-8,
        ge=0.0,
        le=1e-4,
        description="Shortfall of the decrease margin below zero tolerated when gamma3 = 0"
    )

    # Filter Configuration
    filter_kappa: float = Field(
        default=100.0,
        gt=0.0,
        description="Input filter bandwidth"
    )

    # Find-W Configuration
    find_w_obj_tol: float = Field(
        default=1e-6,
        gt=0.0,
        le=1e-1,
        description="Objective threshold that stops the row search"
    )
    find_w_eta_cap: float = Field(
        default=1.0,
        gt=0.0,
        description="Bound on the slack eta"
    )
    find_w_oracle_samples: int = Field(
        default=100,
        ge=1,
        le=10000,
        description="Random q samples in the enumeration oracle"
    )
    find_w_oracle_tol: float = Field(
        default=1e-6,
        gt=0.0,
        description="Accepted spread of W lambda across solutions"
    )
    sos_degree: Literal[2, 4] = Field(
        default=4,
        description="Relaxation degree of the uniqueness programs (2 drops the product with |lam1|^2 + |lam2|^2)"
    )

    # Synthesis Configuration
    synth_max_alternations: int = Field(
        default=50,
        ge=1,
        le=1000,
        description="Alternation budget"
    )
    synth_target_margin: float = Field(
        default=1e-6,
        ge=0.0,
        description="Margin that ends the alternation"
    )
    synth_gain_cap: float = Field(
        default=1e3,
        gt=0.0,
        description="Bound on gain entries during the gain step"
    )
    synth_validation_trials: int = Field(
        default=20,
        ge=0,
        le=1000,
        description="Random-IC simulations validating synthesized gains"
    )
    synth_validation_dt: float = Field(
        default=1e-3,
        gt=0.0,
        le=0.1,
        description="Integration step of the validation simulations"
    )
    synth_validation_horizon: float = Field(
        default=10.0,
        gt=0.0,
        description="Horizon of the validation simulations"
    )

    # Bench Configuration
    bench_trials: int = Field(
        default=100,
        ge=1,
        le=100000,
        description="Monte-Carlo trials per run"
    )
    bench_workers: int = Field(
        default=1,
        ge=1,
        le=256,
        description="Worker processes for trials"
    )
    seed: int = Field(
        default=0,
        ge=0,
        description="Master random seed"
    )

    # Monitor Configuration
    monitor_rel_tol: float = Field(
        default=1e-6,
        ge=0.0,
        description="Allowed Lyapunov increase relative to max |V|"
    )

    # Output Configuration
    output_dir: str = Field(
        default="runs",
        description="Directory for run artifacts"
    )

    @field_validator("gamma2")
    @classmethod
    def validate_gamma2(cls, v: Optional[float], info) -> Optional[float]:
        """Ensure the upper bound constant exceeds the lower one."""
        if v is None:
            return v
        gamma1 = info.data.get("gamma1", 1e-3)
        if v <= gamma1:
            raise ValueError("gamma2 must be greater than gamma1")
        return v

    @field_validator("sdp_solver", "sdp_fallback_solver")
    @classmethod
    def validate_solver_name(cls, v: str) -> str:
        """Normalize solver names to cvxpy's upper-case spelling."""
        return v.upper()


def override_settings(base: "Settings", overrides: Dict[str, Any]) -> "Settings":
    """
    Build a validated copy of settings with overrides applied.

    Args:
        base: Settings to start from
        overrides: Field values to replace

    Returns:
        New Settings instance

    Raises:
        pydantic.ValidationError: On unknown keys or invalid values
    """
    if not overrides:
        return base
    return Settings(**{**base.model_dump(), **overrides})


# Global settings instance
settings = Settings()
