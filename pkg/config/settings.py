"""Settings and configuration management."""

import os
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

from dotenv import load_dotenv

# Load environment variables
load_dotenv()


class Settings:
    """Application settings loaded from environment variables.

    Only diagnostics come from the environment. Every knob that can change a
    numeric result lives in :class:`SolverConfig`.
    """

    # Project paths
    BASE_DIR = Path(__file__).parent.parent
    OUTPUT_DIR = BASE_DIR / os.getenv('OUTPUT_DIR', 'results')

    # Logging
    LOG_LEVEL: str = os.getenv('LOG_LEVEL', 'INFO').upper()
    VERBOSE: bool = os.getenv('VERBOSE', 'false').lower() == 'true'

    # Batch execution
    PARALLEL_EXECUTION: bool = os.getenv('PARALLEL_EXECUTION', 'false').lower() == 'true'
    MAX_WORKERS: int = int(os.getenv('MAX_WORKERS', '4'))

    # Instance / result file schema
    SCHEMA_VERSION: int = 1

    _LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL')

    @classmethod
    def validate(cls) -> bool:
        """Validate environment-backed settings."""
        if cls.LOG_LEVEL not in cls._LOG_LEVELS:
            raise ValueError(
                f"LOG_LEVEL={cls.LOG_LEVEL!r} is not one of {', '.join(cls._LOG_LEVELS)}. "
                "Please fix it in .env file or environment variables."
            )
        if cls.MAX_WORKERS < 1:
            raise ValueError("MAX_WORKERS must be at least 1.")
        return True

    @classmethod
    def ensure_directories(cls) -> None:
        """Ensure required directories exist."""
        cls.OUTPUT_DIR.mkdir(parents=True, exist_ok=True)

    @classmethod
    def resolve_output_path(cls, filename: str) -> Path:
        """Place bare file names under OUTPUT_DIR; keep explicit paths as given."""
        path = Path(filename)
        if path.parent == Path('.'):
            cls.ensure_directories()
            return cls.OUTPUT_DIR / path
        return path


@dataclass(frozen=True)
class SolverConfig:
    """Numeric knobs shared by the solvers.

    Attributes:
        steps: Fixed Runge-Kutta step count on 0 <= w <= 1
        corr_tol: Newton correction tolerance (constraint defect, relative stationarity)
        lambda_tol: Multipliers below -lambda_tol fail a branch
        max_newton: Newton iterations per correction
        newton_correction: Project back onto the KKT manifold after each step
        max_step_halvings: Retries of a failed step with half the width
        oracle_starts: Multi-start count of the reference optimizer
        oracle_seed: Seed of the reference optimizer
        verify: Run the reference optimizer and the solution checks
        singular_rtol: Pivot threshold relative to the matrix max-norm
        degeneracy_cond: Gram condition number above which channels are degenerate
    """

    steps: int = 100
    corr_tol: float = 1e-10
    lambda_tol: float = 1e-8
    max_newton: int = 10
    newton_correction: bool = True
    max_step_halvings: int = 4
    oracle_starts: int = 32
    oracle_seed: int = 0
    verify: bool = False
    singular_rtol: float = 1e-12
    degeneracy_cond: float = 1e12

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be at least 1")
        if self.corr_tol <= 0 or self.lambda_tol < 0:
            raise ValueError("corr_tol must be positive and lambda_tol non-negative")
        if self.max_newton < 1:
            raise ValueError("max_newton must be at least 1")
        if self.oracle_starts < 1:
            raise ValueError("oracle_starts must be at least 1")

    def with_overrides(self, overrides: Optional[Mapping[str, Any]] = None, **kwargs) -> 'SolverConfig':
        """Return a copy with the given fields replaced.

        Args:
            overrides: Mapping of field name to value (e.g. an instance file's solver block)
            **kwargs: Further overrides; None values are ignored so unset CLI flags pass through

        Returns:
            New SolverConfig
        """
        known = {f.name: f.type for f in fields(self)}
        merged: Dict[str, Any] = {}
        for source in (overrides or {}, kwargs):
            for key, value in source.items():
                if value is None:
                    continue
                if key not in known:
                    raise ValueError(f"Unknown solver option: {key}")
                merged[key] = value
        return replace(self, **merged)

    def to_dict(self) -> Dict[str, Any]:
        """Plain-dict view for result records."""
        return {f.name: getattr(self, f.name) for f in fields(self)}
