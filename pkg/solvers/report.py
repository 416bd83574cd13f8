"""Result containers shared by the continuation solver and the verifier."""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np


@dataclass
class HomotopyState:
    """A point (a, lambda1, lambda2) on the KKT path at parameter w."""
    a: np.ndarray
    lambda1: float
    lambda2: float
    w: float

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.a, [self.lambda1, self.lambda2]])

    @classmethod
    def from_vector(cls, y: np.ndarray, w: float) -> 'HomotopyState':
        return cls(a=np.array(y[:4], dtype=float), lambda1=float(y[4]), lambda2=float(y[5]), w=float(w))


@dataclass
class PathDiagnostics:
    """What happened along one branch."""
    steps: int = 0
    step_halvings: int = 0
    newton_iterations: int = 0
    min_abs_det: float = float('inf')
    max_correction: float = 0.0
    max_constraint_defect: float = 0.0
    max_stationarity_defect: float = 0.0
    lambda_violations: int = 0
    # (w, power, lambda1, lambda2) at every accepted step
    power_trace: List[Tuple[float, float, float, float]] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'steps': self.steps,
            'step_halvings': self.step_halvings,
            'newton_iterations': self.newton_iterations,
            'min_abs_det': self.min_abs_det if np.isfinite(self.min_abs_det) else None,
            'max_correction': self.max_correction,
            'max_constraint_defect': self.max_constraint_defect,
            'max_stationarity_defect': self.max_stationarity_defect,
            'lambda_violations': self.lambda_violations,
        }


@dataclass
class BranchOutcome:
    """Result of following one d=0 candidate to w=1."""
    sign_choice: int
    status: str
    start_power: float
    state: Optional[HomotopyState] = None
    power: Optional[float] = None
    reason: Optional[str] = None
    start_negative_multiplier: bool = False
    diagnostics: PathDiagnostics = field(default_factory=PathDiagnostics)

    @property
    def ok(self) -> bool:
        return self.status == 'ok'

    def to_dict(self) -> Dict[str, Any]:
        return {
            'sign_choice': self.sign_choice,
            'status': self.status,
            'reason': self.reason,
            'start_power': self.start_power,
            'power': self.power,
            'lambda1': None if self.state is None else self.state.lambda1,
            'lambda2': None if self.state is None else self.state.lambda2,
            'start_negative_multiplier': self.start_negative_multiplier,
            'diagnostics': self.diagnostics.to_dict(),
        }


@dataclass
class SolveReport:
    """Solution of one instance plus everything needed to audit it.

    Attributes:
        a: Real reduced beamformer (row-major 4-vector)
        power: Reduced power G(a)
        lambda1, lambda2: Multipliers (None when unknown, e.g. oracle fallback)
        constraint_values: (f_1(a), f_2(a)) at w=1
        kkt_residual: Relative stationarity defect (None when multipliers unknown)
        branch: Winning sign choice, or 'oracle' / 'external'
        status: 'ok', 'fallback' or 'external'
        branches: Outcome of each continuation branch
        oracle_power: Power of the reference optimizer when it ran
        physical_power: Relay power in watts when a physical instance was supplied
        beamformer: Lifted M x M complex beamformer
        sinr: Achieved SINR per terminal (physical instances)
        last_good: Last accepted state of the best failed branch (fallback only)
    """
    a: np.ndarray
    power: float
    lambda1: Optional[float]
    lambda2: Optional[float]
    constraint_values: Tuple[float, float]
    kkt_residual: Optional[float]
    branch: Any
    status: str = 'ok'
    branches: List[BranchOutcome] = field(default_factory=list)
    oracle_power: Optional[float] = None
    physical_power: Optional[float] = None
    beamformer: Optional[np.ndarray] = None
    sinr: Optional[Tuple[float, float]] = None
    last_good: Optional[HomotopyState] = None

    @property
    def oracle_gap(self) -> Optional[float]:
        """Relative excess of power over the reference optimum."""
        if self.oracle_power is None:
            return None
        return (self.power - self.oracle_power) / self.oracle_power
