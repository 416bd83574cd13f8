"""Reference optimizer and solution checker.

The oracle shares nothing with the continuation path except the quadratic
forms: it minimizes the exterior penalty::

    P(a) = a^T M a + mu * sum_i max(0, 1 - f_i(a))^2

from many seeded random starts, raising mu over rounds. Each endpoint is
radially rescaled onto min_i f_i = 1, so every reported point is feasible.
"""

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from model.quadforms import build_M, build_Q
from model.reduction import ReducedProblem
from utils import get_logger
from utils.errors import OracleNoFeasiblePoint

from .realification import ComplexCandidate
from .report import SolveReport

PENALTY_SCHEDULE = tuple(10.0 ** k for k in range(1, 7))

# Endpoint accepted as feasible when min_i f_i reaches this before rescaling.
FEASIBLE_FLOOR = 1e-3

_TINY = 1e-300


@dataclass
class OracleResult:
    """Best point found by the multi-start penalty method.

    Attributes:
        a: Best point; a real 4-vector, or a complex 4-vector in complex mode
        power: G(a)
        starts_attempted: Number of starts run (hints included)
        starts_converged: Starts whose final round reported success
        endpoints: Per-start (power, feasible) pairs when requested
    """
    a: np.ndarray
    power: float
    starts_attempted: int
    starts_converged: int
    endpoints: Optional[List[Tuple[float, bool]]] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'power': self.power,
            'starts_attempted': self.starts_attempted,
            'starts_converged': self.starts_converged,
        }


def fd_gradient(fun: Callable[[np.ndarray], float], z: np.ndarray, rel_step: float = 1e-6) -> np.ndarray:
    """Central-difference gradient with step rel_step * (1 + |z_j|)."""
    z = np.asarray(z, dtype=float)
    grad = np.empty_like(z)
    for j in range(z.size):
        h = rel_step * (1.0 + abs(z[j]))
        step = np.zeros_like(z)
        step[j] = h
        grad[j] = (fun(z + step) - fun(z - step)) / (2.0 * h)
    return grad


class OracleSolver:
    """Multi-start penalty minimization over real 4-vectors or complex pairs."""

    def __init__(self, red: ReducedProblem, w: float = 1.0, complex_mode: bool = False):
        self.red = red
        self.w = w
        self.complex_mode = complex_mode
        self.dim = 8 if complex_mode else 4
        self.logger = get_logger("Solver.Oracle")
        t1, t2 = red.taus
        self.M = build_M(red.q1, red.q2, t1, t2)
        self._Qw = tuple(build_Q(i, w, red.c(i), red.d(i), t1, t2) for i in (1, 2))

    # split z into its real and imaginary halves (y is empty in real mode)
    def _parts(self, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return z[:4], z[4:]

    def _form(self, mat: np.ndarray, z: np.ndarray) -> float:
        x, y = self._parts(z)
        value = float(x @ mat @ x)
        if y.size:
            value += float(y @ mat @ y)
        return value

    def _apply(self, mat: np.ndarray, z: np.ndarray) -> np.ndarray:
        x, y = self._parts(z)
        return np.concatenate([mat @ x, mat @ y]) if y.size else mat @ x

    def forms(self, z: np.ndarray) -> Tuple[float, float]:
        return self._form(self._Qw[0], z), self._form(self._Qw[1], z)

    def objective(self, z: np.ndarray) -> float:
        return self._form(self.M, z)

    def penalty(self, z: np.ndarray, mu: float) -> float:
        violation = np.maximum(0.0, 1.0 - np.array(self.forms(z)))
        return self.objective(z) + mu * float(np.sum(violation ** 2))

    def penalty_gradient(self, z: np.ndarray, mu: float) -> np.ndarray:
        grad = 2.0 * self._apply(self.M, z)
        for Q, value in zip(self._Qw, self.forms(z)):
            violation = max(0.0, 1.0 - value)
            if violation > 0.0:
                grad -= 4.0 * mu * violation * self._apply(Q, z)
        return grad

    def rescale(self, z: np.ndarray) -> Optional[np.ndarray]:
        """Scale z onto min_i f_i = 1; None when some f_i <= 0."""
        lowest = min(self.forms(z))
        if not np.isfinite(lowest) or lowest <= 0.0:
            return None
        return z / np.sqrt(lowest)

    def _round(self, z: np.ndarray, mu: float):
        result = minimize(
            self.penalty, z, args=(mu,), jac=self.penalty_gradient,
            method='BFGS', options={'gtol': 1e-10, 'maxiter': 500},
        )
        if result.success:
            return result
        fallback = minimize(
            self.penalty, result.x, args=(mu,),
            jac=lambda v, m: fd_gradient(lambda u: self.penalty(u, m), v),
            method='BFGS', options={'gtol': 1e-8, 'maxiter': 500},
        )
        return fallback if fallback.fun <= result.fun else result

    def descend(self, z0: np.ndarray) -> Tuple[np.ndarray, bool]:
        """Run all penalty rounds from z0; returns (endpoint, last round succeeded)."""
        z = np.array(z0, dtype=float)
        success = False
        for mu in PENALTY_SCHEDULE:
            result = self._round(z, mu)
            z, success = result.x, bool(result.success)
        return z, success

    def start(self, seed: int, idx: int) -> np.ndarray:
        """Seeded random start, pre-scaled onto the feasible set when possible."""
        rng = np.random.default_rng([seed, idx])
        z = rng.standard_normal(self.dim)
        scaled = self.rescale(z)
        return scaled if scaled is not None else z

    def _embed(self, hint: np.ndarray) -> np.ndarray:
        hint = np.asarray(hint)
        if np.iscomplexobj(hint):
            if not self.complex_mode:
                raise ValueError("complex hints need complex_mode=True")
            return np.concatenate([hint.real, hint.imag]).astype(float)
        hint = hint.astype(float).reshape(-1)
        if self.complex_mode and hint.size == 4:
            return np.concatenate([hint, np.zeros(4)])
        return hint

    def _as_point(self, z: np.ndarray) -> np.ndarray:
        x, y = self._parts(z)
        return x + 1j * y if y.size else x.copy()

    def run(self, seed: int = 0, n_starts: int = 32,
            hints: Optional[Sequence[np.ndarray]] = None,
            keep_endpoints: bool = False) -> OracleResult:
        """Best feasible endpoint over n_starts random starts plus the hints.

        Raises:
            OracleNoFeasiblePoint: No start (and no hint) ended feasible
        """
        starts = [self.start(seed, idx) for idx in range(n_starts)]
        hint_points = [self._embed(h) for h in (hints or [])]
        starts.extend(hint_points)

        best: Optional[Tuple[float, np.ndarray]] = None
        endpoints: List[Tuple[float, bool]] = []
        converged = 0

        def offer(z: np.ndarray) -> bool:
            nonlocal best
            scaled = self.rescale(z)
            if scaled is None:
                return False
            power = self.objective(scaled)
            if best is None or power < best[0]:
                best = (power, scaled)
            return True

        # a feasible hint is itself a candidate
        for z in hint_points:
            offer(z)

        for z0 in starts:
            z, success = self.descend(z0)
            converged += int(success)
            feasible = min(self.forms(z)) >= FEASIBLE_FLOOR and offer(z)
            endpoints.append((self.objective(z), feasible))

        if best is None:
            raise OracleNoFeasiblePoint(f"none of {len(starts)} oracle starts ended feasible")

        power, z = best
        self.logger.debug(
            f"oracle: best power {power:.10g} over {len(starts)} starts ({converged} converged)"
        )
        return OracleResult(
            a=self._as_point(z),
            power=power,
            starts_attempted=len(starts),
            starts_converged=converged,
            endpoints=endpoints if keep_endpoints else None,
        )


def oracle_minimize(red: ReducedProblem, w: float = 1.0, seed: int = 0, n_starts: int = 32,
                    hints: Optional[Sequence[np.ndarray]] = None, complex_mode: bool = False,
                    keep_endpoints: bool = False) -> OracleResult:
    """Multi-start penalty minimum of G subject to f_i^(w) >= 1.

    Args:
        red: Reduced instance
        w: Homotopy parameter of the constraints
        seed: Base seed; start idx draws from default_rng([seed, idx])
        n_starts: Random starts
        hints: Extra starts, each also a candidate in its own right
        complex_mode: Optimize over complex 2x2 (x + j y) instead of real
        keep_endpoints: Keep (power, feasible) for every start

    Returns:
        OracleResult
    """
    return OracleSolver(red, w=w, complex_mode=complex_mode).run(
        seed=seed, n_starts=n_starts, hints=hints, keep_endpoints=keep_endpoints,
    )


def kkt_residual(a: np.ndarray, lambda1: float, lambda2: float,
                 red: ReducedProblem, w: float = 1.0) -> float:
    """||M a - lambda1 Q1 a - lambda2 Q2 a|| / max(||M a||, tiny)."""
    a = np.asarray(a, dtype=float)
    M = red.objective_matrix()
    defect = M @ a - lambda1 * (red.constraint_matrix(1, w) @ a) - lambda2 * (red.constraint_matrix(2, w) @ a)
    return float(np.linalg.norm(defect)) / max(float(np.linalg.norm(M @ a)), _TINY)


def kkt_residual_complex(x: np.ndarray, y: np.ndarray, lambda1: float, lambda2: float,
                         red: ReducedProblem, w: float = 1.0) -> float:
    """KKT residual of a complex point x + j y; both parts must be stationary."""
    M = red.objective_matrix()
    Q1, Q2 = red.constraint_matrix(1, w), red.constraint_matrix(2, w)
    defect = np.concatenate([M @ v - lambda1 * (Q1 @ v) - lambda2 * (Q2 @ v) for v in (x, y)])
    scale = np.sqrt(float(np.linalg.norm(M @ x)) ** 2 + float(np.linalg.norm(M @ y)) ** 2)
    return float(np.linalg.norm(defect)) / max(scale, _TINY)


def fit_multipliers(a: np.ndarray, red: ReducedProblem, w: float = 1.0) -> Tuple[float, float]:
    """Least-squares multipliers of a point supplied without them."""
    a = np.asarray(a, dtype=float)
    basis = np.column_stack([red.constraint_matrix(1, w) @ a, red.constraint_matrix(2, w) @ a])
    lambdas, *_ = np.linalg.lstsq(basis, red.objective_matrix() @ a, rcond=None)
    return float(lambdas[0]), float(lambdas[1])


def random_feasible_candidate(red: ReducedProblem, rng: np.random.Generator, w: float = 1.0,
                              max_tries: int = 50) -> ComplexCandidate:
    """Random complex point with x^T Q_i x + y^T Q_i y = 1 for both i.

    Draws a start the way the oracle does, scales it onto the feasible set
    and projects it onto both equality surfaces by minimum-norm Newton steps.

    Raises:
        OracleNoFeasiblePoint: No draw could be projected (e.g. infeasible instance)
    """
    solver = OracleSolver(red, w=w, complex_mode=True)
    for _ in range(max_tries):
        z = solver.rescale(rng.standard_normal(8))
        if z is None:
            continue
        for _ in range(50):
            defect = np.array(solver.forms(z)) - 1.0
            if np.max(np.abs(defect)) < 1e-14:
                break
            J = 2.0 * np.vstack([solver._apply(Q, z) for Q in solver._Qw])
            step, *_ = np.linalg.lstsq(J, defect, rcond=None)
            z = z - step
        if np.max(np.abs(np.array(solver.forms(z)) - 1.0)) <= 1e-12:
            return ComplexCandidate(x=z[:4].copy(), y=z[4:].copy())
    raise OracleNoFeasiblePoint("could not draw a complex point on both constraint surfaces")


# ----------------------------------------------------------------------
# Solution checks
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class CheckTolerances:
    feasibility: float = 1e-6
    kkt: float = 1e-6
    multiplier: float = 1e-8
    oracle_gap: float = 5e-3


@dataclass
class CheckItem:
    name: str
    passed: bool
    value: Optional[float]
    threshold: float

    def to_dict(self) -> Dict[str, Any]:
        return {'name': self.name, 'passed': self.passed, 'value': self.value, 'threshold': self.threshold}


@dataclass
class CheckSummary:
    """Pass/fail per criterion plus the numbers behind each verdict."""
    items: List[CheckItem] = field(default_factory=list)
    power: Optional[float] = None
    lambda1: Optional[float] = None
    lambda2: Optional[float] = None
    oracle_power: Optional[float] = None
    # set when the input was complex and went through realification
    input_power: Optional[float] = None
    realification_case: Optional[str] = None

    @property
    def passed(self) -> bool:
        return all(item.passed for item in self.items)

    def get(self, name: str) -> CheckItem:
        for item in self.items:
            if item.name == name:
                return item
        raise KeyError(name)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'passed': self.passed,
            'power': self.power,
            'lambda1': self.lambda1,
            'lambda2': self.lambda2,
            'oracle_power': self.oracle_power,
            'input_power': self.input_power,
            'realification_case': self.realification_case,
            'checks': [item.to_dict() for item in self.items],
        }


def check_solution(report: SolveReport, red: ReducedProblem,
                   tolerances: Optional[CheckTolerances] = None,
                   run_oracle: bool = False, seed: int = 0, n_starts: int = 32) -> CheckSummary:
    """Audit a solution: feasibility, KKT residual, multiplier signs, oracle gap.

    Multipliers missing from the report are fitted by least squares. The
    oracle gap is checked when the report carries an oracle power or
    run_oracle is set.

    Args:
        report: Solution to audit
        red: Reduced instance
        tolerances: Thresholds (defaults to CheckTolerances())
        run_oracle: Run the reference optimizer when the report has no oracle power
        seed, n_starts: Oracle settings

    Returns:
        CheckSummary
    """
    tol = tolerances or CheckTolerances()
    a = np.asarray(report.a, dtype=float)
    M = red.objective_matrix()
    power = float(a @ M @ a)
    summary = CheckSummary(power=power)

    for i in (1, 2):
        margin = float(a @ red.constraint_matrix(i, 1.0) @ a) - 1.0
        summary.items.append(CheckItem(f"feasibility_{i}", margin >= -tol.feasibility, margin, -tol.feasibility))

    if not np.any(a):
        summary.items.append(CheckItem('kkt_residual', False, None, tol.kkt))
        return summary

    lambda1, lambda2 = report.lambda1, report.lambda2
    if lambda1 is None or lambda2 is None:
        lambda1, lambda2 = fit_multipliers(a, red)
    summary.lambda1, summary.lambda2 = lambda1, lambda2

    residual = kkt_residual(a, lambda1, lambda2, red)
    summary.items.append(CheckItem('kkt_residual', residual <= tol.kkt, residual, tol.kkt))
    lowest = min(lambda1, lambda2)
    summary.items.append(CheckItem('multipliers', lowest >= -tol.multiplier, lowest, -tol.multiplier))

    oracle_power = report.oracle_power
    if oracle_power is None and run_oracle:
        try:
            oracle_power = oracle_minimize(red, seed=seed, n_starts=n_starts, hints=[a]).power
        except OracleNoFeasiblePoint:
            oracle_power = None
    if oracle_power is not None:
        summary.oracle_power = oracle_power
        gap = (power - oracle_power) / max(oracle_power, _TINY)
        summary.items.append(CheckItem('oracle_gap', gap <= tol.oracle_gap, gap, tol.oracle_gap))
    return summary
