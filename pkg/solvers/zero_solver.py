"""Closed-form optimum of the reduced problem with d1 = d2 = 0."""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from config import SolverConfig
from model.reduction import ReducedProblem
from utils.errors import SingularTangentSystem

from .base_solver import BaseSolver

# Multipliers below this flag a candidate that is not a both-active KKT point.
NEGATIVE_MULTIPLIER_TOL = 1e-10


@dataclass
class ZeroCandidate:
    """One of the two tangency points of the d=0 problem."""
    a: np.ndarray
    power: float
    sign_choice: int
    lambda1: float
    lambda2: float
    kkt_residual: float
    negative_multiplier: bool = False


def canonical_sign(a: np.ndarray) -> np.ndarray:
    """Flip a so that its first nonzero entry is positive."""
    tol = 1e-12 * max(float(np.max(np.abs(a))), 1e-300)
    for value in a:
        if abs(value) > tol:
            return a if value > 0 else -a
    return a


class ZeroSolver(BaseSolver):
    """Solver for the d=0 problem, where both constraints are pairs of hyperplanes.

    Both constraints are active at the optimum. Each sign choice of the second
    constraint gives a 2-D plane of points meeting both with equality; the
    candidate is the point of least power on that plane.
    """

    def __init__(self, red: ReducedProblem, config: Optional[SolverConfig] = None):
        super().__init__(name="ZeroSolver", red=red, config=config)
        r = red.r
        # u_i . vec(a) = tau_i^T a tau_k
        self.u1 = np.array([1.0, -r, r, -r ** 2])
        self.u2 = np.array([1.0, r, -r, -r ** 2])
        # spans the common null space of u1 and u2
        self.directions = np.column_stack([[r ** 2, 0.0, 0.0, 1.0], [0.0, 1.0, 1.0, 0.0]])

    def base_point(self, sign: int) -> np.ndarray:
        """Point with u1.b = c1^{-1/2} and u2.b = sign c2^{-1/2}."""
        s1 = self.red.c1 ** -0.5
        s2 = sign * self.red.c2 ** -0.5
        return np.array([(s1 + s2) / 2.0, (s2 - s1) / (2.0 * self.red.r), 0.0, 0.0])

    def candidate(self, sign: int) -> ZeroCandidate:
        """Minimum-power point on the plane selected by sign."""
        base = self.base_point(sign)
        V = self.directions
        tangent = V.T @ self.M @ V
        det = float(np.linalg.det(tangent))
        if abs(det) <= 1e-14 * float(np.max(np.abs(tangent))) ** 2:
            raise SingularTangentSystem(f"tangency system is singular (det={det:.3e})")
        z = np.linalg.solve(tangent, -(V.T @ self.M @ base))
        a = canonical_sign(base + V @ z)

        lambda1, lambda2, residual = self.bootstrap_multipliers(a)
        negative = min(lambda1, lambda2) < -NEGATIVE_MULTIPLIER_TOL
        if negative:
            self.logger.warning(
                f"sign {sign:+d}: negative multiplier (lambda=({lambda1:.3e}, {lambda2:.3e})); "
                "candidate is not a both-active KKT point"
            )
        return ZeroCandidate(
            a=a,
            power=self.power(a),
            sign_choice=sign,
            lambda1=lambda1,
            lambda2=lambda2,
            kkt_residual=residual,
            negative_multiplier=negative,
        )

    def solve(self) -> Tuple[ZeroCandidate, ZeroCandidate]:
        plus, minus = self.candidate(+1), self.candidate(-1)
        self.logger.debug(f"d=0 candidates: power(+)={plus.power:.10g}, power(-)={minus.power:.10g}")
        return plus, minus

    def bootstrap_multipliers(self, a: np.ndarray) -> Tuple[float, float, float]:
        """Least-squares fit of M a = lambda1 Q1 a + lambda2 Q2 a at w=0.

        Returns:
            Tuple of (lambda1, lambda2, norm of the defect)
        """
        a = np.asarray(a, dtype=float)
        if not np.any(a):
            raise ValueError("multipliers are undefined at a = 0")
        basis = np.column_stack([self.Q(1, 0.0) @ a, self.Q(2, 0.0) @ a])
        target = self.M @ a
        lambdas, *_ = np.linalg.lstsq(basis, target, rcond=None)
        residual = float(np.linalg.norm(target - basis @ lambdas))
        return float(lambdas[0]), float(lambdas[1]), residual


def solve_zero(red: ReducedProblem) -> Tuple[ZeroCandidate, ZeroCandidate]:
    """Both closed-form candidates (sign +1, sign -1) of the d=0 problem."""
    return ZeroSolver(red).solve()


def bootstrap_multipliers(a: np.ndarray, red: ReducedProblem) -> Tuple[float, float, float]:
    return ZeroSolver(red).bootstrap_multipliers(a)
