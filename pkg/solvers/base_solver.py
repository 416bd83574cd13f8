"""Base solver class with common functionality."""

from typing import Dict, Optional, Tuple

import numpy as np
from scipy.linalg.lapack import dgetrf, dgetrs

from config import SolverConfig
from model.quadforms import quad_form
from model.reduction import ReducedProblem
from utils import get_logger
from utils.errors import SingularSystem

# Distinct w values kept in the Q cache; one RK4 step touches three.
_Q_CACHE_SIZE = 8


class BaseSolver:
    """Base class for the solvers that walk the reduced problem.

    Holds the instance, the numeric configuration, a named logger and a cache
    of the constant matrices M, T-parts and tilde(tau_ii).
    """

    def __init__(
        self,
        name: str,
        red: ReducedProblem,
        config: Optional[SolverConfig] = None
    ):
        """Initialize base solver.

        Args:
            name: Solver name (used in log records)
            red: Reduced problem instance
            config: Numeric configuration (defaults to SolverConfig())
        """
        self.name = name
        self.red = red
        self.config = config or SolverConfig()
        self.logger = get_logger(f"Solver.{name}")

        self.M = red.objective_matrix()
        # Q_i^(w) = T-part - w * D-part, both fixed per instance
        self._q_base: Dict[int, np.ndarray] = {i: red.constraint_matrix(i, 0.0) for i in (1, 2)}
        self._d_part: Dict[int, np.ndarray] = {i: red.d(i) * red.noise_matrix(i) for i in (1, 2)}
        self._q_cache: Dict[float, Tuple[np.ndarray, np.ndarray]] = {}
        # |det| of the last matrix factored by solve_dense
        self.last_abs_det = float('nan')

        self.logger.debug(
            f"Initialized {name} (r={red.r:.6g}, q=({red.q1:.4g}, {red.q2:.4g}), "
            f"c=({red.c1:.4g}, {red.c2:.4g}), d=({red.d1:.4g}, {red.d2:.4g}))"
        )

    def Q_pair(self, w: float) -> Tuple[np.ndarray, np.ndarray]:
        """(Q_1^(w), Q_2^(w)); the returned arrays are shared, do not modify them."""
        pair = self._q_cache.get(w)
        if pair is None:
            if len(self._q_cache) >= _Q_CACHE_SIZE:
                self._q_cache.clear()
            pair = (self._q_base[1] - w * self._d_part[1], self._q_base[2] - w * self._d_part[2])
            self._q_cache[w] = pair
        return pair

    def Q(self, i: int, w: float) -> np.ndarray:
        """Q_i^(w) from the cached parts."""
        return self.Q_pair(w)[i - 1]

    def D(self, i: int) -> np.ndarray:
        """d_i tilde(tau_ii)."""
        return self._d_part[i]

    def power(self, a: np.ndarray) -> float:
        return quad_form(self.M, a)

    def constraint_values(self, a: np.ndarray, w: float = 1.0) -> Tuple[float, float]:
        Q1, Q2 = self.Q_pair(w)
        return quad_form(Q1, a), quad_form(Q2, a)

    def stationarity_defect(self, a: np.ndarray, lambda1: float, lambda2: float, w: float) -> np.ndarray:
        """M a - lambda1 Q1 a - lambda2 Q2 a."""
        Q1, Q2 = self.Q_pair(w)
        return self.M @ a - lambda1 * (Q1 @ a) - lambda2 * (Q2 @ a)

    def solve_dense(self, matrix: np.ndarray, rhs: np.ndarray, w: float, what: str) -> np.ndarray:
        """Solve a small dense system by LU with partial pivoting.

        Also leaves |det(matrix)|, the product of the U diagonal, in last_abs_det.

        Args:
            matrix: Square system matrix
            rhs: Right-hand side
            w: Homotopy parameter, reported on failure
            what: Short description for the error message

        Returns:
            Solution vector

        Raises:
            SingularSystem: A pivot falls below singular_rtol times the max-norm
        """
        matrix = np.asarray(matrix, dtype=float)
        scale = float(np.max(np.abs(matrix)))
        if scale == 0.0 or not np.isfinite(scale):
            raise SingularSystem(f"{self.name}: {what} matrix is zero or non-finite", w, 0.0, scale)
        lu, piv, info = dgetrf(matrix)
        diag = np.abs(np.diag(lu))
        pivot = float(np.min(diag))
        self.last_abs_det = float(np.prod(diag))
        if info != 0 or pivot < self.config.singular_rtol * scale:
            raise SingularSystem(f"{self.name}: {what} matrix is singular", w, pivot, scale)
        x, _ = dgetrs(lu, piv, np.asarray(rhs, dtype=float))
        return x
