"""Rank-2 reduction of the physical problem to real coefficients.

The optimal beamformer has the form ``A = conj(H) a H^H`` with
``H = [h1 h2]`` and a 2x2 complex ``a``. Writing the Gram matrix
``G = H^H H = K^H K`` with ``K = [rho1 tau_1, rho2 e^{j phi} tau_2]`` and
substituting ``a = conj(K)^{-1} b K^{-H}`` turns relay power and both
constraints into::

    power / sigma_R^2 = q1 ||b tau_1||^2 + q2 ||b tau_2||^2 + ||b||_F^2
    f_i / (gamma_i sigma_i^2) = c_i |tau_i^T b tau_k|^2 - d_i ||tau_i^T b||^2

with all coefficients real. ``r`` is fixed by the angle between the
channels: (1 - r^2) / (1 + r^2) = |G12| / sqrt(G11 G22).
"""

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from model.physical import PhysicalProblem
from model.quadforms import Tau, build_M, build_Q, build_D, taus
from utils.errors import DegenerateChannels

# Gram condition number beyond which h1, h2 count as parallel.
DEGENERACY_COND = 1e12


@dataclass(frozen=True)
class LiftData:
    """Factors of the map b -> A(b) = left @ b @ right."""
    left: np.ndarray
    right: np.ndarray


@dataclass(frozen=True, eq=False)
class ReducedProblem:
    """Real-coefficient 2x2 problem: min G(b) s.t. f_i(b) >= 1.

    Attributes:
        q1, q2: Objective weights
        c1, c2: Constraint signal weights
        d1, d2: Constraint forwarded-noise weights
        r: Shared tau parameter
        scale: Physical watts per unit of reduced power
        lift: Map back to the M x M beamformer (None for stand-alone instances)
    """
    q1: float
    q2: float
    c1: float
    c2: float
    d1: float
    d2: float
    r: float
    scale: float = 1.0
    lift: Optional[LiftData] = field(default=None, repr=False)

    def __post_init__(self):
        for name in ('q1', 'q2', 'd1', 'd2'):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be non-negative and finite, got {value}")
        for name in ('c1', 'c2', 'r', 'scale'):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be positive and finite, got {value}")

    @property
    def taus(self) -> Tuple[Tau, Tau]:
        return taus(self.r)

    def c(self, i: int) -> float:
        return self.c1 if i == 1 else self.c2

    def d(self, i: int) -> float:
        return self.d1 if i == 1 else self.d2

    def objective_matrix(self) -> np.ndarray:
        return build_M(self.q1, self.q2, *self.taus)

    def constraint_matrix(self, i: int, w: float = 1.0) -> np.ndarray:
        return build_Q(i, w, self.c(i), self.d(i), *self.taus)

    def noise_matrix(self, i: int) -> np.ndarray:
        return build_D(i, *self.taus)

    def coefficients(self) -> dict:
        return {
            'r': self.r, 'q1': self.q1, 'q2': self.q2,
            'c1': self.c1, 'c2': self.c2, 'd1': self.d1, 'd2': self.d2,
        }


def reduced_feasibility_margin(i: int, red: ReducedProblem) -> float:
    """c_i ||tau_k||^2 - d_i.

    Cauchy-Schwarz gives f_i(a) <= margin * ||tau_i^T a||^2, so a
    non-positive margin leaves constraint i unsatisfiable.
    """
    return red.c(i) * (1.0 + red.r ** 2) - red.d(i)


def gram_matrix(prob: PhysicalProblem) -> np.ndarray:
    H = np.column_stack([prob.h1, prob.h2])
    return H.conj().T @ H


def reduce(prob: PhysicalProblem, degeneracy_cond: float = DEGENERACY_COND) -> ReducedProblem:
    """Map a physical instance onto the real-coefficient reduced problem.

    Args:
        prob: Physical instance
        degeneracy_cond: Gram condition number treated as singular

    Returns:
        ReducedProblem whose lift reproduces physical power and SINR margins

    Raises:
        DegenerateChannels: h1 and h2 are (numerically) linearly dependent
    """
    G = gram_matrix(prob)
    condition = float(np.linalg.cond(G))
    if not np.isfinite(condition) or condition > degeneracy_cond:
        raise DegenerateChannels(
            f"channel Gram matrix is singular to working precision (cond={condition:.3e})",
            condition=condition,
        )

    g11, g22 = float(G[0, 0].real), float(G[1, 1].real)
    g12 = complex(G[0, 1])
    cos_theta = min(abs(g12) / np.sqrt(g11 * g22), 1.0)
    r = float(np.sqrt((1.0 - cos_theta) / (1.0 + cos_theta)))
    phase = g12 / abs(g12) if abs(g12) > 0 else 1.0

    rho1_2 = g11 / (1.0 + r ** 2)
    rho2_2 = g22 / (1.0 + r ** 2)
    t1, t2 = taus(r)
    K = np.column_stack([np.sqrt(rho1_2) * t1.vector, np.sqrt(rho2_2) * phase * t2.vector])

    H = np.column_stack([prob.h1, prob.h2])
    left = H.conj() @ np.linalg.inv(K.conj())
    right = np.linalg.inv(K.conj().T) @ H.conj().T

    sr2 = prob.sigma_r2
    return ReducedProblem(
        q1=prob.p1 * rho1_2 / sr2,
        q2=prob.p2 * rho2_2 / sr2,
        c1=prob.p2 * rho1_2 * rho2_2 / (prob.gamma1 * prob.sigma1_2),
        c2=prob.p1 * rho1_2 * rho2_2 / (prob.gamma2 * prob.sigma2_2),
        d1=sr2 * rho1_2 / prob.sigma1_2,
        d2=sr2 * rho2_2 / prob.sigma2_2,
        r=r,
        scale=sr2,
        lift=LiftData(left=left, right=right),
    )


def lift(a: np.ndarray, red: ReducedProblem) -> np.ndarray:
    """Map a reduced 2x2 (or its 4-vector) to the physical M x M beamformer."""
    if red.lift is None:
        raise ValueError("reduced problem carries no lift data (not produced by reduce)")
    a = np.asarray(a)
    if a.shape == (4,):
        a = a.reshape(2, 2)
    if a.shape != (2, 2):
        raise ValueError(f"expected a 2x2 reduced beamformer, got shape {a.shape}")
    return red.lift.left @ a.astype(complex) @ red.lift.right
