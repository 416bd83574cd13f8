"""Operator algebra of the reduced 2x2 problem and its quadratic forms.

A reduced beamformer is a 2x2 matrix ``a``. It is flattened row-major,
``vec(a) = [a11, a12, a21, a22]``, everywhere in the code base; every 4x4
builder below assumes that convention.

The objective and the constraints are quadratic forms in ``vec(a)``::

    G(a)       = vec(a)^T M vec(a)
    f_i^(w)(a) = vec(a)^T Q_i^(w) vec(a)
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

# Largest asymmetry tolerated before a product matrix is symmetrised.
SYMMETRY_RTOL = 1e-12

_I2 = np.eye(2)


@dataclass(frozen=True)
class Tau:
    """Constraint direction tau = [1, sign * r]^T."""
    r: float
    sign: int

    def __post_init__(self):
        if not np.isfinite(self.r) or self.r <= 0:
            raise ValueError(f"tau requires a positive finite r, got {self.r}")
        if self.sign not in (1, -1):
            raise ValueError(f"tau sign must be +1 or -1, got {self.sign}")

    @property
    def vector(self) -> np.ndarray:
        return np.array([1.0, self.sign * self.r])


def taus(r: float) -> Tuple[Tau, Tau]:
    """The pair (tau_1, tau_2) sharing one r."""
    return Tau(r, 1), Tau(r, -1)


def vec_of(m: np.ndarray) -> np.ndarray:
    """Row-major vec of a 2x2 matrix."""
    m = np.asarray(m)
    if m.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {m.shape}")
    return m.reshape(4).copy()


def unvec(v: np.ndarray) -> np.ndarray:
    """Inverse of vec_of."""
    v = np.asarray(v)
    if v.shape != (4,):
        raise ValueError(f"expected a 4-vector, got shape {v.shape}")
    return v.reshape(2, 2).copy()


def underline_of(m: np.ndarray) -> np.ndarray:
    """Block-diagonal [[m, 0], [0, m]]."""
    return np.kron(_I2, np.asarray(m, dtype=float))


def tilde_of(m: np.ndarray) -> np.ndarray:
    """Block matrix [[m11 I, m21 I], [m12 I, m22 I]]."""
    return np.kron(np.asarray(m, dtype=float).T, _I2)


def build_tau_outer(t: Tau) -> np.ndarray:
    """tau_ii = tau_i tau_i^T."""
    v = t.vector
    return np.outer(v, v)


def _symmetrize(mat: np.ndarray, name: str) -> np.ndarray:
    scale = max(np.max(np.abs(mat)), 1.0)
    asymmetry = np.max(np.abs(mat - mat.T))
    if asymmetry > SYMMETRY_RTOL * scale:
        raise ValueError(f"{name} is not symmetric (asymmetry {asymmetry:.3e})")
    return 0.5 * (mat + mat.T)


def build_m(q1: float, q2: float, t1: Tau, t2: Tau) -> np.ndarray:
    """2x2 m = q1 tau_11 + q2 tau_22 + I."""
    return q1 * build_tau_outer(t1) + q2 * build_tau_outer(t2) + _I2


def build_M(q1: float, q2: float, t1: Tau, t2: Tau) -> np.ndarray:
    """Objective matrix M = underline(m); symmetric positive definite."""
    return _symmetrize(underline_of(build_m(q1, q2, t1, t2)), "M")


def build_T(i: int, t1: Tau, t2: Tau) -> np.ndarray:
    """T_ki = underline(tau_kk) tilde(tau_ii) with k = 3 - i."""
    ti, tk = _ordered(i, t1, t2)
    product = underline_of(build_tau_outer(tk)) @ tilde_of(build_tau_outer(ti))
    return _symmetrize(product, f"T_{3 - i}{i}")


def build_Q(i: int, w: float, c_i: float, d_i: float, t1: Tau, t2: Tau) -> np.ndarray:
    """Constraint matrix Q_i^(w) = c_i T_ki - w d_i tilde(tau_ii)."""
    ti, _ = _ordered(i, t1, t2)
    q = c_i * build_T(i, t1, t2) - w * d_i * tilde_of(build_tau_outer(ti))
    return _symmetrize(q, f"Q_{i}")


def build_D(i: int, t1: Tau, t2: Tau) -> np.ndarray:
    """tilde(tau_ii): derivative of -Q_i^(w) with respect to w d_i."""
    ti, _ = _ordered(i, t1, t2)
    return tilde_of(build_tau_outer(ti))


def quad_form(mat: np.ndarray, v: np.ndarray) -> float:
    """v^T mat v for a real matrix and a real or complex vector."""
    v = np.asarray(v)
    if np.iscomplexobj(v):
        return float(np.real(np.conj(v) @ mat @ v))
    return float(v @ mat @ v)


def evaluate_G_direct(a: np.ndarray, q1: float, q2: float, t1: Tau, t2: Tau) -> float:
    """G(a) = q1 ||a tau_1||^2 + q2 ||a tau_2||^2 + Tr[a^H a]."""
    a = np.asarray(a)
    return float(
        q1 * np.sum(np.abs(a @ t1.vector) ** 2)
        + q2 * np.sum(np.abs(a @ t2.vector) ** 2)
        + np.sum(np.abs(a) ** 2)
    )


def evaluate_f_direct(i: int, a: np.ndarray, c_i: float, d_i: float,
                      t1: Tau, t2: Tau, w: float = 1.0) -> float:
    """f_i(a) = c_i |tau_i^T a tau_k|^2 - w d_i ||tau_i^T a||^2."""
    a = np.asarray(a)
    ti, tk = _ordered(i, t1, t2)
    cross = ti.vector @ a @ tk.vector
    row = ti.vector @ a
    return float(c_i * np.abs(cross) ** 2 - w * d_i * np.sum(np.abs(row) ** 2))


def _ordered(i: int, t1: Tau, t2: Tau) -> Tuple[Tau, Tau]:
    if i == 1:
        return t1, t2
    if i == 2:
        return t2, t1
    raise ValueError(f"constraint index must be 1 or 2, got {i}")
