"""Physical two-way relay instance: relay power and per-terminal SINR."""

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np


@dataclass(frozen=True, eq=False)
class PhysicalProblem:
    """Raw two-way relay instance.

    Attributes:
        h1, h2: Complex channel vectors between each terminal and the M relay antennas
        p1, p2: Terminal transmit powers (W)
        sigma_r2: Relay noise variance
        sigma1_2, sigma2_2: Terminal noise variances
        gamma1, gamma2: Linear SINR targets
    """
    h1: np.ndarray
    h2: np.ndarray
    p1: float = 1.0
    p2: float = 1.0
    sigma_r2: float = 1.0
    sigma1_2: float = 1.0
    sigma2_2: float = 1.0
    gamma1: float = 1.0
    gamma2: float = 1.0
    label: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        h1 = np.asarray(self.h1, dtype=complex).reshape(-1)
        h2 = np.asarray(self.h2, dtype=complex).reshape(-1)
        object.__setattr__(self, 'h1', h1)
        object.__setattr__(self, 'h2', h2)
        if h1.shape != h2.shape:
            raise ValueError(f"h1 and h2 differ in length ({h1.size} vs {h2.size})")
        if h1.size < 2:
            raise ValueError("the relay needs at least 2 antennas")
        if not (np.all(np.isfinite(h1)) and np.all(np.isfinite(h2))):
            raise ValueError("channel vectors must be finite")
        if not np.any(h1) or not np.any(h2):
            raise ValueError("channel vectors must be nonzero")
        for name in ('p1', 'p2', 'sigma_r2', 'sigma1_2', 'sigma2_2', 'gamma1', 'gamma2'):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be positive and finite, got {value}")

    @property
    def M(self) -> int:
        return self.h1.size

    def channel(self, i: int) -> np.ndarray:
        return _pick(i, self.h1, self.h2)

    def power(self, i: int) -> float:
        return _pick(i, self.p1, self.p2)

    def noise(self, i: int) -> float:
        return _pick(i, self.sigma1_2, self.sigma2_2)

    def gamma(self, i: int) -> float:
        return _pick(i, self.gamma1, self.gamma2)


def _pick(i: int, first, second):
    if i == 1:
        return first
    if i == 2:
        return second
    raise ValueError(f"terminal index must be 1 or 2, got {i}")


def _check_shape(A: np.ndarray, prob: PhysicalProblem) -> np.ndarray:
    A = np.asarray(A, dtype=complex)
    if A.shape != (prob.M, prob.M):
        raise ValueError(f"beamforming matrix must be {prob.M}x{prob.M}, got {A.shape}")
    return A


def relay_power(A: np.ndarray, prob: PhysicalProblem) -> float:
    """||A h1||^2 p1 + ||A h2||^2 p2 + Tr[A^H A] sigma_R^2."""
    A = _check_shape(A, prob)
    return float(
        np.sum(np.abs(A @ prob.h1) ** 2) * prob.p1
        + np.sum(np.abs(A @ prob.h2) ** 2) * prob.p2
        + np.sum(np.abs(A) ** 2) * prob.sigma_r2
    )


def _signal_and_noise(i: int, A: np.ndarray, prob: PhysicalProblem):
    A = _check_shape(A, prob)
    k = 3 - i
    hi, hk = prob.channel(i), prob.channel(k)
    # h_i^T A h_k (reciprocal channels, plain transpose)
    signal = np.abs(hi @ A @ hk) ** 2 * prob.power(k)
    forwarded_noise = np.sum(np.abs(hi @ A) ** 2) * prob.sigma_r2
    return float(signal), float(forwarded_noise)


def sinr(i: int, A: np.ndarray, prob: PhysicalProblem) -> float:
    """SINR at terminal i after self-interference cancellation."""
    signal, forwarded_noise = _signal_and_noise(i, A, prob)
    return signal / (forwarded_noise + prob.noise(i))


def constraint_margin(i: int, A: np.ndarray, prob: PhysicalProblem) -> float:
    """f_i(A) - gamma_i sigma_i^2; nonnegative exactly when SINR_i >= gamma_i."""
    signal, forwarded_noise = _signal_and_noise(i, A, prob)
    return signal - forwarded_noise * prob.gamma(i) - prob.gamma(i) * prob.noise(i)


def sinr_ceiling(i: int, prob: PhysicalProblem) -> float:
    """Supremum of SINR_i over all A: p_k ||h_k||^2 / sigma_R^2."""
    k = 3 - i
    return float(prob.power(k) * np.sum(np.abs(prob.channel(k)) ** 2) / prob.sigma_r2)


def db_to_linear(value_db: float) -> float:
    return float(10.0 ** (value_db / 10.0))


def linear_to_db(value: float) -> float:
    return float(10.0 * np.log10(value))


def random_channels(
    seed: Union[int, np.random.SeedSequence, None],
    M: int,
    scale1: float = 1.0,
    scale2: float = 1.0,
    rng: Optional[np.random.Generator] = None,
    **params
) -> PhysicalProblem:
    """Draw a Rayleigh-fading instance.

    Entries of h1, h2 are i.i.d. circularly symmetric complex Gaussian with
    variance scale_i (unit by default).

    Args:
        seed: Seed of a fresh generator; ignored when rng is given
        M: Relay antenna count
        scale1, scale2: Per-link variance
        rng: Caller-owned generator, for batch streams
        **params: Remaining PhysicalProblem fields (p1, gamma1, ...)

    Returns:
        PhysicalProblem
    """
    if M < 2:
        raise ValueError("the relay needs at least 2 antennas")
    rng = rng if rng is not None else np.random.default_rng(seed)

    def draw(scale: float) -> np.ndarray:
        re = rng.standard_normal(M)
        im = rng.standard_normal(M)
        return np.sqrt(scale / 2.0) * (re + 1j * im)

    h1 = draw(scale1)
    h2 = draw(scale2)
    return PhysicalProblem(h1=h1, h2=h2, **params)
