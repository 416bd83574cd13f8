"""Turning a complex feasible point into a real one with the same power.

A complex reduced beamformer ``x + j y`` meets both constraints with
equality when ``x^T Q_i x + y^T Q_i y = 1``. Every real combination
``v = g_x x + g_y y`` has

    v^T Q_i v = g_x^2 A_i + 2 g_x g_y C_i + g_y^2 B_i

with ``(A_i, B_i, C_i) = (x^T Q_i x, y^T Q_i y, x^T Q_i y)``, so looking for
a real point is looking for an intersection of two conics in the
``(g_x, g_y)`` plane. Writing ``(g_x, g_y) = rho (cos phi, sin phi)``, the
conics meet where ``q_1(phi) = q_2(phi) > 0``.
"""

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from model.reduction import ReducedProblem
from utils import get_logger
from utils.errors import NoIntersectionFound, NotOnConstraintSurface

logger = get_logger("Realification")

# Largest |x^T Q x + y^T Q y - 1| accepted as "on the constraint surface".
SURFACE_TOL = 1e-8
# A form value counts as strictly inside (0, 1) beyond this margin.
CASE_TOL = 1e-10
VERIFY_TOL = 1e-8
MAX_BISECTIONS = 60


@dataclass(frozen=True, eq=False)
class ComplexCandidate:
    """Complex 2x2 reduced beamformer split as x + j y (row-major 4-vectors)."""
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).reshape(-1)
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if x.shape != (4,) or y.shape != (4,):
            raise ValueError(f"x and y must be 4-vectors, got {x.shape} and {y.shape}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("complex candidate must be finite")
        object.__setattr__(self, 'x', x)
        object.__setattr__(self, 'y', y)

    @classmethod
    def from_complex(cls, a: np.ndarray) -> 'ComplexCandidate':
        a = np.asarray(a, dtype=complex).reshape(-1)
        return cls(x=a.real.copy(), y=a.imag.copy())

    def as_complex(self) -> np.ndarray:
        return self.x + 1j * self.y

    def power(self, M: np.ndarray) -> float:
        return float(self.x @ M @ self.x + self.y @ M @ self.y)


@dataclass
class RealificationResult:
    """Real point plus how it was found.

    Attributes:
        v: Real 4-vector g_x x + g_y y
        case: 'A', 'B', 'C' or 'X' (classification of the input)
        theta: Phase rotation applied before the intersection search
        gamma_x, gamma_y: Coefficients of v on the original x and y
    """
    v: np.ndarray
    case: str
    theta: float
    gamma_x: float
    gamma_y: float


def rotate(cand: ComplexCandidate, theta: float) -> ComplexCandidate:
    """Multiply the complex point by exp(j theta)."""
    c, s = np.cos(theta), np.sin(theta)
    return ComplexCandidate(x=c * cand.x - s * cand.y, y=s * cand.x + c * cand.y)


def _forms(Q: np.ndarray, cand: ComplexCandidate) -> Tuple[float, float, float]:
    return (
        float(cand.x @ Q @ cand.x),
        float(cand.y @ Q @ cand.y),
        float(cand.x @ Q @ cand.y),
    )


def _directional(forms: Tuple[float, float, float], phi: float) -> float:
    A, B, C = forms
    c, s = np.cos(phi), np.sin(phi)
    return A * c * c + 2.0 * C * c * s + B * s * s


def _constraint_matrices(red: ReducedProblem, w: float) -> Tuple[np.ndarray, np.ndarray]:
    return red.constraint_matrix(1, w), red.constraint_matrix(2, w)


def _inside(value: float) -> bool:
    return CASE_TOL < value < 1.0 - CASE_TOL


def classify_case(cand: ComplexCandidate, red: ReducedProblem, w: float = 1.0) -> str:
    """Which of the three configurations the candidate is in.

    'A': x^T Q_i x lies in (0, 1) for both constraints.
    'B': it does for exactly one constraint.
    'C': for neither, with x favouring one constraint and y the other.
    'X': x or y alone already meets both constraints; a valid optimum never
         lands here since that component would need less power.
    """
    Q1, Q2 = _constraint_matrices(red, w)
    A1, B1, _ = _forms(Q1, cand)
    A2, B2, _ = _forms(Q2, cand)
    if (A1 >= 1.0 and A2 >= 1.0) or (B1 >= 1.0 and B2 >= 1.0):
        return 'X'
    inside = _inside(A1) + _inside(A2)
    if inside == 2:
        return 'A'
    if inside == 1:
        return 'B'
    return 'C'


def _check_surface(cand: ComplexCandidate, Qs, indices) -> None:
    for i in indices:
        A, B, _ = _forms(Qs[i - 1], cand)
        if abs(A + B - 1.0) > SURFACE_TOL:
            raise NotOnConstraintSurface(
                f"constraint {i}: x^T Q x + y^T Q y = {A + B:.12g}, expected 1"
            )


def _case_c_angle(cand: ComplexCandidate, Q1: np.ndarray) -> float:
    """Bisect for a phase at which x^T Q_1 x lies strictly inside (0, 1)."""
    def g(theta: float) -> float:
        return _forms(Q1, rotate(cand, theta))[0]

    lo, hi = 0.0, np.pi / 2.0
    # g(0) and g(pi/2) = 1 - g(0) straddle 1/2
    high_at_lo = g(lo) > 0.5
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        value = g(mid)
        if _inside(value):
            return mid
        if (value > 0.5) == high_at_lo:
            lo = mid
        else:
            hi = mid
    raise NoIntersectionFound("case C phase search did not reach the interior of (0, 1)")


def _equal_form_angle(f1, f2) -> Optional[float]:
    """Angle in [0, pi) with q_1 = q_2 > 0, preferring the largest q_1.

    The difference q_1(phi) - q_2(phi) = alpha + R cos(2 phi - psi) with
    alpha = (dA + dB)/2, R = |((dA - dB)/2, dC)|. On both constraint surfaces
    dA + dB = 0, so alpha is at most the surface residue and the two roots are
    a quarter turn apart; since q_1(phi) + q_1(phi + pi/2) = A_1 + B_1 = 1, one
    of them has q_1 >= 1/2. When R <= |alpha| the forms agree up to that
    residue everywhere and the maximiser of q_1 is used.
    """
    dA, dB, dC = (u - v for u, v in zip(f1, f2))
    alpha = 0.5 * (dA + dB)
    beta = 0.5 * (dA - dB)
    R = float(np.hypot(beta, dC))
    if R <= abs(alpha):
        A, B, C = f1
        candidates = [0.5 * np.arctan2(2.0 * C, A - B)]
    else:
        psi = np.arctan2(dC, beta)
        delta = np.arccos(-alpha / R)
        candidates = [0.5 * (psi + delta), 0.5 * (psi - delta)]
    candidates = [float(np.mod(phi, np.pi)) for phi in candidates]
    positive = [phi for phi in candidates if _directional(f1, phi) > 0.0]
    if not positive:
        return None
    return max(positive, key=lambda phi: _directional(f1, phi))


def realify_detailed(cand: ComplexCandidate, red: ReducedProblem, w: float = 1.0) -> RealificationResult:
    """realify, also reporting the case, the rotation and the coefficients."""
    Qs = _constraint_matrices(red, w)
    _check_surface(cand, Qs, (1, 2))

    for comp, gx, gy in ((cand.x, 1.0, 0.0), (cand.y, 0.0, 1.0)):
        if all(abs(float(comp @ Q @ comp) - 1.0) <= VERIFY_TOL for Q in Qs):
            return RealificationResult(v=comp.copy(), case=classify_case(cand, red, w), theta=0.0,
                                       gamma_x=gx, gamma_y=gy)

    case = classify_case(cand, red, w)
    if case == 'X':
        logger.warning("one component of the complex point already meets both constraints; "
                       "the input cannot be a power minimizer")

    theta = 0.0
    work = cand
    if case == 'C':
        theta = _case_c_angle(cand, Qs[0])
        work = rotate(cand, theta)
        logger.debug(f"case C rotated by theta={theta:.6g} into case {classify_case(work, red, w)}")

    f1, f2 = _forms(Qs[0], work), _forms(Qs[1], work)
    phi = _equal_form_angle(f1, f2)
    if phi is None:
        raise NoIntersectionFound(f"no crossing of the constraint conics found (case {case})")

    rho = _directional(f1, phi) ** -0.5
    v = rho * (np.cos(phi) * work.x + np.sin(phi) * work.y)
    for i, Q in enumerate(Qs, start=1):
        value = float(v @ Q @ v)
        if abs(value - 1.0) > VERIFY_TOL:
            raise NoIntersectionFound(f"constraint {i} evaluates to {value:.12g} at the crossing point")

    return RealificationResult(
        v=v, case=case, theta=theta,
        gamma_x=float(rho * np.cos(phi - theta)),
        gamma_y=float(rho * np.sin(phi - theta)),
    )


def realify(cand: ComplexCandidate, red: ReducedProblem, w: float = 1.0) -> np.ndarray:
    """Real point g_x x + g_y y meeting both constraints with equality.

    Args:
        cand: Complex point with x^T Q_i x + y^T Q_i y = 1 for i = 1, 2
        red: Reduced instance
        w: Homotopy parameter of the constraints

    Returns:
        Real 4-vector; its power equals the input power when the input is a KKT point

    Raises:
        NotOnConstraintSurface: Input does not meet both constraints with equality
        NoIntersectionFound: Root finding failed
    """
    return realify_detailed(cand, red, w).v


def _active_conic(lam_pos: float, lam_neg: float, e_pos: np.ndarray,
                  e_neg: np.ndarray) -> Tuple[Callable[[float], np.ndarray], bool]:
    """Parameterisation t -> g of the active conic g^T S g = 1, and whether it is closed."""
    if lam_neg > 1e-12 * lam_pos:
        # ellipse
        return (lambda t: np.cos(t) * e_pos / np.sqrt(lam_pos)
                + np.sin(t) * e_neg / np.sqrt(lam_neg)), True
    if lam_neg < -1e-12 * lam_pos:
        # hyperbola branch through e_pos
        return (lambda t: np.cosh(t) * e_pos / np.sqrt(lam_pos)
                + np.sinh(t) * e_neg / np.sqrt(-lam_neg)), False
    # pair of parallel lines
    return (lambda t: e_pos / np.sqrt(lam_pos) + t * e_neg), False


def _ellipse_peak(residual: Callable[[float], float]) -> float:
    """Maximiser of residual(t) = C + alpha cos 2t + beta sin 2t on [0, pi)."""
    r0, r45, r90 = residual(0.0), residual(np.pi / 4.0), residual(np.pi / 2.0)
    mean = 0.5 * (r0 + r90)
    return float(np.mod(0.5 * np.arctan2(r45 - mean, 0.5 * (r0 - r90)), np.pi))


def _crossing(residual: Callable[[float], float], lo: float, hi: float,
              peak: Optional[float] = None) -> Optional[float]:
    """Parameter nearest to 0 in [lo, hi] where the residual reaches 0, if any.

    Off the ellipse the residual is monotone, convex or concave in t, so a
    bounded scalar maximisation plus the two ends finds its peak.
    """
    if residual(0.0) >= 0.0:
        return 0.0
    if peak is None:
        result = minimize_scalar(lambda t: -residual(t), bounds=(lo, hi), method='bounded',
                                 options={'xatol': 1e-12})
        peak = max((float(result.x), lo, hi), key=residual)
    if residual(peak) < 0.0:
        return None
    left, right = sorted((0.0, peak))
    return float(brentq(residual, left, right, xtol=1e-15))


def realify_single_active(cand: ComplexCandidate, red: ReducedProblem, active_i: int,
                          w: float = 1.0, max_param: float = 32.0) -> np.ndarray:
    """Real point for a complex point with only one active constraint.

    The active constraint is met with equality and the other with inequality.
    A single component is rescaled when that already works; otherwise the
    active conic in the (g_x, g_y) plane is parameterised (angle on an
    ellipse, branch parameter on a hyperbola) and the other constraint's
    residual is root-found on a bracket that doubles up to max_param.

    Args:
        cand: Complex point, active constraint equal to 1, the other above 1
        red: Reduced instance
        active_i: Index of the active constraint (1 or 2)
        w: Homotopy parameter of the constraints
        max_param: Largest branch parameter tried on an unbounded conic

    Returns:
        Real 4-vector

    Raises:
        NotOnConstraintSurface: Active constraint not tight or the other not strict
        NoIntersectionFound: No admissible point within the search range
    """
    if active_i not in (1, 2):
        raise ValueError(f"active_i must be 1 or 2, got {active_i}")
    Qs = _constraint_matrices(red, w)
    Qa, Qo = Qs[active_i - 1], Qs[2 - active_i]
    _check_surface(cand, Qs, (active_i,))
    Aa, Ba, Ca = _forms(Qa, cand)
    Ao, Bo, Co = _forms(Qo, cand)
    if Ao + Bo <= 1.0 + CASE_TOL:
        raise NotOnConstraintSurface(
            f"constraint {3 - active_i} is not strictly satisfied ({Ao + Bo:.12g})"
        )

    # larger active form first
    components = sorted([(Aa, Ao, cand.x), (Ba, Bo, cand.y)], key=lambda c: -c[0])
    for form_a, form_o, comp in components:
        if form_a > CASE_TOL and form_o >= form_a:
            return comp / np.sqrt(form_a)

    S = np.array([[Aa, Ca], [Ca, Ba]])
    T = np.array([[Ao, Co], [Co, Bo]])
    eigvals, eigvecs = np.linalg.eigh(S)
    lam_neg, lam_pos = float(eigvals[0]), float(eigvals[1])
    if lam_pos <= 0.0:
        raise NoIntersectionFound("active form has no positive direction")

    conic, closed = _active_conic(lam_pos, lam_neg, eigvecs[:, 1], eigvecs[:, 0])

    def residual(t: float) -> float:
        g = conic(t)
        return float(g @ T @ g) - 1.0

    if closed:
        # g(t + pi) = -g(t)
        t = _crossing(residual, 0.0, np.pi, peak=_ellipse_peak(residual))
    else:
        t, bound = None, 0.125
        while t is None and bound <= max_param:
            t = _crossing(residual, -bound, bound)
            bound *= 2.0

    if t is None:
        raise NoIntersectionFound(
            f"no point of the active conic meets constraint {3 - active_i} (|t| <= {max_param})"
        )
    g = conic(t)
    v = g[0] * cand.x + g[1] * cand.y
    v = v / np.sqrt(float(v @ Qa @ v))
    if float(v @ Qo @ v) < 1.0 - VERIFY_TOL:
        raise NoIntersectionFound(f"constraint {3 - active_i} evaluates to {float(v @ Qo @ v):.12g}")
    return v
