"""Continuation in w from the d=0 optimum to the full problem.

Along w the KKT point (a, lambda1, lambda2) with both constraints active
solves the 6x6 linear system::

    [ sum_i lambda_i Q_i - M   Q_1 a   Q_2 a ] [ a'       ]   [ sum_i lambda_i d_i D_i a ]
    [ (Q_1 a)^T                0       0     ] [ lambda1' ] = [ (d1/2) a^T D_1 a         ]
    [ (Q_2 a)^T                0       0     ] [ lambda2' ]   [ (d2/2) a^T D_2 a         ]

with Q_i = Q_i^(w) and D_i = tilde(tau_ii). The path is integrated with
classical RK4 and every step is pulled back onto the KKT manifold by Newton.
"""

from typing import List, Optional, Tuple

import numpy as np

from config import SolverConfig
from model.physical import PhysicalProblem, relay_power, sinr
from model.reduction import ReducedProblem, lift, reduced_feasibility_margin
from utils.errors import (
    BranchFailed,
    CorrectionDiverged,
    InfeasibleInstance,
    NoFeasibleBranch,
    OracleNoFeasiblePoint,
    SingularSystem,
)

from .base_solver import BaseSolver
from .report import BranchOutcome, HomotopyState, PathDiagnostics, SolveReport
from .zero_solver import ZeroCandidate, ZeroSolver


class HomotopySolver(BaseSolver):
    """Runge-Kutta continuation of both d=0 candidates to w=1."""

    def __init__(self, red: ReducedProblem, config: Optional[SolverConfig] = None):
        super().__init__(name="HomotopySolver", red=red, config=config)
        self.start_abs_det = float('nan')

    # ------------------------------------------------------------------
    # Vector field
    # ------------------------------------------------------------------

    def kkt_matrix(self, s: HomotopyState) -> np.ndarray:
        """Symmetric 6x6 matrix of the differentiated KKT system."""
        Q1, Q2 = self.Q_pair(s.w)
        q1a = Q1 @ s.a
        q2a = Q2 @ s.a
        K = np.zeros((6, 6))
        K[:4, :4] = s.lambda1 * Q1 + s.lambda2 * Q2 - self.M
        K[:4, 4] = q1a
        K[:4, 5] = q2a
        K[4, :4] = q1a
        K[5, :4] = q2a
        return K

    def ode_rhs(self, s: HomotopyState) -> Tuple[np.ndarray, float, float]:
        """(da/dw, dlambda1/dw, dlambda2/dw) at s.

        Raises:
            SingularSystem: The 6x6 matrix is singular (e.g. a = 0)
        """
        a = s.a
        d1a = self.D(1) @ a
        d2a = self.D(2) @ a
        rhs = np.concatenate([
            s.lambda1 * d1a + s.lambda2 * d2a,
            [0.5 * (a @ d1a), 0.5 * (a @ d2a)],
        ])
        deriv = self.solve_dense(self.kkt_matrix(s), rhs, s.w, "6x6 KKT")
        return deriv[:4], float(deriv[4]), float(deriv[5])

    def _field(self, w: float, y: np.ndarray) -> np.ndarray:
        da, dl1, dl2 = self.ode_rhs(HomotopyState.from_vector(y, w))
        return np.concatenate([da, [dl1, dl2]])

    def rk4_step(self, s: HomotopyState, h: float) -> HomotopyState:
        """One classical fourth-order Runge-Kutta step of width h."""
        y, w = s.as_vector(), s.w
        k1 = self._field(w, y)
        # k1 factored the KKT matrix at s itself
        self.start_abs_det = self.last_abs_det
        k2 = self._field(w + 0.5 * h, y + 0.5 * h * k1)
        k3 = self._field(w + 0.5 * h, y + 0.5 * h * k2)
        k4 = self._field(w + h, y + h * k3)
        return HomotopyState.from_vector(y + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0, w + h)

    # ------------------------------------------------------------------
    # Corrector
    # ------------------------------------------------------------------

    def residual(self, s: HomotopyState) -> np.ndarray:
        """Stationarity (4 rows) and constraint defects (2 rows)."""
        f1, f2 = self.constraint_values(s.a, s.w)
        return np.concatenate([
            self.stationarity_defect(s.a, s.lambda1, s.lambda2, s.w),
            [f1 - 1.0, f2 - 1.0],
        ])

    def residual_norm(self, s: HomotopyState) -> float:
        """max(relative stationarity defect, largest constraint defect)."""
        F = self.residual(s)
        scale = max(float(np.linalg.norm(self.M @ s.a)), 1e-300)
        return max(float(np.linalg.norm(F[:4])) / scale, float(np.max(np.abs(F[4:]))))

    def newton_matrix(self, s: HomotopyState) -> np.ndarray:
        """Jacobian of residual() in (a, lambda1, lambda2)::

            [ M - sum_i lambda_i Q_i   -Q_1 a   -Q_2 a ]
            [ 2 (Q_1 a)^T               0        0     ]
            [ 2 (Q_2 a)^T               0        0     ]
        """
        K = self.kkt_matrix(s)
        J = -K
        J[4:, :4] = 2.0 * K[4:, :4]
        return J

    def newton_step(self, s: HomotopyState) -> HomotopyState:
        """One Newton update of s at fixed w."""
        delta = self.solve_dense(self.newton_matrix(s), -self.residual(s), s.w, "Newton")
        return HomotopyState.from_vector(s.as_vector() + delta, s.w)

    def newton_correct(self, s: HomotopyState, diagnostics: Optional[PathDiagnostics] = None) -> HomotopyState:
        """Newton iterations at fixed w until the residual drops below corr_tol.

        Raises:
            CorrectionDiverged: Tolerance not reached within max_newton iterations
        """
        state = HomotopyState(a=s.a.copy(), lambda1=s.lambda1, lambda2=s.lambda2, w=s.w)
        norm = self.residual_norm(state)
        for _ in range(self.config.max_newton):
            if norm <= self.config.corr_tol:
                break
            if not np.isfinite(norm):
                raise CorrectionDiverged(f"residual became non-finite at w={s.w:.6g}", norm)
            state = self.newton_step(state)
            norm = self.residual_norm(state)
            if diagnostics is not None:
                diagnostics.newton_iterations += 1
        if norm > self.config.corr_tol:
            raise CorrectionDiverged(
                f"Newton correction stalled at w={s.w:.6g} (residual {norm:.3e})", norm
            )
        if diagnostics is not None:
            moved = float(np.linalg.norm(state.as_vector() - s.as_vector()))
            diagnostics.max_correction = max(diagnostics.max_correction, moved)
        return state

    # ------------------------------------------------------------------
    # Branches
    # ------------------------------------------------------------------

    def _record(self, s: HomotopyState, diagnostics: PathDiagnostics) -> None:
        f1, f2 = self.constraint_values(s.a, s.w)
        stationarity = float(np.linalg.norm(self.stationarity_defect(s.a, s.lambda1, s.lambda2, s.w)))
        scale = max(float(np.linalg.norm(self.M @ s.a)), 1e-300)
        diagnostics.max_constraint_defect = max(diagnostics.max_constraint_defect, abs(f1 - 1.0), abs(f2 - 1.0))
        diagnostics.max_stationarity_defect = max(diagnostics.max_stationarity_defect, stationarity / scale)
        diagnostics.power_trace.append((s.w, self.power(s.a), s.lambda1, s.lambda2))

    def integrate_branch(self, start: ZeroCandidate,
                         diagnostics: Optional[PathDiagnostics] = None) -> Tuple[HomotopyState, PathDiagnostics]:
        """Follow one d=0 candidate from w=0 to w=1.

        Args:
            start: Closed-form candidate with bootstrapped multipliers
            diagnostics: Record to fill in; survives a failed branch

        Returns:
            Tuple of (state at w=1, diagnostics)

        Raises:
            BranchFailed: Singular system, diverging correction, or a multiplier
                below -lambda_tol after correction
        """
        cfg = self.config
        diagnostics = diagnostics if diagnostics is not None else PathDiagnostics()
        state = HomotopyState(a=start.a.copy(), lambda1=start.lambda1, lambda2=start.lambda2, w=0.0)
        if start.negative_multiplier:
            self.logger.warning(
                f"branch {start.sign_choice:+d} starts with a negative multiplier; attempting anyway"
            )
        self._record(state, diagnostics)

        nominal = 1.0 / cfg.steps
        h = nominal
        halvings = 0
        while state.w < 1.0:
            h = min(h, 1.0 - state.w)
            try:
                candidate = self.rk4_step(state, h)
                diagnostics.min_abs_det = min(diagnostics.min_abs_det, self.start_abs_det)
                if 1.0 - candidate.w < 1e-12:
                    candidate.w = 1.0
                if cfg.newton_correction:
                    candidate = self.newton_correct(candidate, diagnostics)
            except (SingularSystem, CorrectionDiverged) as e:
                halvings += 1
                diagnostics.step_halvings += 1
                if halvings > cfg.max_step_halvings:
                    reason = 'singular' if isinstance(e, SingularSystem) else 'correction'
                    raise BranchFailed(
                        f"branch {start.sign_choice:+d} failed at w={state.w:.6g}: {e}", state.w, reason, state
                    ) from e
                self.logger.debug(f"step at w={state.w:.6g} failed ({e}); halving to h={h / 2:.3e}")
                h /= 2.0
                continue

            if min(candidate.lambda1, candidate.lambda2) < -cfg.lambda_tol:
                diagnostics.lambda_violations += 1
                raise BranchFailed(
                    f"branch {start.sign_choice:+d} left the both-active regime at w={candidate.w:.6g} "
                    f"(lambda=({candidate.lambda1:.3e}, {candidate.lambda2:.3e}))",
                    candidate.w, 'negative multiplier', state,
                )

            state = candidate
            diagnostics.steps += 1
            self._record(state, diagnostics)
            h = nominal
            halvings = 0

        return state, diagnostics

    def run_branch(self, start: ZeroCandidate) -> BranchOutcome:
        """integrate_branch with failures captured in the outcome."""
        outcome = BranchOutcome(
            sign_choice=start.sign_choice,
            status='failed',
            start_power=start.power,
            start_negative_multiplier=start.negative_multiplier,
        )
        try:
            state, _ = self.integrate_branch(start, outcome.diagnostics)
        except BranchFailed as e:
            self.logger.warning(str(e))
            outcome.reason = e.reason
            outcome.state = e.last_state
            return outcome
        f1, f2 = self.constraint_values(state.a, 1.0)
        if min(f1, f2) < 1.0 - 1e-6:
            outcome.reason = 'infeasible endpoint'
            return outcome
        outcome.status = 'ok'
        outcome.state = state
        outcome.power = self.power(state.a)
        return outcome

    def kkt_residual(self, s: HomotopyState) -> float:
        defect = self.stationarity_defect(s.a, s.lambda1, s.lambda2, s.w)
        return float(np.linalg.norm(defect)) / max(float(np.linalg.norm(self.M @ s.a)), 1e-300)

    # ------------------------------------------------------------------
    # Full solve
    # ------------------------------------------------------------------

    def _feasibility_precheck(self) -> bool:
        ok = True
        for i in (1, 2):
            margin = reduced_feasibility_margin(i, self.red)
            if margin <= 0:
                self.logger.warning(
                    f"constraint {i}: c_i ||tau_k||^2 - d_i = {margin:.3e} <= 0; "
                    "the SINR target exceeds what any beamformer can reach"
                )
                ok = False
        return ok

    def _oracle(self, hints: Optional[List[np.ndarray]] = None):
        # deferred: the reference optimizer is only needed on fallback and verify
        from .oracle import oracle_minimize
        return oracle_minimize(
            self.red, w=1.0, seed=self.config.oracle_seed,
            n_starts=self.config.oracle_starts, hints=hints,
        )

    def solve(self, prob: Optional[PhysicalProblem] = None) -> SolveReport:
        """Integrate both branches and keep the feasible endpoint of least power.

        Args:
            prob: Physical instance behind the reduced one; enables the lifted
                beamformer, physical power and SINR in the report

        Returns:
            SolveReport

        Raises:
            InfeasibleInstance: Pre-check fails and the oracle finds no feasible point
            NoFeasibleBranch: Both branches failed; the error carries a fallback report
        """
        if not self._feasibility_precheck():
            try:
                self._oracle()
            except OracleNoFeasiblePoint as e:
                raise InfeasibleInstance(
                    "SINR targets are unreachable: some c_i ||tau_k||^2 - d_i <= 0"
                ) from e
            self.logger.warning("oracle found a feasible point despite the pre-check; continuing")

        candidates = ZeroSolver(self.red, self.config).solve()
        outcomes = [self.run_branch(start) for start in candidates]
        succeeded = [o for o in outcomes if o.ok]

        if not succeeded:
            report = self._fallback_report(outcomes, candidates)
            self._attach_physical(report, prob)
            raise NoFeasibleBranch("both continuation branches failed", report=report)

        best = min(succeeded, key=lambda o: o.power)
        state = best.state
        report = SolveReport(
            a=state.a,
            power=best.power,
            lambda1=state.lambda1,
            lambda2=state.lambda2,
            constraint_values=self.constraint_values(state.a, 1.0),
            kkt_residual=self.kkt_residual(state),
            branch=best.sign_choice,
            status='ok',
            branches=outcomes,
        )
        if self.config.verify:
            report.oracle_power = self._oracle(hints=[state.a]).power
        self._attach_physical(report, prob)
        self.logger.info(
            f"solved: branch {best.sign_choice:+d}, power {best.power:.10g}, "
            f"lambda=({state.lambda1:.6g}, {state.lambda2:.6g})"
        )
        return report

    def _fallback_report(self, outcomes: List[BranchOutcome], candidates) -> SolveReport:
        self.logger.warning("both branches failed; falling back to the reference optimizer")
        hints = [c.a / np.sqrt(min(self.constraint_values(c.a, 1.0))) for c in candidates
                 if min(self.constraint_values(c.a, 1.0)) > 0]
        try:
            result = self._oracle(hints=hints or None)
        except OracleNoFeasiblePoint as e:
            raise InfeasibleInstance("no feasible beamformer found by continuation or oracle") from e
        reached = [o.state for o in outcomes if o.state is not None]
        return SolveReport(
            a=result.a,
            power=result.power,
            lambda1=None,
            lambda2=None,
            constraint_values=self.constraint_values(result.a, 1.0),
            kkt_residual=None,
            branch='oracle',
            status='fallback',
            branches=outcomes,
            oracle_power=result.power,
            last_good=max(reached, key=lambda s: s.w) if reached else None,
        )

    def _attach_physical(self, report: SolveReport, prob: Optional[PhysicalProblem]) -> None:
        if prob is None or self.red.lift is None:
            return
        A = lift(report.a, self.red)
        report.beamformer = A
        report.physical_power = relay_power(A, prob)
        report.sinr = (sinr(1, A, prob), sinr(2, A, prob))


def ode_rhs(s: HomotopyState, red: ReducedProblem) -> Tuple[np.ndarray, float, float]:
    return HomotopySolver(red).ode_rhs(s)


def integrate_branch(start: ZeroCandidate, red: ReducedProblem,
                     cfg: Optional[SolverConfig] = None) -> Tuple[HomotopyState, PathDiagnostics]:
    return HomotopySolver(red, cfg).integrate_branch(start)


def newton_correct(s: HomotopyState, red: ReducedProblem,
                   cfg: Optional[SolverConfig] = None) -> HomotopyState:
    return HomotopySolver(red, cfg).newton_correct(s)


def solve(red: ReducedProblem, cfg: Optional[SolverConfig] = None,
          prob: Optional[PhysicalProblem] = None) -> SolveReport:
    """Minimum-power beamformer of a reduced instance (see HomotopySolver.solve)."""
    return HomotopySolver(red, cfg).solve(prob)
