"""Pipeline behind every subcommand: reduce, solve, batch and verify."""

import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import Settings, SolverConfig
from model.physical import PhysicalProblem, db_to_linear, random_channels, sinr
from model.reduction import ReducedProblem, reduce
from solvers.homotopy_solver import HomotopySolver
from solvers.oracle import CheckItem, CheckSummary, CheckTolerances, check_solution
from solvers.realification import ComplexCandidate, realify_detailed, realify_single_active
from solvers.report import SolveReport
from utils import get_logger
from utils.errors import BeamformingError, InstanceParseError, NoFeasibleBranch
from utils.serialization import InstanceFile, ResultRecord, SolutionFile, instance_to_dict

# Radially normalised complex solutions count as doubly active within this margin.
ACTIVE_TOL = 1e-8


def parse_gamma_sweep(spec: str) -> List[float]:
    """Comma-separated SINR targets, linear or with a 'dB' suffix.

    Args:
        spec: e.g. "1,2,4" or "0dB,3dB,6dB"

    Returns:
        Linear targets in the given order

    Raises:
        InstanceParseError: Empty item, non-number or non-positive target
    """
    values = []
    for item in spec.split(','):
        text = item.strip()
        if not text:
            raise InstanceParseError(f"empty entry in gamma sweep {spec!r}", field='gamma')
        in_db = text.lower().endswith('db')
        try:
            number = float(text[:-2] if in_db else text)
        except ValueError as e:
            raise InstanceParseError(f"cannot read {text!r} as a number", field='gamma') from e
        value = db_to_linear(number) if in_db else number
        if not np.isfinite(value) or value <= 0:
            raise InstanceParseError(f"SINR target must be positive, got {text!r}", field='gamma')
        values.append(value)
    return values


class BeamformingOrchestrator:
    """Runs instances through reduction, continuation, lifting and checks."""

    def __init__(self, overrides: Optional[Dict[str, Any]] = None):
        """Initialize the orchestrator.

        Args:
            overrides: Solver options from the command line; they win over
                instance-file solver blocks
        """
        Settings.validate()
        self.overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
        SolverConfig().with_overrides(self.overrides)
        self.logger = get_logger("Orchestrator")
        self.logger.debug(f"Orchestrator initialized (overrides: {self.overrides or 'none'})")

    def config_for(self, inst: Optional[InstanceFile] = None) -> SolverConfig:
        """Defaults, then the instance's solver block, then command-line overrides."""
        base = SolverConfig()
        if inst is not None and inst.solver:
            try:
                base = base.with_overrides(inst.solver)
            except (TypeError, ValueError) as e:
                raise InstanceParseError(str(e), field='solver') from e
        return base.with_overrides(self.overrides)

    # ------------------------------------------------------------------
    # reduce
    # ------------------------------------------------------------------

    def reduce_instance(self, inst: InstanceFile, cfg: Optional[SolverConfig] = None) -> ReducedProblem:
        if isinstance(inst.problem, ReducedProblem):
            return inst.problem
        cfg = cfg or self.config_for(inst)
        return reduce(inst.problem, cfg.degeneracy_cond)

    def reduce_to_dict(self, inst: InstanceFile) -> Dict[str, Any]:
        """Reduced instance file (with lift data) for a physical one."""
        red = self.reduce_instance(inst)
        return instance_to_dict(InstanceFile(problem=red, solver=inst.solver, id=inst.id, seed=inst.seed))

    # ------------------------------------------------------------------
    # solve
    # ------------------------------------------------------------------

    def solve_instance(self, inst: InstanceFile) -> Tuple[ResultRecord, SolveReport]:
        """Full pipeline for one instance.

        Returns:
            Tuple of (record, report)

        Raises:
            DegenerateChannels, InfeasibleInstance: As raised by reduction and solver
            NoFeasibleBranch: Both branches failed; ``e.record`` holds the fallback record
        """
        cfg = self.config_for(inst)
        started = time.perf_counter()
        red = self.reduce_instance(inst, cfg)
        prob = inst.problem if isinstance(inst.problem, PhysicalProblem) else None

        self.logger.debug(f"solving {inst.id or 'instance'}: r={red.r:.6g}, steps={cfg.steps}")
        try:
            report = HomotopySolver(red, cfg).solve(prob)
        except NoFeasibleBranch as e:
            e.record = self.build_record(inst, red, e.report, time.perf_counter() - started)
            raise

        record = self.build_record(inst, red, report, time.perf_counter() - started)
        if Settings.VERBOSE:
            self._print_line(f"power {report.power:.10g} on branch {report.branch}")
        return record, report

    def build_record(self, inst: InstanceFile, red: ReducedProblem, report: SolveReport,
                     wall_time: Optional[float] = None) -> ResultRecord:
        prob = inst.problem if isinstance(inst.problem, PhysicalProblem) else None
        f1, f2 = report.constraint_values
        a = np.asarray(report.a)
        record = ResultRecord(
            id=inst.id,
            seed=inst.seed,
            status=report.status,
            branch=str(report.branch),
            gamma1=None if prob is None else prob.gamma1,
            gamma2=None if prob is None else prob.gamma2,
            power=report.power,
            physical_power=report.physical_power,
            f1=f1,
            f2=f2,
            lambda1=report.lambda1,
            lambda2=report.lambda2,
            kkt_residual=report.kkt_residual,
            oracle_power=report.oracle_power,
            oracle_gap=report.oracle_gap,
            wall_time=wall_time,
            a=None if np.iscomplexobj(a) else [float(v) for v in a],
            beamformer=report.beamformer,
            branches=[b.to_dict() for b in report.branches],
            **red.coefficients(),
        )
        if report.sinr is not None:
            record.sinr1, record.sinr2 = report.sinr
        return record

    def failure_record(self, inst: InstanceFile, error: BeamformingError) -> ResultRecord:
        prob = inst.problem if isinstance(inst.problem, PhysicalProblem) else None
        status = {3: 'degenerate', 4: 'infeasible'}.get(error.exit_code, 'failed')
        return ResultRecord(
            id=inst.id, seed=inst.seed, status=status, message=str(error),
            gamma1=None if prob is None else prob.gamma1,
            gamma2=None if prob is None else prob.gamma2,
        )

    def write_trace(self, report: SolveReport, path: Path) -> Path:
        """CSV of (branch, w, power, lambda1, lambda2) along every branch."""
        lines = ['branch,w,power,lambda1,lambda2']
        for outcome in report.branches:
            for w, power, l1, l2 in outcome.diagnostics.power_trace:
                lines.append(f"{outcome.sign_choice:d},{w:.17g},{power:.17g},{l1:.17g},{l2:.17g}")
        path = Path(path)
        path.write_text('\n'.join(lines) + '\n', encoding='utf-8')
        self.logger.info(f"Path trace saved to: {path}")
        return path

    # ------------------------------------------------------------------
    # batch
    # ------------------------------------------------------------------

    def batch(self, seed: int, count: int, M: int, gammas: Sequence[float],
              workers: Optional[int] = None, **params) -> List[Any]:
        """Seeded Monte Carlo sweep over SINR targets.

        Instance idx at every gamma uses the channel draw of
        default_rng([seed, idx]), so all gamma points see the same channels.

        Args:
            seed: Base seed
            count: Instances per gamma point
            M: Relay antennas
            gammas: Linear SINR targets, applied to both terminals
            workers: Worker threads (defaults to Settings.MAX_WORKERS when
                PARALLEL_EXECUTION is on, else 1)
            **params: Further PhysicalProblem fields (p1, sigma_r2, ...)

        Returns:
            ResultRecords in (gamma, idx) order, each gamma followed by its summary dict
        """
        if count < 1:
            raise ValueError("count must be at least 1")
        if workers is None:
            workers = Settings.MAX_WORKERS if Settings.PARALLEL_EXECUTION else 1

        self._print_phase("batch", f"{len(gammas)} gamma points x {count} instances, M={M}")
        jobs = [(g, idx) for g in gammas for idx in range(count)]

        def run(job: Tuple[float, int]) -> ResultRecord:
            gamma, idx = job
            rng = np.random.default_rng([seed, idx])
            inst = InstanceFile(
                problem=random_channels(None, M, rng=rng, gamma1=gamma, gamma2=gamma, **params),
                id=f"{idx}", seed=seed,
            )
            try:
                record, _ = self.solve_instance(inst)
            except NoFeasibleBranch as e:
                record = e.record
                record.message = str(e)
            except BeamformingError as e:
                record = self.failure_record(inst, e)
            return record

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                records = list(pool.map(run, jobs))
        else:
            records = [run(job) for job in jobs]

        rows: List[Any] = []
        for k, gamma in enumerate(gammas):
            block = records[k * count:(k + 1) * count]
            rows.extend(block)
            rows.append(self.summary_row(gamma, block))
        return rows

    @staticmethod
    def summary_row(gamma: float, block: Sequence[ResultRecord]) -> Dict[str, Any]:
        ok = [r for r in block if r.status == 'ok']
        summary: Dict[str, Any] = {
            'id': 'summary', 'status': 'summary', 'gamma1': gamma, 'gamma2': gamma,
            'n_ok': len(ok), 'n_failed': len(block) - len(ok),
        }
        if ok:
            summary['power'] = float(np.mean([r.power for r in ok]))
            physical = [r.physical_power for r in ok if r.physical_power is not None]
            if physical:
                summary['physical_power'] = float(np.mean(physical))
        return summary

    # ------------------------------------------------------------------
    # verify
    # ------------------------------------------------------------------

    def verify(self, inst: InstanceFile, sol: SolutionFile) -> CheckSummary:
        """Check an externally supplied solution.

        Physical M x M solutions are projected onto the reduced space;
        complex reduced solutions are radially normalised and realified first.
        """
        cfg = self.config_for(inst)
        red = self.reduce_instance(inst, cfg)
        prob = inst.problem if isinstance(inst.problem, PhysicalProblem) else None
        self._print_phase("verify", f"{sol.space} solution, {'complex' if sol.is_complex else 'real'}")

        physical_items: List[CheckItem] = []
        b = np.asarray(sol.matrix)
        if sol.space == 'physical':
            if prob is None or red.lift is None:
                raise InstanceParseError("physical solutions need a physical instance", field='space')
            if b.shape != (prob.M, prob.M):
                raise InstanceParseError(f"matrix must be {prob.M}x{prob.M}, got {b.shape}", field='matrix')
            for i in (1, 2):
                achieved = sinr(i, b, prob)
                physical_items.append(CheckItem(
                    f"sinr_{i}", achieved >= prob.gamma(i) * (1.0 - 1e-6), achieved, prob.gamma(i)
                ))
            b = np.linalg.pinv(red.lift.left) @ b @ np.linalg.pinv(red.lift.right)
            if not np.any(np.abs(b.imag) > 1e-12 * max(np.max(np.abs(b)), 1e-300)):
                b = b.real

        a = b.reshape(4)
        input_power, case = None, None
        if np.iscomplexobj(a):
            a, input_power, case = self._realify(ComplexCandidate.from_complex(a), red)

        report = SolveReport(
            a=a, power=float(a @ red.objective_matrix() @ a),
            lambda1=sol.lambda1, lambda2=sol.lambda2,
            constraint_values=(
                float(a @ red.constraint_matrix(1) @ a), float(a @ red.constraint_matrix(2) @ a)
            ),
            kkt_residual=None, branch='external', status='external',
        )
        summary = check_solution(
            report, red, CheckTolerances(), run_oracle=True,
            seed=cfg.oracle_seed, n_starts=cfg.oracle_starts,
        )
        summary.items[:0] = physical_items
        summary.input_power, summary.realification_case = input_power, case
        self.logger.info(f"verify: {'passed' if summary.passed else 'FAILED'}")
        return summary

    def _realify(self, cand: ComplexCandidate, red: ReducedProblem) -> Tuple[np.ndarray, float, Optional[str]]:
        M = red.objective_matrix()
        Q1, Q2 = red.constraint_matrix(1), red.constraint_matrix(2)
        input_power = cand.power(M)
        forms = np.array([cand.x @ Q @ cand.x + cand.y @ Q @ cand.y for Q in (Q1, Q2)])
        lowest = float(np.min(forms))
        if lowest <= 0.0:
            # infeasible in every scaling; the real part is checked and fails
            self.logger.warning("complex solution violates a constraint in every scaling")
            return cand.x, input_power, None
        scale = lowest ** -0.5
        cand = ComplexCandidate(x=scale * cand.x, y=scale * cand.y)
        forms = forms * scale ** 2
        if np.all(np.abs(forms - 1.0) <= ACTIVE_TOL):
            result = realify_detailed(cand, red)
            return result.v, input_power, result.case
        active = int(np.argmin(forms)) + 1
        return realify_single_active(cand, red, active), input_power, f"single-{active}"

    # ------------------------------------------------------------------
    # Progress output (stderr; stdout carries the payload)
    # ------------------------------------------------------------------

    def _print_phase(self, name: str, detail: str) -> None:
        self.logger.info(f"{name}: {detail}")
        if Settings.VERBOSE:
            print(f"\n[{name.upper()}] {detail}", file=sys.stderr)
            print("-" * 80, file=sys.stderr)

    def _print_line(self, text: str) -> None:
        print(f"  ✓ {text}", file=sys.stderr)
