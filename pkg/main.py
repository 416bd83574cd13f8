#!/usr/bin/env python3
"""
Main entry point for the relay beamforming solver.

Computes the minimum-power relay beamforming matrix of a two-way relay
under two SINR constraints, via a rank-2 real reduction, a closed-form
solution of the noiseless problem and a Runge-Kutta continuation to the
full problem.
"""

import argparse
import json
import logging
import sys
from typing import Any, Dict, List, Optional

from config import Settings
from orchestrator import BeamformingOrchestrator, parse_gamma_sweep
from utils import get_logger, set_global_level
from utils.errors import BeamformingError, InstanceParseError, NoFeasibleBranch
from utils.serialization import csv_text, dumps, read_instance, read_solution


def _add_solver_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group('solver options')
    group.add_argument('--steps', type=int, help='Runge-Kutta steps on 0 <= w <= 1 (default: 100)')
    group.add_argument('--corr-tol', type=float, help='Newton correction tolerance (default: 1e-10)')
    group.add_argument('--lambda-tol', type=float, help='Multipliers below -tol fail a branch (default: 1e-8)')
    group.add_argument('--max-newton', type=int, help='Newton iterations per correction (default: 10)')
    group.add_argument('--starts', type=int, help='Reference optimizer starts (default: 32)')
    group.add_argument('--seed', type=int, help='Seed of the reference optimizer and of batch channels (default: 0)')
    group.add_argument('--verify', action='store_true', default=None,
                       help='Compare against the reference optimizer and report the gap')


def _add_output_flags(parser: argparse.ArgumentParser, default_format: str) -> None:
    parser.add_argument('--format', choices=('json', 'csv'), default=default_format,
                        help=f'Output format (default: {default_format})')
    parser.add_argument('--output', type=str,
                        help='Write to this file instead of stdout (bare names go under OUTPUT_DIR)')
    parser.add_argument('--no-timing', action='store_true',
                        help='Leave wall time out of JSON records (byte-identical reruns)')


def parse_arguments(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """Parse command-line arguments."""
    parser = argparse.ArgumentParser(
        description="Minimum-power two-way relay beamforming under SINR constraints",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Solve one instance (JSON record on stdout)
  python main.py solve instance.json

  # Read the instance from stdin and cross-check with the reference optimizer
  python main.py solve - --verify < instance.json

  # Monte Carlo sweep, 100 channels per target, 4 relay antennas
  python main.py batch --count 100 --antennas 4 --gamma 0dB,3dB,6dB --seed 7

  # Check an externally computed solution
  python main.py verify instance.json solution.json

  # Show the reduced coefficients of a physical instance
  python main.py reduce instance.json

Exit codes: 0 ok, 2 parse error, 3 degenerate channels,
            4 infeasible / no feasible branch, 5 internal error, 130 interrupted
        """
    )
    parser.add_argument('--quiet', action='store_true', help='Only warnings and errors on stderr')
    parser.add_argument('--verbose', action='store_true', help='Debug logging and progress lines on stderr')

    sub = parser.add_subparsers(dest='command', required=True)

    solve = sub.add_parser('solve', help='Solve one instance')
    solve.add_argument('instance', help="Instance file, or '-' for stdin")
    solve.add_argument('--trace', type=str, help='Write the continuation path of both branches as CSV')
    _add_solver_flags(solve)
    _add_output_flags(solve, 'json')

    batch = sub.add_parser('batch', help='Seeded Monte Carlo sweep over SINR targets')
    batch.add_argument('--count', type=int, required=True, help='Instances per SINR target')
    batch.add_argument('--antennas', '-M', type=int, default=2, help='Relay antennas (default: 2)')
    batch.add_argument('--gamma', type=str, default='1',
                       help="Comma-separated SINR targets; 'dB' suffix for decibels (default: 1)")
    batch.add_argument('--p1', type=float, default=1.0, help='Terminal 1 power (default: 1)')
    batch.add_argument('--p2', type=float, default=1.0, help='Terminal 2 power (default: 1)')
    batch.add_argument('--sigma-r2', type=float, default=1.0, help='Relay noise variance (default: 1)')
    batch.add_argument('--sigma2', type=float, default=1.0, help='Terminal noise variance (default: 1)')
    batch.add_argument('--workers', type=int, help='Worker threads (default: MAX_WORKERS if PARALLEL_EXECUTION)')
    _add_solver_flags(batch)
    _add_output_flags(batch, 'csv')

    verify = sub.add_parser('verify', help='Check an external solution against an instance')
    verify.add_argument('instance', help='Instance file')
    verify.add_argument('solution', help="Solution file or a record written by 'solve'")
    _add_solver_flags(verify)
    verify.add_argument('--output', type=str, help='Write the summary to this file')

    reduce_cmd = sub.add_parser('reduce', help='Emit the reduced instance of a physical one')
    reduce_cmd.add_argument('instance', help="Instance file, or '-' for stdin")
    reduce_cmd.add_argument('--output', type=str, help='Write the reduced instance to this file')

    return parser.parse_args(argv)


def _solver_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {
        'steps': getattr(args, 'steps', None),
        'corr_tol': getattr(args, 'corr_tol', None),
        'lambda_tol': getattr(args, 'lambda_tol', None),
        'max_newton': getattr(args, 'max_newton', None),
        'oracle_starts': getattr(args, 'starts', None),
        'oracle_seed': getattr(args, 'seed', None),
        'verify': getattr(args, 'verify', None),
    }


def _emit(text: str, output: Optional[str], logger: logging.Logger) -> None:
    if output:
        path = Settings.resolve_output_path(output)
        path.write_text(text, encoding='utf-8')
        logger.info(f"Output saved to: {path}")
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


def _render(records: List[Any], fmt: str, include_timing: bool) -> str:
    if fmt == 'csv':
        return csv_text(records)
    payload = [r if isinstance(r, dict) else r.to_dict(include_timing) for r in records]
    return dumps(payload[0] if len(payload) == 1 else payload) + '\n'


def _report_error(error: BeamformingError, logger: logging.Logger) -> int:
    logger.error(str(error))
    print(json.dumps(error.to_dict()), file=sys.stderr)
    return error.exit_code


def run(args: argparse.Namespace, logger: logging.Logger) -> int:
    orchestrator = BeamformingOrchestrator(overrides=_solver_overrides(args))

    if args.command == 'reduce':
        inst = read_instance(args.instance)
        _emit(dumps(orchestrator.reduce_to_dict(inst)) + '\n', args.output, logger)
        return 0

    if args.command == 'solve':
        inst = read_instance(args.instance)
        try:
            record, report = orchestrator.solve_instance(inst)
        except NoFeasibleBranch as e:
            # still hand out the fallback beamformer
            _emit(_render([e.record], args.format, not args.no_timing), args.output, logger)
            return _report_error(e, logger)
        if args.trace:
            orchestrator.write_trace(report, Settings.resolve_output_path(args.trace))
        _emit(_render([record], args.format, not args.no_timing), args.output, logger)
        return 0

    if args.command == 'batch':
        gammas = parse_gamma_sweep(args.gamma)
        rows = orchestrator.batch(
            seed=args.seed or 0, count=args.count, M=args.antennas, gammas=gammas,
            workers=args.workers, p1=args.p1, p2=args.p2, sigma_r2=args.sigma_r2,
            sigma1_2=args.sigma2, sigma2_2=args.sigma2,
        )
        if args.format == 'json':
            text = dumps([r if isinstance(r, dict) else r.to_dict(not args.no_timing) for r in rows]) + '\n'
        else:
            text = csv_text(rows)
        _emit(text, args.output, logger)
        return 0

    if args.command == 'verify':
        inst = read_instance(args.instance)
        sol = read_solution(args.solution)
        summary = orchestrator.verify(inst, sol)
        _emit(dumps(summary.to_dict()) + '\n', args.output, logger)
        return 0

    raise InstanceParseError(f"unknown command {args.command!r}")


def main(argv: Optional[List[str]] = None) -> int:
    """Main execution function."""
    args = parse_arguments(argv)

    if args.quiet:
        Settings.VERBOSE = False
        set_global_level(logging.WARNING)
    elif args.verbose:
        Settings.VERBOSE = True
        set_global_level(logging.DEBUG)

    logger = get_logger("Main")

    try:
        return run(args, logger)

    except BeamformingError as e:
        return _report_error(e, logger)

    except ValueError as e:
        # bad flag values and settings
        logger.error(f"Configuration error: {e}")
        print(json.dumps({'error': 'ConfigurationError', 'message': str(e)}), file=sys.stderr)
        return 2

    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        print("\n\n⚠️  Interrupted by user", file=sys.stderr)
        return 130

    except Exception as e:
        logger.error(f"Unexpected error: {e}", exc_info=True)
        print(json.dumps({'error': type(e).__name__, 'message': str(e)}), file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
