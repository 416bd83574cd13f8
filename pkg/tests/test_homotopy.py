import time

import numpy as np
import pytest

from config import SolverConfig
from model.reduction import ReducedProblem
from solvers.homotopy_solver import HomotopySolver, integrate_branch, newton_correct, ode_rhs, solve
from solvers.oracle import oracle_minimize
from solvers.report import HomotopyState
from solvers.zero_solver import solve_zero
from utils.errors import InfeasibleInstance, NoFeasibleBranch, SingularSystem


def _start_state(cand):
    return HomotopyState(a=cand.a.copy(), lambda1=cand.lambda1, lambda2=cand.lambda2, w=0.0)


def test_noiseless_path_is_constant(symmetric_reduced):
    plus, _ = solve_zero(symmetric_reduced)
    da, dl1, dl2 = ode_rhs(_start_state(plus), symmetric_reduced)
    np.testing.assert_allclose(da, 0.0, atol=1e-15)
    assert (dl1, dl2) == (pytest.approx(0.0, abs=1e-15), pytest.approx(0.0, abs=1e-15))

    report = solve(symmetric_reduced)
    assert report.power == pytest.approx(0.5, rel=1e-12)
    assert report.lambda1 == pytest.approx(0.25)
    assert report.lambda2 == pytest.approx(0.25)


def test_derivative_keeps_constraints_tangent(noisy_reduced):
    solver = HomotopySolver(noisy_reduced)
    for cand in solve_zero(noisy_reduced):
        s = _start_state(cand)
        da, _, _ = solver.ode_rhs(s)
        for i in (1, 2):
            lhs = (solver.Q(i, 0.0) @ s.a) @ da
            assert lhs == pytest.approx(0.5 * s.a @ solver.D(i) @ s.a, rel=1e-10)


def test_endpoint_is_a_kkt_point(noisy_reduced):
    report = solve(noisy_reduced)
    assert report.status == 'ok'
    f1, f2 = report.constraint_values
    assert f1 == pytest.approx(1.0, abs=1e-9)
    assert f2 == pytest.approx(1.0, abs=1e-9)
    assert report.kkt_residual <= 1e-8
    assert min(report.lambda1, report.lambda2) >= 0.0
    assert report.lambda1 + report.lambda2 == pytest.approx(report.power, rel=1e-8)


def test_noise_only_raises_power(noisy_reduced):
    start_power = min(c.power for c in solve_zero(noisy_reduced))
    assert solve(noisy_reduced).power >= start_power


def test_power_is_monotone_along_the_path(noisy_reduced):
    solver = HomotopySolver(noisy_reduced)
    for cand in solve_zero(noisy_reduced):
        outcome = solver.run_branch(cand)
        if not outcome.ok:
            continue
        powers = [p for _, p, _, _ in outcome.diagnostics.power_trace]
        assert len(powers) >= solver.config.steps + 1
        for before, after in zip(powers, powers[1:]):
            assert after >= before - 1e-9 * max(1.0, before)


def test_newton_pulls_a_perturbed_state_back(noisy_reduced):
    cfg = SolverConfig()
    end = solve(noisy_reduced, cfg)
    exact = HomotopyState(a=end.a.copy(), lambda1=end.lambda1, lambda2=end.lambda2, w=1.0)
    rng = np.random.default_rng(5)
    perturbed = HomotopyState.from_vector(exact.as_vector() + 1e-4 * rng.standard_normal(6), 1.0)
    corrected = newton_correct(perturbed, noisy_reduced, cfg)
    solver = HomotopySolver(noisy_reduced, cfg)
    assert solver.residual_norm(corrected) <= cfg.corr_tol
    np.testing.assert_allclose(corrected.as_vector(), exact.as_vector(), atol=1e-8)


def test_one_newton_step_removes_a_scaling_defect(noisy_reduced):
    end = solve(noisy_reduced)
    solver = HomotopySolver(noisy_reduced)
    scaled = HomotopyState(a=(1 + 1e-6) * end.a, lambda1=end.lambda1, lambda2=end.lambda2, w=1.0)
    # constraint rows of the Jacobian point along grad f_i = 2 Q_i a
    J = solver.newton_matrix(scaled)
    f1, f2 = solver.constraint_values(scaled.a, 1.0)
    assert J[4, :4] @ scaled.a == pytest.approx(2.0 * f1, rel=1e-12)
    assert J[5, :4] @ scaled.a == pytest.approx(2.0 * f2, rel=1e-12)

    assert solver.residual_norm(scaled) > 1e-6
    assert solver.residual_norm(solver.newton_step(scaled)) < 1e-9


def test_coarse_steps_are_rescued_by_correction(noisy_reduced, random_reduced):
    cfg = SolverConfig(steps=5)
    for red in [noisy_reduced] + [random_reduced(seed) for seed in range(5)]:
        solver = HomotopySolver(red, cfg)
        for cand in solve_zero(red):
            outcome = solver.run_branch(cand)
            assert outcome.reason != 'correction'
            assert outcome.diagnostics.step_halvings == 0


def test_every_accepted_step_sits_on_both_surfaces(noisy_reduced, random_reduced):
    for red in [noisy_reduced] + [random_reduced(seed) for seed in range(5)]:
        solver = HomotopySolver(red)
        for cand in solve_zero(red):
            outcome = solver.run_branch(cand)
            if not outcome.ok:
                continue
            diag = outcome.diagnostics
            assert diag.max_constraint_defect <= 1e-9
            assert diag.max_stationarity_defect <= 1e-9
            assert 0.0 < diag.min_abs_det < np.inf


def test_zero_beamformer_makes_the_tangent_system_singular(noisy_reduced):
    state = HomotopyState(a=np.zeros(4), lambda1=0.25, lambda2=0.25, w=0.3)
    with pytest.raises(SingularSystem) as info:
        ode_rhs(state, noisy_reduced)
    assert info.value.exit_code == 5


def test_tiny_noise_barely_moves_the_start():
    red = ReducedProblem(q1=0.5, q2=1.0, c1=1.0, c2=1.5, d1=1e-6, d2=1.5e-6, r=0.6)
    cand = min(solve_zero(red), key=lambda c: c.power)
    state, _ = integrate_branch(cand, red)
    assert state.w == 1.0
    np.testing.assert_allclose(state.as_vector(), _start_state(cand).as_vector(), atol=1e-4)

def test_rk4_converges_at_fourth_order(noisy_reduced):
    cand = min(solve_zero(noisy_reduced), key=lambda c: c.power)
    ends = []
    for steps in (10, 20, 40):
        cfg = SolverConfig(steps=steps, newton_correction=False)
        state, _ = integrate_branch(cand, noisy_reduced, cfg)
        assert state.w == 1.0
        ends.append(state.as_vector())
    coarse = np.linalg.norm(ends[1] - ends[0])
    fine = np.linalg.norm(ends[2] - ends[1])
    assert np.log2(coarse / fine) >= 3.5


def test_agrees_with_the_reference_optimizer(random_reduced):
    agreed = 0
    for seed in range(10):
        red = random_reduced(seed)
        report = solve(red)
        oracle = oracle_minimize(red, seed=seed, n_starts=8, hints=[report.a])
        # the endpoint is one of the oracle's candidates
        assert oracle.power <= report.power * (1 + 1e-9)
        if report.power <= oracle.power * (1 + 5e-3):
            agreed += 1
    assert agreed >= 9


def test_verify_flag_records_oracle_power(noisy_reduced):
    cfg = SolverConfig(verify=True, oracle_starts=4)
    report = solve(noisy_reduced, cfg)
    assert report.oracle_power is not None
    assert report.oracle_gap <= 5e-3


def test_unreachable_target_is_infeasible():
    red = ReducedProblem(q1=1.0, q2=1.0, c1=1.0, c2=1.0, d1=3.0, d2=0.1, r=0.5)
    with pytest.raises(InfeasibleInstance) as info:
        solve(red, SolverConfig(oracle_starts=2))
    assert info.value.exit_code == 4


def test_failed_branches_fall_back_to_the_oracle(noisy_reduced):
    # no correction can meet this tolerance, so every step is rejected
    cfg = SolverConfig(corr_tol=1e-300, max_newton=2, max_step_halvings=1, oracle_starts=4)
    with pytest.raises(NoFeasibleBranch) as info:
        solve(noisy_reduced, cfg)
    report = info.value.report
    assert report.status == 'fallback'
    assert report.branch == 'oracle'
    assert report.lambda1 is None
    assert min(report.constraint_values) >= 1.0 - 1e-9
    assert all(o.reason == 'correction' for o in report.branches)
    assert report.last_good is not None and report.last_good.w == 0.0


@pytest.mark.slow
def test_acceptance_agreement_over_many_instances(random_reduced):
    agreed = 0
    total = 200
    for seed in range(total):
        red = random_reduced(1000 + seed, noise_fraction=(0.05, 0.6))
        try:
            report = solve(red)
        except NoFeasibleBranch:
            continue
        oracle = oracle_minimize(red, seed=seed, n_starts=32, hints=[report.a])
        if report.power <= oracle.power * (1 + 5e-3):
            agreed += 1
    assert agreed >= 0.95 * total


@pytest.mark.slow
def test_solve_is_fast_next_to_the_oracle(random_reduced):
    solve(random_reduced(0))
    solve_ms, oracle_ms = [], []
    for seed in range(10):
        red = random_reduced(3000 + seed)
        started = time.perf_counter()
        try:
            solve(red)
        except NoFeasibleBranch:
            continue
        solved = time.perf_counter()
        oracle_minimize(red, seed=seed, n_starts=32)
        solve_ms.append(1e3 * (solved - started))
        oracle_ms.append(1e3 * (time.perf_counter() - solved))
    assert solve_ms
    assert np.median(solve_ms) < 50.0
    assert sum(oracle_ms) >= 10.0 * sum(solve_ms)
