import numpy as np
import pytest

from model.reduction import ReducedProblem
from solvers.oracle import oracle_minimize
from solvers.zero_solver import ZeroSolver, bootstrap_multipliers, canonical_sign, solve_zero


def test_symmetric_instance_candidates(symmetric_reduced):
    plus, minus = solve_zero(symmetric_reduced)
    np.testing.assert_allclose(plus.a, [0.5, 0.0, 0.0, -0.5], atol=1e-14)
    np.testing.assert_allclose(minus.a, [0.0, 0.5, -0.5, 0.0], atol=1e-14)
    for cand in (plus, minus):
        assert cand.power == pytest.approx(0.5)
        assert cand.lambda1 == pytest.approx(0.25)
        assert cand.lambda2 == pytest.approx(0.25)
        assert cand.kkt_residual < 1e-12
        assert not cand.negative_multiplier
    assert (plus.sign_choice, minus.sign_choice) == (1, -1)


def test_base_point_meets_both_hyperplanes(random_reduced):
    for seed in range(20):
        red = random_reduced(seed, noise=False)
        solver = ZeroSolver(red)
        for sign in (1, -1):
            b = solver.base_point(sign)
            assert solver.u1 @ b == pytest.approx(red.c1 ** -0.5, rel=1e-12)
            assert solver.u2 @ b == pytest.approx(sign * red.c2 ** -0.5, rel=1e-12)


def test_directions_are_orthogonal_to_both_rows(random_reduced):
    solver = ZeroSolver(random_reduced(3, noise=False))
    np.testing.assert_allclose(solver.u1 @ solver.directions, 0.0, atol=1e-15)
    np.testing.assert_allclose(solver.u2 @ solver.directions, 0.0, atol=1e-15)


def test_candidates_are_both_active_kkt_points(random_reduced):
    for seed in range(50):
        red = random_reduced(seed, noise=False)
        solver = ZeroSolver(red)
        for cand in solver.solve():
            f1, f2 = solver.constraint_values(cand.a, 0.0)
            assert f1 == pytest.approx(1.0, abs=1e-12)
            assert f2 == pytest.approx(1.0, abs=1e-12)
            assert cand.kkt_residual <= 1e-10 * np.linalg.norm(solver.M @ cand.a)
            assert cand.lambda1 + cand.lambda2 == pytest.approx(cand.power, rel=1e-10)


def test_candidate_is_minimum_on_its_plane(random_reduced):
    rng = np.random.default_rng(0)
    red = random_reduced(4, noise=False)
    solver = ZeroSolver(red)
    for sign in (1, -1):
        cand = solver.candidate(sign)
        base = solver.base_point(sign)
        for _ in range(100):
            point = base + solver.directions @ rng.standard_normal(2)
            assert solver.power(point) >= cand.power - 1e-12


def test_candidates_ignore_noise_terms():
    quiet = ReducedProblem(q1=0.4, q2=1.1, c1=0.9, c2=1.6, d1=0.0, d2=0.0, r=0.5)
    noisy = ReducedProblem(q1=0.4, q2=1.1, c1=0.9, c2=1.6, d1=0.3, d2=0.2, r=0.5)
    for a, b in zip(solve_zero(quiet), solve_zero(noisy)):
        np.testing.assert_allclose(a.a, b.a)


def test_canonical_sign():
    np.testing.assert_array_equal(canonical_sign(np.array([0.0, -1.0, 2.0])), [0.0, 1.0, -2.0])
    np.testing.assert_array_equal(canonical_sign(np.array([3.0, -1.0])), [3.0, -1.0])


def test_bootstrap_needs_nonzero_point(symmetric_reduced):
    with pytest.raises(ValueError):
        bootstrap_multipliers(np.zeros(4), symmetric_reduced)


def _closed_form_matches_oracle(red, seed, n_starts):
    best = min(solve_zero(red), key=lambda c: c.power)
    oracle = oracle_minimize(red, w=0.0, seed=seed, n_starts=n_starts, hints=[best.a])
    return best.power <= oracle.power * (1 + 1e-3)


def test_closed_form_is_the_noiseless_optimum(random_reduced):
    for seed in range(10):
        red = random_reduced(500 + seed, noise=False)
        assert _closed_form_matches_oracle(red, seed, n_starts=8)


@pytest.mark.slow
def test_closed_form_against_oracle_over_many_instances(random_reduced):
    total = 200
    agreed = sum(
        _closed_form_matches_oracle(random_reduced(2000 + seed, noise=False), seed, n_starts=32)
        for seed in range(total)
    )
    assert agreed >= 0.99 * total
