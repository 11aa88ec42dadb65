import math

import numpy as np
import pytest

from saddlepoint import (Box, DiscreteMeasure, Equality, FeatureMap, IntegrandFamily,
                         MomentProblem, StructuralError, dual_objective, entropy_value,
                         push_moments, qualification_check, solve, solve_box, solve_equality)
from saddlepoint.moment_solver import INFEASIBLE_MSG

from conftest import BUILTINS, bernoulli, random_entropy_problem

LN_HALF, LN_3 = math.log(0.5), math.log(3.0)
BERNOULLI_VALUE = 0.75 * math.log(1.5) + 0.25 * math.log(0.5)


def test_dual_objective_at_zero():
    p = bernoulli()
    ev = dual_objective(p, [0.0, 0.0])
    assert ev.value == 0.0
    assert np.allclose(ev.gradient, np.array([1.0, 0.75]) - [1.0, 0.5])


def test_dual_objective_stationary_at_tilt():
    ev = dual_objective(bernoulli(), [LN_HALF, LN_3])
    assert np.max(np.abs(ev.gradient)) < 1e-15
    assert np.all(np.linalg.eigvalsh(ev.hessian) <= 0)


def test_dual_objective_burg_domain():
    ev = dual_objective(bernoulli(family="Burg"), [0.5, 0.6])
    assert not ev.feasible and ev.value == -math.inf


def test_solve_equality_at_reference():
    sol = solve_equality(bernoulli((1.0, 0.5)))
    assert np.allclose(sol.dual.y, 0.0, atol=1e-12)
    assert np.allclose(sol.primal.Q.weights, [0.5, 0.5], atol=1e-12)
    assert sol.primal.value == pytest.approx(0.0, abs=1e-14)


def test_solve_equality_bernoulli_tilt():
    sol = solve_equality(bernoulli())
    assert sol.dual.converged
    assert sol.dual.y == pytest.approx([LN_HALF, LN_3], abs=1e-8)
    assert sol.primal.Q.weights == pytest.approx([0.25, 0.75], abs=1e-10)
    assert sol.primal.value == pytest.approx(BERNOULLI_VALUE, abs=1e-12)
    assert sol.primal.value == pytest.approx(0.130812, abs=1e-6)
    c = sol.certificate
    assert c.passed() and c.qualification == "Interior"
    assert abs(c.gap) <= 1e-8 * (1 + abs(c.dual_value))


def test_solve_equality_quadratic():
    sol = solve_equality(bernoulli((1.0, 0.5), "Quadratic"))
    assert sol.dual.y == pytest.approx([1.0, 0.0], abs=1e-10)
    assert sol.primal.Q.weights == pytest.approx([0.5, 0.5], abs=1e-10)
    assert sol.primal.value == pytest.approx(0.5, abs=1e-10)


def test_solve_equality_outside_hull():
    sol = solve_equality(bernoulli((1.0, 1.5)))
    assert not sol.dual.converged
    assert sol.dual.message == INFEASIBLE_MSG
    assert sol.certificate.qualification == "Outside"


def test_divergence_detected_without_qualification():
    sol = solve_equality(bernoulli((1.0, 1.5)), qualify=False)
    assert not sol.dual.converged
    assert sol.dual.message in (INFEASIBLE_MSG, "line search stalled", "iteration limit reached")


def test_iteration_limit_returns_best_iterate():
    sol = solve_equality(bernoulli(), max_iter=1)
    assert not sol.dual.converged
    assert sol.dual.message == "iteration limit reached"
    assert sol.certificate.converged is False


@pytest.mark.parametrize("tag", BUILTINS)
def test_invariants_random(tag, rng):
    for _ in range(10):
        p = random_entropy_problem(rng, int(rng.integers(3, 12)), int(rng.integers(1, 4)), tag)
        sol = solve_equality(p)
        assert sol.dual.converged, sol.dual.message
        # dual equality, recovery consistency, primal bookkeeping
        assert abs(sol.primal.value - sol.dual.dual_value) <= 1e-8 * (1 + abs(sol.dual.dual_value))
        assert np.max(np.abs(push_moments(p.features, sol.primal.Q) - p.constraint.values)) <= 1e-7
        assert sol.primal.value == pytest.approx(entropy_value(p.family, p.reference, sol.primal.Q),
                                                 abs=1e-12)
        assert np.array_equal(sol.primal.moments, push_moments(p.features, sol.primal.Q))
        # monotone ascent, up to round-off in the last digits
        h = sol.dual.history
        assert all(b >= a - 1e-12 * (1 + abs(a)) for a, b in zip(h, h[1:]))


@pytest.mark.parametrize("tag", BUILTINS)
def test_hessian_matches_gradient_jacobian(tag, rng):
    p = random_entropy_problem(rng, 6, 3, tag)
    for _ in range(5):
        y = rng.normal(scale=0.2, size=3)
        ev = dual_objective(p, y)
        assert ev.feasible
        h = 1e-6
        J = np.empty((3, 3))
        for k in range(3):
            e = np.zeros(3)
            e[k] = h
            J[:, k] = (dual_objective(p, y + e).gradient - dual_objective(p, y - e).gradient) / (2 * h)
        assert np.max(np.abs(J - ev.hessian)) <= 1e-5 * max(1.0, np.max(np.abs(ev.hessian)))


def test_qualification_examples():
    q = qualification_check(bernoulli((1.0, 0.5)))
    assert q.status == "Interior"
    assert q.witness == pytest.approx([0.5, 0.5], abs=1e-12)
    assert qualification_check(bernoulli((1.0, 1.0))).status == "Boundary"
    assert qualification_check(bernoulli((1.0, 1.5))).status == "Outside"


def test_qualification_other_families():
    assert qualification_check(bernoulli((1.0, 5.0), "Quadratic")).status == "Interior"
    # Fermi densities are capped by R: total mass 1 needs Q = R exactly
    assert qualification_check(bernoulli((1.0, 0.5), "Fermi")).status == "Boundary"
    assert qualification_check(bernoulli((0.5, 0.25), "Fermi")).status == "Interior"
    custom = IntegrandFamily.custom(lambda s: math.expm1(s), lambda s: math.exp(s))
    assert qualification_check(bernoulli((1.0, 0.5), custom)).status == "Unavailable"
    no_mass = MomentProblem(DiscreteMeasure.from_weights([0.5, 0.5]), IntegrandFamily("RelativeEntropy"),
                            FeatureMap([[0.0], [1.0]]), Equality([0.5]))
    assert qualification_check(no_mass).status == "Unavailable"


def test_boundary_target_is_flagged():
    # the optimum Q = (0, 1) is approached as y runs off; the attempt is still certified
    sol = solve_equality(bernoulli((1.0, 1.0)))
    assert sol.certificate.qualification == "Boundary"
    assert sol.primal.value == pytest.approx(math.log(2.0), abs=1e-8)
    if sol.dual.converged:
        assert sol.certificate.passed()


def box_bernoulli(lo, hi):
    return bernoulli(constraint=Box([1.0, lo], [1.0, hi]))


def test_box_inactive():
    sol = solve_box(box_bernoulli(0.4, 0.6))
    assert sol.x == pytest.approx([1.0, 0.5], abs=1e-10)
    assert sol.primal.Q.weights == pytest.approx([0.5, 0.5], abs=1e-10)
    assert sol.primal.value == pytest.approx(0.0, abs=1e-12)


def test_box_active_lower_bound():
    sol = solve_box(box_bernoulli(0.7, 0.9))
    expected = 0.7 * math.log(1.4) + 0.3 * math.log(0.6)
    assert expected == pytest.approx(0.082283, abs=1e-6)
    assert sol.x == pytest.approx([1.0, 0.7], abs=1e-9)
    assert sol.primal.value == pytest.approx(expected, abs=1e-9)
    assert sol.dual.y[1] >= 0
    assert sol.certificate.passed()
    assert sol.certificate.kkt.support_condition_residual <= 1e-8


def test_box_active_from_infinite_side():
    sol = solve_box(bernoulli(constraint=Box([1.0, -math.inf], [1.0, 0.3])))
    assert sol.x[1] == pytest.approx(0.3, abs=1e-9)
    assert sol.dual.y[1] <= 0
    assert sol.certificate.passed()


@pytest.mark.parametrize("seed", range(0, 40, 3))
def test_box_interior_optimum_converges(seed):
    # the free coordinate ends strictly inside; its dual must reach the tolerance
    rng = np.random.default_rng(seed)
    p = random_entropy_problem(rng, int(rng.integers(3, 15)), 2, BUILTINS[seed % 4])
    c = p.constraint.values
    sol = solve_box(p.with_constraint(Box([c[0], -math.inf], [c[0], c[1] + 0.3])))
    assert sol.dual.converged
    assert sol.certificate.kkt.support_condition_residual <= 1e-8


def test_degenerate_box_matches_equality_bitwise():
    p = bernoulli()
    eq = solve_equality(p)
    bx = solve_box(bernoulli(constraint=Box([1.0, 0.75], [1.0, 0.75])))
    assert np.array_equal(eq.dual.y, bx.dual.y)
    assert np.array_equal(eq.primal.Q.weights, bx.primal.Q.weights)
    assert eq.certificate == bx.certificate


def test_solve_dispatch():
    assert solve(bernoulli()).x.tolist() == [1.0, 0.75]
    assert solve(box_bernoulli(0.7, 0.9)).x[1] == pytest.approx(0.7, abs=1e-9)


def test_structural_errors():
    with pytest.raises(StructuralError):
        Box([1.0], [0.0])
    with pytest.raises(StructuralError):
        bernoulli((1.0, 0.5, 0.2))
    with pytest.raises(StructuralError):
        MomentProblem(DiscreteMeasure.from_weights([0.5, 0.0]), IntegrandFamily("Quadratic"),
                      FeatureMap([[1.0], [1.0]]), Equality([1.0]))
    with pytest.raises(StructuralError):
        solve_equality(bernoulli(), xhat=[1.0, math.nan])
