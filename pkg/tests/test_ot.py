import numpy as np
import pytest

from conftest import line
from wass import ot
from wass.measures import DiscreteMeasure, ValidationError, random_measure


def test_identity_plan_costs_zero():
    mu = line([0, 1, 3], [0.2, 0.3, 0.5])
    assert ot.plan_cost(ot.identity_plan(mu), 2) == 0.0
    assert ot.wasserstein(mu, mu) == pytest.approx(0.0, abs=1e-15)


def test_dirac_to_dirac():
    plan, w = ot.optimal_plan(DiscreteMeasure.dirac([0.0]), DiscreteMeasure.dirac([3.0]))
    assert ot.plan_cost(plan, 2) == pytest.approx(9.0)
    assert w == pytest.approx(3.0)


@pytest.mark.parametrize("solver", [ot.optimal_plan, ot.brute_force_plan])
def test_monotone_matching(solver):
    plan, w = solver(line([0, 1], [0.5, 0.5]), line([2, 3], [0.5, 0.5]), 2)
    assert w**2 == pytest.approx(4.0, abs=1e-12)
    np.testing.assert_allclose(plan.matrix, [[0.5, 0], [0, 0.5]], atol=1e-15)


def test_one_row_plan_is_forced():
    nu = line([1, 2, 5], [0.2, 0.3, 0.5])
    plan, _ = ot.optimal_plan(DiscreteMeasure.dirac([0.0]), nu)
    np.testing.assert_allclose(plan.matrix, [nu.weights])


def test_brute_force_size_guard(rng):
    with pytest.raises(ValidationError, match="too large"):
        ot.brute_force_plan(random_measure(rng, 5, 1), random_measure(rng, 4, 1))


def test_plan_marginal_check():
    with pytest.raises(ValidationError, match="row sums"):
        ot.TransportPlan(line([0], [1.0]), line([1, 2], [0.5, 0.5]), np.array([[0.5, 0.4]]))


def test_torus_distance_wraps():
    d = ot.torus(np.array([[0.05, 0.5]]), np.array([[0.95, 0.5]]))
    assert d[0, 0] == pytest.approx(0.1)


def test_simplex_matches_linprog(rng):
    linprog = pytest.importorskip("scipy.optimize").linprog
    for _ in range(5):
        mu, nu = random_measure(rng, 12, 2), random_measure(rng, 9, 2)
        C = ot.cost_matrix(mu, nu, 2)
        m, n = C.shape
        A = np.vstack([np.kron(np.eye(m), np.ones(n)), np.kron(np.ones(m), np.eye(n))])
        ref = linprog(C.ravel(), A_eq=A, b_eq=np.concatenate([mu.weights, nu.weights]), method="highs").fun
        plan, _ = ot.optimal_plan(mu, nu, 2)
        assert ot.plan_cost(plan, 2) == pytest.approx(ref, abs=1e-9)


def test_displacement_interpolation_endpoints_and_midpoint():
    mu, nu = DiscreteMeasure.dirac([0.0]), DiscreteMeasure.dirac([2.0])
    plan, _ = ot.optimal_plan(mu, nu)
    assert ot.displacement_interpolation(mu, nu, plan, 0.0) is mu
    assert ot.displacement_interpolation(mu, nu, plan, 1.0) is nu
    assert ot.displacement_interpolation(mu, nu, plan, 0.5).atoms.tolist() == [[1.0]]
    with pytest.raises(ValidationError):
        ot.displacement_interpolation(mu, nu, plan, 1.5)
