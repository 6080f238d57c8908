import numpy as np
import pytest

from conftest import line
from wass import measures, mixing
from wass.geometry import AtomVectorField
from wass.measures import ValidationError

A, B, C = 0.0, 1.0, 2.0


def example():
    return line([A, C], [0.5, 0.5]), line([B, C], [0.3, 0.7])


def test_mixture_weights():
    mu, nu = example()
    alpha = mixing.mix_measures(mu, nu, 0.5)
    assert measures.same_measure(alpha, line([A, B, C], [0.25, 0.15, 0.6]))
    assert measures.same_measure(mixing.mix_measures(mu, nu, 1.0), mu)
    assert measures.same_measure(mixing.mix_measures(mu, nu, 0.0), nu)


def test_decomposition():
    mu, nu = example()
    dec = mixing.decompose(mu, nu, 0.5)
    assert dec.atoms[dec.A, 0].tolist() == [A]
    assert dec.atoms[dec.B, 0].tolist() == [B]
    assert dec.atoms[dec.C, 0].tolist() == [C]
    assert dec.beta.tolist() == [0.5]
    assert dec.rho[0] == pytest.approx(1.4)


def test_disjoint_and_equal_supports():
    mu = line([0, 1], [0.5, 0.5])
    dec = mixing.decompose(mu, line([2, 3], [0.5, 0.5]), 0.3)
    assert dec.C.size == 0 and dec.A.size == 2 and dec.B.size == 2
    dec = mixing.decompose(mu, mu, 0.3)
    assert dec.A.size == dec.B.size == 0
    np.testing.assert_allclose(dec.rho, 1.0)


def test_canonical_field_on_shared_atom():
    mu, nu = example()
    dec = mixing.decompose(mu, nu, 0.5)
    u = mixing.canonical_field(dec, AtomVectorField(mu, [[5.0], [1.0]]), AtomVectorField(nu, [[-3.0], [2.0]]))
    got = dict(zip(u.base.atoms[:, 0].tolist(), u.vectors[:, 0].tolist()))
    assert got[C] == pytest.approx(1.9 / 1.2, abs=1e-15)
    assert got[A] == 5.0 and got[B] == -3.0


def test_equal_fields_collapse():
    mu = line([0, 1], [0.5, 0.5])
    v = AtomVectorField(mu, [[1.5], [-2.0]])
    u = mixing.canonical_field(mixing.decompose(mu, mu, 0.37), v, v)
    np.testing.assert_allclose(u.vectors, v.vectors, atol=1e-15)


def test_weak_identity_and_bounds(rng):
    mu = measures.random_measure(rng, 5, 2)
    nu = measures.DiscreteMeasure.from_points(np.vstack([mu.atoms[:2], rng.normal(size=(3, 2))]),
                                              rng.random(5), normalize=True)
    v = AtomVectorField(mu, rng.normal(size=(5, 2)))
    w = AtomVectorField(nu, rng.normal(size=(5, 2)))
    dec = mixing.decompose(mu, nu, 0.25)
    lhs, rhs = mixing.weak_identity(dec, v, w)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)
    b = mixing.l2_bounds(dec, v, w)
    assert b["norm"] <= b["crude"] + 1e-12
    assert b["norm"] <= b["split"] + 1e-12
    assert b["c_part"] <= b["c_bound"] + 1e-12


def test_lambda_range():
    mu, nu = example()
    with pytest.raises(ValidationError, match="lambda"):
        mixing.decompose(mu, nu, 1.2)
