import numpy as np
import pytest

from conftest import line
from wass import measures
from wass.geometry import AtomVectorField, MetricField, conformal_metric, l2_inner, l2_norm
from wass.measures import DiscreteMeasure, ValidationError
from wass.pushdiff import differential
from wass.tangent import GradientDictionary, TangentProjection, is_formal_isometry, pullback_tensor


def test_l2_inner_examples():
    d = DiscreteMeasure.dirac([0.0, 0.0])
    e1 = AtomVectorField(d, [[1.0, 0.0]])
    assert l2_inner(e1, e1) == 1.0
    mu = line([0, 1], [0.5, 0.5])
    assert l2_inner(AtomVectorField.constant(mu, [2.0]), AtomVectorField.constant(mu, [3.0])) == pytest.approx(6.0)
    assert l2_norm(AtomVectorField.zeros(mu)) == 0.0
    assert l2_norm(AtomVectorField(d, [[3.0, 4.0]])) == pytest.approx(5.0)


def test_constant_conformal_factor_doubles_norm():
    h = conformal_metric(2, lambda x: np.full(len(x), 2.0), lambda x: np.zeros_like(x))
    d = DiscreteMeasure.dirac([0.3, 0.1])
    v = AtomVectorField(d, [[3.0, 4.0]])
    assert l2_norm(v, h) == pytest.approx(10.0)


def test_fields_on_different_bases_rejected():
    a = AtomVectorField.zeros(line([0], [1.0]))
    b = AtomVectorField.zeros(line([1], [1.0]))
    with pytest.raises(ValidationError):
        l2_inner(a, b)


def test_gradient_in_span_is_fixed(rng):
    mu = measures.random_measure(rng, 10, 2)
    D = GradientDictionary.parse("poly:3", 2)
    v = D.gradient_field(mu, rng.standard_normal(len(D)))
    P = TangentProjection(mu, D)
    np.testing.assert_allclose(P.project(v).vectors, v.vectors, atol=1e-10)
    assert P.residual(v) < 1e-9
    assert P.residual(AtomVectorField.zeros(mu)) == 0.0


def test_rotation_field_is_orthogonal_to_linear_gradients():
    mu = DiscreteMeasure(np.array([[1, 0], [-1, 0], [0, 1], [0, -1]], float), np.full(4, 0.25))
    v = AtomVectorField(mu, np.stack([-mu.atoms[:, 1], mu.atoms[:, 0]], axis=1))
    P = TangentProjection(mu, GradientDictionary.parse("poly:1", 2))
    assert np.abs(P.project(v).vectors).max() < 1e-12
    assert P.residual(v) == pytest.approx(l2_norm(v))


def test_unknown_dictionary_rejected():
    with pytest.raises(ValidationError):
        GradientDictionary.parse("legendre:2", 2)


def test_pullback_identity_and_rotation(rng):
    mu = measures.random_measure(rng, 6, 2)
    D = GradientDictionary.parse("poly:2", 2)
    pairs = [(D.gradient_field(mu, rng.standard_normal(len(D))), D.gradient_field(mu, rng.standard_normal(len(D))))
             for _ in range(5)]
    ok, _ = is_formal_isometry(lambda v: v, pairs)
    assert ok
    rot = measures.rotation(0.7)
    ok, worst = is_formal_isometry(lambda v: differential(rot, mu, v, D), pairs, tol=1e-10)
    assert ok, worst


def test_pullback_of_doubling_on_the_line():
    mu = line([0.0, 1.0, 2.5], [0.2, 0.3, 0.5])
    v = AtomVectorField(mu, [[1.0], [-2.0], [0.5]])
    D = GradientDictionary.parse("poly:3", 1)
    dF = lambda u: differential(measures.scaling(2.0, 1), mu, u, D)  # noqa: E731
    assert pullback_tensor(dF, v, v) == pytest.approx(4 * l2_inner(v, v), abs=1e-10)


def test_metric_sharp_inverts_flat():
    h = MetricField(2, "conformal", lambda x: 1 + 0.5 * np.cos(2 * np.pi * x[:, 0]),
                    lambda x: np.stack([-np.pi * np.sin(2 * np.pi * x[:, 0]), 0 * x[:, 0]], axis=1))
    x = np.array([[0.1, 0.2], [0.7, 0.4]])
    v = np.array([[1.0, -2.0], [0.5, 3.0]])
    np.testing.assert_allclose(h.sharp(x, h.flat(x, v)), v)
