import numpy as np
import pytest

from conftest import line
from wass import measures, pushdiff
from wass.geometry import AtomVectorField
from wass.measures import ValidationError, random_measure
from wass.tangent import GradientDictionary


def square_example():
    return line([-1.0, 1.0, 2.0], [0.25, 0.25, 0.5])


def test_fibers_of_the_square_map():
    dis = pushdiff.disintegrate(measures.square(1), square_example())
    fibers = {float(dis.image.atoms[y, 0]): (idx.tolist(), w.tolist()) for y, (idx, w) in enumerate(dis.fibers())}
    assert fibers == {1.0: ([0, 1], [0.5, 0.5]), 4.0: ([2], [1.0])}
    np.testing.assert_allclose(dis.reconstruct(), square_example().weights, atol=1e-15)


def test_injective_and_constant_fibers(rng):
    mu = random_measure(rng, 6, 2)
    dis = pushdiff.disintegrate(measures.rotation(0.4), mu)
    assert np.all(dis.conditional == 1.0)
    dis = pushdiff.disintegrate(measures.constant([1.0, 1.0], 2), mu)
    assert len(dis.image) == 1
    np.testing.assert_allclose(dis.conditional, mu.weights)


def test_square_map_fiber_average():
    mu = square_example()
    v = AtomVectorField(mu, [[1.0], [1.0], [1.0]])
    w = pushdiff.pushforward_differential(measures.square(1), mu, v)
    got = dict(zip(w.base.atoms[:, 0].tolist(), w.vectors[:, 0].tolist()))
    # df = 2x: (-2 + 2)/2 over y=1 and 4 at y=4
    assert got == pytest.approx({1.0: 0.0, 4.0: 4.0})
    D = GradientDictionary.parse("poly:2", 1)
    projected = pushdiff.differential(measures.square(1), mu, v, D)
    np.testing.assert_allclose(projected.vectors, w.vectors, atol=1e-12)


def test_injective_map_gives_jacobian_image(rng):
    mu = random_measure(rng, 5, 2)
    f = measures.affine([[1.0, 2.0], [0.0, 3.0]])
    v = AtomVectorField(mu, rng.standard_normal((5, 2)))
    w = pushdiff.pushforward_differential(f, mu, v)
    np.testing.assert_allclose(w.vectors, v.vectors @ np.array([[1.0, 2.0], [0.0, 3.0]]).T)


def test_constant_map_kills_velocity(rng):
    mu = random_measure(rng, 4, 2)
    w = pushdiff.pushforward_differential(measures.constant([0.0, 0.0], 2), mu, AtomVectorField(mu, np.ones((4, 2))))
    assert w.vectors.tolist() == [[0.0, 0.0]]


def test_isometry_needs_no_projection(rng):
    mu = random_measure(rng, 6, 2)
    D = GradientDictionary.parse("poly:3", 2)
    v = D.gradient_field(mu, rng.standard_normal(len(D)))
    f = measures.rotation(1.1, center=[0.3, -0.2])
    np.testing.assert_allclose(pushdiff.differential(f, mu, v, D).vectors,
                               pushdiff.pushforward_differential(f, mu, v).vectors, atol=1e-9)


@pytest.mark.parametrize("f, expected", [(measures.rotation(0.5), 1.0), (measures.scaling(2.0, 2), 2.0),
                                         (measures.scaling(-0.5, 2), 0.5)])
def test_operator_norm(rng, f, expected):
    mu = random_measure(rng, 6, 2)
    est, bound = pushdiff.operator_norm_estimate(f, mu, GradientDictionary.parse("poly:2", 2), rng=rng)
    assert est == pytest.approx(expected, abs=1e-9)
    assert bound == pytest.approx(expected, abs=1e-12)


def test_counterexample_plateau_and_guard():
    res = [r for _, r in pushdiff.counterexample_table(0.5, (2, 3, 4), 16)]
    assert min(res) > 0.01
    assert (res[1] - res[2]) / res[1] < 0.1
    with pytest.raises(ValidationError, match="nu must be nonconstant"):
        pushdiff.counterexample_residual(3, eps=0.0)
