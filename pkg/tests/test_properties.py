"""Randomized invariants over generated measures."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from wass import measures, mixing, ot, pushdiff
from wass.geometry import AtomVectorField, l2_norm
from wass.tangent import GradientDictionary, TangentProjection

coord = st.floats(-3, 3, allow_nan=False, allow_infinity=False)


@st.composite
def discrete_measures(draw, max_atoms=5, d=2):
    m = draw(st.integers(1, max_atoms))
    pts = draw(st.lists(st.tuples(*[coord] * d), min_size=m, max_size=m))
    w = np.array(draw(st.lists(st.floats(0.05, 1.0), min_size=m, max_size=m)))
    return measures.DiscreteMeasure.from_points(np.array(pts, float), w, normalize=True)


settings.register_profile("wass", max_examples=60, deadline=None)
settings.load_profile("wass")


@given(discrete_measures(), discrete_measures(), st.sampled_from([1.0, 2.0]))
def test_simplex_matches_oracle_when_small(mu, nu, p):
    if len(mu) * len(nu) > 16:
        return
    _, w = ot.optimal_plan(mu, nu, p)
    _, w_ref = ot.brute_force_plan(mu, nu, p)
    assert abs(w**p - w_ref**p) <= 1e-9


@given(discrete_measures(), discrete_measures(), discrete_measures())
def test_triangle_inequality(a, b, c):
    assert ot.wasserstein(a, c) <= ot.wasserstein(a, b) + ot.wasserstein(b, c) + 1e-9


@given(discrete_measures(), discrete_measures(), st.floats(-np.pi, np.pi))
def test_isometries_preserve_w2(mu, nu, theta):
    g = measures.rotation(theta, center=[0.5, -1.0])
    moved = ot.wasserstein(measures.pushforward(g, mu), measures.pushforward(g, nu))
    assert abs(moved - ot.wasserstein(mu, nu)) <= 1e-9


@given(discrete_measures(max_atoms=8), st.integers(0, 2**32 - 1))
def test_projection_is_orthogonal(mu, seed):
    rng = np.random.default_rng(seed)
    P = TangentProjection(mu, GradientDictionary.parse("poly:2", 2))
    v = AtomVectorField(mu, rng.normal(size=mu.atoms.shape))
    pv = P.project(v)
    np.testing.assert_allclose(P.project(pv).vectors, pv.vectors, atol=1e-9)
    assert l2_norm(pv) <= l2_norm(v) + 1e-9


@given(discrete_measures(max_atoms=8), st.sampled_from(["square", "constant", "projection"]))
def test_disintegration_reconstructs(mu, kind):
    f = {"square": measures.square(2), "constant": measures.constant([1.0, 2.0], 2),
         "projection": measures.affine([[1.0, 0.0]])}[kind]
    dis = pushdiff.disintegrate(f, mu)
    np.testing.assert_allclose(dis.reconstruct(), mu.weights, atol=1e-12)
    for y, (idx, _) in enumerate(dis.fibers()):
        np.testing.assert_allclose(f(mu.atoms[idx]), np.repeat(dis.image.atoms[y:y + 1], idx.size, 0), atol=1e-9)


@given(discrete_measures(), discrete_measures(), st.floats(0, 1), st.integers(0, 2**32 - 1))
def test_mixing_momentum_identity(mu, nu, lam, seed):
    rng = np.random.default_rng(seed)
    dec = mixing.decompose(mu, nu, lam)
    v = AtomVectorField(mu, rng.normal(size=mu.atoms.shape))
    w = AtomVectorField(nu, rng.normal(size=nu.atoms.shape))
    lhs, rhs = mixing.weak_identity(dec, v, w)
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)
