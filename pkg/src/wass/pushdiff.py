"""Differentials of pushforward maps ``F = f_#`` on discrete measures.

For atomic measures the disintegration along ``f`` is exact: the fiber over an
image atom ``y`` is the set of source atoms whose quantized image is ``y``,
and the conditional measure there is the renormalized restriction of ``mu``.
The image velocity at ``y`` is the fiber average of ``df_x(v_x)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (
    AtomVectorField,
    MetricField,
    cosine_conformal_factor,
    euclidean_metric,
    l2_norm,
)
from .measures import DiscreteMeasure, PointMap, ValidationError, merge_atoms
from .tangent import GradientDictionary, TangentProjection


@dataclass(frozen=True, eq=False)
class Disintegration:
    """Fibers of ``f`` over the atoms of ``f_# mu`` with conditional weights.

    ``fiber_of[i]`` is the image atom of source atom ``i`` and
    ``conditional[i]`` its weight inside that fiber.
    """

    f: PointMap
    source: DiscreteMeasure
    image: DiscreteMeasure
    fiber_of: np.ndarray
    conditional: np.ndarray

    def fibers(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Per image atom: ``(source indices, conditional weights)``."""
        out = []
        for y in range(len(self.image)):
            idx = np.flatnonzero(self.fiber_of == y)
            out.append((idx, self.conditional[idx]))
        return out

    def reconstruct(self) -> np.ndarray:
        """``f_# mu(y(i)) * mu^y(i)`` per source atom; equals ``mu`` by construction."""
        return self.image.weights[self.fiber_of] * self.conditional


def disintegrate(f: PointMap, mu: DiscreteMeasure) -> Disintegration:
    if len(mu) == 0:
        raise ValidationError("cannot disintegrate an empty measure")
    if f.dim_in != mu.dim:
        raise ValidationError(f"{f.name} expects dimension {f.dim_in}, measure has {mu.dim}")
    images = f(mu.atoms)
    atoms, weights, fiber_of = merge_atoms(images, mu.weights)
    image = DiscreteMeasure(atoms, weights)
    counts = np.bincount(fiber_of, minlength=len(image)).astype(float)
    fiber_mass = weights[fiber_of]
    # a massless fiber gets the uniform conditional; any choice is valid f_#mu-a.e.
    conditional = np.where(fiber_mass > 0, mu.weights / np.where(fiber_mass > 0, fiber_mass, 1.0),
                           1.0 / counts[fiber_of])
    return Disintegration(f, mu, image, fiber_of, conditional)


def pushforward_differential(f: PointMap, mu: DiscreteMeasure, v: AtomVectorField,
                             dis: Disintegration | None = None) -> AtomVectorField:
    """Fiber average ``y -> sum_{x in f^-1(y)} mu^y(x) df_x(v_x)`` on ``f_# mu``."""
    if v.base is not mu and not np.array_equal(v.base.atoms, mu.atoms):
        raise ValidationError("field is not based on the given measure")
    dis = dis or disintegrate(f, mu)
    pushed = np.einsum("mij,mj->mi", f.jacobian(mu.atoms), v.vectors)
    out = np.zeros((len(dis.image), f.dim_out))
    np.add.at(out, dis.fiber_of, dis.conditional[:, None] * pushed)
    return AtomVectorField(dis.image, out)


def differential(f: PointMap, mu: DiscreteMeasure, v: AtomVectorField, dictionary: GradientDictionary,
                 target_metric: MetricField | None = None) -> AtomVectorField:
    """Projected differential ``P^{f_# mu}(fiber average of df v)``."""
    w = pushforward_differential(f, mu, v)
    return TangentProjection(w.base, dictionary, target_metric).project(w)


def jacobian_norms(f: PointMap, x: np.ndarray, source_metric: MetricField | None = None,
                   target_metric: MetricField | None = None) -> np.ndarray:
    """Operator norms ``||df_x||`` between the tangent spaces at ``x`` and ``f(x)``."""
    source_metric = source_metric or euclidean_metric(f.dim_in)
    target_metric = target_metric or euclidean_metric(f.dim_out)
    J = f.jacobian(x)
    sv = np.linalg.svd(J, compute_uv=False)[:, 0]
    scale = np.sqrt(target_metric.factor(f(x)) / source_metric.factor(x))
    return scale * sv


def ess_sup_jacobian(f: PointMap, mu: DiscreteMeasure, source_metric=None, target_metric=None) -> float:
    """``mu``-essential supremum of ``||df_x||``: the max over atoms with positive mass."""
    keep = mu.weights > 0
    return float(np.max(jacobian_norms(f, mu.atoms[keep], source_metric, target_metric)))


def operator_norm_estimate(f: PointMap, mu: DiscreteMeasure, dictionary: GradientDictionary,
                           n_samples: int = 64, rng: np.random.Generator | None = None,
                           source_metric: MetricField | None = None,
                           target_metric: MetricField | None = None) -> tuple[float, float]:
    """Largest ``||dF v||`` over sampled unit tangent fields, and the bound ``ess sup ||df||``."""
    rng = rng if rng is not None else np.random.default_rng(0)
    source_metric = source_metric or euclidean_metric(mu.dim)
    dis = disintegrate(f, mu)
    estimate = 0.0
    for _ in range(n_samples):
        v = dictionary.gradient_field(mu, rng.standard_normal(len(dictionary)), source_metric)
        norm = l2_norm(v, source_metric)
        if norm < 1e-14:
            continue
        w = pushforward_differential(f, mu, v * (1.0 / norm), dis)
        estimate = max(estimate, l2_norm(w, target_metric))
    return estimate, ess_sup_jacobian(f, mu, source_metric, target_metric)


def bound_chain(f: PointMap, mu: DiscreteMeasure, v: AtomVectorField) -> np.ndarray:
    """Successive terms of the Jensen / disintegration / Hoelder estimate (Euclidean metrics).

    Returns squared quantities, each at least as large as the one before:
    ``||dF v||^2``, ``sum_y (sum_x mu^y |df v|)^2``, ``sum_x mu |df_x v_x|^2``,
    ``sum_x mu ||df_x||^2 |v_x|^2``, ``ess sup ||df||^2 ||v||^2``.
    """
    dis = disintegrate(f, mu)
    w = pushforward_differential(f, mu, v, dis)
    pushed = np.linalg.norm(np.einsum("mij,mj->mi", f.jacobian(mu.atoms), v.vectors), axis=1)
    inner = np.zeros(len(dis.image))
    np.add.at(inner, dis.fiber_of, dis.conditional * pushed)
    norms = jacobian_norms(f, mu.atoms)
    vsq = np.sum(v.vectors**2, axis=1)
    return np.array([
        l2_norm(w) ** 2,
        float(dis.image.weights @ inner**2),
        float(mu.weights @ pushed**2),
        float(mu.weights @ (norms**2 * vsq)),
        ess_sup_jacobian(f, mu) ** 2 * float(mu.weights @ vsq),
    ])


def adjoint_identity(f: PointMap, mu: DiscreteMeasure, v: AtomVectorField, dictionary: GradientDictionary,
                     source_metric: MetricField | None = None,
                     target_metric: MetricField | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Both sides of ``int g(grad phi, dF v) d f_#mu = int h(grad(phi o f), v) d mu`` per test phi."""
    source_metric = source_metric or euclidean_metric(f.dim_in)
    target_metric = target_metric or euclidean_metric(f.dim_out)
    w = pushforward_differential(f, mu, v)
    y = w.base.atoms
    grad_y = target_metric.sharp(y, dictionary.differentials(y))
    lhs = w.base.weights @ (target_metric.factor(y)[:, None] * np.einsum("mkd,md->mk", grad_y, w.vectors))
    x = mu.atoms
    # d(phi o f)_x = J_x^T dphi(f(x))
    dcomp = np.einsum("mij,mki->mkj", f.jacobian(x), dictionary.differentials(f(x)))
    grad_x = source_metric.sharp(x, dcomp)
    rhs = mu.weights @ (source_metric.factor(x)[:, None] * np.einsum("mkd,md->mk", grad_x, v.vectors))
    return lhs, rhs


# ---------------------------------------------------------------------------
# Conformal counterexample on the flat 2-torus
# ---------------------------------------------------------------------------


def torus_grid(n: int, d: int = 2) -> DiscreteMeasure:
    """Uniform measure on the ``n^d`` grid of ``[0, 1)^d`` (normalized flat volume)."""
    axes = np.meshgrid(*([np.arange(n) / n] * d), indexing="ij")
    atoms = np.stack([a.ravel() for a in axes], axis=1)
    return DiscreteMeasure(atoms, np.full(atoms.shape[0], 1.0 / atoms.shape[0]))


def counterexample_field(mu: DiscreteMeasure) -> AtomVectorField:
    """Flat gradient of ``phi(x) = sin(2 pi x_2)``."""
    x = mu.atoms
    v = np.zeros_like(x)
    v[:, 1] = 2 * np.pi * np.cos(2 * np.pi * x[:, 1])
    return AtomVectorField(mu, v)


def conformal_tangency_residual(metric: MetricField, K: int, grid_n: int) -> float:
    """Distance in ``L2(mu, h2)`` from the flat gradient field to the ``h2``-gradients of ``trig:K``."""
    mu = torus_grid(grid_n)
    v = counterexample_field(mu)
    P = TangentProjection(mu, GradientDictionary("trig", K, 2), metric)
    return P.residual(v)


def counterexample_residual(K: int, eps: float = 0.5, grid_n: int = 32) -> float:
    """Tangency defect of ``id_#`` from ``(T^2, flat)`` to ``(T^2, nu^2 flat)``.

    ``nu = 1 + eps cos(2 pi x_1)``; the defect stays bounded away from zero as
    ``K`` grows because ``d(nu^2) ^ d phi != 0``.
    """
    if eps == 0:
        raise ValidationError("nu must be nonconstant (eps != 0)")
    return conformal_tangency_residual(cosine_conformal_factor(eps), K, grid_n)


def counterexample_table(eps: float = 0.5, Ks=(2, 3, 4), grid_n: int = 32) -> list[tuple[int, float]]:
    if eps == 0:
        raise ValidationError("nu must be nonconstant (eps != 0)")
    metric = cosine_conformal_factor(eps)
    return [(K, conformal_tangency_residual(metric, K, grid_n)) for K in Ks]
