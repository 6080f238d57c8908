"""Discrete tangent spaces: spans of metric gradients of a finite dictionary of
test functions, orthogonal projection onto them in ``L2(mu, h)``, and the
pullback of the L2 tensor along a differential.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .geometry import AtomVectorField, MetricField, euclidean_metric, l2_inner, l2_norm
from .measures import DiscreteMeasure, ValidationError

# singular values below this fraction of the largest are treated as zero
RCOND = 1e-10


@dataclass(frozen=True)
class GradientDictionary:
    """Finite family of smooth test functions with analytic differentials.

    ``kind="poly"``: monomials of total degree ``1..size`` on R^d (constants
    have zero gradient and are left out).
    ``kind="trig"``: ``sin`` and ``cos`` of ``2 pi k.x`` for nonzero integer
    ``k`` with ``|k|_inf <= size``, one representative per ``+-k`` pair, each
    scaled by ``1 / (2 pi |k|)`` so every gradient has unit amplitude.
    """

    kind: str
    size: int
    dim: int
    _terms: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("poly", "trig"):
            raise ValidationError(f"unknown dictionary family {self.kind!r}")
        if self.size < 1 or self.dim < 1:
            raise ValidationError("dictionary size and dimension must be positive")
        if self.kind == "poly":
            terms = [
                alpha for alpha in itertools.product(range(self.size + 1), repeat=self.dim)
                if 1 <= sum(alpha) <= self.size
            ]
            terms.sort(key=lambda a: (sum(a), tuple(-x for x in a)))
        else:
            terms = []
            for k in itertools.product(range(-self.size, self.size + 1), repeat=self.dim):
                nz = [c for c in k if c != 0]
                if nz and nz[0] > 0:
                    terms.append(k)
            terms.sort(key=lambda k: (max(abs(c) for c in k), k))
        object.__setattr__(self, "_terms", np.array(terms, dtype=np.int64))

    @classmethod
    def parse(cls, spec: str, dim: int) -> "GradientDictionary":
        """``"poly:3"`` or ``"trig:4"``."""
        try:
            kind, size = spec.split(":")
            return cls(kind.strip(), int(size), dim)
        except ValueError as exc:
            raise ValidationError(f"dictionary spec must look like poly:D or trig:K, got {spec!r}") from exc

    def __len__(self) -> int:
        n = len(self._terms)
        return n if self.kind == "poly" else 2 * n

    def values(self, x: np.ndarray) -> np.ndarray:
        """``(m, d) -> (m, K)`` function values."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        T = self._terms
        if self.kind == "poly":
            return np.prod(x[:, None, :] ** T[None, :, :], axis=2)
        phase = 2 * np.pi * x @ T.T
        scale = 2 * np.pi * np.linalg.norm(T, axis=1)
        return np.concatenate([np.sin(phase) / scale, np.cos(phase) / scale], axis=1)

    def differentials(self, x: np.ndarray) -> np.ndarray:
        """``(m, d) -> (m, K, d)`` Euclidean differentials ``d phi_k``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        T = self._terms
        m, d = x.shape
        if self.kind == "poly":
            out = np.zeros((m, len(T), d))
            for a in range(d):
                lowered = T.copy()
                lowered[:, a] -= 1
                coef = T[:, a].astype(float)
                safe = np.maximum(lowered, 0)
                out[:, :, a] = coef[None, :] * np.prod(x[:, None, :] ** safe[None, :, :], axis=2)
            return out
        phase = 2 * np.pi * x @ T.T
        unit = T / np.linalg.norm(T, axis=1)[:, None]
        return np.concatenate(
            [np.cos(phase)[:, :, None] * unit[None], -np.sin(phase)[:, :, None] * unit[None]], axis=1
        )

    def gradient_field(self, base: DiscreteMeasure, coefficients, metric: MetricField | None = None) -> AtomVectorField:
        """Metric gradient of ``sum_k c_k phi_k`` sampled at the atoms of ``base``."""
        metric = metric or euclidean_metric(base.dim)
        c = np.asarray(coefficients, dtype=float)
        grads = metric.sharp(base.atoms, self.differentials(base.atoms))
        return AtomVectorField(base, np.einsum("mkd,k->md", grads, c))


class TangentProjection:
    """Orthogonal projection of ``L2(mu, h)`` onto ``span{grad^h phi_k}``.

    The weighted design matrix is factorized once by SVD; projecting is then
    a pair of small matrix products.
    """

    def __init__(self, base: DiscreteMeasure, dictionary: GradientDictionary,
                 metric: MetricField | None = None, rcond: float = RCOND):
        if dictionary.dim != base.dim:
            raise ValidationError(f"dictionary dimension {dictionary.dim} != measure dimension {base.dim}")
        self.base = base
        self.dictionary = dictionary
        self.metric = metric or euclidean_metric(base.dim)
        x = base.atoms
        self.gradients = self.metric.sharp(x, dictionary.differentials(x))  # (m, K, d)
        self._row_scale = np.sqrt(base.weights) * self.metric.cholesky(x)  # (m,)
        design = (self._row_scale[:, None, None] * self.gradients).transpose(0, 2, 1)
        design = design.reshape(-1, len(dictionary))
        U, s, Vt = np.linalg.svd(design, full_matrices=False)
        keep = s > rcond * (s[0] if s.size and s[0] > 0 else 1.0)
        if s.size and s[0] == 0:
            keep[:] = False
        self._U = U[:, keep]
        self._pinv = Vt[keep].T / s[keep]
        self.rank = int(keep.sum())
        self.gram = design.T @ design

    def coefficients(self, v: AtomVectorField) -> np.ndarray:
        """Minimum-norm least-squares dictionary coefficients of ``v``."""
        self._check(v)
        y = (self._row_scale[:, None] * v.vectors).ravel()
        return self._pinv @ (self._U.T @ y)

    def project(self, v: AtomVectorField) -> AtomVectorField:
        c = self.coefficients(v)
        return AtomVectorField(self.base, np.einsum("mkd,k->md", self.gradients, c))

    def residual(self, v: AtomVectorField) -> float:
        return l2_norm(v - self.project(v), self.metric)

    def matrix(self) -> np.ndarray:
        """The projection as an operator on flattened atom vectors (unweighted coordinates)."""
        m, d = self.base.atoms.shape
        P = np.zeros((m * d, m * d))
        for col in range(m * d):
            e = np.zeros(m * d)
            e[col] = 1.0
            P[:, col] = self.project(AtomVectorField(self.base, e.reshape(m, d))).vectors.ravel()
        return P

    def _check(self, v: AtomVectorField):
        if v.base is not self.base and not (
            v.base.atoms.shape == self.base.atoms.shape
            and np.array_equal(v.base.atoms, self.base.atoms)
            and np.array_equal(v.base.weights, self.base.weights)
        ):
            raise ValidationError("field is not based on the projection's measure")


def project(v: AtomVectorField, P: TangentProjection) -> AtomVectorField:
    """Tangent part ``v^T`` of ``v``."""
    return P.project(v)


def tangency_residual(v: AtomVectorField, P: TangentProjection) -> float:
    """``||v - v^T||`` in ``L2(mu, h)``; zero iff ``v`` lies in the dictionary span."""
    return P.residual(v)


# ---------------------------------------------------------------------------
# Pullback tensor and formal isometries
# ---------------------------------------------------------------------------

Differential = Callable[[AtomVectorField], AtomVectorField]


def pullback_tensor(dF: Differential, v: AtomVectorField, w: AtomVectorField,
                    target_metric: MetricField | None = None) -> float:
    """``(F^* H)_mu(v, w) = H_{F(mu)}(dF v, dF w)``."""
    return l2_inner(dF(v), dF(w), target_metric)


def is_formal_isometry(dF: Differential, samples: Iterable[tuple[AtomVectorField, AtomVectorField]],
                       tol: float = 1e-9, source_metric: MetricField | None = None,
                       target_metric: MetricField | None = None) -> tuple[bool, float]:
    """Check ``(F^* H)(v, w) = H(v, w)`` on sampled pairs; returns ``(ok, worst deviation)``."""
    worst = 0.0
    for v, w in samples:
        dev = abs(pullback_tensor(dF, v, w, target_metric) - l2_inner(v, w, source_metric))
        worst = max(worst, dev)
    return worst <= tol, worst
