"""Riemannian metric fields evaluated at atoms, and the weighted L2 structure
on vector fields along a discrete measure."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .measures import DiscreteMeasure, ValidationError

SPD_TOL = 1e-12


@dataclass(frozen=True)
class MetricField:
    """Position-dependent SPD tensor ``h_x``.

    ``flavor`` is ``"euclidean"`` or ``"conformal"``. A conformal field is
    ``nu(x)**2`` times the Euclidean tensor and carries ``nu`` with its
    analytic gradient.
    """

    dim: int
    flavor: str = "euclidean"
    nu: Callable[[np.ndarray], np.ndarray] | None = None
    nu_grad: Callable[[np.ndarray], np.ndarray] | None = None

    def factor(self, x: np.ndarray) -> np.ndarray:
        """Conformal factor ``nu(x)**2`` per row (ones for Euclidean)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.flavor == "euclidean":
            return np.ones(x.shape[0])
        nu = np.asarray(self.nu(x), dtype=float).reshape(x.shape[0])
        if np.any(~np.isfinite(nu)) or np.any(nu**2 <= SPD_TOL):
            raise ValidationError("conformal factor must be finite and positive at every atom")
        return nu**2

    def tensor(self, x: np.ndarray) -> np.ndarray:
        """``h_x`` as an ``(m, d, d)`` array."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self.factor(x)[:, None, None] * np.eye(self.dim)[None]

    def inner(self, x: np.ndarray, v: np.ndarray, w: np.ndarray) -> np.ndarray:
        """Pointwise ``h_x(v, w)`` per row."""
        return self.factor(x) * np.einsum("md,md->m", v, w)

    def sharp(self, x: np.ndarray, covector: np.ndarray) -> np.ndarray:
        """Raise an index: the vector ``g`` with ``h_x(g, .) = covector``.

        ``covector`` may carry extra leading axes after the atom axis, e.g.
        ``(m, k, d)`` for a stack of differentials.
        """
        f = self.factor(x)
        return covector / f.reshape((-1,) + (1,) * (covector.ndim - 1))

    def flat(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Lower an index: the covector ``h_x(v, .)``."""
        return self.factor(x)[:, None] * v

    def cholesky(self, x: np.ndarray) -> np.ndarray:
        """Per-atom square-root scale ``L`` with ``h_x = L L^T`` (scalar for conformal)."""
        return np.sqrt(self.factor(x))


def euclidean_metric(d: int) -> MetricField:
    return MetricField(d)


def conformal_metric(d: int, nu, nu_grad) -> MetricField:
    return MetricField(d, "conformal", nu, nu_grad)


def cosine_conformal_factor(eps: float = 0.5, d: int = 2) -> MetricField:
    """``nu(x) = 1 + eps * cos(2 pi x_1)`` on the torus; nonconstant for ``eps != 0``."""
    if not abs(eps) < 1:
        raise ValidationError("need |eps| < 1 to keep nu positive")

    def nu(x):
        return 1.0 + eps * np.cos(2 * np.pi * x[:, 0])

    def nu_grad(x):
        g = np.zeros_like(x)
        g[:, 0] = -2 * np.pi * eps * np.sin(2 * np.pi * x[:, 0])
        return g

    return conformal_metric(d, nu, nu_grad)


@dataclass(frozen=True, eq=False)
class AtomVectorField:
    """One tangent vector per atom of ``base``."""

    base: DiscreteMeasure
    vectors: np.ndarray

    def __post_init__(self):
        v = np.array(self.vectors, dtype=float)
        if v.ndim == 1 and self.base.dim == 1:
            v = v[:, None]
        if v.shape != self.base.atoms.shape:
            raise ValidationError(f"field shape {v.shape} does not match base atoms {self.base.atoms.shape}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("field vectors must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "vectors", v)

    @classmethod
    def zeros(cls, base: DiscreteMeasure) -> "AtomVectorField":
        return cls(base, np.zeros_like(base.atoms))

    @classmethod
    def constant(cls, base: DiscreteMeasure, u) -> "AtomVectorField":
        return cls(base, np.broadcast_to(np.asarray(u, dtype=float), base.atoms.shape))

    def __add__(self, other: "AtomVectorField") -> "AtomVectorField":
        _check_same_base(self, other)
        return AtomVectorField(self.base, self.vectors + other.vectors)

    def __sub__(self, other: "AtomVectorField") -> "AtomVectorField":
        _check_same_base(self, other)
        return AtomVectorField(self.base, self.vectors - other.vectors)

    def __mul__(self, c: float) -> "AtomVectorField":
        return AtomVectorField(self.base, float(c) * self.vectors)

    __rmul__ = __mul__


def _check_same_base(v: AtomVectorField, w: AtomVectorField):
    if v.base is w.base:
        return
    if v.base.atoms.shape != w.base.atoms.shape or not (
        np.array_equal(v.base.atoms, w.base.atoms) and np.array_equal(v.base.weights, w.base.weights)
    ):
        raise ValidationError("vector fields live on different base measures")


def l2_inner(v: AtomVectorField, w: AtomVectorField, h: MetricField | None = None) -> float:
    """``H_mu(v, w) = sum_i mu_i h_{x_i}(v_i, w_i)``."""
    _check_same_base(v, w)
    mu = v.base
    h = h or euclidean_metric(mu.dim)
    return float(np.dot(mu.weights, h.inner(mu.atoms, v.vectors, w.vectors)))


def l2_norm(v: AtomVectorField, h: MetricField | None = None) -> float:
    return float(np.sqrt(max(l2_inner(v, v, h), 0.0)))
