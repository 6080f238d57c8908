"""Convex mixing ``alpha = lam * mu + (1 - lam) * nu`` of discrete measures and
of pushforward maps, with the canonical accompanying velocity on the mixture.

For atomic measures the Lebesgue decomposition is a partition of the joint
support: atoms charged only by ``mu`` (A), only by ``nu`` (B), or by both (C).
On C the Radon-Nikodym ratio is ``rho = nu / mu`` atom-wise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curves import MeasureCurve, VelocityCurve
from .geometry import AtomVectorField, MetricField, euclidean_metric
from .measures import DiscreteMeasure, PointMap, ValidationError, atom_keys, pushforward
from .pushdiff import differential
from .tangent import GradientDictionary, TangentProjection


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not 0.0 <= lam <= 1.0:
        raise ValidationError(f"lambda must lie in [0, 1], got {lam}")
    return lam


@dataclass(frozen=True, eq=False)
class MixDecomposition:
    """Partition of the joint support of ``mu`` and ``nu``.

    ``atoms`` lists the union of both supports (``mu`` atoms first);
    ``mu_weights`` / ``nu_weights`` are the two measures on that list.
    ``mu_index[i]`` is the union slot of ``mu`` atom ``i`` (``-1`` for
    zero-weight atoms), likewise ``nu_index``.
    """

    lam: float
    atoms: np.ndarray
    mu_weights: np.ndarray
    nu_weights: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    mu_index: np.ndarray
    nu_index: np.ndarray

    @property
    def beta(self) -> np.ndarray:
        """Common part on C, equal to ``mu`` there."""
        return self.mu_weights[self.C]

    @property
    def rho(self) -> np.ndarray:
        """``d(nu|_C) / d beta`` on C; strictly positive."""
        return self.nu_weights[self.C] / self.mu_weights[self.C]

    @property
    def tau_mu(self) -> np.ndarray:
        out = np.zeros_like(self.mu_weights)
        out[self.A] = self.mu_weights[self.A]
        return out

    @property
    def tau_nu(self) -> np.ndarray:
        out = np.zeros_like(self.nu_weights)
        out[self.B] = self.nu_weights[self.B]
        return out

    @property
    def alpha(self) -> DiscreteMeasure:
        """The mixture on the union atoms (zero weights kept when ``lam`` is 0 or 1)."""
        w = self.lam * self.mu_weights + (1 - self.lam) * self.nu_weights
        return DiscreteMeasure(self.atoms, w / w.sum())

    def summary(self) -> dict:
        rho = self.rho
        return {
            "A": int(self.A.size),
            "B": int(self.B.size),
            "C": int(self.C.size),
            "rho_min": float(rho.min()) if rho.size else None,
            "rho_max": float(rho.max()) if rho.size else None,
        }


def decompose(mu: DiscreteMeasure, nu: DiscreteMeasure, lam: float) -> MixDecomposition:
    lam = _check_lambda(lam)
    if mu.dim != nu.dim:
        raise ValidationError("measures live in different dimensions")
    slot: dict[tuple[int, ...], int] = {}
    atoms = []
    mu_index = np.full(len(mu), -1, dtype=np.int64)
    nu_index = np.full(len(nu), -1, dtype=np.int64)
    for index, measure in ((mu_index, mu), (nu_index, nu)):
        for i, key in enumerate(atom_keys(measure.atoms)):
            if measure.weights[i] <= 0:
                continue
            if key not in slot:
                slot[key] = len(atoms)
                atoms.append(measure.atoms[i])
            index[i] = slot[key]
    n = len(atoms)
    mu_w = np.zeros(n)
    nu_w = np.zeros(n)
    mu_w[mu_index[mu_index >= 0]] = mu.weights[mu_index >= 0]
    nu_w[nu_index[nu_index >= 0]] = nu.weights[nu_index >= 0]
    A = np.flatnonzero((mu_w > 0) & (nu_w == 0))
    B = np.flatnonzero((mu_w == 0) & (nu_w > 0))
    C = np.flatnonzero((mu_w > 0) & (nu_w > 0))
    dec = MixDecomposition(lam, np.array(atoms), mu_w, nu_w, A, B, C, mu_index, nu_index)
    assert np.all(dec.rho > 0)
    return dec


def mix_measures(mu: DiscreteMeasure, nu: DiscreteMeasure, lam: float) -> DiscreteMeasure:
    """``lam * mu + (1 - lam) * nu`` on the union of supports."""
    return decompose(mu, nu, lam).alpha.restrict()


def _on_union(dec: MixDecomposition, field: AtomVectorField, index: np.ndarray) -> np.ndarray:
    out = np.zeros((dec.atoms.shape[0], dec.atoms.shape[1]))
    keep = index >= 0
    out[index[keep]] = field.vectors[keep]
    return out


def canonical_field(dec: MixDecomposition, v: AtomVectorField, w: AtomVectorField) -> AtomVectorField:
    """Canonical velocity on the mixture: ``v`` on A, ``w`` on B and
    ``(lam v + rho (1 - lam) w) / (lam + (1 - lam) rho)`` on C."""
    if len(v.base) != dec.mu_index.size or len(w.base) != dec.nu_index.size:
        raise ValidationError("fields are not based on the decomposed measures")
    lam = dec.lam
    V = _on_union(dec, v, dec.mu_index)
    W = _on_union(dec, w, dec.nu_index)
    u = np.zeros_like(V)
    u[dec.A] = V[dec.A]
    u[dec.B] = W[dec.B]
    rho = dec.rho[:, None]
    u[dec.C] = (lam * V[dec.C] + rho * (1 - lam) * W[dec.C]) / (lam + (1 - lam) * rho)
    return AtomVectorField(dec.alpha, u)


def weak_identity(dec: MixDecomposition, v: AtomVectorField, w: AtomVectorField) -> tuple[np.ndarray, np.ndarray]:
    """Atom-wise momenta ``alpha * u`` and ``lam * mu * v + (1 - lam) * nu * w``.

    Equality of the two makes every test-function pairing linear in the mixture.
    """
    u = canonical_field(dec, v, w)
    lhs = u.base.weights[:, None] * u.vectors
    V = _on_union(dec, v, dec.mu_index)
    W = _on_union(dec, w, dec.nu_index)
    rhs = dec.lam * dec.mu_weights[:, None] * V + (1 - dec.lam) * dec.nu_weights[:, None] * W
    return lhs, rhs


def l2_bounds(dec: MixDecomposition, v: AtomVectorField, w: AtomVectorField,
              metric: MetricField | None = None) -> dict:
    """Norm of the canonical field against the estimates used to show it lies in L2.

    Keys: ``norm`` (``||u||_alpha``), ``crude`` (square root of
    ``2 (lam ||v||^2 + (1 - lam) ||w||^2)``), ``split`` (the A/B/C triangle
    bound ``sqrt(lam) ||v|| + sqrt(1 - lam) ||w|| + ||u|_C||``), and ``c_part``
    with ``c_bound`` for the C-part estimate.
    """
    metric = metric or euclidean_metric(dec.atoms.shape[1])
    lam = dec.lam
    u = canonical_field(dec, v, w)
    x = dec.atoms
    V = _on_union(dec, v, dec.mu_index)
    W = _on_union(dec, w, dec.nu_index)
    sq_u = metric.inner(x, u.vectors, u.vectors)
    sq_v = metric.inner(x, V, V)
    sq_w = metric.inner(x, W, W)
    alpha = u.base.weights
    norm_v = np.sqrt(dec.mu_weights @ sq_v)
    norm_w = np.sqrt(dec.nu_weights @ sq_w)
    C = dec.C
    rho = dec.rho
    beta = dec.beta
    rho_bar = 1.0 / (lam + (1 - lam) * rho)
    c_part = np.sqrt(alpha[C] @ sq_u[C])
    c_bound = np.sqrt(rho_bar * beta @ (lam**2 * sq_v[C])) + np.sqrt(
        rho_bar * beta @ (((1 - lam) * rho) ** 2 * sq_w[C])
    )
    return {
        "norm": float(np.sqrt(alpha @ sq_u)),
        "crude": float(np.sqrt(2 * (lam * norm_v**2 + (1 - lam) * norm_w**2))),
        "split": float(np.sqrt(lam) * norm_v + np.sqrt(1 - lam) * norm_w + c_part),
        "c_part": float(c_part),
        "c_bound": float(c_bound),
    }


# ---------------------------------------------------------------------------
# Curves
# ---------------------------------------------------------------------------


def mix_curves(curve1: MeasureCurve, vel1: VelocityCurve, curve2: MeasureCurve, vel2: VelocityCurve,
               lam: float, dictionary: GradientDictionary | None = None,
               metric: MetricField | None = None) -> tuple[MeasureCurve, VelocityCurve]:
    """Slice-wise mixture of two curves with the canonical velocity.

    With a ``dictionary`` the velocity is projected onto the tangent span at
    each slice.
    """
    lam = _check_lambda(lam)
    if curve1.times.shape != curve2.times.shape or not np.allclose(curve1.times, curve2.times, atol=1e-12):
        raise ValidationError("mixed curves must share their time grid")
    measures = []
    fields = []
    for k, (mu, nu) in enumerate(zip(curve1.measures, curve2.measures)):
        dec = decompose(mu, nu, lam)
        measures.append(dec.alpha)
        if 0 < k < len(curve1) - 1:
            u = canonical_field(dec, vel1.fields[k - 1], vel2.fields[k - 1])
            if dictionary is not None:
                u = TangentProjection(u.base, dictionary, metric).project(u)
            fields.append(u)
    curve = MeasureCurve(curve1.times, tuple(measures))
    return curve, VelocityCurve(curve.interior_times, tuple(fields))


def mixed_differential(f1: PointMap, f2: PointMap, lam: float, curve: MeasureCurve, velocity: VelocityCurve,
                       dictionary: GradientDictionary,
                       metric: MetricField | None = None) -> tuple[MeasureCurve, VelocityCurve]:
    """Differential of ``lam F1 + (1 - lam) F2`` along a tangent couple, ``Fi = (fi)_#``.

    Per slice: project the canonical mixture of ``dF1(v_t)`` and ``dF2(v_t)``.
    """
    curve1 = MeasureCurve(curve.times, tuple(pushforward(f1, m) for m in curve.measures))
    curve2 = MeasureCurve(curve.times, tuple(pushforward(f2, m) for m in curve.measures))
    if velocity.times.shape != curve.interior_times.shape:
        raise ValidationError("velocity is not aligned with the curve")
    d1 = tuple(differential(f1, m, v, dictionary, metric) for m, v in zip(curve.measures[1:-1], velocity.fields))
    d2 = tuple(differential(f2, m, v, dictionary, metric) for m, v in zip(curve.measures[1:-1], velocity.fields))
    return mix_curves(
        curve1, VelocityCurve(curve.interior_times, d1),
        curve2, VelocityCurve(curve.interior_times, d2),
        lam, dictionary, metric,
    )
