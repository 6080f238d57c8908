"""Time-sampled curves of discrete measures with their velocity fields.

Covers the metric derivative, the weak continuity-equation residual, the
kinetic (Benamou-Brenier) action and curves generated by flow maps or by
displacement interpolation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .geometry import AtomVectorField, MetricField, euclidean_metric, l2_norm
from .measures import DiscreteMeasure, ValidationError, atom_keys, measure_from_json, merge_atoms
from .ot import Metric, displacement_interpolation, euclidean, optimal_plan, wasserstein
from .tangent import GradientDictionary


@dataclass(frozen=True, eq=False)
class MeasureCurve:
    times: np.ndarray
    measures: tuple[DiscreteMeasure, ...]

    def __post_init__(self):
        t = np.array(self.times, dtype=float)
        ms = tuple(self.measures)
        if t.ndim != 1 or t.size < 2:
            raise ValidationError("a curve needs at least two time samples")
        if len(ms) != t.size:
            raise ValidationError(f"{t.size} times but {len(ms)} measures")
        if np.any(np.diff(t) <= 0) or t[0] < 0 or t[-1] > 1:
            raise ValidationError("times must be strictly increasing within [0, 1]")
        if len({m.dim for m in ms}) != 1:
            raise ValidationError("all measures of a curve must share the ambient dimension")
        t.flags.writeable = False
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "measures", ms)

    def __len__(self) -> int:
        return self.times.size

    @property
    def interior_times(self) -> np.ndarray:
        return self.times[1:-1]

    def to_json(self) -> dict:
        return {"times": [float(t) for t in self.times], "measures": [m.to_json() for m in self.measures]}

    @classmethod
    def from_json(cls, data: dict) -> "MeasureCurve":
        if not isinstance(data, dict) or "times" not in data or "measures" not in data:
            raise ValidationError("curve: expected fields 'times' and 'measures'")
        measures = [measure_from_json(m, where=f"curve.measures[{k}]") for k, m in enumerate(data["measures"])]
        return cls(np.asarray(data["times"], dtype=float), tuple(measures))


@dataclass(frozen=True, eq=False)
class VelocityCurve:
    """One vector field per interior time sample; endpoints carry none."""

    times: np.ndarray
    fields: tuple[AtomVectorField, ...]

    def __post_init__(self):
        t = np.array(self.times, dtype=float)
        if len(self.fields) != t.size:
            raise ValidationError(f"{t.size} velocity times but {len(self.fields)} fields")
        t.flags.writeable = False
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "fields", tuple(self.fields))

    def to_json(self) -> dict:
        return {
            "times": [float(t) for t in self.times],
            "fields": [[[float(c) for c in row] for row in f.vectors] for f in self.fields],
        }

    @classmethod
    def from_json(cls, data: dict, curve: MeasureCurve) -> "VelocityCurve":
        if not isinstance(data, dict) or "times" not in data or "fields" not in data:
            raise ValidationError("velocity: expected fields 'times' and 'fields'")
        times = np.asarray(data["times"], dtype=float)
        interior = curve.measures[1:-1]
        if times.shape != curve.interior_times.shape or not np.allclose(times, curve.interior_times, atol=1e-12):
            raise ValidationError("velocity: 'times' must equal the curve's interior times")
        fields = []
        for k, (mu, vecs) in enumerate(zip(interior, data["fields"])):
            try:
                fields.append(AtomVectorField(mu, np.asarray(vecs, dtype=float).reshape(mu.atoms.shape)))
            except ValueError as exc:
                raise ValidationError(f"velocity.fields[{k}]: {exc}") from exc
        return cls(times, tuple(fields))


def _check_aligned(curve: MeasureCurve, velocity: VelocityCurve):
    if velocity.times.shape != curve.interior_times.shape or not np.allclose(
        velocity.times, curve.interior_times, atol=1e-12
    ):
        raise ValidationError("velocity times must be the curve's interior times")
    for k, (mu, v) in enumerate(zip(curve.measures[1:-1], velocity.fields)):
        if v.base is not mu and not (
            v.base.atoms.shape == mu.atoms.shape and np.array_equal(v.base.atoms, mu.atoms)
        ):
            raise ValidationError(f"velocity field {k} is not based on the curve measure at that time")


# ---------------------------------------------------------------------------
# Space-time test functions
# ---------------------------------------------------------------------------


def bump(j: int, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``chi_j(s) = s (1 - s) (2 s - 1)^(j-1)`` and its derivative on ``[0, 1]``."""
    s = np.asarray(s, dtype=float)
    base = s * (1 - s)
    dbase = 1 - 2 * s
    odd = 2 * s - 1
    if j == 1:
        return base, dbase
    return base * odd ** (j - 1), dbase * odd ** (j - 1) + base * 2 * (j - 1) * odd ** (j - 2)


@dataclass(frozen=True)
class SpaceTimeTests:
    """Products ``psi_k(x) chi_j(t)`` of a spatial dictionary and polynomial time bumps.

    The bumps vanish at both ends of the curve's time span, which is where
    the velocity is not sampled.
    """

    spatial: GradientDictionary
    n_bumps: int = 3

    @classmethod
    def parse(cls, spec: str, dim: int) -> "SpaceTimeTests":
        """``"trig:3,bumps:4"`` (bumps default to 3)."""
        spatial = None
        n_bumps = 3
        for part in spec.split(","):
            part = part.strip()
            if part.startswith("bumps:"):
                try:
                    n_bumps = int(part.split(":")[1])
                except ValueError as exc:
                    raise ValidationError(f"bad bump count in {spec!r}") from exc
            else:
                spatial = GradientDictionary.parse(part, dim)
        if spatial is None:
            raise ValidationError(f"test spec {spec!r} names no spatial family")
        if n_bumps < 1:
            raise ValidationError("need at least one time bump")
        return cls(spatial, n_bumps)

    def __len__(self) -> int:
        return len(self.spatial) * self.n_bumps


def continuity_residuals(curve: MeasureCurve, velocity: VelocityCurve, tests: SpaceTimeTests,
                         h: MetricField | None = None) -> np.ndarray:
    """Weak-form defect ``int int (d_t phi + h(grad phi, v_t)) d mu_t dt`` for every test.

    Time integration is the composite trapezoid rule on the curve's own grid.
    Returns an ``(n_spatial, n_bumps)`` array.
    """
    _check_aligned(curve, velocity)
    d = curve.measures[0].dim
    if tests.spatial.dim != d:
        raise ValidationError("test functions and curve live in different dimensions")
    h = h or euclidean_metric(d)
    t = curve.times
    span = t[-1] - t[0]
    s = (t - t[0]) / span
    nk = len(tests.spatial)
    mass_term = np.empty((t.size, nk))
    flux_term = np.zeros((t.size, nk))
    for k, mu in enumerate(curve.measures):
        mass_term[k] = mu.weights @ tests.spatial.values(mu.atoms)
    for k, v in enumerate(velocity.fields, start=1):
        x = v.base.atoms
        grads = h.sharp(x, tests.spatial.differentials(x))  # (m, K, d)
        pair = h.factor(x)[:, None] * np.einsum("mkd,md->mk", grads, v.vectors)
        flux_term[k] = v.base.weights @ pair
    quad = np.zeros(t.size)
    dt = np.diff(t)
    quad[:-1] += dt / 2
    quad[1:] += dt / 2
    out = np.empty((nk, tests.n_bumps))
    for j in range(tests.n_bumps):
        chi, dchi = bump(j + 1, s)
        integrand = (dchi / span)[:, None] * mass_term + chi[:, None] * flux_term
        out[:, j] = quad @ integrand
    return out


def continuity_residual(curve: MeasureCurve, velocity: VelocityCurve, tests: SpaceTimeTests,
                        h: MetricField | None = None) -> float:
    """Largest absolute weak-form defect over the test family."""
    return float(np.max(np.abs(continuity_residuals(curve, velocity, tests, h))))


# ---------------------------------------------------------------------------
# Metric derivative and action
# ---------------------------------------------------------------------------


def metric_derivative(curve: MeasureCurve, t_index: int, metric: Metric = euclidean) -> float:
    """Central-difference speed ``W2(mu_{k+1}, mu_{k-1}) / (t_{k+1} - t_{k-1})``."""
    if not 0 < t_index < len(curve) - 1:
        raise ValidationError(f"metric derivative needs an interior index, got {t_index}")
    k = t_index
    dist = wasserstein(curve.measures[k - 1], curve.measures[k + 1], 2, metric)
    return dist / (curve.times[k + 1] - curve.times[k - 1])


def bb_action(curve: MeasureCurve, velocity: VelocityCurve, h: MetricField | None = None) -> float:
    """Time integral of ``||v_t||_{L2(mu_t)}``.

    Composite trapezoid on the native grid; the endpoint speeds, which are not
    sampled, are extrapolated linearly from the two nearest interior nodes.
    """
    _check_aligned(curve, velocity)
    if not velocity.fields:
        raise ValidationError("action needs at least one interior velocity")
    speeds = np.array([l2_norm(v, h) for v in velocity.fields])
    t = curve.times
    if speeds.size == 1:
        ends = (speeds[0], speeds[0])
    else:
        lo = speeds[0] + (speeds[0] - speeds[1]) * (t[1] - t[0]) / (t[2] - t[1])
        hi = speeds[-1] + (speeds[-1] - speeds[-2]) * (t[-1] - t[-2]) / (t[-2] - t[-3])
        ends = (max(lo, 0.0), max(hi, 0.0))
    full = np.concatenate([[ends[0]], speeds, [ends[1]]])
    return float(np.sum(np.diff(t) * (full[:-1] + full[1:]) / 2))


# ---------------------------------------------------------------------------
# Curve generators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FlowFamily:
    """Time-indexed point maps ``x -> f(t, x)`` with analytic ``d/dt f(t, x)``."""

    fn: Callable[[float, np.ndarray], np.ndarray]
    dt: Callable[[float, np.ndarray], np.ndarray]
    name: str = "flow"


def translation_flow(u) -> FlowFamily:
    u = np.asarray(u, dtype=float)
    return FlowFamily(lambda t, x: x + t * u, lambda t, x: np.broadcast_to(u, x.shape).copy(), "translation")


def dilation_flow(rate: float = 1.0) -> FlowFamily:
    """``f_t(x) = exp(rate t) x``."""
    return FlowFamily(
        lambda t, x: np.exp(rate * t) * x,
        lambda t, x: rate * np.exp(rate * t) * x,
        f"dilation({rate:g})",
    )


def rotation_flow(omega: float = 1.0) -> FlowFamily:
    def rot(t):
        c, s = np.cos(omega * t), np.sin(omega * t)
        return np.array([[c, -s], [s, c]])

    def drot(t):
        c, s = np.cos(omega * t), np.sin(omega * t)
        return omega * np.array([[-s, -c], [c, -s]])

    return FlowFamily(lambda t, x: x @ rot(t).T, lambda t, x: x @ drot(t).T, f"rotation({omega:g})")


def particle_path_flow(start: np.ndarray, end: np.ndarray, bend: np.ndarray) -> FlowFamily:
    """Particles ``i`` move on ``(1-t) a_i + t b_i + sin(pi t) c_i``.

    The flow is indexed by particle, so it must be applied to a measure whose
    atoms are exactly ``start`` in order.
    """
    start, end, bend = (np.asarray(a, dtype=float) for a in (start, end, bend))

    def fn(t, x):
        return (1 - t) * start + t * end + np.sin(np.pi * t) * bend

    def dt(t, x):
        return end - start + np.pi * np.cos(np.pi * t) * bend

    return FlowFamily(fn, dt, "particle-path")


def flow_curve(flow: FlowFamily, mu0: DiscreteMeasure, times: Sequence[float]) -> tuple[MeasureCurve, VelocityCurve]:
    """``mu_t = (f_t)_# mu0`` with particle velocities ``v_t(f_t(x)) = d/dt f_t(x)``."""
    times = np.asarray(times, dtype=float)
    measures = []
    fields = []
    for k, t in enumerate(times):
        y = np.asarray(flow.fn(t, mu0.atoms), dtype=float)
        if not np.all(np.isfinite(y)):
            raise ValidationError(f"{flow.name}: non-finite image at t={t}")
        if len(set(atom_keys(y))) != len(y):
            raise ValidationError(f"{flow.name}: map is not invertible on the atoms at t={t}")
        mu = DiscreteMeasure(y, mu0.weights)
        measures.append(mu)
        if 0 < k < times.size - 1:
            fields.append(AtomVectorField(mu, np.asarray(flow.dt(t, mu0.atoms), dtype=float)))
    curve = MeasureCurve(times, tuple(measures))
    return curve, VelocityCurve(curve.interior_times, tuple(fields))


def geodesic_curve(mu: DiscreteMeasure, nu: DiscreteMeasure, times: Sequence[float],
                   plan=None) -> tuple[MeasureCurve, VelocityCurve]:
    """Displacement interpolation between ``mu`` and ``nu`` with particle velocities.

    Mass ``gamma_ij`` travels at constant velocity ``y_j - x_i``; where
    particles share a location, the velocity there is their mass-weighted mean.
    """
    if plan is None:
        plan = optimal_plan(mu, nu, 2)[0]
    times = np.asarray(times, dtype=float)
    i, j = np.nonzero(plan.matrix > 0)
    mass = plan.matrix[i, j]
    vel = nu.atoms[j] - mu.atoms[i]
    measures = []
    fields = []
    for k, t in enumerate(times):
        if t in (0.0, 1.0):
            measures.append(displacement_interpolation(mu, nu, plan, t))
            continue
        points = (1 - t) * mu.atoms[i] + t * nu.atoms[j]
        atoms, weights, index = merge_atoms(points, mass)
        slice_mu = DiscreteMeasure(atoms, weights / weights.sum())
        measures.append(slice_mu)
        if 0 < k < times.size - 1:
            v = np.zeros_like(atoms)
            np.add.at(v, index, mass[:, None] * vel)
            fields.append(AtomVectorField(slice_mu, v / weights[:, None]))
    curve = MeasureCurve(times, tuple(measures))
    return curve, VelocityCurve(curve.interior_times, tuple(fields))
