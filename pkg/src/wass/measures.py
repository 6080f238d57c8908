"""Finitely supported probability measures and pointwise maps acting on them.

Atoms are compared after snapping to a grid (default ``1e-9``, overridable via
the ``WASS_QUANTIZE`` environment variable) so that "same point" is well
defined for merged pushforward atoms and pushforward fibers.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

DEFAULT_QUANTUM = 1e-9
WEIGHT_SUM_TOL = 1e-12


class ValidationError(ValueError):
    """An input violates a documented invariant (bad weights, shapes, ...)."""


class EvaluationError(ArithmeticError):
    """A map produced a non-finite value at some atom."""


def quantum() -> float:
    """Current quantization grid, honouring ``WASS_QUANTIZE``."""
    raw = os.environ.get("WASS_QUANTIZE")
    if raw is None:
        return DEFAULT_QUANTUM
    try:
        q = float(raw)
    except ValueError as exc:
        raise ValidationError(f"WASS_QUANTIZE must be a positive real, got {raw!r}") from exc
    if not (q > 0 and np.isfinite(q)):
        raise ValidationError(f"WASS_QUANTIZE must be a positive real, got {raw!r}")
    return q


def atom_keys(atoms: np.ndarray, q: float | None = None) -> list[tuple[int, ...]]:
    """Hashable grid keys for each row of ``atoms``."""
    q = quantum() if q is None else q
    snapped = np.rint(np.asarray(atoms, dtype=float) / q).astype(np.int64)
    return [tuple(row) for row in snapped]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Probability measure ``sum_i weights[i] * delta_{atoms[i]}`` on R^d.

    Zero weights are allowed in storage; :func:`support` and the solvers
    ignore them.
    """

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        if atoms.ndim != 2 or atoms.shape[0] == 0 or atoms.shape[1] == 0:
            raise ValidationError(f"atoms must be a non-empty (m, d) array, got shape {atoms.shape}")
        if weights.shape != (atoms.shape[0],):
            raise ValidationError(
                f"weights must have one entry per atom: {weights.shape} vs {atoms.shape[0]} atoms"
            )
        if not np.all(np.isfinite(atoms)):
            raise ValidationError("atom coordinates must be finite")
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise ValidationError("weights must be finite and nonnegative")
        total = weights.sum()
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ValidationError(f"weights must sum to 1 (got {total:.17g})")
        keys = atom_keys(atoms)
        if len(set(keys)) != len(keys):
            raise ValidationError("atoms must be pairwise distinct after quantization")
        object.__setattr__(self, "atoms", _frozen(atoms))
        object.__setattr__(self, "weights", _frozen(weights))

    @classmethod
    def from_points(cls, atoms, weights=None, normalize: bool = False) -> "DiscreteMeasure":
        """Build a measure, merging atoms that coincide after quantization.

        With ``weights=None`` the measure is uniform over the given points.
        """
        atoms = np.asarray(atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        if weights is None:
            weights = np.full(atoms.shape[0], 1.0 / atoms.shape[0])
        weights = np.asarray(weights, dtype=float)
        if normalize:
            weights = weights / weights.sum()
        merged_atoms, merged_weights, _ = merge_atoms(atoms, weights)
        return cls(merged_atoms, merged_weights)

    @classmethod
    def dirac(cls, point) -> "DiscreteMeasure":
        return cls(np.atleast_2d(np.asarray(point, dtype=float)), np.ones(1))

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    def __len__(self) -> int:
        return self.atoms.shape[0]

    def keys(self) -> list[tuple[int, ...]]:
        return atom_keys(self.atoms)

    def restrict(self) -> "DiscreteMeasure":
        """Same measure with zero-weight atoms removed."""
        keep = self.weights > 0
        return DiscreteMeasure(self.atoms[keep], self.weights[keep])

    def to_json(self) -> dict:
        return {
            "d": self.dim,
            "atoms": [[float(c) for c in row] for row in self.atoms],
            "weights": [float(w) for w in self.weights],
        }

    @classmethod
    def from_json(cls, data: dict) -> "DiscreteMeasure":
        return measure_from_json(data)


def merge_atoms(atoms: np.ndarray, weights: np.ndarray):
    """Merge coincident atoms (after quantization), summing their weights.

    Returns ``(atoms, weights, index)`` where ``index[i]`` is the merged
    position of input atom ``i``; the first occurrence's coordinates are kept.
    """
    keys = atom_keys(atoms)
    slot: dict[tuple[int, ...], int] = {}
    index = np.empty(len(keys), dtype=np.int64)
    first = []
    for i, key in enumerate(keys):
        if key not in slot:
            slot[key] = len(first)
            first.append(i)
        index[i] = slot[key]
    merged_weights = np.zeros(len(first))
    np.add.at(merged_weights, index, np.asarray(weights, dtype=float))
    return np.asarray(atoms, dtype=float)[first], merged_weights, index


def support(mu: DiscreteMeasure) -> list[np.ndarray]:
    """Atoms carrying positive mass, in storage order."""
    return [mu.atoms[i] for i in range(len(mu)) if mu.weights[i] > 0]


def same_measure(mu: DiscreteMeasure, nu: DiscreteMeasure, atol: float = 1e-12) -> bool:
    """Equality of measures up to quantization of atoms and ``atol`` on weights."""
    if mu.dim != nu.dim:
        return False
    a = {k: w for k, w in zip(mu.keys(), mu.weights) if w > atol}
    b = {k: w for k, w in zip(nu.keys(), nu.weights) if w > atol}
    if a.keys() != b.keys():
        return False
    return all(abs(a[k] - b[k]) <= atol for k in a)


# ---------------------------------------------------------------------------
# Point maps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PointMap:
    """Smooth map R^d -> R^{d'} with analytic Jacobian.

    ``fn`` and ``jac`` are vectorized over rows: ``fn((m, d)) -> (m, d')`` and
    ``jac((m, d)) -> (m, d', d)``. The flags record properties the
    constructors guarantee; they are not verified globally.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    jac: Callable[[np.ndarray], np.ndarray]
    dim_in: int
    dim_out: int
    name: str = "map"
    injective: bool = False
    isometry: bool = False
    proper: bool = True
    inverse: "PointMap | None" = field(default=None, repr=False, compare=False)

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.asarray(self.fn(x), dtype=float).reshape(x.shape[0], self.dim_out)
        bad = np.flatnonzero(~np.all(np.isfinite(y), axis=1))
        if bad.size:
            raise EvaluationError(f"{self.name}: non-finite image at atom index {int(bad[0])}")
        return y

    def jacobian(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        J = np.asarray(self.jac(x), dtype=float).reshape(x.shape[0], self.dim_out, self.dim_in)
        bad = np.flatnonzero(~np.all(np.isfinite(J), axis=(1, 2)))
        if bad.size:
            raise EvaluationError(f"{self.name}: non-finite jacobian at atom index {int(bad[0])}")
        return J

    def then(self, g: "PointMap") -> "PointMap":
        """Composition ``g o self``."""
        if g.dim_in != self.dim_out:
            raise ValidationError(f"cannot compose {g.name} after {self.name}: dimension mismatch")
        f = self

        def fn(x):
            return g.fn(f.fn(x))

        def jac(x):
            return np.einsum("mij,mjk->mik", g.jac(f.fn(x)), f.jac(x))

        inv = None
        if f.inverse is not None and g.inverse is not None:
            inv = g.inverse.then(f.inverse)
        return PointMap(
            fn, jac, f.dim_in, g.dim_out, name=f"{g.name}o{f.name}",
            injective=f.injective and g.injective,
            isometry=f.isometry and g.isometry,
            proper=f.proper and g.proper,
            inverse=inv,
        )


def affine(A, b=None, name: str = "affine") -> PointMap:
    """``x -> A x + b``; carries its inverse when ``A`` is square and invertible."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    dout, din = A.shape
    b = np.zeros(dout) if b is None else np.asarray(b, dtype=float).reshape(dout)
    A_ro, b_ro = _frozen(A), _frozen(b)

    def fn(x):
        return x @ A_ro.T + b_ro

    def jac(x):
        return np.broadcast_to(A_ro, (x.shape[0], dout, din))

    inverse = None
    injective = False
    isometry = False
    if dout == din:
        sv = np.linalg.svd(A, compute_uv=False)
        injective = bool(sv[-1] > 1e-12 * max(sv[0], 1.0))
        isometry = bool(np.allclose(A.T @ A, np.eye(din), atol=1e-12))
        if injective:
            Ainv = np.linalg.inv(A)
            inverse = PointMap(
                (lambda x, Ai=_frozen(Ainv), c=_frozen(Ainv @ b): x @ Ai.T - c),
                (lambda x, Ai=_frozen(Ainv): np.broadcast_to(Ai, (x.shape[0], din, din))),
                din, din, name=f"{name}^-1", injective=True, isometry=isometry,
            )
    return PointMap(fn, jac, din, dout, name=name, injective=injective,
                    isometry=isometry, inverse=inverse)


def identity(d: int) -> PointMap:
    return affine(np.eye(d), name="identity")


def translation(u) -> PointMap:
    u = np.asarray(u, dtype=float).ravel()
    return affine(np.eye(u.size), u, name="translation")


def scaling(s: float, d: int) -> PointMap:
    return affine(s * np.eye(d), name=f"scaling({s:g})")


def rotation(theta: float, center=None) -> PointMap:
    """Planar rotation by ``theta`` about ``center`` (default origin)."""
    c, s = np.cos(theta), np.sin(theta)
    R = np.array([[c, -s], [s, c]])
    center = np.zeros(2) if center is None else np.asarray(center, dtype=float)
    return affine(R, center - R @ center, name=f"rotation({theta:g})")


def constant(c, d: int) -> PointMap:
    c = _frozen(np.atleast_1d(np.asarray(c, dtype=float)))
    return PointMap(
        lambda x: np.broadcast_to(c, (x.shape[0], c.size)).copy(),
        lambda x: np.zeros((x.shape[0], c.size, d)),
        d, c.size, name="constant",
    )


def square(d: int) -> PointMap:
    """Componentwise ``x -> x**2`` (not injective)."""
    return PointMap(
        lambda x: x**2,
        lambda x: np.einsum("mi,ij->mij", 2.0 * x, np.eye(d)),
        d, d, name="square",
    )


# ---------------------------------------------------------------------------
# Pushforward
# ---------------------------------------------------------------------------


def pushforward(f: PointMap, mu: DiscreteMeasure) -> DiscreteMeasure:
    """Image measure ``f_# mu``; atoms with equal quantized image are merged."""
    if f.dim_in != mu.dim:
        raise ValidationError(f"{f.name} expects dimension {f.dim_in}, measure has {mu.dim}")
    images = f(mu.atoms)
    atoms, weights, _ = merge_atoms(images, mu.weights)
    return DiscreteMeasure(atoms, weights)


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------


def _require(data: dict, key: str, where: str):
    if not isinstance(data, dict):
        raise ValidationError(f"{where}: expected a JSON object")
    if key not in data:
        raise ValidationError(f"{where}: missing field '{key}'")
    return data[key]


def measure_from_json(data: dict, where: str = "measure") -> DiscreteMeasure:
    d = _require(data, "d", where)
    atoms = _require(data, "atoms", where)
    weights = _require(data, "weights", where)
    if not isinstance(d, int) or d < 1:
        raise ValidationError(f"{where}: field 'd' must be a positive integer")
    try:
        atoms = np.asarray(atoms, dtype=float)
        weights = np.asarray(weights, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{where}: fields 'atoms'/'weights' must be numeric arrays") from exc
    if atoms.ndim != 2 or atoms.shape[1] != d:
        raise ValidationError(f"{where}: field 'atoms' must be a list of length-{d} coordinate lists")
    return DiscreteMeasure(atoms, weights)


def dumps(obj) -> str:
    """Deterministic JSON; floats round-trip (repr keeps 17 significant digits)."""
    return json.dumps(obj, sort_keys=False, indent=None, separators=(", ", ": "))


def load_json(path: str | os.PathLike):
    """Read a JSON file, reporting the failing position on syntax errors."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(
            f"{path}: malformed JSON at line {exc.lineno} column {exc.colno} (char {exc.pos}): {exc.msg}"
        ) from exc


def random_measure(rng: np.random.Generator, m: int, d: int, scale: float = 1.0) -> DiscreteMeasure:
    """Random measure with ``m`` atoms in ``[-scale, scale]^d`` and Dirichlet weights."""
    atoms = rng.uniform(-scale, scale, size=(m, d))
    weights = rng.dirichlet(np.ones(m))
    weights = weights / weights.sum()
    return DiscreteMeasure.from_points(atoms, weights)
