"""Exact optimal transport between discrete measures.

The solver is a transportation (network) simplex on the spanning-tree bases
of the transport polytope. :func:`brute_force_plan` enumerates every basic
feasible solution and is meant as an independent oracle for small instances.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .measures import DiscreteMeasure, ValidationError, merge_atoms

MARGINAL_TOL = 1e-9
BRUTE_FORCE_MAX_CELLS = 16

Metric = Callable[[np.ndarray, np.ndarray], np.ndarray]


class SolverError(RuntimeError):
    """The LP solver failed on a valid instance (internal error)."""


# ---------------------------------------------------------------------------
# Ground distances
# ---------------------------------------------------------------------------


def euclidean(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Pairwise Euclidean distances, ``(m, d) x (n, d) -> (m, n)``."""
    diff = np.asarray(x, dtype=float)[:, None, :] - np.asarray(y, dtype=float)[None, :, :]
    return np.sqrt(np.einsum("mnd,mnd->mn", diff, diff))


def torus(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Pairwise geodesic distances on the flat torus ``[0, 1)^d``."""
    diff = np.abs(np.asarray(x, dtype=float)[:, None, :] - np.asarray(y, dtype=float)[None, :, :])
    diff = np.mod(diff, 1.0)
    diff = np.minimum(diff, 1.0 - diff)
    return np.sqrt(np.einsum("mnd,mnd->mn", diff, diff))


METRICS: dict[str, Metric] = {"euclidean": euclidean, "torus": torus}


def _check_p(p: float) -> float:
    p = float(p)
    if not np.isfinite(p) or p < 1:
        raise ValidationError(f"cost exponent p must be a finite real >= 1, got {p}")
    return p


def cost_matrix(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float, metric: Metric = euclidean) -> np.ndarray:
    if mu.dim != nu.dim:
        raise ValidationError(f"dimension mismatch: {mu.dim} vs {nu.dim}")
    return metric(mu.atoms, nu.atoms) ** _check_p(p)


# ---------------------------------------------------------------------------
# Plans
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """Coupling ``matrix[i, j]`` = mass sent from ``source`` atom i to ``target`` atom j."""

    source: DiscreteMeasure
    target: DiscreteMeasure
    matrix: np.ndarray

    def __post_init__(self):
        g = np.array(self.matrix, dtype=float)
        shape = (len(self.source), len(self.target))
        if g.shape != shape:
            raise ValidationError(f"plan matrix has shape {g.shape}, expected {shape}")
        if np.any(g < 0) or not np.all(np.isfinite(g)):
            raise ValidationError("plan entries must be finite and nonnegative")
        if np.max(np.abs(g.sum(axis=1) - self.source.weights)) > MARGINAL_TOL:
            raise ValidationError("plan row sums do not match source weights")
        if np.max(np.abs(g.sum(axis=0) - self.target.weights)) > MARGINAL_TOL:
            raise ValidationError("plan column sums do not match target weights")
        g.flags.writeable = False
        object.__setattr__(self, "matrix", g)

    def entries(self):
        """Iterate ``(i, j, mass)`` over positive entries in row-major order."""
        for i, j in zip(*np.nonzero(self.matrix > 0)):
            yield int(i), int(j), float(self.matrix[i, j])

    def to_json(self) -> dict:
        return {"matrix": [[float(x) for x in row] for row in self.matrix]}


def identity_plan(mu: DiscreteMeasure) -> TransportPlan:
    return TransportPlan(mu, mu, np.diag(mu.weights))


def plan_cost(plan: TransportPlan, p: float, metric: Metric = euclidean) -> float:
    """``sum_ij d(x_i, y_j)^p * gamma_ij``."""
    return float(np.sum(cost_matrix(plan.source, plan.target, p, metric) * plan.matrix))


# ---------------------------------------------------------------------------
# Transportation simplex
# ---------------------------------------------------------------------------


def _northwest_corner(a: np.ndarray, b: np.ndarray) -> list[tuple[int, int]]:
    m, n = a.size, b.size
    a, b = a.copy(), b.copy()
    basis = []
    i = j = 0
    while True:
        basis.append((i, j))
        x = min(a[i], b[j])
        a[i] -= x
        b[j] -= x
        if i == m - 1 and j == n - 1:
            break
        if j == n - 1 or (i < m - 1 and a[i] <= b[j]):
            i += 1
        else:
            j += 1
    return basis


def _tree_flows(basis, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Flows on a spanning-tree basis, by peeling leaves against the marginals."""
    m, n = a.size, b.size
    adj: list[set] = [set() for _ in range(m + n)]
    for k, (i, j) in enumerate(basis):
        adj[i].add(k)
        adj[m + j].add(k)
    rem = np.concatenate([a, b]).astype(float)
    flows = np.zeros(len(basis))
    leaves = [v for v in range(m + n) if len(adj[v]) == 1]
    done = 0
    while leaves and done < len(basis):
        v = leaves.pop()
        if len(adj[v]) != 1:
            continue
        k = adj[v].pop()
        i, j = basis[k]
        other = m + j if v == i else i
        flows[k] = rem[v]
        rem[other] -= rem[v]
        rem[v] = 0.0
        adj[other].discard(k)
        done += 1
        if len(adj[other]) == 1:
            leaves.append(other)
    return flows


def _potentials(basis, C: np.ndarray):
    m, n = C.shape
    adj: list[list] = [[] for _ in range(m + n)]
    for i, j in basis:
        adj[i].append(m + j)
        adj[m + j].append(i)
    pot = np.full(m + n, np.nan)
    pot[0] = 0.0
    stack = [0]
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if np.isnan(pot[w]):
                if v < m:
                    pot[w] = C[v, w - m] - pot[v]
                else:
                    pot[w] = C[w, v - m] - pot[v]
                stack.append(w)
    return pot[:m], pot[m:], adj


def _tree_path(adj, start: int, goal: int) -> list[int]:
    parent = {start: None}
    stack = [start]
    while stack:
        v = stack.pop()
        if v == goal:
            break
        for w in adj[v]:
            if w not in parent:
                parent[w] = v
                stack.append(w)
    path = [goal]
    while parent[path[-1]] is not None:
        path.append(parent[path[-1]])
    return path[::-1]


def transport_simplex(a: np.ndarray, b: np.ndarray, C: np.ndarray, max_iter: int | None = None) -> np.ndarray:
    """Minimize ``<C, X>`` over nonnegative ``X`` with row sums ``a`` and column sums ``b``.

    Dantzig pricing, switching to Bland's rule after a run of degenerate
    pivots so the method cannot cycle.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    C = np.asarray(C, dtype=float)
    m, n = C.shape
    if m == 1:
        return b[None, :].copy()
    if n == 1:
        return a[:, None].copy()
    basis = _northwest_corner(a, b)
    flows = _tree_flows(basis, a, b)
    tol = 1e-12 * max(1.0, float(np.max(np.abs(C))))
    max_iter = max_iter or 50 * (m + n) * (m + n) + 1000
    degenerate_run = 0
    bland = False
    for _ in range(max_iter):
        u, v, adj = _potentials(basis, C)
        reduced = C - u[:, None] - v[None, :]
        in_basis = np.zeros((m, n), dtype=bool)
        for i, j in basis:
            in_basis[i, j] = True
        reduced[in_basis] = 0.0
        if bland:
            cand = np.flatnonzero(reduced.ravel() < -tol)
            if cand.size == 0:
                break
            e = int(cand[0])
        else:
            e = int(np.argmin(reduced))
            if reduced.flat[e] >= -tol:
                break
        ei, ej = divmod(e, n)
        path = _tree_path(adj, m + ej, ei)
        # tree edges along the path from column ej back to row ei alternate -, +, -, ...
        cycle = []
        for k in range(len(path) - 1):
            p0, p1 = path[k], path[k + 1]
            cell = (p1, p0 - m) if p0 >= m else (p0, p1 - m)
            cycle.append(basis.index(cell))
        minus = cycle[0::2]
        plus = cycle[1::2]
        theta = min(flows[k] for k in minus)
        ties = [k for k in minus if flows[k] <= theta]
        leave = min(ties, key=lambda k: basis[k]) if bland else ties[0]
        for k in minus:
            flows[k] -= theta
        for k in plus:
            flows[k] += theta
        basis[leave] = (ei, ej)
        flows[leave] = theta
        if theta <= tol:
            degenerate_run += 1
            if degenerate_run > m + n:
                bland = True
        else:
            degenerate_run = 0
    else:
        raise SolverError("transport simplex did not converge")
    flows = _tree_flows(basis, a, b)
    X = np.zeros((m, n))
    for (i, j), x in zip(basis, flows):
        X[i, j] = max(x, 0.0)
    return X


def _solve(mu, nu, p, metric, solver):
    C = cost_matrix(mu, nu, p, metric)
    rows = np.flatnonzero(mu.weights > 0)
    cols = np.flatnonzero(nu.weights > 0)
    X = solver(mu.weights[rows], nu.weights[cols], C[np.ix_(rows, cols)])
    G = np.zeros((len(mu), len(nu)))
    G[np.ix_(rows, cols)] = X
    plan = TransportPlan(mu, nu, G)
    cost = float(np.sum(C * G))
    return plan, cost


def optimal_plan(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float = 2.0,
                 metric: Metric = euclidean) -> tuple[TransportPlan, float]:
    """Optimal plan and ``W_p(mu, nu)``.

    The returned plan is a vertex of the transport polytope; when several
    plans are optimal, which one comes back is unspecified.
    """
    p = _check_p(p)
    plan, cost = _solve(mu, nu, p, metric, transport_simplex)
    return plan, max(cost, 0.0) ** (1.0 / p)


def wasserstein(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float = 2.0,
                metric: Metric = euclidean) -> float:
    return optimal_plan(mu, nu, p, metric)[1]


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _bases(m: int, n: int):
    """All invertible (m+n-1)-cell bases of the transport constraints, with inverses."""
    r = m + n - 1
    A = np.zeros((r, m * n))
    for i in range(m):
        A[i, i * n:(i + 1) * n] = 1.0
    for j in range(n - 1):
        A[m + j, j::n] = 1.0
    subsets = np.array(list(itertools.combinations(range(m * n), r)), dtype=np.int64)
    mats = A[:, subsets].transpose(1, 0, 2)
    dets = np.linalg.det(mats)
    # totally unimodular: determinants are exactly 0 or +-1
    ok = np.abs(dets) > 0.5
    return subsets[ok], np.linalg.inv(mats[ok])


def brute_force_plan(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float = 2.0,
                     metric: Metric = euclidean) -> tuple[TransportPlan, float]:
    """Exact optimum by enumerating every basic feasible solution.

    Only for instances with at most 16 plan cells (after dropping zero-weight
    atoms).
    """
    p = _check_p(p)

    def enumerate_vertices(a, b, C):
        m, n = C.shape
        if m * n > BRUTE_FORCE_MAX_CELLS:
            raise ValidationError(f"instance too large for brute force: {m}x{n} > {BRUTE_FORCE_MAX_CELLS} cells")
        subsets, inverses = _bases(m, n)
        rhs = np.concatenate([a, b[:-1]])
        x = inverses @ rhs
        feasible = np.all(x >= -1e-12, axis=1)
        costs = np.einsum("kr,kr->k", C.ravel()[subsets], x)
        costs[~feasible] = np.inf
        best = int(np.argmin(costs))
        X = np.zeros(m * n)
        X[subsets[best]] = np.clip(x[best], 0.0, None)
        return X.reshape(m, n)

    plan, cost = _solve(mu, nu, p, metric, enumerate_vertices)
    return plan, max(cost, 0.0) ** (1.0 / p)


# ---------------------------------------------------------------------------
# Displacement interpolation
# ---------------------------------------------------------------------------


def displacement_interpolation(mu: DiscreteMeasure, nu: DiscreteMeasure,
                               plan: TransportPlan, t: float) -> DiscreteMeasure:
    """McCann interpolant: mass ``gamma_ij`` sits at ``(1 - t) x_i + t y_j``."""
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise ValidationError(f"t must lie in [0, 1], got {t}")
    if plan.source is not mu or plan.target is not nu:
        if len(plan.source) != len(mu) or len(plan.target) != len(nu):
            raise ValidationError("plan does not couple the given measures")
    if t == 0.0:
        return mu
    if t == 1.0:
        return nu
    i, j = np.nonzero(plan.matrix > 0)
    points = (1.0 - t) * mu.atoms[i] + t * nu.atoms[j]
    atoms, weights, _ = merge_atoms(points, plan.matrix[i, j])
    return DiscreteMeasure(atoms, weights / weights.sum())
