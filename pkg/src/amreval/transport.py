"""Exact discrete optimal transport by the transportation simplex method."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

MASS_TOL = 1e-9
DEFAULT_MAX_SIZE = 512
_EPS = 1e-12


class TransportError(ValueError):
    pass


@dataclass(frozen=True)
class TransportPlan:
    flow: np.ndarray
    objective: float


def _check(cost: np.ndarray, a: np.ndarray, b: np.ndarray, max_size: int) -> None:
    n, m = cost.shape
    if a.shape != (n,) or b.shape != (m,):
        raise TransportError(f"mass vectors {a.shape}, {b.shape} do not fit cost {cost.shape}")
    if n == 0 or m == 0:
        raise TransportError("empty transport problem")
    if n > max_size or m > max_size:
        raise TransportError(f"problem size {n}x{m} exceeds cap {max_size}")
    if not np.all(np.isfinite(cost)):
        raise TransportError("cost matrix has non-finite entries")
    if np.any(cost < 0):
        raise TransportError("negative cost")
    if np.any(a < 0) or np.any(b < 0):
        raise TransportError("negative mass")
    if abs(a.sum() - 1.0) > MASS_TOL or abs(b.sum() - 1.0) > MASS_TOL:
        raise TransportError(f"masses must each sum to 1 (got {a.sum()!r}, {b.sum()!r})")


def solve_exact(
    cost: np.ndarray | Sequence[Sequence[float]],
    source: np.ndarray | Sequence[float] | None = None,
    target: np.ndarray | Sequence[float] | None = None,
    max_size: int = DEFAULT_MAX_SIZE,
) -> TransportPlan:
    """Minimise ``sum(flow * cost)`` subject to the marginal constraints.

    Masses default to uniform. The basis is kept as a spanning tree of the
    bipartite row/column graph; entering cells are chosen by most negative
    reduced cost, switching to Bland's rule if the objective stalls, which
    rules out cycling on degenerate problems.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2:
        raise TransportError("cost must be a matrix")
    n, m = cost.shape
    if n == 0 or m == 0:
        raise TransportError("empty transport problem")
    a = np.full(n, 1.0 / n) if source is None else np.asarray(source, dtype=float)
    b = np.full(m, 1.0 / m) if target is None else np.asarray(target, dtype=float)
    _check(cost, a, b, max_size)

    flow, basis = _northwest_corner(a, b)
    stalled = 0
    for _ in range(50 * (n + m) * (n + m) + 100):
        u, v = _potentials(cost, basis, n, m)
        reduced = cost - u[:, None] - v[None, :]
        for i, j in basis:
            reduced[i, j] = 0.0
        if stalled > n + m:
            negatives = np.argwhere(reduced < -_EPS)
            if negatives.size == 0:
                break
            i, j = (int(x) for x in negatives[0])
        else:
            flat = int(np.argmin(reduced))
            i, j = divmod(flat, m)
            if reduced[i, j] >= -_EPS:
                break
        cycle = _cycle(basis, i, j, n)
        minus = cycle[1::2]
        theta = min(flow[c] for c in minus)
        leaving = min((c for c in minus if flow[c] <= theta), key=lambda c: (flow[c], c))
        stalled = stalled + 1 if theta <= _EPS else 0
        for k, c in enumerate(cycle):
            flow[c] += theta if k % 2 == 0 else -theta
        flow[leaving] = 0.0
        basis.remove(leaving)
        basis.add((i, j))
    else:  # pragma: no cover - bounded by the anti-cycling rule
        raise TransportError("simplex iteration limit reached")
    np.maximum(flow, 0.0, out=flow)
    return TransportPlan(flow, float(np.sum(flow * cost)))


def _northwest_corner(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, set[tuple[int, int]]]:
    n, m = len(a), len(b)
    flow = np.zeros((n, m))
    basis = set()
    ra, rb = a.astype(float).copy(), b.astype(float).copy()
    i = j = 0
    while True:
        q = max(min(ra[i], rb[j]), 0.0)
        flow[i, j] = q
        basis.add((i, j))
        ra[i] -= q
        rb[j] -= q
        if i == n - 1 and j == m - 1:
            break
        if i == n - 1:
            j += 1
        elif j == m - 1:
            i += 1
        elif ra[i] <= rb[j]:
            i += 1
        else:
            j += 1
    return flow, basis


def _potentials(cost: np.ndarray, basis: set[tuple[int, int]], n: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Dual values with ``u[i] + v[j] == cost[i, j]`` on every basic cell."""
    rows: list[list[int]] = [[] for _ in range(n)]
    cols: list[list[int]] = [[] for _ in range(m)]
    for i, j in basis:
        rows[i].append(j)
        cols[j].append(i)
    u = np.full(n, np.nan)
    v = np.full(m, np.nan)
    u[0] = 0.0
    stack = [("r", 0)]
    while stack:
        side, k = stack.pop()
        if side == "r":
            for j in rows[k]:
                if np.isnan(v[j]):
                    v[j] = cost[k, j] - u[k]
                    stack.append(("c", j))
        else:
            for i in cols[k]:
                if np.isnan(u[i]):
                    u[i] = cost[i, k] - v[k]
                    stack.append(("r", i))
    return u, v


def _cycle(basis: set[tuple[int, int]], i0: int, j0: int, n: int) -> list[tuple[int, int]]:
    """Cells of the cycle closed by adding ``(i0, j0)`` to the basis tree.

    Returned in order starting at the entering cell, so even positions gain
    flow and odd positions lose it.
    """
    # tree nodes: rows are 0..n-1, columns are n..n+m-1
    adj: dict[int, list[int]] = {}
    for i, j in basis:
        adj.setdefault(i, []).append(n + j)
        adj.setdefault(n + j, []).append(i)
    start, goal = n + j0, i0
    parent = {start: start}
    stack = [start]
    while stack:
        node = stack.pop()
        if node == goal:
            break
        for nxt in adj.get(node, ()):
            if nxt not in parent:
                parent[nxt] = node
                stack.append(nxt)
    path = [goal]
    while path[-1] != start:
        path.append(parent[path[-1]])
    # path runs row i0 -> ... -> column j0; consecutive pairs are basic cells
    cells = [(i0, j0)]
    for x, y in zip(path, path[1:]):
        cells.append((x, y - n) if x < n else (y, x - n))
    return cells


def euclidean_cost(points_a: np.ndarray, points_b: np.ndarray) -> np.ndarray:
    diff = points_a[:, None, :] - points_b[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def wasserstein_distance(
    points_a: np.ndarray | Sequence[Sequence[float]],
    points_b: np.ndarray | Sequence[Sequence[float]],
    metric: Callable[[np.ndarray, np.ndarray], np.ndarray] = euclidean_cost,
    masses_a: Sequence[float] | None = None,
    masses_b: Sequence[float] | None = None,
) -> float:
    """1-Wasserstein distance between two weighted point clouds (uniform by default).

    ``metric`` maps two point arrays to their pairwise cost matrix.
    """
    pa = np.atleast_2d(np.asarray(points_a, dtype=float))
    pb = np.atleast_2d(np.asarray(points_b, dtype=float))
    if pa.size == 0 or pb.size == 0:
        raise TransportError("point sets must be nonempty")
    if pa.shape[1] != pb.shape[1]:
        raise TransportError(f"dimension mismatch: {pa.shape[1]} vs {pb.shape[1]}")
    return solve_exact(metric(pa, pb), masses_a, masses_b).objective
