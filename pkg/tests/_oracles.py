"""Independent brute-force oracles used by the test suite.

Everything here is deliberately naive (pairwise intersection, powerset
enumeration, dense grids, finite differences) and never calls the solver
paths it is used to check.
"""

from __future__ import annotations

from itertools import combinations, product

import numpy as np


def vertices_by_facet_pairs(F: np.ndarray, rhs: np.ndarray, tol: float = 1e-7) -> np.ndarray:
    """2-D vertex oracle: intersect all facet pairs, keep feasible points."""
    p = F.shape[0]
    pts = []
    for i, j in combinations(range(p), 2):
        A = F[[i, j]]
        if abs(np.linalg.det(A)) < 1e-12:
            continue
        v = np.linalg.solve(A, rhs[[i, j]])
        if np.all(F @ v <= rhs + tol):
            pts.append(v)
    uniq = []
    for q in pts:
        if not any(np.linalg.norm(q - u, np.inf) <= 1e-7 for u in uniq):
            uniq.append(q)
    return np.array(uniq)


def shoelace(vertices: np.ndarray) -> float:
    V = np.asarray(vertices, dtype=float)
    ang = np.argsort(np.arctan2(V[:, 1], V[:, 0]))
    V = V[ang]
    x, y = V[:, 0], V[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def lp_by_vertex_enumeration(c, A_ub, b_ub, bounds) -> float:
    """Minimum of c'x over {A_ub x <= b_ub, bounds} by corner enumeration (n <= 3).

    Corners come from all n-subsets of the stacked constraint rows (bounds
    rewritten as rows). Assumes the LP has a bounded optimum.
    """
    A_ub = np.atleast_2d(np.asarray(A_ub, dtype=float))
    b_ub = np.asarray(b_ub, dtype=float).ravel()
    n = A_ub.shape[1]
    rows = [A_ub]
    rhs = [b_ub]
    for i, (lo, hi) in enumerate(bounds):
        e = np.zeros(n)
        e[i] = 1.0
        if hi is not None and np.isfinite(hi):
            rows.append(e[None, :])
            rhs.append(np.array([hi]))
        if lo is not None and np.isfinite(lo):
            rows.append(-e[None, :])
            rhs.append(np.array([-lo]))
    A = np.vstack(rows)
    b = np.concatenate(rhs)
    best = np.inf
    c = np.asarray(c, dtype=float)
    for idx in combinations(range(A.shape[0]), n):
        M = A[list(idx)]
        if np.linalg.matrix_rank(M, tol=1e-10) < n:
            continue
        try:
            x = np.linalg.solve(M, b[list(idx)])
        except np.linalg.LinAlgError:
            continue
        if np.all(A @ x <= b + 1e-7):
            best = min(best, float(c @ x))
    return best


def qp_by_active_set_enumeration(H, q, A_in, b_in, A_eq=None, b_eq=None):
    """Exhaustive KKT oracle for a strictly convex QP.

    Tries every subset of inequality rows as the active set, solves the
    equality-constrained KKT system, and keeps solutions that are primal
    feasible with nonnegative multipliers. Returns (x, objective).
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    n = H.shape[0]
    q = np.asarray(q, dtype=float).ravel()
    A_in = np.zeros((0, n)) if A_in is None else np.atleast_2d(np.asarray(A_in, dtype=float))
    b_in = np.zeros(0) if b_in is None else np.asarray(b_in, dtype=float).ravel()
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
    m = A_in.shape[0]
    best = None
    for k in range(0, min(m, n - A_eq.shape[0]) + 1):
        for subset in combinations(range(m), k):
            A_act = np.vstack([A_eq, A_in[list(subset)]])
            if A_act.shape[0] and np.linalg.matrix_rank(A_act, tol=1e-10) < A_act.shape[0]:
                continue
            na = A_act.shape[0]
            K = np.block([[H, A_act.T], [A_act, np.zeros((na, na))]])
            rhs = np.concatenate([-q, b_eq, b_in[list(subset)]])
            try:
                sol = np.linalg.solve(K, rhs)
            except np.linalg.LinAlgError:
                continue
            x, lam = sol[:n], sol[n:]
            if np.any(A_in @ x > b_in + 1e-8):
                continue
            if np.any(lam[A_eq.shape[0]:] < -1e-8):
                continue
            obj = 0.5 * x @ H @ x + q @ x
            if best is None or obj < best[1] - 1e-12:
                best = (x, obj)
    return best


def knapsack_exhaustive(values, weights, capacity):
    """Max value over all item subsets with total weight <= capacity."""
    n = len(values)
    best = 0.0
    for bits in product((0, 1), repeat=n):
        w = sum(b * wt for b, wt in zip(bits, weights))
        if w <= capacity + 1e-12:
            best = max(best, sum(b * v for b, v in zip(bits, values)))
    return best


def grid_max(fn, lower, upper, resolution):
    """Max of fn over a dense grid of a box; returns (value, argmax)."""
    axes = [np.linspace(lower[i], upper[i], resolution) for i in range(len(lower))]
    best_v, best_x = -np.inf, None
    for pt in product(*axes):
        v = fn(np.array(pt))
        if v is not None and v > best_v:
            best_v, best_x = v, np.array(pt)
    return best_v, best_x


def grid_max_refined(fn, lower, upper, resolution, zoom_rounds=4, zoom_factor=8.0):
    """Grid max followed by local zooming around the incumbent.

    Pure sampling; each round shrinks the search box around the best point
    found so far, so the value converges to the local (here: global) maximum
    of a piecewise-affine function.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    best_v, best_x = grid_max(fn, lower, upper, resolution)
    span = upper - lower
    for _ in range(zoom_rounds):
        span = span / zoom_factor
        lo = np.maximum(best_x - span / 2, lower)
        hi = np.minimum(best_x + span / 2, upper)
        v, x = grid_max(fn, lo, hi, 33)
        if v > best_v:
            best_v, best_x = v, x
    return best_v, best_x


def fd_jacobian(fn, x, h=1e-6):
    """Central finite-difference Jacobian of a vector map."""
    x = np.asarray(x, dtype=float)
    f0 = np.atleast_1d(fn(x))
    J = np.zeros((f0.size, x.size))
    for k in range(x.size):
        e = np.zeros(x.size)
        e[k] = h
        J[:, k] = (np.atleast_1d(fn(x + e)) - np.atleast_1d(fn(x - e))) / (2 * h)
    return J


def second_difference_breakpoints(fn, x0, direction, ts):
    """Second differences of t -> fn(x0 + t d); near zero except at kinks."""
    vals = np.array([np.atleast_1d(fn(x0 + t * direction)) for t in ts])
    return vals[2:] - 2 * vals[1:-1] + vals[:-2]
