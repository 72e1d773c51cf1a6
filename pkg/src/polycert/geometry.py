"""Polyhedral primitives: gauge functions, vertex enumeration, fan triangulation.

All sets are C-polytopes (compact, convex, origin strictly inside) stored in
gauge form ``{x : F x <= 1}``. The gauge (Minkowski) function of such a set is
``max_j F[j, :] @ x``, which is the polyhedral Lyapunov candidate used
throughout the toolkit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

GEOM_TOL = 1e-9


class GeometryError(ValueError):
    """Raised for malformed polytopes or unsupported dimensions."""


@dataclass(frozen=True)
class Polytope:
    """C-polytope in gauge form ``{x : F x <= rhs}`` with ``rhs = 1``.

    ``vertices`` caches the V-representation (rows are vertices) when known.
    Instances are immutable; derived quantities are safe to share across
    threads.
    """

    F: np.ndarray
    rhs: np.ndarray = None
    vertices: np.ndarray | None = None

    def __post_init__(self):
        F = np.atleast_2d(np.asarray(self.F, dtype=float))
        object.__setattr__(self, "F", F)
        rhs = self.rhs
        if rhs is None:
            rhs = np.ones(F.shape[0])
        rhs = np.asarray(rhs, dtype=float).ravel()
        object.__setattr__(self, "rhs", rhs)
        if rhs.shape[0] != F.shape[0]:
            raise GeometryError("rhs length does not match facet count")
        if not np.all(np.isfinite(F)) or not np.all(np.isfinite(rhs)):
            raise GeometryError("polytope data must be finite")
        if np.any(rhs <= 0):
            raise GeometryError("origin must lie strictly inside (rhs > 0)")
        if self.vertices is not None:
            V = np.atleast_2d(np.asarray(self.vertices, dtype=float))
            if V.shape[1] != F.shape[1]:
                raise GeometryError("vertex dimension mismatch")
            object.__setattr__(self, "vertices", V)

    @property
    def dim(self) -> int:
        return self.F.shape[1]

    @property
    def num_facets(self) -> int:
        return self.F.shape[0]

    def normalized(self) -> "Polytope":
        """Equivalent polytope with rhs scaled to exactly 1 row-wise."""
        if np.allclose(self.rhs, 1.0):
            return self
        F = self.F / self.rhs[:, None]
        return Polytope(F=F, vertices=self.vertices)

    def contains(self, x, tol: float = GEOM_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(self.F @ x <= self.rhs + tol))

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        """Componentwise (lower, upper) bounds from the vertex list."""
        V = self.require_vertices()
        return V.min(axis=0), V.max(axis=0)

    def require_vertices(self) -> np.ndarray:
        if self.vertices is None:
            return enumerate_vertices(self)
        return self.vertices

    def with_vertices(self) -> "Polytope":
        if self.vertices is not None:
            return self
        return Polytope(F=self.F, rhs=self.rhs, vertices=enumerate_vertices(self))


@dataclass(frozen=True)
class Simplex:
    """One cell of a polyhedral fan: cone of ``vertex_matrix`` columns cut by S.

    ``vertex_matrix`` stacks the n non-zero vertices as columns and must be
    invertible; ``facet_index`` records the facet of the parent polytope the
    cell is attached to.
    """

    vertex_matrix: np.ndarray
    facet_index: int

    def __post_init__(self):
        X = np.asarray(self.vertex_matrix, dtype=float)
        object.__setattr__(self, "vertex_matrix", X)
        n = X.shape[0]
        if X.shape != (n, n):
            raise GeometryError("simplex vertex matrix must be square")
        if abs(np.linalg.det(X)) < 1e-12:
            raise GeometryError("simplex vertex matrix is singular")

    def barycentric(self, x) -> np.ndarray:
        """Cone coordinates c with x = vertex_matrix @ c."""
        return np.linalg.solve(self.vertex_matrix, np.asarray(x, dtype=float))

    def contains(self, x, tol: float = 1e-9) -> bool:
        c = self.barycentric(x)
        return bool(np.all(c >= -tol) and c.sum() <= 1.0 + tol)


def gauge(x, P: Polytope) -> float:
    """Gauge function of P at x: ``max_j F[j, :] @ x``.

    Zero at the origin, 1 on the boundary, > 1 outside.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != P.dim:
        raise GeometryError(f"dimension mismatch: {x.shape[-1]} != {P.dim}")
    Pn = P.normalized()
    return float(np.max(Pn.F @ x))


def gauge_many(X: np.ndarray, P: Polytope) -> np.ndarray:
    """Vectorized gauge for an array of points (rows)."""
    Pn = P.normalized()
    return np.max(np.atleast_2d(X) @ Pn.F.T, axis=1)


def scale_sublevel(P: Polytope, b: float) -> Polytope:
    """The b-sublevel set of the gauge, renormalized back to gauge form."""
    if b <= 0:
        raise GeometryError("sublevel scale must be positive")
    Pn = P.normalized()
    V = None if Pn.vertices is None else Pn.vertices * b
    return Polytope(F=Pn.F / b, vertices=V)


def enumerate_vertices(P: Polytope, tol: float = GEOM_TOL) -> np.ndarray:
    """Exact vertex enumeration by brute force over facet n-subsets.

    Desk scale only (n <= 4, p up to a few dozen): every n-subset of facets
    with independent normals is intersected and the point kept if feasible.
    Duplicates within tolerance are merged.
    """
    Pn = P.normalized()
    F, rhs = Pn.F, Pn.rhs
    p, n = F.shape
    if n > 4:
        raise GeometryError("vertex enumeration supports n <= 4")
    if p < n:
        raise GeometryError("polytope is unbounded (fewer facets than dimensions)")
    points = []
    for idx in combinations(range(p), n):
        A = F[list(idx)]
        if np.linalg.matrix_rank(A, tol=1e-9) < n:
            continue
        v = np.linalg.solve(A, rhs[list(idx)])
        if np.all(F @ v <= rhs + 1e-7):
            points.append(v)
    if not points:
        raise GeometryError("no vertices found; polytope may be empty or unbounded")
    verts = _dedup_points(np.array(points), tol=1e-7)
    # Boundedness check: vertices of a bounded C-polytope surround the origin.
    hull_radius = np.linalg.norm(verts, axis=1).max()
    for j in range(n):
        lo, hi = verts[:, j].min(), verts[:, j].max()
        if lo > -tol * hull_radius or hi < tol * hull_radius:
            raise GeometryError("origin not strictly inside the vertex hull")
    return verts


def _dedup_points(points: np.ndarray, tol: float) -> np.ndarray:
    order = np.lexsort(points.T[::-1])
    pts = points[order]
    keep = []
    for q in pts:
        if not any(np.linalg.norm(q - k, ord=np.inf) <= tol for k in keep):
            keep.append(q)
    return np.array(keep)


def facet_sector(x, P: Polytope, tol: float = 1e-7) -> int:
    """Index of the facet whose row attains the gauge at x (smallest on ties).

    The sublevel set splits into sectors, one per facet, on which the active
    gauge row is constant; this lookup defines that membership.
    """
    x = np.asarray(x, dtype=float)
    Pn = P.normalized()
    vals = Pn.F @ x
    m = vals.max()
    if m > 1.0 + tol:
        raise GeometryError(f"point outside the polytope (gauge {m:.3e})")
    return int(np.argmax(vals >= m - GEOM_TOL))


def sector_halfspaces(P: Polytope, h: int) -> tuple[np.ndarray, np.ndarray]:
    """H-representation of sector h: ``{x in P : F[h] x >= F[j] x for all j}``.

    Returns (A, b) with the sector equal to ``{x : A x <= b}``.
    """
    Pn = P.normalized()
    F, rhs = Pn.F, Pn.rhs
    p = F.shape[0]
    rows = [F]
    vals = [rhs]
    for j in range(p):
        if j == h:
            continue
        rows.append((F[j] - F[h])[None, :])
        vals.append(np.zeros(1))
    return np.vstack(rows), np.concatenate(vals)


def triangulate_fan(P: Polytope) -> list[Simplex]:
    """Complete polyhedral fan: simplices with n vertices on facets plus the origin.

    2-D path: vertices in angular order, consecutive pairs. Higher dimensions
    cone the simplicial facets of the vertex hull with the origin (any valid
    fan is acceptable for the downstream controllers).
    """
    Pn = P.with_vertices()
    V = Pn.vertices
    n = Pn.dim
    if n < 2:
        raise GeometryError("fan triangulation requires n >= 2")
    if np.linalg.matrix_rank(V, tol=1e-10) < n:
        raise GeometryError("degenerate polytope (zero volume)")
    simplices: list[Simplex] = []
    if n == 2:
        angles = np.arctan2(V[:, 1], V[:, 0])
        order = np.argsort(angles, kind="stable")
        ring = V[order]
        k = len(ring)
        for i in range(k):
            a, bvert = ring[i], ring[(i + 1) % k]
            X = np.column_stack([a, bvert])
            mid = 0.5 * (a + bvert)
            simplices.append(Simplex(X, facet_index=facet_sector(mid / max(gauge(mid, Pn), 1e-12), Pn)))
        return simplices
    from scipy.spatial import ConvexHull

    hull = ConvexHull(V)
    for simplex_rows in hull.simplices:
        X = V[np.sort(simplex_rows)].T
        if abs(np.linalg.det(X)) < 1e-12:
            continue
        centroid = X.mean(axis=1)
        simplices.append(Simplex(X, facet_index=facet_sector(centroid / max(gauge(centroid, Pn), 1e-12), Pn)))
    return simplices


def locate_simplex(x, simplices: list[Simplex], tol: float = 1e-9) -> int:
    """First simplex (in list order) whose cone coordinates accept x."""
    for i, s in enumerate(simplices):
        c = s.barycentric(x)
        if np.all(c >= -tol):
            return i
    raise GeometryError("point lies outside the fan")


def induced_norm(M, alpha) -> float:
    """Matrix norm induced by the vector alpha-norm, alpha in {1, 2, inf}."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if alpha == 1:
        return float(np.abs(M).sum(axis=0).max())
    if alpha in (np.inf, "inf", "Inf"):
        return float(np.abs(M).sum(axis=1).max())
    if alpha == 2:
        return float(np.linalg.norm(M, 2))
    raise ValueError(f"unsupported norm order: {alpha!r}")


def vector_norm(v, alpha) -> float:
    v = np.asarray(v, dtype=float).ravel()
    if alpha == 1:
        return float(np.abs(v).sum())
    if alpha in (np.inf, "inf", "Inf"):
        return float(np.abs(v).max()) if v.size else 0.0
    if alpha == 2:
        return float(np.linalg.norm(v))
    raise ValueError(f"unsupported norm order: {alpha!r}")


def chebyshev_center(A: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, float]:
    """Center and radius of the largest ball inside ``{x : A x <= b}``."""
    from scipy.optimize import linprog

    A = np.atleast_2d(A)
    norms = np.linalg.norm(A, axis=1)
    n = A.shape[1]
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_ub = np.hstack([A, norms[:, None]])
    res = linprog(c, A_ub=A_ub, b_ub=b, bounds=[(None, None)] * n + [(0, None)], method="highs")
    if res.status != 0:
        return np.zeros(n), -np.inf
    return res.x[:n], float(res.x[-1])


def polygon_area(vertices: np.ndarray) -> float:
    """Shoelace area of a 2-D polygon given vertices in angular order."""
    V = np.asarray(vertices, dtype=float)
    x, y = V[:, 0], V[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def box_polytope(lower, upper) -> Polytope:
    """Axis-aligned box as a gauge-form polytope (requires 0 strictly inside)."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    n = lower.size
    F = np.vstack([np.diag(1.0 / upper), np.diag(-1.0 / np.abs(lower))])
    corners = np.array(np.meshgrid(*[(lower[i], upper[i]) for i in range(n)], indexing="ij"))
    V = corners.reshape(n, -1).T
    return Polytope(F=F, vertices=V)
