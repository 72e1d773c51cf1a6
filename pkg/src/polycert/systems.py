"""Polytopic uncertain dynamics, invariance checks, vertex-control synthesis.

The plant is ``x+ = A(w) x + B(w) u`` with ``(A(w), B(w))`` a convex
combination of generator pairs weighted by a simplex vector w. Invariance of
a gauge-form polytope S with contraction factor ``lam`` is verified at the
vertices of S against every generator, which is exact by convexity in both
x and w.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Polytope, gauge
from .miopt import Model, Status, solve_lp

LP_MARGIN_TOL = 1e-7


class SystemError_(ValueError):
    pass


@dataclass(frozen=True)
class PolytopicSystem:
    """Generator pairs (A_i, B_i); the uncertainty ranges over their convex hull."""

    A: tuple[np.ndarray, ...]
    B: tuple[np.ndarray, ...]

    def __post_init__(self):
        A = tuple(np.atleast_2d(np.asarray(a, dtype=float)) for a in self.A)
        B = tuple(np.atleast_2d(np.asarray(b, dtype=float)) for b in self.B)
        if len(A) != len(B) or len(A) == 0:
            raise SystemError_("need matching, nonempty generator lists")
        n = A[0].shape[0]
        m = B[0].shape[1]
        for a, b in zip(A, B):
            if a.shape != (n, n) or b.shape != (n, m):
                raise SystemError_("generator dimensions inconsistent")
            if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
                raise SystemError_("generator entries must be finite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def state_dim(self) -> int:
        return self.A[0].shape[0]

    @property
    def input_dim(self) -> int:
        return self.B[0].shape[1]

    @property
    def num_generators(self) -> int:
        return len(self.A)

    def matrices(self, w) -> tuple[np.ndarray, np.ndarray]:
        w = _check_simplex(w, self.num_generators)
        Aw = sum(wi * Ai for wi, Ai in zip(w, self.A))
        Bw = sum(wi * Bi for wi, Bi in zip(w, self.B))
        return Aw, Bw


@dataclass(frozen=True)
class InvariantSetSpec:
    """Contractive-set data: S, factor lam, input set U and per-vertex controls.

    ``vertex_controls`` rows align with ``S.vertices`` rows.
    """

    S: Polytope
    lam: float
    U: Polytope
    vertex_controls: np.ndarray

    def __post_init__(self):
        if not (0 < self.lam < 1):
            raise SystemError_("contraction factor must lie in (0, 1)")
        S = self.S.with_vertices()
        object.__setattr__(self, "S", S)
        vc = np.atleast_2d(np.asarray(self.vertex_controls, dtype=float))
        if vc.shape[0] != S.vertices.shape[0]:
            raise SystemError_("one control per vertex of S is required")
        object.__setattr__(self, "vertex_controls", vc)


def _check_simplex(w, M, tol=1e-9):
    w = np.asarray(w, dtype=float).ravel()
    if w.shape[0] != M:
        raise SystemError_(f"uncertainty vector must have {M} entries")
    if np.any(w < -tol) or abs(w.sum() - 1.0) > 1e-7:
        raise SystemError_("uncertainty vector must be nonnegative and sum to 1")
    return np.clip(w, 0.0, None)


def step(sys: PolytopicSystem, x, u, w) -> np.ndarray:
    """One step of the uncertain dynamics for a fixed simplex weight w."""
    Aw, Bw = sys.matrices(w)
    return Aw @ np.asarray(x, dtype=float) + Bw @ np.atleast_1d(np.asarray(u, dtype=float))


@dataclass
class InvarianceReport:
    ok: bool
    worst_margin: float
    worst_vertex: int = -1
    worst_generator: int = -1
    details: list = field(default_factory=list)


def verify_invariance(sys: PolytopicSystem, spec: InvariantSetSpec,
                      tol: float = LP_MARGIN_TOL) -> InvarianceReport:
    """Check ``F (A_i v + B_i u_v) <= lam`` at every vertex/generator pair.

    worst_margin is ``lam − max F (...)``; the check is exact because the
    constraint is affine in x for fixed w and linear in w for fixed x, so
    vertex validation covers the full sets.
    """
    S = spec.S.normalized().with_vertices()
    F = S.F
    worst = np.inf
    wv = wg = -1
    for vi, (v, uv) in enumerate(zip(S.vertices, spec.vertex_controls)):
        for gi, (Ai, Bi) in enumerate(zip(sys.A, sys.B)):
            reach = np.max(F @ (Ai @ v + Bi @ uv))
            margin = spec.lam - reach
            if margin < worst:
                worst, wv, wg = margin, vi, gi
    # Input admissibility of the stored vertex controls.
    Un = spec.U.normalized()
    input_ok = all(np.all(Un.F @ uv <= Un.rhs + 1e-7) for uv in spec.vertex_controls)
    return InvarianceReport(ok=bool(worst >= -tol and input_ok), worst_margin=float(worst),
                            worst_vertex=wv, worst_generator=wg)


def synthesize_vertex_controls(sys: PolytopicSystem, S: Polytope, lam: float,
                               U: Polytope) -> np.ndarray:
    """Per-vertex LP: minimize the reachable gauge level subject to u in U.

    Returns the control matrix (row per vertex of S). Raises if the best
    achievable level at some vertex exceeds lam.
    """
    Sn = S.normalized().with_vertices()
    Un = U.normalized()
    F = Sn.F
    m = sys.input_dim
    controls = []
    for vi, v in enumerate(Sn.vertices):
        mod = Model(f"vertex{vi}")
        u_idx = mod.add_continuous_vec(m, name="u")
        t_idx = mod.add_continuous(lb=-np.inf, name="t")
        for Ai, Bi in zip(sys.A, sys.B):
            base = F @ (Ai @ v)
            G = F @ Bi
            for r in range(F.shape[0]):
                mod.add_row(list(u_idx) + [t_idx], list(G[r]) + [-1.0], "<=", -base[r])
        mod.add_dense_rows(Un.F, u_idx, "<=", Un.rhs)
        mod.set_objective({t_idx: 1.0}, "min")
        sol = solve_lp(mod)
        if sol.status != Status.OPTIMAL:
            raise SystemError_(f"vertex {vi}: control synthesis LP is {sol.status.value}")
        if sol.objective > lam + LP_MARGIN_TOL:
            raise SystemError_(
                f"vertex {vi}: best achievable level {sol.objective:.6f} exceeds {lam}")
        controls.append(sol.x[u_idx])
    return np.array(controls)


@dataclass
class Trajectory:
    states: np.ndarray          # (steps+1, n)
    inputs: np.ndarray          # (steps, m)
    weights: np.ndarray         # (steps, M)
    gauges: np.ndarray          # (steps+1,)
    escaped: bool
    escape_step: int = -1


def simulate(sys: PolytopicSystem, controller, x0, steps: int, S: Polytope,
             disturbance_policy: str = "worst_case", seed: int = 0,
             fixed_vertex: int = 0) -> Trajectory:
    """Roll out the closed loop, recording the gauge of every visited state.

    Policies: ``vertex`` (w fixed at one generator), ``uniform`` (Dirichlet
    sample over the simplex), ``worst_case`` (greedy: the generator vertex
    maximizing the next gauge value; exact because the step is linear in w
    and the gauge is convex).
    A state leaving S is recorded, not fatal.
    """
    rng = np.random.default_rng(seed)
    x = np.asarray(x0, dtype=float).copy()
    M = sys.num_generators
    states = [x.copy()]
    gauges = [gauge(x, S)]
    inputs, weights = [], []
    escaped = False
    escape_step = -1
    for k in range(steps):
        u = np.atleast_1d(np.asarray(controller(x), dtype=float))
        if disturbance_policy == "vertex":
            w = np.eye(M)[fixed_vertex]
        elif disturbance_policy == "uniform":
            w = rng.dirichlet(np.ones(M))
        elif disturbance_policy == "worst_case":
            cand = [gauge(sys.A[i] @ x + sys.B[i] @ u, S) for i in range(M)]
            w = np.eye(M)[int(np.argmax(cand))]
        else:
            raise SystemError_(f"unknown disturbance policy {disturbance_policy!r}")
        x = step(sys, x, u, w)
        states.append(x.copy())
        inputs.append(u)
        weights.append(w)
        g = gauge(x, S)
        gauges.append(g)
        if g > 1 + 1e-7 and not escaped:
            escaped = True
            escape_step = k + 1
    return Trajectory(states=np.array(states), inputs=np.array(inputs),
                      weights=np.array(weights), gauges=np.array(gauges),
                      escaped=escaped, escape_step=escape_step)


def interpolated_controller(spec: InvariantSetSpec):
    """Vertex-interpolation feedback induced by the stored vertex controls.

    Solves the smallest-norm convex-combination problem at each call; used
    by invariance sampling checks.
    """
    from .controllers import VertexInterpController

    ctrl = VertexInterpController(vertices=spec.S.vertices, inputs=spec.vertex_controls)
    return lambda x: ctrl.evaluate(x)
