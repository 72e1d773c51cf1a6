"""Model building plus LP / strictly convex QP / MILP solving.

The model layer is a thin index-based builder (continuous and binary
variables, linear rows, one linear objective). LP relaxations are delegated
to scipy's HiGHS interface; the branch-and-bound search and the active-set
QP solver are implemented here so that multipliers, active sets, node counts
and every big-M constant stay visible to the certification layer.

Determinism contract: with ``threads=1`` (the only implemented mode) two
solves of an identical model produce bit-identical solutions. All tie-breaks
are by smallest index and insertion order; no wall-clock value influences a
branching decision (the time limit can only truncate, and certified runs
must finish inside it).
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import sparse
from scipy.optimize import linprog


class Status(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    GAP_LIMIT = "gap_limit"
    TIME_LIMIT = "time_limit"


FEAS_TOL = 1e-7
INT_TOL = 1e-6


@dataclass
class Solution:
    status: Status
    x: np.ndarray | None = None
    objective: float | None = None
    best_bound: float | None = None
    gap: float | None = None
    duals: dict | None = None
    stats: dict = field(default_factory=dict)
    big_m_audit: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status in (Status.OPTIMAL, Status.GAP_LIMIT)


@dataclass
class MilpConfig:
    gap_tol: float = 1e-6
    time_limit: float = 300.0
    threads: int = 1
    branch_priority: dict[int, int] | None = None  # higher value branches first


class ModelError(ValueError):
    pass


class Model:
    """Index-based mixed-integer linear model."""

    def __init__(self, name: str = "model"):
        self.name = name
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.is_binary: list[bool] = []
        self.var_names: list[str] = []
        self._rows: list[tuple[np.ndarray, np.ndarray]] = []  # (indices, coeffs)
        self._senses: list[str] = []
        self._rhs: list[float] = []
        self._row_names: list[str] = []
        self.obj: dict[int, float] = {}
        self.sense: str = "min"
        self.big_m_log: dict[str, float] = {}

    # -- variables ---------------------------------------------------------
    def add_continuous(self, lb=-np.inf, ub=np.inf, name: str | None = None) -> int:
        if lb > ub:
            raise ModelError(f"variable bounds crossed: [{lb}, {ub}]")
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.is_binary.append(False)
        self.var_names.append(name or f"x{len(self.lb) - 1}")
        return len(self.lb) - 1

    def add_continuous_vec(self, n: int, lb=-np.inf, ub=np.inf, name: str = "v") -> np.ndarray:
        lo = np.broadcast_to(np.asarray(lb, dtype=float), (n,))
        hi = np.broadcast_to(np.asarray(ub, dtype=float), (n,))
        return np.array([self.add_continuous(lo[i], hi[i], f"{name}[{i}]") for i in range(n)])

    def add_binary(self, name: str | None = None) -> int:
        self.lb.append(0.0)
        self.ub.append(1.0)
        self.is_binary.append(True)
        self.var_names.append(name or f"b{len(self.lb) - 1}")
        return len(self.lb) - 1

    def add_binary_vec(self, n: int, name: str = "b") -> np.ndarray:
        return np.array([self.add_binary(f"{name}[{i}]") for i in range(n)])

    @property
    def num_vars(self) -> int:
        return len(self.lb)

    @property
    def num_rows(self) -> int:
        return len(self._rows)

    @property
    def binary_indices(self) -> np.ndarray:
        return np.flatnonzero(self.is_binary)

    # -- rows ----------------------------------------------------------------
    def add_row(self, indices, coeffs, sense: str, rhs: float, name: str | None = None) -> int:
        if sense not in ("<=", ">=", "="):
            raise ModelError(f"bad sense {sense!r}")
        idx = np.asarray(indices, dtype=int)
        co = np.asarray(coeffs, dtype=float)
        if idx.shape != co.shape:
            raise ModelError("indices/coeffs shape mismatch")
        if idx.size and (idx.min() < 0 or idx.max() >= self.num_vars):
            raise ModelError("row references unknown variable")
        self._rows.append((idx, co))
        self._senses.append(sense)
        self._rhs.append(float(rhs))
        self._row_names.append(name or f"c{len(self._rows) - 1}")
        return len(self._rows) - 1

    def add_dense_rows(self, A: np.ndarray, x_idx, sense: str, rhs, name: str = "r") -> list[int]:
        """One row per row of A over the variable index vector x_idx."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        x_idx = np.asarray(x_idx, dtype=int)
        rhs = np.broadcast_to(np.asarray(rhs, dtype=float), (A.shape[0],))
        out = []
        for i in range(A.shape[0]):
            nz = np.flatnonzero(A[i] != 0.0)
            out.append(self.add_row(x_idx[nz], A[i, nz], sense, rhs[i], f"{name}[{i}]"))
        return out

    def set_objective(self, coeffs: dict[int, float], sense: str = "min"):
        if sense not in ("min", "max"):
            raise ModelError("objective sense must be min or max")
        self.obj = {int(k): float(v) for k, v in coeffs.items()}
        self.sense = sense

    # -- helpers -------------------------------------------------------------
    def expression_bounds(self, indices, coeffs) -> tuple[float, float]:
        """Interval of a linear expression from variable bounds."""
        lo = hi = 0.0
        for i, c in zip(np.asarray(indices, dtype=int), np.asarray(coeffs, dtype=float)):
            a, b = c * self.lb[i], c * self.ub[i]
            lo += min(a, b)
            hi += max(a, b)
        return lo, hi

    def log_big_m(self, name: str, value: float):
        self.big_m_log[name] = float(value)

    def add_indicator(self, binary: int, indices, coeffs, sense: str, rhs: float,
                      name: str = "ind") -> list[int]:
        """``binary = 1  ->  expr (sense) rhs`` via a big-M from variable bounds."""
        if not self.is_binary[binary]:
            raise ModelError("indicator driver must be binary")
        lo, hi = self.expression_bounds(indices, coeffs)
        rows = []
        idx = list(np.asarray(indices, dtype=int))
        co = list(np.asarray(coeffs, dtype=float))
        if sense in ("<=", "="):
            mbar = hi - rhs
            if not np.isfinite(mbar):
                raise ModelError("cannot derive big-M: expression unbounded above")
            mbar = max(mbar, 0.0)
            self.log_big_m(f"{name}.ub", mbar)
            rows.append(self.add_row(idx + [binary], co + [mbar], "<=", rhs + mbar, f"{name}.ub"))
        if sense in (">=", "="):
            mbar = rhs - lo
            if not np.isfinite(mbar):
                raise ModelError("cannot derive big-M: expression unbounded below")
            mbar = max(mbar, 0.0)
            self.log_big_m(f"{name}.lb", mbar)
            rows.append(self.add_row(idx + [binary], co + [-mbar], ">=", rhs - mbar, f"{name}.lb"))
        return rows

    def add_and(self, out: int, bits, name: str = "and") -> list[int]:
        """``out = AND(bits)`` for binaries."""
        bits = list(np.asarray(bits, dtype=int))
        if not self.is_binary[out] or not all(self.is_binary[b] for b in bits):
            raise ModelError("AND link requires binary variables")
        rows = [self.add_row([out, b], [1.0, -1.0], "<=", 0.0, f"{name}.le") for b in bits]
        rows.append(self.add_row([out] + bits, [1.0] + [-1.0] * len(bits), ">=",
                                 1.0 - len(bits), f"{name}.ge"))
        return rows

    # -- assembly --------------------------------------------------------------
    def _assemble(self):
        """Split rows into (A_ub, b_ub, A_eq, b_eq) sparse matrices."""
        data_ub, rows_ub, cols_ub, b_ub = [], [], [], []
        data_eq, rows_eq, cols_eq, b_eq = [], [], [], []
        for (idx, co), sense, rhs in zip(self._rows, self._senses, self._rhs):
            if sense == "=":
                r = len(b_eq)
                rows_eq.extend([r] * len(idx))
                cols_eq.extend(idx.tolist())
                data_eq.extend(co.tolist())
                b_eq.append(rhs)
            else:
                sgn = 1.0 if sense == "<=" else -1.0
                r = len(b_ub)
                rows_ub.extend([r] * len(idx))
                cols_ub.extend(idx.tolist())
                data_ub.extend((sgn * co).tolist())
                b_ub.append(sgn * rhs)
        n = self.num_vars
        A_ub = sparse.csr_matrix((data_ub, (rows_ub, cols_ub)), shape=(len(b_ub), n)) if b_ub else None
        A_eq = sparse.csr_matrix((data_eq, (rows_eq, cols_eq)), shape=(len(b_eq), n)) if b_eq else None
        return A_ub, (np.array(b_ub) if b_ub else None), A_eq, (np.array(b_eq) if b_eq else None)

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(self.num_vars)
        for i, v in self.obj.items():
            c[i] = v
        return c

    def to_lp_string(self) -> str:
        """Model in CPLEX LP text format for external cross-checking."""
        lines = ["\\ " + self.name, "Minimize" if self.sense == "min" else "Maximize"]
        terms = [f"{v:+.17g} {self.var_names[i]}" for i, v in sorted(self.obj.items())] or ["0 " + self.var_names[0]]
        lines.append(" obj: " + " ".join(terms))
        lines.append("Subject To")
        op = {"<=": "<=", ">=": ">=", "=": "="}
        for (idx, co), sense, rhs, nm in zip(self._rows, self._senses, self._rhs, self._row_names):
            body = " ".join(f"{c:+.17g} {self.var_names[i]}" for i, c in zip(idx, co))
            lines.append(f" {nm}: {body} {op[sense]} {rhs:.17g}")
        lines.append("Bounds")
        for i in range(self.num_vars):
            if not self.is_binary[i]:
                lo = "-inf" if self.lb[i] == -np.inf else f"{self.lb[i]:.17g}"
                hi = "+inf" if self.ub[i] == np.inf else f"{self.ub[i]:.17g}"
                lines.append(f" {lo} <= {self.var_names[i]} <= {hi}")
        bins = [self.var_names[i] for i in range(self.num_vars) if self.is_binary[i]]
        if bins:
            lines.append("Binary")
            lines.append(" " + " ".join(bins))
        lines.append("End")
        return "\n".join(lines) + "\n"


_LP_STATUS = {0: Status.OPTIMAL, 2: Status.INFEASIBLE, 3: Status.UNBOUNDED}


def solve_lp(model: Model, bound_overrides: dict[int, tuple[float, float]] | None = None,
             _assembled=None) -> Solution:
    """LP solve (binaries relaxed to their [0, 1] boxes), HiGHS backend.

    Exposes dual values for the inequality/equality blocks in ``duals``.
    """
    A_ub, b_ub, A_eq, b_eq = _assembled if _assembled is not None else model._assemble()
    c = model.objective_vector()
    sgn = 1.0 if model.sense == "min" else -1.0
    bounds = list(zip(model.lb, model.ub))
    if bound_overrides:
        for i, bd in bound_overrides.items():
            bounds[i] = bd
    bounds = [(None if lo == -np.inf else lo, None if hi == np.inf else hi) for lo, hi in bounds]
    res = linprog(sgn * c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                  method="highs")
    status = _LP_STATUS.get(res.status, Status.INFEASIBLE)
    if status != Status.OPTIMAL:
        return Solution(status=status, stats={"lp_status": int(res.status)},
                        big_m_audit=dict(model.big_m_log))
    duals = {
        "ineq": None if res.ineqlin is None else sgn * np.asarray(res.ineqlin.marginals),
        "eq": None if res.eqlin is None else sgn * np.asarray(res.eqlin.marginals),
    }
    return Solution(status=Status.OPTIMAL, x=np.asarray(res.x), objective=float(sgn * res.fun),
                    best_bound=float(sgn * res.fun), gap=0.0, duals=duals,
                    stats={"lp_iterations": int(getattr(res, "nit", 0))},
                    big_m_audit=dict(model.big_m_log))


# ---------------------------------------------------------------------------
# Strictly convex QP, primal active-set method
# ---------------------------------------------------------------------------

@dataclass
class QpResult:
    status: Status
    x: np.ndarray | None = None
    objective: float | None = None
    ineq_multipliers: np.ndarray | None = None
    eq_multipliers: np.ndarray | None = None
    active_set: list[int] = field(default_factory=list)
    iterations: int = 0

    @property
    def ok(self) -> bool:
        return self.status == Status.OPTIMAL


def _feasible_point(A_in, b_in, A_eq, b_eq, n) -> np.ndarray | None:
    """Phase-1 LP: minimize the worst inequality violation."""
    c = np.zeros(n + 1)
    c[-1] = 1.0
    blocks = []
    rhs = []
    if A_in is not None and len(A_in):
        blocks.append(np.hstack([A_in, -np.ones((len(A_in), 1))]))
        rhs.append(b_in)
    A_ub = np.vstack(blocks) if blocks else None
    b_ub = np.concatenate(rhs) if rhs else None
    A_eq_ext = None if A_eq is None or not len(A_eq) else np.hstack([A_eq, np.zeros((len(A_eq), 1))])
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq_ext, b_eq=b_eq,
                  bounds=[(None, None)] * n + [(0, None)], method="highs")
    if res.status != 0 or res.x[-1] > 1e-7:
        return None
    return res.x[:n]


def solve_qp(H, q, A_in=None, b_in=None, A_eq=None, b_eq=None,
             tol: float = 1e-9, max_iter: int | None = None) -> QpResult:
    """Minimize ``0.5 x'Hx + q'x`` s.t. ``A_in x <= b_in``, ``A_eq x = b_eq``.

    H must be symmetric positive definite. Primal active-set iteration from a
    phase-1 feasible point with an initially empty working set; returns the
    unique minimizer, the Lagrange multipliers and the final active set.
    Drop rule: most negative multiplier, smallest index on ties.
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    n = H.shape[0]
    q = np.zeros(n) if q is None else np.asarray(q, dtype=float).ravel()
    A_in = np.zeros((0, n)) if A_in is None else np.atleast_2d(np.asarray(A_in, dtype=float))
    b_in = np.zeros(0) if b_in is None else np.asarray(b_in, dtype=float).ravel()
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
    try:
        np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        raise ModelError("QP matrix must be positive definite")

    # Starting point: unconstrained optimum if feasible, else phase-1 LP.
    x = -np.linalg.solve(H, q)
    if A_eq.shape[0] or (A_in.shape[0] and np.any(A_in @ x > b_in + FEAS_TOL)):
        if A_eq.shape[0] and not A_in.shape[0]:
            x = _eq_qp(H, q, A_eq, b_eq)[0]
        else:
            x = _feasible_point(A_in, b_in, A_eq if A_eq.shape[0] else None,
                                b_eq if A_eq.shape[0] else None, n)
            if x is None:
                return QpResult(status=Status.INFEASIBLE)
    working: list[int] = []
    max_iter = max_iter or 50 * (n + A_in.shape[0] + A_eq.shape[0] + 2)
    for it in range(max_iter):
        A_w = np.vstack([A_eq, A_in[working]]) if (A_eq.shape[0] or working) else np.zeros((0, n))
        # Equality-constrained step: minimize over {p : A_w (x + p) = rhs_w}.
        g = H @ x + q
        p, lam = _kkt_step(H, g, A_w)
        if np.linalg.norm(p, np.inf) <= tol:
            n_eq = A_eq.shape[0]
            ineq_lam = lam[n_eq:]
            if ineq_lam.size == 0 or ineq_lam.min() >= -1e-9:
                mults = np.zeros(A_in.shape[0])
                for k, ci in enumerate(working):
                    mults[ci] = max(ineq_lam[k], 0.0)
                obj = 0.5 * x @ H @ x + q @ x
                return QpResult(status=Status.OPTIMAL, x=x, objective=float(obj),
                                ineq_multipliers=mults,
                                eq_multipliers=lam[:n_eq] if n_eq else np.zeros(0),
                                active_set=sorted(working), iterations=it)
            drop_k = int(np.argmin(ineq_lam))
            working.pop(drop_k)
            continue
        # Ratio test against constraints not in the working set.
        alpha = 1.0
        blocker = -1
        for ci in range(A_in.shape[0]):
            if ci in working:
                continue
            den = A_in[ci] @ p
            if den > tol:
                ratio = (b_in[ci] - A_in[ci] @ x) / den
                if ratio < alpha - 1e-12:
                    alpha = max(ratio, 0.0)
                    blocker = ci
        x = x + alpha * p
        if blocker >= 0:
            working.append(blocker)
    return QpResult(status=Status.TIME_LIMIT, x=x, iterations=max_iter)


def _kkt_step(H, g, A_w):
    """Solve [[H, A'],[A, 0]] [p, lam] = [-g, 0]."""
    m = A_w.shape[0]
    if m == 0:
        return np.linalg.solve(H, -g), np.zeros(0)
    n = H.shape[0]
    K = np.block([[H, A_w.T], [A_w, np.zeros((m, m))]])
    rhs = np.concatenate([-g, np.zeros(m)])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
    return sol[:n], sol[n:]


def _eq_qp(H, q, A_eq, b_eq):
    m, n = A_eq.shape
    K = np.block([[H, A_eq.T], [A_eq, np.zeros((m, m))]])
    rhs = np.concatenate([-q, b_eq])
    sol = np.linalg.solve(K, rhs)
    return sol[:n], sol[n:]


# ---------------------------------------------------------------------------
# Branch and bound
# ---------------------------------------------------------------------------

def solve_milp(model: Model, config: MilpConfig | None = None) -> Solution:
    """Branch and bound over HiGHS LP relaxations.

    Branching variable: most fractional binary (smallest index on ties),
    overridable by ``config.branch_priority``. Node selection: depth-first
    dives on the nearest-integer child with best-bound restarts once a dive
    is pruned. Deterministic for a fixed model and single thread.
    """
    config = config or MilpConfig()
    assembled = model._assemble()
    bin_idx = model.binary_indices
    sense_mul = 1.0 if model.sense == "min" else -1.0
    t0 = time.monotonic()

    root = solve_lp(model, _assembled=assembled)
    if root.status in (Status.INFEASIBLE, Status.UNBOUNDED):
        root.big_m_audit = dict(model.big_m_log)
        return root

    incumbent_x = None
    incumbent_obj = np.inf  # in minimize space
    nodes_explored = 0
    heap: list = []
    seq = 0

    def push(bounds_map, bound_val, depth):
        nonlocal seq
        heapq.heappush(heap, (bound_val, depth, seq, bounds_map))
        seq += 1

    def frac_binary(x):
        """Branching candidate: priority class first, then most fractional."""
        best = None
        for i in bin_idx:
            f = x[i] - np.floor(x[i])
            fdist = min(f, 1.0 - f)
            if fdist <= INT_TOL:
                continue
            prio = config.branch_priority.get(int(i), 0) if config.branch_priority else 0
            key = (-prio, -fdist, i)
            if best is None or key < best[0]:
                best = (key, int(i), f)
        return best

    push({}, sense_mul * root.objective, 0)
    best_bound = sense_mul * root.objective
    gap = np.inf

    while heap:
        if time.monotonic() - t0 > config.time_limit:
            return _milp_result(Status.TIME_LIMIT, incumbent_x, incumbent_obj,
                                heap, sense_mul, nodes_explored, model, bin_idx)
        bound_val, depth, _, bounds_map = heapq.heappop(heap)
        if bound_val >= incumbent_obj - _gap_slack(incumbent_obj, config.gap_tol):
            continue
        # Depth-first dive from this node.
        current = (bounds_map, depth)
        while current is not None:
            if time.monotonic() - t0 > config.time_limit:
                return _milp_result(Status.TIME_LIMIT, incumbent_x, incumbent_obj,
                                    heap, sense_mul, nodes_explored, model, bin_idx)
            bmap, d = current
            current = None
            sol = solve_lp(model, bound_overrides=bmap, _assembled=assembled)
            nodes_explored += 1
            if sol.status != Status.OPTIMAL:
                break
            node_bound = sense_mul * sol.objective
            if node_bound >= incumbent_obj - _gap_slack(incumbent_obj, config.gap_tol):
                break
            cand = frac_binary(sol.x)
            if cand is None:
                x_int = sol.x.copy()
                x_int[bin_idx] = np.round(x_int[bin_idx])
                if node_bound < incumbent_obj:
                    incumbent_obj = node_bound
                    incumbent_x = x_int
                break
            _, bi, f = cand
            near = int(round(sol.x[bi]))
            far = 1 - near
            far_map = dict(bmap)
            far_map[bi] = (float(far), float(far))
            push(far_map, node_bound, d + 1)
            near_map = dict(bmap)
            near_map[bi] = (float(near), float(near))
            current = (near_map, d + 1)

        if incumbent_x is not None:
            best_bound = min([b for b, *_ in heap], default=incumbent_obj)
            gap = incumbent_obj - best_bound
            if gap <= _gap_slack(incumbent_obj, config.gap_tol):
                return _milp_result(Status.OPTIMAL, incumbent_x, incumbent_obj,
                                    heap, sense_mul, nodes_explored, model, bin_idx)

    if incumbent_x is None:
        return Solution(status=Status.INFEASIBLE, stats={"nodes": nodes_explored},
                        big_m_audit=dict(model.big_m_log))
    return _milp_result(Status.OPTIMAL, incumbent_x, incumbent_obj, heap, sense_mul,
                        nodes_explored, model, bin_idx)


def _gap_slack(incumbent_obj, gap_tol):
    """Absolute-or-relative tolerance, whichever is looser."""
    if not np.isfinite(incumbent_obj):
        return 0.0
    return max(gap_tol, gap_tol * abs(incumbent_obj))


def _milp_result(status, incumbent_x, incumbent_obj, heap, sense_mul, nodes, model, bin_idx):
    if incumbent_x is None:
        return Solution(status=Status.INFEASIBLE if status != Status.TIME_LIMIT else status,
                        stats={"nodes": nodes}, big_m_audit=dict(model.big_m_log))
    best_bound = min([b for b, *_ in heap], default=incumbent_obj)
    gap = max(incumbent_obj - best_bound, 0.0)
    return Solution(status=status, x=incumbent_x,
                    objective=float(sense_mul * incumbent_obj),
                    best_bound=float(sense_mul * best_bound),
                    gap=float(gap),
                    stats={"nodes": nodes, "open_nodes": len(heap)},
                    big_m_audit=dict(model.big_m_log))
