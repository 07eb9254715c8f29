"""Linear programs with explicit and oracle-generated columns.

``solve_explicit`` hands a dense problem to HiGHS (dual simplex, so the answer
is a vertex).  ``solve_with_oracle`` grows the column set from a pricing oracle,
either by plain column generation (``cutting_plane``) or by running the central
cut ellipsoid method on the dual and recovering the primal from the generated
cuts (``ellipsoid``).  ``extract_basic`` walks an optimal point down to a vertex
of the optimal face.

Dual values follow the sensitivity convention: ``duals[r]`` is the derivative
of the optimal objective with respect to the right-hand side of row ``r``.  For
a maximisation this makes ``<=`` rows nonnegative, ``>=`` rows nonpositive, and
the reduced cost of a column ``c_j - y.a_j``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Protocol, Sequence

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import linprog

from .errors import (DenseCapExceeded, IterationLimit, LpError, NumericalFailure,
                     OracleInconsistent)

log = logging.getLogger(__name__)

LE, GE, EQ = "<=", ">=", "="
OPTIMAL, INFEASIBLE, UNBOUNDED, ITERATION_LIMIT = "optimal", "infeasible", "unbounded", "iteration_limit"
CUTTING_PLANE, ELLIPSOID = "cutting_plane", "ellipsoid"


@dataclass(frozen=True)
class Tolerances:
    opt: float = 1e-7
    duality: float = 1e-7
    cs: float = 1e-6
    price: float = 1e-9
    zero: float = 1e-11  # entries below this count as outside the support


DEFAULT_TOL = Tolerances()


@dataclass(frozen=True)
class Row:
    name: Hashable
    sense: str
    rhs: float = 0.0


@dataclass(frozen=True)
class Column:
    id: Hashable
    objective: float
    coeffs: Mapping[Hashable, float]
    free: bool = False


@dataclass(frozen=True)
class PricedColumn:
    column: Column
    violation: float


class ColumnOracle(Protocol):
    def __call__(self, duals: Mapping[Hashable, float],
                 objective_scale: float = 1.0) -> PricedColumn | None:
        """Most violated column at ``duals`` or ``None``.

        Columns are priced with objective ``objective_scale * c_j``; the
        solver passes 0 while searching for a feasible restricted problem.
        """


@dataclass(frozen=True)
class LpSpec:
    rows: tuple[Row, ...]
    columns: tuple[Column, ...] = ()
    maximize: bool = True

    def __post_init__(self):
        names = [r.name for r in self.rows]
        if len(set(names)) != len(names):
            raise LpError("row names must be unique")
        ids = [c.id for c in self.columns]
        if len(set(ids)) != len(ids):
            raise LpError("column ids must be unique")
        known = set(names)
        for c in self.columns:
            if not set(c.coeffs) <= known:
                raise LpError(f"column {c.id!r} touches unknown rows")
        for r in self.rows:
            if r.sense not in (LE, GE, EQ):
                raise LpError(f"row {r.name!r} has bad sense {r.sense!r}")

    def with_columns(self, columns: Iterable[Column]) -> "LpSpec":
        return LpSpec(self.rows, tuple(columns), self.maximize)


@dataclass
class LpSolution:
    status: str
    primal: dict = field(default_factory=dict)
    duals: dict = field(default_factory=dict)
    objective: float = math.nan
    iterations: int = 0
    columns: tuple[Column, ...] = ()
    stats: dict = field(default_factory=dict)

    @property
    def support(self) -> list:
        return [c.id for c in self.columns if not c.free and self.primal.get(c.id, 0.0) != 0.0]


def reduced_cost(spec_maximize: bool, column: Column, duals: Mapping, scale: float = 1.0) -> float:
    """Violation of the dual constraint of ``column``; positive means improving."""
    priced = scale * column.objective - sum(duals.get(r, 0.0) * v for r, v in column.coeffs.items())
    return priced if spec_maximize else -priced


def _dense(spec: LpSpec):
    rows = {r.name: k for k, r in enumerate(spec.rows)}
    A = np.zeros((len(spec.rows), len(spec.columns)))
    for j, col in enumerate(spec.columns):
        for r, v in col.coeffs.items():
            A[rows[r], j] = v
    b = np.array([r.rhs for r in spec.rows], dtype=float)
    c = np.array([col.objective for col in spec.columns], dtype=float)
    return A, b, c


def solve_explicit(spec: LpSpec, tol: Tolerances = DEFAULT_TOL, dense_cap: int = 5_000_000) -> LpSolution:
    """Solve an LP whose columns are all listed, returning a vertex and duals."""
    m, n = len(spec.rows), len(spec.columns)
    if m * max(n, 1) > dense_cap:
        raise DenseCapExceeded(f"{m}x{n} exceeds dense cap {dense_cap}")
    if n == 0:
        return _solve_empty(spec)
    A, b, c = _dense(spec)
    senses = [r.sense for r in spec.rows]
    le = [k for k, s in enumerate(senses) if s == LE]
    ge = [k for k, s in enumerate(senses) if s == GE]
    eq = [k for k, s in enumerate(senses) if s == EQ]
    A_ub = np.vstack([A[le], -A[ge]]) if le or ge else None
    b_ub = np.concatenate([b[le], -b[ge]]) if le or ge else None
    sign = -1.0 if spec.maximize else 1.0
    bounds = [(None, None) if col.free else (0, None) for col in spec.columns]
    res = linprog(
        sign * c, A_ub=A_ub, b_ub=b_ub,
        A_eq=A[eq] if eq else None, b_eq=b[eq] if eq else None,
        bounds=bounds, method="highs-ds",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status == 2:
        return LpSolution(INFEASIBLE, columns=spec.columns, iterations=res.nit)
    if res.status == 3:
        return LpSolution(UNBOUNDED, columns=spec.columns, iterations=res.nit)
    if res.status == 1:
        return LpSolution(ITERATION_LIMIT, columns=spec.columns, iterations=res.nit)
    if res.status != 0:
        raise NumericalFailure(f"HiGHS failed: {res.message}")

    y = np.zeros(m)
    m_ub = res.ineqlin.marginals if A_ub is not None else np.zeros(0)
    for pos, k in enumerate(le):
        y[k] = sign * m_ub[pos]
    for pos, k in enumerate(ge):
        y[k] = -sign * m_ub[len(le) + pos]
    if eq:
        for pos, k in enumerate(eq):
            y[k] = sign * res.eqlin.marginals[pos]
    x = np.where(np.abs(res.x) > tol.zero, res.x, 0.0)
    sol = LpSolution(
        OPTIMAL,
        primal={col.id: float(v) for col, v in zip(spec.columns, x) if v != 0.0},
        duals={r.name: float(v) for r, v in zip(spec.rows, y)},
        objective=float(c @ x),
        iterations=int(res.nit),
        columns=spec.columns,
    )
    _certify(spec, sol, A, b, c, x, y, tol)
    return sol


def _solve_empty(spec: LpSpec) -> LpSolution:
    feasible = all(
        (r.sense == LE and r.rhs >= 0) or (r.sense == GE and r.rhs <= 0) or (r.sense == EQ and r.rhs == 0)
        for r in spec.rows)
    if not feasible:
        return LpSolution(INFEASIBLE)
    return LpSolution(OPTIMAL, objective=0.0, duals={r.name: 0.0 for r in spec.rows},
                      stats={"dual_objective": 0.0})


def _certify(spec, sol, A, b, c, x, y, tol: Tolerances):
    """Strong duality and complementary slackness at an optimal answer."""
    dual_obj = float(b @ y)
    scale = 1.0 + abs(sol.objective)
    gap = abs(sol.objective - dual_obj)
    slack = A @ x - b
    row_cs = float(np.max(np.abs(slack * y), initial=0.0))
    rc = c - A.T @ y
    col_cs = float(np.max(np.abs(rc * x), initial=0.0))
    sol.stats.update(dual_objective=dual_obj, duality_gap=gap, cs_residual=max(row_cs, col_cs))
    if gap > tol.duality * scale:
        raise NumericalFailure(f"duality gap {gap:.3g} exceeds tolerance")
    if max(row_cs, col_cs) > tol.cs * scale:
        raise NumericalFailure(f"complementary slackness residual {max(row_cs, col_cs):.3g}")


# ---------------------------------------------------------------------------
# oracle-driven solves


def _artificials(spec: LpSpec) -> list[Column]:
    arts = []
    for r in spec.rows:
        signs = {LE: (-1.0,), GE: (1.0,), EQ: (1.0, -1.0)}[r.sense]
        for s in signs:
            arts.append(Column(("__artificial__", r.name, s), -1.0 if spec.maximize else 1.0, {r.name: s}))
    return arts


def _is_artificial(col: Column) -> bool:
    return isinstance(col.id, tuple) and len(col.id) == 3 and col.id[0] == "__artificial__"


def _checked(spec: LpSpec, priced: PricedColumn, duals, scale: float, present: set, tol: Tolerances) -> Column:
    col = priced.column
    again = reduced_cost(spec.maximize, col, duals, scale)
    if abs(again - priced.violation) > tol.price * max(1.0, abs(again)):
        raise OracleInconsistent(
            f"column {col.id!r}: reported violation {priced.violation:.12g}, re-priced {again:.12g}")
    if again <= 0:
        raise OracleInconsistent(f"column {col.id!r} is not violated (re-priced {again:.3g})")
    if col.id in present:
        raise OracleInconsistent(f"column {col.id!r} returned twice")
    return col


def _column_generation(spec: LpSpec, oracle: ColumnOracle, columns: list[Column],
                       tol: Tolerances, max_columns: int, stats: dict) -> LpSolution:
    present = {c.id for c in columns}
    generated = 0
    calls = 0

    def grow(lp: LpSpec, scale: float) -> LpSolution:
        nonlocal generated, calls
        while True:
            sol = solve_explicit(lp, tol)
            if sol.status != OPTIMAL:
                return sol
            calls += 1
            priced = oracle(sol.duals, scale)
            if priced is None:
                return sol
            col = _checked(spec, priced, sol.duals, scale, present, tol)
            present.add(col.id)
            columns.append(col)
            generated += 1
            if generated > max_columns:
                raise IterationLimit(f"more than {max_columns} columns generated")
            lp = lp.with_columns(lp.columns + (col if scale == 1.0 else _zeroed(col),))

    sol = solve_explicit(spec.with_columns(columns), tol)
    if sol.status == INFEASIBLE:
        # phase one: drive artificial columns out with zero-objective pricing
        arts = _artificials(spec)
        phase1 = spec.with_columns([_zeroed(c) for c in columns] + arts)
        sol1 = grow(phase1, 0.0)
        if sol1.status != OPTIMAL:
            raise NumericalFailure(f"phase one ended with status {sol1.status}")
        stats["phase_one_columns"] = generated
        if sol1.objective < -tol.opt * (1 + len(spec.rows)):
            out = LpSolution(INFEASIBLE, columns=tuple(columns))
            out.stats.update(stats, generated=generated, oracle_calls=calls)
            return out
    elif sol.status == UNBOUNDED:
        return sol

    sol = grow(spec.with_columns(columns), 1.0)
    sol.iterations = len(columns) - len(spec.columns)
    sol.stats.update(stats, generated=generated, oracle_calls=calls)
    return sol


def _zeroed(col: Column) -> Column:
    return Column(col.id, 0.0, col.coeffs, col.free)


def solve_with_oracle(spec: LpSpec, oracle: ColumnOracle, mode: str = CUTTING_PLANE,
                      warm_start: Sequence[Column] = (), tol: Tolerances = DEFAULT_TOL,
                      max_columns: int = 20_000, ellipsoid_options: Mapping | None = None) -> LpSolution:
    """Solve an LP whose nonnegative columns come from ``oracle``.

    ``spec.columns`` are always present (free columns live here); ``warm_start``
    seeds the restricted problem.  ``iterations`` of the answer counts the
    warm-start plus generated columns.
    """
    columns = list(spec.columns)
    ids = {c.id for c in columns}
    for c in warm_start:
        if c.id not in ids:
            columns.append(c)
            ids.add(c.id)
    stats: dict = {"mode": mode, "warm_start": len(columns) - len(spec.columns)}
    if mode == ELLIPSOID:
        cuts, info = ellipsoid_columns(spec, oracle, columns, tol=tol, **dict(ellipsoid_options or {}))
        stats.update(info)
        for c in cuts:
            if c.id not in ids:
                columns.append(c)
                ids.add(c.id)
    elif mode != CUTTING_PLANE:
        raise ValueError(f"unknown mode {mode!r}")
    sol = _column_generation(spec, oracle, columns, tol, max_columns, stats)
    if mode == ELLIPSOID:
        sol.stats["cleanup_columns"] = sol.stats.get("generated", 0)
    return sol


def bit_length_bound(spec: LpSpec, cap: int = 24) -> int:
    """Crude input-size exponent L (radius 2^L), capped."""
    biggest = max(
        [abs(r.rhs) for r in spec.rows]
        + [abs(v) for c in spec.columns for v in c.coeffs.values()]
        + [abs(c.objective) for c in spec.columns] + [1.0])
    return min(cap, int(math.ceil(math.log2(1 + biggest))) + int(math.ceil(math.log2(len(spec.rows) + 1))) + 4)


def ellipsoid_columns(spec: LpSpec, oracle: ColumnOracle, columns: Sequence[Column],
                      tol: Tolerances = DEFAULT_TOL, max_iter: int = 4000, radius_exp: int | None = None,
                      radius_cap: int = 24, volume_tol: float = 1e-9) -> tuple[list[Column], dict]:
    """Central-cut ellipsoid on the dual; returns the oracle columns it cut with.

    The dual lives in row space: minimise b.y (maximisation primal) subject to
    a_j.y >= c_j for nonnegative columns, a_j.y = c_j for free ones and the
    sign constraints of the row senses.  Equalities are eliminated by working
    in an affine parametrisation y = y0 + N z.
    """
    if not spec.maximize:
        raise LpError("ellipsoid mode expects a maximisation primal")
    rows = [r.name for r in spec.rows]
    pos = {r: k for k, r in enumerate(rows)}
    m = len(rows)
    b = np.array([r.rhs for r in spec.rows])

    def vec(col: Column) -> np.ndarray:
        v = np.zeros(m)
        for r, val in col.coeffs.items():
            v[pos[r]] = val
        return v

    free = [c for c in columns if c.free]
    ineq = [(vec(c), c.objective) for c in columns if not c.free]
    for k, r in enumerate(spec.rows):
        e = np.zeros(m)
        if r.sense == LE:
            e[k] = 1.0
            ineq.append((e, 0.0))
        elif r.sense == GE:
            e[k] = -1.0
            ineq.append((e, 0.0))
    G = np.array([g for g, _ in ineq]) if ineq else np.zeros((0, m))
    h = np.array([v for _, v in ineq])

    if free:
        E = np.array([vec(c) for c in free])
        f = np.array([c.objective for c in free])
        y0 = np.linalg.lstsq(E, f, rcond=None)[0]
        if np.max(np.abs(E @ y0 - f), initial=0.0) > 1e-9:
            return [], {"ellipsoid_iterations": 0, "ellipsoid_status": "dual_infeasible"}
        N = null_space(E)
    else:
        y0 = np.zeros(m)
        N = np.eye(m)
    d = N.shape[1]
    if d == 0:
        return [], {"ellipsoid_iterations": 0, "ellipsoid_status": "point"}

    L = radius_exp if radius_exp is not None else bit_length_bound(spec, radius_cap)
    z = np.zeros(d)
    P = np.eye(d) * float(4**L)
    log_det = d * math.log(float(4**L))
    cuts: list[Column] = []
    seen = {c.id for c in columns}
    best = math.inf
    status = "iteration_limit"
    it = 0
    for it in range(1, max_iter + 1):
        y = y0 + N @ z
        a = None
        if len(h):
            viol = h - G @ y
            k = int(np.argmax(viol))
            if viol[k] > tol.price:
                a = -(N.T @ G[k])
        if a is None:
            priced = oracle(dict(zip(rows, y.tolist())), 1.0)
            if priced is not None and priced.violation > tol.price:
                col = priced.column
                if col.id not in seen:
                    seen.add(col.id)
                    cuts.append(col)
                a = -(N.T @ vec(col))
            else:
                best = min(best, float(b @ y))
                a = N.T @ b
        Pa = P @ a
        aPa = float(a @ Pa)
        if aPa <= 1e-300:
            status = "flat"
            break
        g = Pa / math.sqrt(aPa)
        if d == 1:
            z = z - g / 2.0
            P = P / 4.0
            log_det += math.log(0.25)
        else:
            z = z - g / (d + 1)
            P = (d * d / (d * d - 1.0)) * (P - (2.0 / (d + 1)) * np.outer(g, g))
            P = (P + P.T) / 2.0
            log_det += d * math.log(d * d / (d * d - 1.0)) + math.log(1 - 2.0 / (d + 1))
        if log_det / (2 * d) < math.log(volume_tol):
            status = "volume"
            break
    info = {"ellipsoid_iterations": it, "ellipsoid_status": status, "ellipsoid_columns": len(cuts),
            "ellipsoid_bound": best, "radius_exp": L}
    log.debug("ellipsoid: %s", info)
    return cuts, info


# ---------------------------------------------------------------------------
# vertices


def is_vertex(spec: LpSpec, columns: Sequence[Column], x: Mapping, tol: float = 1e-9) -> bool:
    """True when ``x`` is a basic feasible point of ``spec`` over ``columns``."""
    active = [c for c in columns if c.free or abs(x.get(c.id, 0.0)) > 0.0]
    if not active:
        return True
    tight = []
    for r in spec.rows:
        lhs = sum(c.coeffs.get(r.name, 0.0) * x.get(c.id, 0.0) for c in active)
        if r.sense == EQ or abs(lhs - r.rhs) <= tol * (1 + abs(r.rhs)):
            tight.append(r.name)
    if not tight:
        return False
    M = np.array([[c.coeffs.get(r, 0.0) for c in active] for r in tight])
    return int(np.linalg.matrix_rank(M, tol=1e-9)) == len(active)


def extract_basic(spec: LpSpec, sol: LpSolution, tol: Tolerances = DEFAULT_TOL) -> LpSolution:
    """Move an optimal point to a vertex of the optimal face.

    Restrict to the support, pin the objective to its optimal value, then
    maximise one support coordinate at a time, pinning each coordinate that
    did not yet land on a vertex.  At most |support| re-optimisations.
    """
    if sol.status != OPTIMAL:
        raise LpError("extract_basic needs an optimal solution")
    columns = tuple(sol.columns) or spec.columns
    if is_vertex(spec, columns, sol.primal):
        return sol
    support = [c for c in columns if not c.free and sol.primal.get(c.id, 0.0) > 0.0]
    free = [c for c in columns if c.free]
    face = Row(("__face__",), EQ, sol.objective)
    pins: list[Row] = []
    pinned: dict = {}
    current = sol
    reopt = 0
    for target in support:
        rows = spec.rows + (face,) + tuple(pins)
        cols = []
        for c in free + support:
            coeffs = dict(c.coeffs)
            coeffs[face.name] = c.objective
            if c.id in pinned:
                coeffs[("__pin__", c.id)] = 1.0
            cols.append(Column(c.id, 1.0 if c.id == target.id else 0.0, coeffs, c.free))
        res = solve_explicit(LpSpec(rows, tuple(cols), maximize=True), tol)
        reopt += 1
        if res.status != OPTIMAL:
            raise NumericalFailure(f"face re-optimisation ended with status {res.status}")
        current = res
        if is_vertex(spec, free + support, res.primal):
            break
        pin = Row(("__pin__", target.id), EQ, res.primal.get(target.id, 0.0))
        pins.append(pin)
        pinned[target.id] = pin
    x = dict(current.primal)
    used = tuple(c for c in columns if c.free or x.get(c.id, 0.0) > 0.0)
    value = sum(c.objective * x.get(c.id, 0.0) for c in columns)
    if abs(value - sol.objective) > tol.opt * (1 + abs(sol.objective)):
        raise NumericalFailure(f"basic extraction moved the objective by {value - sol.objective:.3g}")
    out = LpSolution(OPTIMAL, primal={k: v for k, v in x.items() if v != 0.0}, duals=dict(sol.duals),
                     objective=value, iterations=sol.iterations, columns=used,
                     stats=dict(sol.stats, reoptimizations=reopt))
    return out
