import pytest

from exante.errors import DenseCapExceeded, OracleInconsistent
from exante.game import build_sequences, enumerate_plans
from exante.lp import (CUTTING_PLANE, ELLIPSOID, EQ, GE, INFEASIBLE, LE, OPTIMAL, Column, LpSpec, PricedColumn,
                       Row, extract_basic, is_vertex, reduced_cost, solve_explicit, solve_with_oracle)
from exante.reconstruction import PlanOracle, mixture_lp, plan_column


def box():
    rows = (Row("r1", LE, 1.0), Row("r2", LE, 1.0))
    cols = (Column("x1", 1.0, {"r1": 1.0}), Column("x2", 1.0, {"r2": 1.0}))
    return LpSpec(rows, cols)


def test_box_lp():
    sol = solve_explicit(box())
    assert sol.status == OPTIMAL
    assert sol.objective == pytest.approx(2.0)
    assert sol.primal == pytest.approx({"x1": 1.0, "x2": 1.0})
    # sensitivity duals: relaxing either row by one unit adds one unit of value
    assert sol.duals == pytest.approx({"r1": 1.0, "r2": 1.0})


def test_dual_signs_follow_row_sense():
    # max -x s.t. x >= 2: the >= row has a nonpositive dual
    spec = LpSpec((Row("lo", GE, 2.0),), (Column("x", -1.0, {"lo": 1.0}),))
    sol = solve_explicit(spec)
    assert sol.objective == pytest.approx(-2.0)
    assert sol.duals["lo"] == pytest.approx(-1.0)


def test_infeasible_lp_is_reported():
    spec = LpSpec((Row("r", LE, -1.0),), (Column("x", 1.0, {"r": 1.0}),))
    assert solve_explicit(spec).status == INFEASIBLE


def test_dense_cap():
    with pytest.raises(DenseCapExceeded):
        solve_explicit(box(), dense_cap=3)


def test_mixture_lp_with_all_plans_has_value_one(two_level):
    idx = build_sequences(two_level, 1)
    r = [1, 0.5, 0.5, 0.25, 0.25]
    spec = mixture_lp(idx, r).with_columns(plan_column(idx, p) for p in enumerate_plans(two_level, 1))
    assert solve_explicit(spec).objective == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("mode", [CUTTING_PLANE, ELLIPSOID])
def test_mixture_lp_with_oracle_matches_explicit(two_level, mode):
    idx = build_sequences(two_level, 1)
    sol = solve_with_oracle(mixture_lp(idx, [1, 0.5, 0.5, 0.25, 0.25]), PlanOracle(idx), mode=mode)
    assert sol.status == OPTIMAL
    assert sol.objective == pytest.approx(1.0, abs=1e-9)


class OneColumn:
    def __init__(self):
        self.calls = 0
        self.col = Column("only", 1.0, {"cap": 1.0})

    def __call__(self, duals, objective_scale=1.0):
        self.calls += 1
        v = reduced_cost(True, self.col, duals, objective_scale)
        return PricedColumn(self.col, v) if v > 1e-9 else None


def test_single_implicit_column_needs_at_most_two_oracle_calls():
    oracle = OneColumn()
    sol = solve_with_oracle(LpSpec((Row("cap", LE, 3.0),)), oracle)
    assert sol.objective == pytest.approx(3.0)
    assert sol.primal["only"] == pytest.approx(3.0)
    assert oracle.calls <= 2


def test_column_with_no_violation_is_rejected():
    class Liar:
        def __call__(self, duals, objective_scale=1.0):
            return PricedColumn(Column("bad", 0.0, {"cap": 1.0}), 5.0)

    with pytest.raises(OracleInconsistent):
        solve_with_oracle(LpSpec((Row("cap", LE, 3.0),)), Liar())


def test_basic_solution_is_returned_unchanged():
    sol = solve_explicit(box())
    assert extract_basic(box(), sol) is sol


def test_face_interior_point_moves_to_a_vertex():
    spec = LpSpec((Row("sum", LE, 1.0),), (Column("x1", 1.0, {"sum": 1.0}), Column("x2", 1.0, {"sum": 1.0})))
    interior = solve_explicit(spec)
    interior.primal = {"x1": 0.5, "x2": 0.5}
    basic = extract_basic(spec, interior)
    assert basic.objective == pytest.approx(1.0)
    assert sorted(round(v, 9) for v in basic.primal.values()) == [1.0]
    assert is_vertex(spec, spec.columns, basic.primal)


def test_redundant_convex_column_is_dropped(two_level):
    idx = build_sequences(two_level, 1)
    plans = enumerate_plans(two_level, 1)
    cols = [plan_column(idx, p) for p in plans]
    # a fourth column equal to the average of the three plans
    avg = {}
    for c in cols:
        for k, v in c.coeffs.items():
            avg[k] = avg.get(k, 0.0) + v / 3
    cols.append(Column("mix", 1.0, avg))
    spec = mixture_lp(idx, [1, 0.5, 0.5, 0.25, 0.25]).with_columns(cols)
    sol = solve_explicit(spec)
    ac, ad, b = (c.id for c in cols[:3])
    sol.primal = {ac: 0.15, ad: 0.15, b: 0.4, "mix": 0.3}  # optimal, four positive columns
    basic = extract_basic(spec, sol)
    assert is_vertex(spec, spec.columns, basic.primal)
    assert len(basic.support) <= len(idx)
    assert basic.objective == pytest.approx(1.0)


def test_equality_rows_and_free_columns():
    # max y s.t. y - z = 0, z <= 4 with y free
    spec = LpSpec((Row("link", EQ, 0.0), Row("cap", LE, 4.0)),
                  (Column("y", 1.0, {"link": 1.0}, free=True), Column("z", 0.0, {"link": -1.0, "cap": 1.0})))
    sol = solve_explicit(spec)
    assert sol.objective == pytest.approx(4.0)
