"""Small-support mixed strategies realization-equivalent to behavioral ones.

The mixed strategy solves ``max 1.x  s.t.  M x <= r*, x >= 0`` where ``M`` is
the sequence/plan incidence matrix.  Plans enter as columns generated by a
backward-induction pricing routine; a vertex of the optimal face has at most
|Q| plans in its support.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ReconstructionResidual
from .game import Plan, SequenceIndex, behavioral_to_realization, build_sequences, xi
from .lp import (CUTTING_PLANE, DEFAULT_TOL, LE, OPTIMAL, Column, LpSpec, PricedColumn, Row,
                 Tolerances, extract_basic, solve_with_oracle)

FLOW_TOL = 1e-8


@dataclass(frozen=True)
class MixedStrategy:
    idx: SequenceIndex
    probs: Mapping[Plan, float]
    stats: dict = field(default_factory=dict, compare=False)

    @property
    def support(self) -> list[Plan]:
        return list(self.probs)

    def realization(self) -> list[float]:
        r = [0.0] * len(self.idx)
        for plan, p in self.probs.items():
            for q in xi(self.idx, plan):
                r[q] += p
        return r


def separation_oracle_a(idx: SequenceIndex, alpha: Sequence) -> tuple[Plan, object]:
    """Plan minimising the sum of ``alpha`` over its sequences, and that sum.

    Bottom-up over infosets (reverse depth-first order puts every infoset
    after its descendants); ties go to the lowest sequence index.
    """
    w: dict[str, object] = {}
    best: dict[str, int] = {}
    for infoset in reversed(idx.infosets):
        choice, value = None, None
        for q in idx.children[infoset]:
            v = alpha[q] + sum((w[i] for i in idx.down[q]), 0)
            if value is None or v < value:
                choice, value = q, v
        w[infoset], best[infoset] = value, choice
    total = alpha[0] + sum((w[i] for i in idx.roots), 0)
    return _assemble(idx, best), total


def _assemble(idx: SequenceIndex, best: Mapping[str, int]) -> Plan:
    stack = list(reversed(idx.roots))
    # emit in depth-first infoset order so plans compare equal to enumerate_plans output
    order = {i: k for k, i in enumerate(idx.infosets)}
    reached = []
    while stack:
        infoset = stack.pop()
        q = best[infoset]
        reached.append((infoset, idx.last_action(q)))
        stack.extend(reversed(idx.down[q]))
    plan = sorted(reached, key=lambda c: order[c[0]])
    return tuple(plan)


def plan_column(idx: SequenceIndex, plan: Plan) -> Column:
    return Column(plan, 1.0, {("seq", q): 1.0 for q in sorted(xi(idx, plan))})


def mixture_lp(idx: SequenceIndex, r_star: Sequence[float]) -> LpSpec:
    return LpSpec(tuple(Row(("seq", q), LE, float(r_star[q])) for q in range(len(idx))))


class PlanOracle:
    """Pricing routine for the mixture LP: a plan whose dual constraint is violated."""

    def __init__(self, idx: SequenceIndex, threshold: float = 1e-9):
        self.idx = idx
        self.threshold = threshold
        self.calls = 0

    def __call__(self, duals, objective_scale: float = 1.0) -> PricedColumn | None:
        self.calls += 1
        alpha = [duals.get(("seq", q), 0.0) for q in range(len(self.idx))]
        plan, value = separation_oracle_a(self.idx, alpha)
        violation = objective_scale - value
        if violation <= self.threshold:
            return None
        col = plan_column(self.idx, plan)
        # re-price through the column so the engine's check is bit-for-bit comparable
        violation = objective_scale - sum(duals.get(r, 0.0) * v for r, v in col.coeffs.items())
        return PricedColumn(col, violation)


def reconstruct_from_realization(idx: SequenceIndex, r_star: Sequence[float], mode: str = CUTTING_PLANE,
                                 tol: Tolerances = DEFAULT_TOL) -> MixedStrategy:
    spec = mixture_lp(idx, r_star)
    oracle = PlanOracle(idx)
    sol = solve_with_oracle(spec, oracle, mode=mode, tol=tol)
    if sol.status != OPTIMAL:
        raise ReconstructionResidual(f"mixture LP ended with status {sol.status}")
    lp_value = sol.objective
    basic = extract_basic(spec, sol, tol)
    plans = [c.id for c in basic.columns if basic.primal.get(c.id, 0.0) > 0.0]
    x = _polish(idx, plans, [basic.primal[p] for p in plans], r_star)
    probs = {p: v for p, v in zip(plans, x) if v > 0.0}
    mixed = MixedStrategy(idx, probs, stats=dict(basic.stats, lp_value=lp_value, oracle_calls=oracle.calls))
    residual = max(abs(a - b) for a, b in zip(mixed.realization(), r_star))
    if residual > FLOW_TOL:
        raise ReconstructionResidual(f"M x - r* residual {residual:.3g} exceeds {FLOW_TOL}")
    if len(probs) > len(idx):
        raise ReconstructionResidual(f"support {len(probs)} exceeds |Q| = {len(idx)}")
    mixed.stats["residual"] = residual
    return mixed


def _polish(idx: SequenceIndex, plans: list[Plan], x: list[float], r_star) -> list[float]:
    """Re-solve M_S x_S = r* on the (basic) support to strip solver noise."""
    if not plans:
        return x
    M = np.zeros((len(idx), len(plans)))
    for j, plan in enumerate(plans):
        for q in xi(idx, plan):
            M[q, j] = 1.0
    r = np.asarray([float(v) for v in r_star])
    sol, *_ = np.linalg.lstsq(M, r, rcond=None)
    before = np.max(np.abs(M @ np.asarray(x) - r))
    after = np.max(np.abs(M @ sol - r))
    if np.all(sol > 0) and after <= before:
        return sol.tolist()
    return x


def reconstruct_mixed(game, player: int, strategy: Mapping[str, Mapping[str, object]],
                      mode: str = CUTTING_PLANE, tol: Tolerances = DEFAULT_TOL,
                      idx: SequenceIndex | None = None) -> MixedStrategy:
    """Mixed strategy with support <= |Q_i| realization-equivalent to ``strategy``."""
    idx = idx or build_sequences(game, player)
    r_star = [float(v) for v in behavioral_to_realization(idx, strategy)]
    return reconstruct_from_realization(idx, r_star, mode=mode, tol=tol)
