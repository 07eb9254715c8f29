"""Optimal ex ante persuasive signaling (OPT-EA) for one or two receivers.

The LP over correlated distributions gamma(theta, sigma) on Nature plans x
joint receiver plans has one row per receiver for the equilibrium utility,
one incentive row per non-empty receiver sequence, and one marginal row per
Nature plan; the best-response values v_i(I) are free columns.  Its columns
gamma(theta, sigma) are generated by a separation routine that enumerates
(Nature plan, leaf) pairs and maximises each receiver's cross term over the
other receiver's plans by a path-constrained backward induction.

Row and dual conventions (maximisation, sensitivity duals):

* ``("util", i)``  >= 0, dual alpha_i <= 0;
* ``("ic", i, q)`` >= 0 for q != empty, dual beta_i(q) <= 0;
* ``("nature", t)`` = mu(t), dual delta(t) free.

With beta_i(empty) := alpha_i the dual constraint of column (theta, sigma) is

    delta(theta) + sum_i alpha_i u_i(theta, sigma) - u_S(theta, sigma)
        - sum_i sum_{q_i in Q_i} beta_i(q_i) G_i(theta, sigma_-i)(q_i) >= 0

where G_i(q_i) = sum over q_-i in xi(sigma_-i) of U_i(theta, q_i, q_-i), and the
free columns force every beta_i to be a flow with source alpha_i.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .auxgame import (DEFAULT_STATE_CAP, AuxiliaryGame, NaturePrior, UtilityTensors, build_auxiliary,
                      exact_prior, nature_prior, utility_tensors)
from .errors import InfeasiblePath, NumericalFailure, OracleInconsistent, RowSumViolation
from .game import Plan, SequenceIndex, ValidatedGame, plan_label, xi
from .lp import (CUTTING_PLANE, DEFAULT_TOL, EQ, GE, OPTIMAL, Column, LpSpec, PricedColumn, Row, Tolerances,
                 extract_basic, solve_with_oracle)

log = logging.getLogger(__name__)

FEAS_TOL = 1e-7
EXACT, RECONSTRUCTED = "exact", "reconstructed"


@dataclass(frozen=True)
class EaDuals:
    alpha: tuple[float, ...]
    beta: tuple[tuple[float, ...], ...]  # beta[i][0] is alpha[i]
    delta: tuple[float, ...]

    @classmethod
    def from_rows(cls, duals: Mapping, idxs: Sequence[SequenceIndex], n_theta: int) -> "EaDuals":
        alpha = tuple(duals.get(("util", i), 0.0) for i in range(len(idxs)))
        beta = tuple(
            (alpha[i],) + tuple(duals.get(("ic", i, q), 0.0) for q in range(1, len(idx)))
            for i, idx in enumerate(idxs))
        delta = tuple(duals.get(("nature", t), 0.0) for t in range(n_theta))
        return cls(alpha, beta, delta)


def check_v_duals(idxs: Sequence[SequenceIndex], duals: EaDuals, tol: float = FEAS_TOL):
    """First (receiver position, infoset) where beta_i is not a flow, else None."""
    for i, idx in enumerate(idxs):
        beta = duals.beta[i]
        for infoset in idx.infosets:
            inflow = beta[idx.parent[infoset]] if idx.parent[infoset] else duals.alpha[i]
            if abs(sum(beta[q] for q in idx.children[infoset]) - inflow) > tol:
                return i, infoset
    return None


def _best_plan(idx: SequenceIndex, w: Sequence, path: Mapping[str, int]) -> tuple[Plan, object]:
    """argmax of sum_{q in xi(sigma)} w(q) over plans taking ``path`` where it applies."""
    F: dict[str, object] = {}
    choice: dict[str, int] = {}
    for infoset in reversed(idx.infosets):
        eligible = (path[infoset],) if infoset in path else idx.children[infoset]
        best_q, best_v = None, None
        for q in eligible:
            v = w[q] + sum((F[i] for i in idx.down[q]), 0)
            if best_v is None or v > best_v:
                best_q, best_v = q, v
        F[infoset], choice[infoset] = best_v, best_q
    value = w[0] + sum((F[i] for i in idx.roots), 0)
    order = {i: k for k, i in enumerate(idx.infosets)}
    plan, stack = [], list(idx.roots)
    while stack:
        infoset = stack.pop()
        q = choice[infoset]
        plan.append((infoset, idx.last_action(q)))
        stack.extend(idx.down[q])
    return tuple(sorted(plan, key=lambda c: order[c[0]])), value


def cross_weights(aux: AuxiliaryGame, tensors: UtilityTensors, t: int, beta_other: Sequence,
                  searching: int) -> list:
    """w(q_j) = sum over q_other of U_other(t, q) * beta_other(q_other)."""
    other = 1 - searching
    w: list = [0] * len(aux.receiver_idx[searching])
    table = tensors.receivers[other]
    for _, seqs in tensors.entries[t]:
        w[seqs[searching]] += table[(t, seqs)] * beta_other[seqs[other]]
    return w


def plan_search(aux: AuxiliaryGame, tensors: UtilityTensors, t: int, z: int, beta_other: Sequence,
                searching: int) -> tuple[Plan, object]:
    """Plan of receiver ``searching`` maximising the other receiver's cross term.

    Only plans that can reach leaf ``z`` together with Nature plan ``t`` are
    eligible.  The value includes the empty-sequence term.
    """
    if z not in {leaf for leaf, _ in tensors.entries[t]}:
        raise InfeasiblePath(f"leaf {z} cannot be reached under Nature plan {t}")
    w = cross_weights(aux, tensors, t, beta_other, searching)
    return _best_plan(aux.receiver_idx[searching], w, aux.path_infosets(z, searching))


def build_column(aux: AuxiliaryGame, tensors: UtilityTensors, t: int, plans: tuple[Plan, ...]) -> Column:
    n = len(plans)
    supports = [xi(idx, p) for idx, p in zip(aux.receiver_idx, plans)]
    objective = 0.0
    F = [0.0] * n
    G: list[dict[int, float]] = [{} for _ in range(n)]
    for _, seqs in tensors.entries[t]:
        inside = [q in s for q, s in zip(seqs, supports)]
        key = (t, seqs)
        if all(inside):
            objective += float(tensors.sender[key])
            for i in range(n):
                F[i] += float(tensors.receivers[i][key])
        for i in range(n):
            if all(inside[k] for k in range(n) if k != i):
                G[i][seqs[i]] = G[i].get(seqs[i], 0.0) + float(tensors.receivers[i][key])
    coeffs: dict = {("nature", t): 1.0}
    for i in range(n):
        coeffs[("util", i)] = F[i] - G[i].get(0, 0.0)
        for q, v in G[i].items():
            if q and v:
                coeffs[("ic", i, q)] = -v
    return Column(("gamma", t, plans), objective, coeffs)


def persuasion_lp(aux: AuxiliaryGame, prior: NaturePrior) -> LpSpec:
    rows = []
    for i, idx in enumerate(aux.receiver_idx):
        rows.append(Row(("util", i), GE, 0.0))
        rows.extend(Row(("ic", i, q), GE, 0.0) for q in range(1, len(idx)))
    rows.extend(Row(("nature", t), EQ, float(p)) for t, p in enumerate(prior.probs))
    free = []
    for i, idx in enumerate(aux.receiver_idx):
        for infoset in idx.infosets:
            coeffs: dict = {}
            for q in idx.children[infoset]:
                coeffs[("ic", i, q)] = 1.0
            par = idx.parent[infoset]
            coeffs[("util", i) if par == 0 else ("ic", i, par)] = -1.0
            free.append(Column(("v", i, infoset), 0.0, coeffs, free=True))
    return LpSpec(tuple(rows), tuple(free), maximize=True)


class SeparationOracle:
    """Most violated dual constraint over all (Nature plan, leaf) pairs."""

    def __init__(self, aux: AuxiliaryGame, prior: NaturePrior, tensors: UtilityTensors,
                 threshold: float = FEAS_TOL):
        self.aux, self.prior, self.tensors = aux, prior, tensors
        self.threshold = threshold
        self.calls = 0
        self._paths = {
            z: tuple(aux.path_infosets(z, i) for i in range(len(aux.receivers)))
            for z in range(len(aux.terminals))}

    def most_violated(self, duals: EaDuals, objective_scale: float = 1.0, thetas=None):
        """(value of the dual constraint, t, plans) minimising it."""
        aux, tensors = self.aux, self.tensors
        n = len(aux.receivers)
        best = None
        for t in (range(len(self.prior)) if thetas is None else thetas):
            if n == 2:
                w_for = [cross_weights(aux, tensors, t, duals.beta[1 - j], j) for j in range(2)]
            else:
                own = sum(tensors.receivers[0][(t, seqs)] * duals.beta[0][seqs[0]]
                          for _, seqs in tensors.entries[t])
                zero = [0] * len(aux.receiver_idx[0])
            for z, seqs in tensors.entries[t]:
                leaf = aux.terminals[z]
                value = duals.delta[t] - objective_scale * leaf.sender
                value += sum(duals.alpha[i] * leaf.receivers[i] for i in range(n))
                paths = self._paths[z]
                if n == 2:
                    # receiver 1's cross term is maximised over sigma_2 and vice versa
                    p2, cross1 = _best_plan(aux.receiver_idx[1], w_for[1], paths[1])
                    p1, cross2 = _best_plan(aux.receiver_idx[0], w_for[0], paths[0])
                    value -= cross1 + cross2
                    plans = (p1, p2)
                else:
                    p1, _ = _best_plan(aux.receiver_idx[0], zero, paths[0])
                    value -= own
                    plans = (p1,)
                if best is None or value < best[0]:
                    best = (value, t, plans)
        return best

    def __call__(self, duals: Mapping, objective_scale: float = 1.0) -> PricedColumn | None:
        self.calls += 1
        ea = EaDuals.from_rows(duals, self.aux.receiver_idx, len(self.prior))
        bad = check_v_duals(self.aux.receiver_idx, ea, tol=1e-6)
        if bad is not None:
            raise NumericalFailure(f"dual flow broken at receiver {bad[0] + 1}, infoset {bad[1]!r}")
        value, t, plans = self.most_violated(ea, objective_scale)
        if value >= -self.threshold:
            return None
        col = build_column(self.aux, self.tensors, t, plans)
        violation = objective_scale * col.objective - sum(duals.get(r, 0.0) * v for r, v in col.coeffs.items())
        if abs(violation + value) > 1e-6 * (1 + abs(value)):
            raise OracleInconsistent(f"separated value {value:.12g} disagrees with column price {violation:.12g}")
        return PricedColumn(col, violation)


def separation_oracle_b(aux: AuxiliaryGame, prior: NaturePrior, tensors: UtilityTensors, duals: EaDuals,
                        threshold: float = FEAS_TOL):
    """Most violated column ``(value, t, plans)`` at ``duals``, or None when all hold."""
    value, t, plans = SeparationOracle(aux, prior, tensors).most_violated(duals)
    return (value, t, plans) if value < -threshold else None


@dataclass
class EaSolution:
    aux: AuxiliaryGame
    prior: NaturePrior
    tensors: UtilityTensors
    gamma: dict  # (t, plans) -> mass
    value: float
    v: dict
    duals: EaDuals
    stats: dict = field(default_factory=dict)


def warm_start(aux: AuxiliaryGame, prior: NaturePrior, tensors: UtilityTensors,
               oracle: SeparationOracle) -> list[Column]:
    """One column per Nature plan: the sender-best joint plan it can reach (zero duals)."""
    n = len(aux.receivers)
    zero = EaDuals((0.0,) * n, tuple((0.0,) * len(idx) for idx in aux.receiver_idx), (0.0,) * len(prior))
    cols = []
    for t in range(len(prior)):
        _, _, plans = oracle.most_violated(zero, 1.0, thetas=(t,))
        cols.append(build_column(aux, tensors, t, plans))
    return cols


def solve_opt_ea(game: ValidatedGame, prior: str = EXACT, mode: str = CUTTING_PLANE,
                 tol: Tolerances = DEFAULT_TOL, state_cap: int = DEFAULT_STATE_CAP,
                 ellipsoid_options: Mapping | None = None) -> EaSolution:
    """Sender-optimal ex ante persuasive correlated distribution.

    ``prior="exact"`` puts the product prior on Nature plans (one per state,
    capped by ``state_cap``) and matches the optimum over the full state
    space.  ``prior="reconstructed"`` uses the small-support Nature strategy
    instead; it keeps the LP polynomial but lets the sender condition only on
    the coarser support, so its value can fall short of the true optimum.
    """
    aux = build_auxiliary(game)
    if prior == EXACT:
        nat = exact_prior(aux, state_cap)
    elif prior == RECONSTRUCTED:
        nat = nature_prior(aux, mode=mode, tol=tol)
    else:
        raise ValueError(f"unknown prior {prior!r}")
    tensors = utility_tensors(aux, nat)
    spec = persuasion_lp(aux, nat)
    oracle = SeparationOracle(aux, nat, tensors)
    seed = warm_start(aux, nat, tensors, oracle)
    sol = solve_with_oracle(spec, oracle, mode=mode, warm_start=seed, tol=tol,
                            ellipsoid_options=ellipsoid_options)
    if sol.status != OPTIMAL:
        raise NumericalFailure(f"OPT-EA LP ended with status {sol.status}")
    lp_value = sol.objective
    basic = extract_basic(spec, sol, tol)
    gamma = {}
    for c in basic.columns:
        x = basic.primal.get(c.id, 0.0)
        if not c.free and x > 0.0:
            _, t, plans = c.id
            gamma[(t, plans)] = x
    _renormalise(gamma, nat)
    _check_rows(spec, basic, gamma)
    value = sum(m * _column_objective(basic, t, plans) for (t, plans), m in gamma.items())
    v = {c.id[1:]: basic.primal.get(c.id, 0.0) for c in basic.columns if c.free}
    stats = dict(basic.stats, lp_value=lp_value, iterations=sol.iterations, oracle_calls=oracle.calls, theta_size=len(nat),
                 columns=len(sol.columns) - len(spec.columns))
    return EaSolution(aux, nat, tensors, gamma, value, v,
                      EaDuals.from_rows(sol.duals, aux.receiver_idx, len(nat)), stats)


def _column_objective(sol, t, plans) -> float:
    for c in sol.columns:
        if c.id == ("gamma", t, plans):
            return c.objective
    raise KeyError((t, plans))


def _renormalise(gamma: dict, prior: NaturePrior):
    totals: dict[int, float] = {}
    for (t, _), m in gamma.items():
        totals[t] = totals.get(t, 0.0) + m
    for t, p in enumerate(prior.probs):
        if abs(totals.get(t, 0.0) - p) > FEAS_TOL:
            raise NumericalFailure(f"Nature marginal row {t} off by {totals.get(t, 0.0) - p:.3g}")
    for key in gamma:
        gamma[key] *= prior.probs[key[0]] / totals[key[0]]


def _check_rows(spec: LpSpec, sol, gamma: dict):
    x = dict(sol.primal)
    for (t, plans), m in gamma.items():
        x[("gamma", t, plans)] = m
    activity = {r.name: 0.0 for r in spec.rows}
    for c in sol.columns:
        val = x.get(c.id, 0.0)
        if val:
            for r, a in c.coeffs.items():
                activity[r] += a * val
    for r in spec.rows:
        lhs = activity[r.name]
        if (r.sense == GE and lhs < r.rhs - FEAS_TOL) or (r.sense == EQ and abs(lhs - r.rhs) > FEAS_TOL):
            raise NumericalFailure(f"row {r.name!r} violated by {lhs - r.rhs:.3g}")


@dataclass(frozen=True)
class SignalingScheme:
    """phi_theta(sigma) for each Nature plan theta (index into the prior)."""

    prior: NaturePrior
    rows: tuple[dict, ...]  # t -> {plans: prob}

    def joint_labels(self, t: int) -> dict[tuple[str, ...], float]:
        return {tuple(plan_label(p) for p in plans): prob for plans, prob in self.rows[t].items()}


def extract_scheme(sol: EaSolution) -> SignalingScheme:
    rows: list[dict] = [{} for _ in sol.prior.plans]
    for (t, plans), m in sorted(sol.gamma.items(), key=lambda kv: (kv[0][0], repr(kv[0][1]))):
        rows[t][plans] = m / sol.prior.probs[t]
    for t, row in enumerate(rows):
        total = sum(row.values())
        if abs(total - 1.0) > 1e-9:
            raise RowSumViolation(f"scheme row {t} sums to {total!r}")
    scheme = SignalingScheme(sol.prior, tuple(rows))
    again = scheme_value(sol.aux, sol.tensors, scheme)
    if abs(again - sol.value) > 1e-8:
        raise RowSumViolation(f"scheme value {again!r} differs from LP value {sol.value!r}")
    return scheme


def scheme_value(aux: AuxiliaryGame, tensors: UtilityTensors, scheme: SignalingScheme) -> float:
    total = 0.0
    for t, row in enumerate(scheme.rows):
        for plans, prob in row.items():
            supports = [xi(idx, p) for idx, p in zip(aux.receiver_idx, plans)]
            total += scheme.prior.probs[t] * prob * float(tensors.value(tensors.sender, t, supports))
    return total
