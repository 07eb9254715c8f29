"""Definition-level persuasiveness checks on explicit matrix-form instances.

A ``MatrixInstance`` lists every state with its prior, every plan of every
receiver, and dense payoff tables indexed ``[state, plan_1(, plan_2)]``.  A
scheme is an array of the same shape whose state rows are distributions over
joint recommendations.  Nothing here looks at the tree or the sequence form,
which is what makes these routines useful as independent oracles.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .auxgame import DEFAULT_STATE_CAP, AuxiliaryGame, NaturePrior, UtilityTensors, product_states
from .errors import DenseCapExceeded, MalformedScheme, NumericalFailure
from .game import DEFAULT_PLAN_CAP, ValidatedGame, enumerate_plans, outcome, plan_label, state_name, xi
from .solver import SignalingScheme

DEFAULT_TOL = 1e-7
ROW_SUM_TOL = 1e-9
DENSE_CAP = 200_000


@dataclass(frozen=True)
class MatrixInstance:
    states: tuple[str, ...]
    prior: np.ndarray
    plans: tuple[tuple[str, ...], ...]  # per receiver
    sender: np.ndarray
    receivers: tuple[np.ndarray, ...]

    def __post_init__(self):
        shape = (len(self.states),) + tuple(len(p) for p in self.plans)
        if not 1 <= len(self.plans) <= 2:
            raise ValueError("an instance has one or two receivers")
        if len(self.receivers) != len(self.plans):
            raise ValueError("one utility table per receiver")
        for table in (self.sender,) + tuple(self.receivers):
            if table.shape != shape:
                raise ValueError(f"table shape {table.shape} != {shape}")
        if self.prior.shape != (len(self.states),) or abs(self.prior.sum() - 1.0) > ROW_SUM_TOL:
            raise ValueError("prior must be a distribution over the states")
        if np.any(self.prior < 0):
            raise ValueError("prior has a negative entry")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.sender.shape

    def joint_plans(self):
        return itertools.product(*(range(len(p)) for p in self.plans))

    def joint_label(self, joint: Sequence[int]) -> tuple[str, ...]:
        return tuple(self.plans[i][j] for i, j in enumerate(joint))


@dataclass(frozen=True)
class Slack:
    receiver: int  # position in the instance, 0-based
    deviation: str
    slack: float
    recommendation: str | None = None
    # ex interim only: slack divided by the probability of the recommendation
    conditional: float | None = None


@dataclass(frozen=True)
class PersuasionReport:
    kind: str  # "ex_ante" or "ex_interim"
    persuasive: bool
    slacks: tuple[Slack, ...]
    value: float
    tol: float

    @property
    def worst(self) -> Slack | None:
        return min(self.slacks, key=lambda s: s.slack, default=None)

    @property
    def violations(self) -> list[Slack]:
        return [s for s in self.slacks if s.slack < -self.tol]


def check_scheme(m: MatrixInstance, phi: np.ndarray) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    if phi.shape != m.shape:
        raise MalformedScheme(f"scheme shape {phi.shape} does not match instance shape {m.shape}")
    if np.any(phi < 0) or not np.all(np.isfinite(phi)):
        raise MalformedScheme("scheme has a negative or non-finite probability")
    sums = phi.reshape(len(m.states), -1).sum(axis=1)
    for s, total in enumerate(sums):
        if abs(total - 1.0) > ROW_SUM_TOL:
            raise MalformedScheme(f"row of state {m.states[s]!r} sums to {total!r}")
    return phi


def _deviation_table(u: np.ndarray, i: int) -> np.ndarray:
    """u with receiver i's axis moved last: [state, other plan(s)..., deviation]."""
    return np.moveaxis(u, i + 1, -1)


def check_ex_ante(m: MatrixInstance, phi, tol: float = DEFAULT_TOL) -> PersuasionReport:
    """Obedience before seeing the recommendation, one constraint per fixed deviation."""
    phi = check_scheme(m, phi)
    weighted = phi * m.prior.reshape((-1,) + (1,) * len(m.plans))
    slacks = []
    for i, u in enumerate(m.receivers):
        follow = float(np.sum(weighted * u))
        # probability mass on each (state, other recommendation) with receiver i summed out
        others = weighted.sum(axis=i + 1)
        dev = _deviation_table(u, i)
        for d, label in enumerate(m.plans[i]):
            slacks.append(Slack(i, label, follow - float(np.sum(others * dev[..., d]))))
    return _report("ex_ante", m, phi, slacks, tol)


def check_ex_interim(m: MatrixInstance, phi, tol: float = DEFAULT_TOL) -> PersuasionReport:
    """Obedience after each recommendation; slacks are unnormalised (joint probability weighted)."""
    phi = check_scheme(m, phi)
    weighted = phi * m.prior.reshape((-1,) + (1,) * len(m.plans))
    slacks = []
    for i, u in enumerate(m.receivers):
        w = np.moveaxis(weighted, i + 1, -1)
        dev = _deviation_table(u, i)
        for r, rec in enumerate(m.plans[i]):
            mass = w[..., r]
            prob = float(mass.sum())
            follow = float(np.sum(mass * dev[..., r]))
            for d, label in enumerate(m.plans[i]):
                if d == r:
                    continue
                slack = follow - float(np.sum(mass * dev[..., d]))
                slacks.append(Slack(i, label, slack, rec, slack / prob if prob > 0 else None))
    return _report("ex_interim", m, phi, slacks, tol)


def _report(kind, m, phi, slacks, tol) -> PersuasionReport:
    persuasive = all(s.slack >= -tol for s in slacks)
    return PersuasionReport(kind, persuasive, tuple(slacks), sender_value(m, phi), tol)


def sender_value(m: MatrixInstance, phi) -> float:
    phi = np.asarray(phi, dtype=float)
    return float(np.sum(phi * m.sender * m.prior.reshape((-1,) + (1,) * len(m.plans))))


def export_matrix_form(g: ValidatedGame, max_states: int = DEFAULT_STATE_CAP,
                       max_plans: int = DEFAULT_PLAN_CAP) -> MatrixInstance:
    """Full state space with product prior and every joint reduced plan."""
    states = product_states(g, max_states)
    plans = [enumerate_plans(g, p, cap=max_plans) for p in g.receivers]
    shape = (len(states),) + tuple(len(p) for p in plans)
    sender = np.zeros(shape)
    receivers = [np.zeros(shape) for _ in plans]
    for s, (state, _) in enumerate(states):
        for joint in itertools.product(*(range(len(p)) for p in plans)):
            profile = {p: dict(plans[i][j]) for i, (p, j) in enumerate(zip(g.receivers, joint))}
            row = outcome(g, profile, state)
            sender[(s,) + joint] = float(row.sender)
            for i in range(len(plans)):
                receivers[i][(s,) + joint] = float(row.receivers[i])
    return MatrixInstance(
        states=tuple(state_name(state, g.typed_actions) for state, _ in states),
        prior=np.array([float(p) for _, p in states]),
        plans=tuple(tuple(plan_label(p) for p in ps) for ps in plans),
        sender=sender,
        receivers=tuple(receivers),
    )


def nature_plan_name(plan) -> str:
    return ",".join(f"{i}={t}" for i, t in plan) or "-"


def aux_matrix_form(aux: AuxiliaryGame, prior: NaturePrior, tensors: UtilityTensors,
                    max_plans: int = DEFAULT_PLAN_CAP) -> MatrixInstance:
    """Matrix instance whose states are the Nature plans of ``prior``."""
    plans = [enumerate_plans(None, idx.player, cap=max_plans, idx=idx) for idx in aux.receiver_idx]
    supports = [[xi(idx, p) for p in ps] for idx, ps in zip(aux.receiver_idx, plans)]
    shape = (len(prior),) + tuple(len(p) for p in plans)
    sender = np.zeros(shape)
    receivers = [np.zeros(shape) for _ in plans]
    for t in range(len(prior)):
        for joint in itertools.product(*(range(len(p)) for p in plans)):
            sup = [supports[i][j] for i, j in enumerate(joint)]
            sender[(t,) + joint] = float(tensors.value(tensors.sender, t, sup))
            for i in range(len(plans)):
                receivers[i][(t,) + joint] = float(tensors.value(tensors.receivers[i], t, sup))
    return MatrixInstance(
        states=tuple(nature_plan_name(p) for p in prior.plans),
        prior=np.asarray(prior.probs, dtype=float),
        plans=tuple(tuple(plan_label(p) for p in ps) for ps in plans),
        sender=sender,
        receivers=tuple(receivers),
    )


def named_rows(scheme: SignalingScheme, typed_actions: Sequence[str]) -> dict[str, dict]:
    """Scheme rows keyed by state name: original states for the exact prior, Nature plans otherwise."""
    out = {}
    for t, plan in enumerate(scheme.prior.plans):
        row = scheme.joint_labels(t)
        if scheme.prior.states is None:
            out[nature_plan_name(plan)] = row
        else:
            for state in scheme.prior.states[t]:
                out[state_name(state, typed_actions)] = row
    return out


def scheme_array(m: MatrixInstance, rows: Mapping[str, Mapping[tuple[str, ...], float]]) -> np.ndarray:
    """Dense scheme from ``{state: {joint plan labels: prob}}``; every state needs a row."""
    phi = np.zeros(m.shape)
    state_pos = {s: k for k, s in enumerate(m.states)}
    plan_pos = [{p: k for k, p in enumerate(ps)} for ps in m.plans]
    for state, row in rows.items():
        if state not in state_pos:
            raise MalformedScheme(f"unknown state {state!r}")
        for joint, prob in row.items():
            if len(joint) != len(m.plans):
                raise MalformedScheme(f"recommendation {joint!r} needs one plan per receiver")
            try:
                pos = tuple(plan_pos[i][label] for i, label in enumerate(joint))
            except KeyError as err:
                raise MalformedScheme(f"unknown plan {err.args[0]!r} in state {state!r}") from None
            phi[(state_pos[state],) + pos] += float(prob)
    missing = [s for s in m.states if s not in rows]
    if missing:
        raise MalformedScheme(f"no scheme row for state {missing[0]!r}")
    return check_scheme(m, phi)


def brute_force_opt_ea(m: MatrixInstance, dense_cap: int = DENSE_CAP) -> tuple[float, np.ndarray]:
    """OPT-EA over every (state, joint plan) as one explicit LP, solved by GLPK's simplex."""
    import cvxopt

    n = int(np.prod(m.shape))
    if n > dense_cap:
        raise DenseCapExceeded(f"{n} variables exceed the dense cap of {dense_cap}")
    S = len(m.states)
    G_rows = []
    for i, u in enumerate(m.receivers):
        for d in range(len(m.plans[i])):
            dev = np.take(u, [d], axis=i + 1)  # broadcast the deviation across receiver i's axis
            gain = (u - dev).reshape(-1)
            if np.any(gain != 0):  # vacuous rows only add degeneracy
                G_rows.append(-gain)
    G = np.vstack(G_rows + [-np.eye(n)])
    h = np.zeros(G.shape[0])
    A = np.zeros((S, n))
    per_state = n // S
    for s in range(S):
        A[s, s * per_state:(s + 1) * per_state] = 1.0
    b = m.prior.astype(float)
    c = -m.sender.reshape(-1).astype(float)
    res = cvxopt.solvers.lp(cvxopt.matrix(c), cvxopt.matrix(G), cvxopt.matrix(h),
                            cvxopt.matrix(A), cvxopt.matrix(b), solver="glpk",
                            options={"glpk": {"msg_lev": "GLP_MSG_OFF"}})
    if res["status"] != "optimal":
        raise NumericalFailure(f"brute-force LP ended with status {res['status']}")
    x = np.clip(np.array(res["x"]).reshape(m.shape), 0.0, None)
    return float(-res["primal objective"]), x

