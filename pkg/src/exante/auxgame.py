"""The auxiliary game: Nature draws each played action's type right after it.

Nature's reduced plans stand in for states of nature.  Two priors over them
are available:

* ``nature_prior`` -- a vertex of the reconstruction LP for Nature's
  behavioral strategy (support at most |Q_N|);
* ``exact_prior`` -- the product prior itself, one Nature plan per state.

Both are realization-equivalent to the marginals, so every fixed plan profile
has the same expected utility under either.  They are *not* interchangeable
as the sender's information: correlating recommendations with a coarser
support can lose value (see ``solve_opt_ea``).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .errors import StateExplosion
from .game import (NATURE, Decision, Node, PayoffRow, Plan, SequenceIndex, Terminal,
                   ValidatedGame, build_sequences, iter_nodes, own_sequence, xi)
from .lp import CUTTING_PLANE, DEFAULT_TOL, Tolerances
from .reconstruction import reconstruct_mixed

DEFAULT_STATE_CAP = 4096


@dataclass(frozen=True)
class AuxTerminal:
    """A leaf of the auxiliary game in sequence coordinates."""

    nature_seq: int
    seqs: tuple[int, ...]  # one sequence per receiver, in receiver order
    sender: object
    receivers: tuple


@dataclass(frozen=True)
class AuxiliaryGame:
    game: ValidatedGame
    root: Node
    nature_action: Mapping[str, str]  # Nature infoset -> receiver action it types
    nature_strategy: Mapping[str, Mapping[str, Fraction]]
    receiver_idx: tuple[SequenceIndex, ...]
    nature_idx: SequenceIndex
    terminals: tuple[AuxTerminal, ...]

    @property
    def receivers(self) -> tuple[int, ...]:
        return self.game.receivers

    def path_infosets(self, z: int, position: int) -> dict[str, int]:
        """Infosets of a receiver on the path to leaf ``z`` -> sequence taken there."""
        idx = self.receiver_idx[position]
        out = {}
        q = self.terminals[z].seqs[position]
        while q:
            out[idx.up[q]] = q
            q = idx.parent[idx.up[q]]
        return out


def build_auxiliary(game: ValidatedGame) -> AuxiliaryGame:
    """Insert a Nature node after every action with two or more types."""
    counter = itertools.count()
    nature_action: dict[str, str] = {}
    strategy: dict[str, dict[str, Fraction]] = {}

    def copy(node: Node, types: dict[str, str]) -> Node:
        if isinstance(node, Terminal):
            row = node.row(types)
            return Terminal((PayoffRow(row.when, row.sender, row.receivers),))
        children = []
        for action, child in node.actions:
            dist = game.marginals.get(action)
            if dist is None:
                children.append((action, copy(child, types)))
            elif len(dist) == 1:
                children.append((action, copy(child, {**types, action: dist[0][0]})))
            else:
                infoset = f"{action}#{next(counter)}"
                nature_action[infoset] = action
                strategy[infoset] = dict(dist)
                branches = tuple((t, copy(child, {**types, action: t})) for t, _ in dist)
                children.append((action, Decision(NATURE, infoset, branches)))
        return Decision(node.player, node.infoset, tuple(children))

    root = copy(game.root, {})
    shell = _Tree(root)
    receiver_idx = tuple(build_sequences(shell, p) for p in game.receivers)
    nature_idx = build_sequences(shell, NATURE)
    leaves = []
    for node, path in iter_nodes(root):
        if isinstance(node, Terminal):
            row = node.payoffs[0]
            leaves.append(AuxTerminal(
                nature_seq=nature_idx.index[own_sequence(path, NATURE)],
                seqs=tuple(idx.index[own_sequence(path, idx.player)] for idx in receiver_idx),
                sender=row.sender,
                receivers=row.receivers,
            ))
    return AuxiliaryGame(game, root, nature_action, strategy, receiver_idx, nature_idx, tuple(leaves))


@dataclass(frozen=True)
class _Tree:
    root: Node


@dataclass(frozen=True)
class NaturePrior:
    plans: tuple[Plan, ...]
    probs: tuple[float, ...]
    # original states (action -> type) behind each plan; only for the exact prior
    states: tuple[tuple[dict, ...], ...] | None = None
    kind: str = "reconstructed"
    stats: dict = field(default_factory=dict, compare=False)

    def __len__(self) -> int:
        return len(self.plans)


def nature_prior(aux: AuxiliaryGame, mode: str = CUTTING_PLANE, tol: Tolerances = DEFAULT_TOL) -> NaturePrior:
    """Small-support Nature mixed strategy realization-equivalent to the marginals."""
    idx = aux.nature_idx
    if not idx.infosets:
        return NaturePrior(((),), (1.0,))
    mixed = reconstruct_mixed(_Tree(aux.root), NATURE, aux.nature_strategy, mode=mode, tol=tol, idx=idx)
    order = sorted(mixed.probs, key=lambda p: sorted(xi(idx, p)))
    return NaturePrior(tuple(order), tuple(mixed.probs[p] for p in order), stats=mixed.stats)


def lift_state(aux: AuxiliaryGame, state: Mapping[str, str]) -> Plan:
    """Nature plan that types every reachable Nature node as ``state`` does."""
    idx = aux.nature_idx
    order = {i: k for k, i in enumerate(idx.infosets)}
    plan = []
    stack = list(idx.roots)
    while stack:
        infoset = stack.pop()
        t = state[aux.nature_action[infoset]]
        plan.append((infoset, t))
        stack.extend(idx.down[idx.seq_of(infoset, t)])
    return tuple(sorted(plan, key=lambda c: order[c[0]]))


def product_states(game: ValidatedGame, cap: int = DEFAULT_STATE_CAP) -> list[tuple[dict, Fraction]]:
    """Every full state with its product-prior probability (exact)."""
    actions = game.typed_actions
    size = 1
    for a in actions:
        size *= len(game.marginals[a])
    if size > cap:
        raise StateExplosion(f"{size} states exceed the cap of {cap}")
    out = []
    for combo in itertools.product(*(game.marginals[a] for a in actions)):
        p = Fraction(1)
        for _, pr in combo:
            p *= pr
        out.append(({a: t for a, (t, _) in zip(actions, combo)}, p))
    return out


def exact_prior(aux: AuxiliaryGame, cap: int = DEFAULT_STATE_CAP) -> NaturePrior:
    """The product prior pushed onto Nature plans (one plan per state)."""
    grouped: dict[Plan, list] = {}
    for state, p in product_states(aux.game, cap):
        entry = grouped.setdefault(lift_state(aux, state), [Fraction(0), []])
        entry[0] += p
        entry[1].append(state)
    plans = tuple(grouped)
    return NaturePrior(plans, tuple(float(grouped[p][0]) for p in plans),
                       states=tuple(tuple(grouped[p][1]) for p in plans), kind="exact")


@dataclass(frozen=True)
class UtilityTensors:
    """Sparse payoffs over (Nature plan index, receiver sequence tuple).

    ``entries[t]`` lists ``(leaf index, seqs)`` for the leaves consistent with
    plan ``t``; ``sender``/``receivers`` are dicts keyed by ``(t, seqs)``.
    """

    entries: tuple[tuple[tuple[int, tuple[int, ...]], ...], ...]
    sender: Mapping[tuple, object]
    receivers: tuple[Mapping[tuple, object], ...]

    def value(self, table: Mapping[tuple, object], t: int, supports: Sequence[frozenset]) -> object:
        """sum of ``table`` over q in xi(sigma) at Nature plan ``t``."""
        total = 0
        for _, seqs in self.entries[t]:
            if all(q in s for q, s in zip(seqs, supports)):
                total += table[(t, seqs)]
        return total


def utility_tensors(aux: AuxiliaryGame, prior: NaturePrior) -> UtilityTensors:
    supports = [xi(aux.nature_idx, plan) for plan in prior.plans]
    n = len(aux.receivers)
    sender: dict[tuple, object] = {}
    receivers: list[dict[tuple, object]] = [{} for _ in range(n)]
    entries = []
    for t, support in enumerate(supports):
        mine = []
        for z, leaf in enumerate(aux.terminals):
            if leaf.nature_seq not in support:
                continue
            key = (t, leaf.seqs)
            if key in sender:
                raise AssertionError("two leaves share a sequence profile under one Nature plan")
            sender[key] = leaf.sender
            for i in range(n):
                receivers[i][key] = leaf.receivers[i]
            mine.append((z, leaf.seqs))
        entries.append(tuple(mine))
    return UtilityTensors(tuple(entries), sender, tuple(receivers))
