"""Extensive-form games with typed receiver actions, and their sequence form.

A game tree is built from :class:`Decision` and :class:`Terminal` nodes.  Every
decision node belongs to a receiver (or, in the auxiliary game, to Nature) and
names an information set.  Receiver actions may carry *types*, drawn
independently from per-action marginals; a terminal stores one payoff row per
assignment of types to the typed actions played on its path.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Mapping, Sequence, Union

from .errors import DistributionSum, PlanExplosion, ValidationError, Violation

NATURE = 0
MAX_RECEIVERS = 2
DEFAULT_PLAN_CAP = 10**6

# (infoset, action) pairs; a receiver's sequence is the ordered tuple of the
# pairs it played from the root.
Choice = tuple[str, str]
SequenceKey = tuple[Choice, ...]
# A reduced plan: (infoset, action) pairs in depth-first infoset order.
Plan = tuple[Choice, ...]


@dataclass(frozen=True)
class PayoffRow:
    when: tuple[tuple[str, str], ...]  # sorted (action, type) pairs
    sender: float
    receivers: tuple[float, ...]


@dataclass(frozen=True)
class Terminal:
    payoffs: tuple[PayoffRow, ...]

    def row(self, types: Mapping[str, str]) -> PayoffRow:
        """Payoff row matching ``types`` on this terminal's typed actions."""
        for row in self.payoffs:
            if all(types.get(a) == t for a, t in row.when):
                return row
        raise KeyError(f"no payoff row for type assignment {dict(types)!r}")


@dataclass(frozen=True)
class Decision:
    player: int
    infoset: str
    actions: tuple[tuple[str, "Node"], ...]

    @property
    def action_names(self) -> tuple[str, ...]:
        return tuple(a for a, _ in self.actions)


Node = Union[Decision, Terminal]


def to_fraction(p) -> Fraction:
    """Exact rational from a Fraction, int, numeric string or decimal float."""
    if isinstance(p, Fraction):
        return p
    if isinstance(p, float):
        return Fraction(repr(p))
    return Fraction(p)


@dataclass(frozen=True)
class RawGame:
    receivers: tuple[int, ...]
    root: Node
    # action id -> [(type id, probability)]; probabilities may be strings like "3/10"
    marginals: Mapping[str, Sequence[tuple[str, object]]] = field(default_factory=dict)


@dataclass(frozen=True)
class TerminalInfo:
    """A terminal together with the (player, infoset, action) steps leading to it."""

    node: Terminal
    path: tuple[tuple[int, str, str], ...]

    def last_choice(self, player: int) -> Choice | None:
        for p, infoset, action in reversed(self.path):
            if p == player:
                return infoset, action
        return None


@dataclass(frozen=True)
class ValidatedGame:
    receivers: tuple[int, ...]
    root: Node
    marginals: Mapping[str, tuple[tuple[str, Fraction], ...]]
    infosets: Mapping[str, tuple[int, tuple[str, ...]]]  # infoset -> (player, A(I))
    action_infoset: Mapping[str, str]
    terminals: tuple[TerminalInfo, ...]

    @property
    def typed_actions(self) -> tuple[str, ...]:
        return tuple(self.marginals)

    def types(self, action: str) -> tuple[str, ...]:
        return tuple(t for t, _ in self.marginals.get(action, ()))

    def receiver_position(self, player: int) -> int:
        return self.receivers.index(player)


def iter_nodes(root: Node) -> Iterator[tuple[Node, tuple[tuple[int, str, str], ...]]]:
    """Depth-first preorder over (node, path-to-node)."""
    stack: list[tuple[Node, tuple]] = [(root, ())]
    while stack:
        node, path = stack.pop()
        yield node, path
        if isinstance(node, Decision):
            for name, child in reversed(node.actions):
                stack.append((child, path + ((node.player, node.infoset, name),)))


def own_sequence(path, player: int) -> SequenceKey:
    return tuple((i, a) for p, i, a in path if p == player)


def validate(raw: RawGame, tol: float = 0.0) -> ValidatedGame:
    """Check every model assumption of ``raw``; raise :class:`ValidationError`."""
    problems: list[Violation] = []

    receivers = tuple(raw.receivers)
    if len(receivers) > MAX_RECEIVERS:
        problems.append(Violation(
            "TooManyReceivers",
            f"{len(receivers)} receivers given; optimal ex ante persuasion is NP-hard "
            "beyond two receivers, so only one or two are supported"))
        raise ValidationError(problems)
    if not receivers:
        problems.append(Violation("MalformedTree", "at least one receiver is required"))
    if len(set(receivers)) != len(receivers) or NATURE in receivers:
        problems.append(Violation("MalformedTree", f"invalid receiver ids {receivers!r}"))
    if not isinstance(raw.root, (Decision, Terminal)):
        problems.append(Violation("MalformedTree", "root is not a game node"))
        raise ValidationError(problems)

    marginals: dict[str, tuple[tuple[str, Fraction], ...]] = {}
    for action, dist in raw.marginals.items():
        try:
            rows = tuple((str(t), to_fraction(p)) for t, p in dist)
        except (ValueError, ZeroDivisionError, TypeError) as exc:
            problems.append(Violation("ProbabilitySum", f"bad probability for {action!r}: {exc}", action))
            continue
        names = [t for t, _ in rows]
        if not rows or len(set(names)) != len(names):
            problems.append(Violation("MalformedTree", f"types of {action!r} empty or repeated", action))
        if any(p <= 0 for _, p in rows):
            problems.append(Violation(
                "ProbabilitySum", f"marginal of {action!r} has a non-positive entry", action))
        total = sum((p for _, p in rows), Fraction(0))
        if abs(total - 1) > tol:
            problems.append(Violation(
                "ProbabilitySum", f"marginal of {action!r} sums to {total} instead of 1", action))
        marginals[action] = rows

    infosets: dict[str, tuple[int, tuple[str, ...]]] = {}
    infoset_parent: dict[str, SequenceKey] = {}
    action_infoset: dict[str, str] = {}
    terminals: list[TerminalInfo] = []
    seen_ids: set[int] = set()

    for node, path in iter_nodes(raw.root):
        if id(node) in seen_ids and isinstance(node, Decision):
            problems.append(Violation("MalformedTree", "node shared between two parents (not a tree)"))
            continue
        seen_ids.add(id(node))
        if isinstance(node, Terminal):
            terminals.append(TerminalInfo(node, path))
            continue
        if not isinstance(node, Decision):
            problems.append(Violation("MalformedTree", f"unknown node {node!r}"))
            continue
        if node.player not in receivers:
            problems.append(Violation(
                "MalformedTree", f"infoset {node.infoset!r} names unknown player {node.player!r}",
                node.infoset))
            continue
        names = node.action_names
        if not names or len(set(names)) != len(names):
            problems.append(Violation(
                "MalformedTree", f"infoset {node.infoset!r} has no or repeated actions", node.infoset))
        if node.infoset in infosets:
            player, acts = infosets[node.infoset]
            if player != node.player or acts != names:
                problems.append(Violation(
                    "InfosetMismatch",
                    f"nodes of infoset {node.infoset!r} disagree on player or action list",
                    node.infoset))
            if infoset_parent[node.infoset] != own_sequence(path, node.player):
                problems.append(Violation(
                    "PerfectRecallViolation",
                    f"infoset {node.infoset!r} is reached by different own sequences",
                    node.infoset))
        else:
            infosets[node.infoset] = (node.player, names)
            infoset_parent[node.infoset] = own_sequence(path, node.player)
            for a in names:
                if a in action_infoset and action_infoset[a] != node.infoset:
                    problems.append(Violation(
                        "MalformedTree", f"action id {a!r} used at two infosets", a))
                action_infoset.setdefault(a, node.infoset)

    for action in marginals:
        if action not in action_infoset:
            problems.append(Violation("MalformedTree", f"types given for unknown action {action!r}", action))

    n = len(receivers)
    for info in terminals:
        typed = [a for _, _, a in info.path if a in marginals]
        expected = {
            tuple(sorted(zip(typed, combo)))
            for combo in itertools.product(*(_type_names(marginals[a]) for a in typed))
        }
        got = [row.when for row in info.node.payoffs]
        if len(got) != len(set(got)) or set(got) != expected:
            where = "/".join(a for _, _, a in info.path) or "<root>"
            problems.append(Violation(
                "MalformedTree",
                f"terminal after {where!r} needs exactly one payoff row per type assignment of {typed!r}",
                where))
        for row in info.node.payoffs:
            if len(row.receivers) != n:
                problems.append(Violation("MalformedTree", "payoff row has wrong number of receiver utilities"))
                break

    if problems:
        raise ValidationError(problems)
    return ValidatedGame(
        receivers=receivers,
        root=raw.root,
        marginals=marginals,
        infosets=infosets,
        action_infoset=action_infoset,
        terminals=tuple(terminals),
    )


def _type_names(dist) -> list[str]:
    return [t for t, _ in dist]


# ---------------------------------------------------------------------------
# sequence form


@dataclass(frozen=True)
class SequenceIndex:
    """Sequences Q_i of one player; index 0 is the empty sequence."""

    player: int
    sequences: tuple[SequenceKey, ...]
    infosets: tuple[str, ...]
    actions: Mapping[str, tuple[str, ...]]
    parent: Mapping[str, int]
    children: Mapping[str, tuple[int, ...]]
    up: tuple[str | None, ...]
    down: tuple[tuple[str, ...], ...]
    index: Mapping[SequenceKey, int]

    def __len__(self) -> int:
        return len(self.sequences)

    @property
    def roots(self) -> tuple[str, ...]:
        return self.down[0]

    def seq_of(self, infoset: str, action: str) -> int:
        return self.index[self.sequences[self.parent[infoset]] + ((infoset, action),)]

    def last_action(self, q: int) -> str | None:
        return self.sequences[q][-1][1] if q else None

    def label(self, q: int) -> str:
        return ".".join(a for _, a in self.sequences[q]) or "∅"


def build_sequences(game, player: int) -> SequenceIndex:
    """Sequence form of ``player`` in ``game`` (anything exposing ``.root``)."""
    seqs: list[SequenceKey] = [()]
    index: dict[SequenceKey, int] = {(): 0}
    infosets: list[str] = []
    actions: dict[str, tuple[str, ...]] = {}
    parent: dict[str, int] = {}
    children: dict[str, tuple[int, ...]] = {}
    up: list[str | None] = [None]
    down: list[list[str]] = [[]]

    for node, path in iter_nodes(game.root):
        if not isinstance(node, Decision) or node.player != player or node.infoset in parent:
            continue
        par = index[own_sequence(path, player)]
        infosets.append(node.infoset)
        actions[node.infoset] = node.action_names
        parent[node.infoset] = par
        down[par].append(node.infoset)
        kids = []
        for a in node.action_names:
            key = seqs[par] + ((node.infoset, a),)
            index[key] = len(seqs)
            kids.append(len(seqs))
            seqs.append(key)
            up.append(node.infoset)
            down.append([])
        children[node.infoset] = tuple(kids)

    return SequenceIndex(
        player=player,
        sequences=tuple(seqs),
        infosets=tuple(infosets),
        actions=actions,
        parent=parent,
        children=children,
        up=tuple(up),
        down=tuple(tuple(d) for d in down),
        index=index,
    )


def count_plans(idx: SequenceIndex, q: int = 0) -> int:
    total = 1
    for infoset in idx.down[q]:
        total *= sum(count_plans(idx, c) for c in idx.children[infoset])
    return total


def enumerate_plans(game, player: int, cap: int = DEFAULT_PLAN_CAP,
                    idx: SequenceIndex | None = None) -> list[Plan]:
    """All reduced plans of ``player`` (exponential; small games only)."""
    idx = idx or build_sequences(game, player)
    n = count_plans(idx)
    if n > cap:
        raise PlanExplosion(f"player {player} has {n} reduced plans (cap {cap})")

    def below(q: int) -> list[Plan]:
        result: list[Plan] = [()]
        for infoset in idx.down[q]:
            options = [
                ((infoset, a),) + rest
                for a, c in zip(idx.actions[infoset], idx.children[infoset])
                for rest in below(c)
            ]
            result = [left + right for left in result for right in options]
        return result

    return below(0)


def xi(idx: SequenceIndex, plan: Plan) -> frozenset[int]:
    """Sequences played with probability one under ``plan`` (always holds 0)."""
    return frozenset([0] + [idx.seq_of(i, a) for i, a in plan])


def behavioral_to_realization(idx: SequenceIndex, strategy: Mapping[str, Mapping[str, object]],
                              tol: float = 1e-9) -> list:
    """Realization plan of a behavioral strategy (product formula).

    Fraction inputs give Fraction outputs, so flow conservation can be checked
    exactly.
    """
    r: list = [0] * len(idx)
    r[0] = 1
    for infoset in idx.infosets:
        dist = strategy.get(infoset)
        if dist is None:
            raise DistributionSum(f"no distribution given at infoset {infoset!r}")
        probs = [dist.get(a, 0) for a in idx.actions[infoset]]
        if set(dist) - set(idx.actions[infoset]):
            raise DistributionSum(f"unknown actions at infoset {infoset!r}")
        if any(p < 0 for p in probs):
            raise DistributionSum(f"negative probability at infoset {infoset!r}")
        total = sum(probs)
        exact = all(isinstance(p, (int, Fraction)) for p in probs)
        if (total != 1) if exact else abs(total - 1) > tol:
            raise DistributionSum(f"distribution at {infoset!r} sums to {total}")
        base = r[idx.parent[infoset]]
        for p, q in zip(probs, idx.children[infoset]):
            r[q] = base * p
    return r


def flow_violations(idx: SequenceIndex, r: Sequence, tol: float = 0.0) -> list[str]:
    """Infosets where ``r`` breaks conservation (and a bad root entry)."""
    bad = [] if abs(r[0] - 1) <= tol else ["<root>"]
    for infoset in idx.infosets:
        if abs(sum(r[q] for q in idx.children[infoset]) - r[idx.parent[infoset]]) > tol:
            bad.append(infoset)
    return bad


def indicator(idx: SequenceIndex, plan: Plan) -> list[int]:
    support = xi(idx, plan)
    return [1 if q in support else 0 for q in range(len(idx))]


def reach(root: Node, plans: Mapping[int, Mapping[str, str]]) -> tuple[Terminal, tuple]:
    """Follow the players' plans (infoset -> action) to a terminal."""
    node, path = root, []
    while isinstance(node, Decision):
        action = plans[node.player][node.infoset]
        path.append((node.player, node.infoset, action))
        node = dict(node.actions)[action]
    return node, tuple(path)


def outcome(game: ValidatedGame, plans: Mapping[int, Mapping[str, str]],
            types: Mapping[str, str]) -> PayoffRow:
    """Payoff row reached by a receiver plan profile in type state ``types``."""
    terminal, path = reach(game.root, plans)
    on_path = {a: types[a] for _, _, a in path if a in game.marginals}
    return terminal.row(on_path)


def plan_label(plan: Plan) -> str:
    """Actions of a reduced plan joined by '.', or '-' for the empty plan."""
    return ".".join(a for _, a in plan) or "-"


def state_name(state: Mapping[str, str], actions: Sequence[str]) -> str:
    """'a=t,b=u' over ``actions`` in order, or '-' when nothing is typed."""
    return ",".join(f"{a}={state[a]}" for a in actions) or "-"
