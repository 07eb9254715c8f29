"""Random perfect-recall games for the property suites and the ``random`` command."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .game import Decision, PayoffRow, RawGame, Terminal, build_sequences, count_plans, validate


@dataclass(frozen=True)
class GameShape:
    receivers: int = 1
    max_depth: int = 4
    max_branch: int = 3
    typed_actions: int = 2
    max_plans: int | None = None  # per receiver; games above it are redrawn
    rational_payoffs: bool = True
    reuse: float = 0.5  # chance of joining an existing infoset when one is eligible


def _payoff(rng: np.random.Generator, rational: bool) -> Fraction:
    if rational:
        return Fraction(int(rng.integers(-12, 13)), 4)
    return Fraction(int(rng.integers(-3, 4)))


def _skeleton(rng, shape: GameShape, players):
    """Nested ('D', player, infoset, [(action, child)]) / ('T',) with perfect recall by construction."""
    infosets: dict[tuple, list[tuple[str, tuple[str, ...]]]] = {}  # (player, own history) -> [(infoset, actions)]
    names = itertools.count()

    def build(depth, history):
        if depth > 0 and (depth >= shape.max_depth or rng.random() < 0.25 + 0.15 * depth):
            return ("T",)
        player = int(rng.choice(players))
        key = (player, history[player])
        pool = infosets.setdefault(key, [])
        if pool and rng.random() < shape.reuse:
            infoset, actions = pool[int(rng.integers(len(pool)))]
        else:
            k = next(names)
            infoset = f"I{k}"
            actions = tuple(f"a{k}_{j}" for j in range(int(rng.integers(2, shape.max_branch + 1))))
            pool.append((infoset, actions))
        children = []
        for a in actions:
            nxt = dict(history)
            nxt[player] = history[player] + ((infoset, a),)
            children.append((a, build(depth + 1, nxt)))
        return ("D", player, infoset, children)

    return build(0, {p: () for p in players})


def _actions(node) -> list[str]:
    if node[0] == "T":
        return []
    out = []
    for a, child in node[3]:
        out.append(a)
        out.extend(_actions(child))
    return list(dict.fromkeys(out))


def random_game(rng: np.random.Generator | int, shape: GameShape = GameShape(), attempts: int = 1000) -> RawGame:
    """A random valid game; ``rng`` may be a seed."""
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    players = list(range(1, shape.receivers + 1))
    for _ in range(attempts):
        skel = _skeleton(rng, shape, players)
        if skel[0] == "T":
            continue
        actions = _actions(skel)
        chosen = [str(a) for a in rng.choice(actions, size=min(shape.typed_actions, len(actions)), replace=False)]
        marginals = {}
        for a in sorted(chosen, key=actions.index):
            p = Fraction(int(rng.integers(1, 10)), 10)
            marginals[a] = [("x", p), ("y", 1 - p)]
        raw = RawGame(tuple(players), _tree(rng, skel, marginals, shape), marginals)
        if shape.max_plans is not None:
            g = validate(raw)
            if any(count_plans(build_sequences(g, p)) > shape.max_plans for p in players):
                continue
        return raw
    raise RuntimeError("could not draw a game within the plan cap")


def _tree(rng, skel, marginals, shape: GameShape, typed_on_path=()):
    if skel[0] == "T":
        rows = []
        domains = [[(a, t) for t, _ in marginals[a]] for a in typed_on_path]
        for combo in itertools.product(*domains):
            rows.append(PayoffRow(
                tuple(sorted(combo)),
                _payoff(rng, shape.rational_payoffs),
                tuple(_payoff(rng, shape.rational_payoffs) for _ in range(shape.receivers)),
            ))
        return Terminal(tuple(rows))
    _, player, infoset, children = skel
    out = []
    for a, child in children:
        path = typed_on_path + ((a,) if a in marginals else ())
        out.append((a, _tree(rng, child, marginals, shape, path)))
    return Decision(player, infoset, tuple(out))


def random_behavioral(rng: np.random.Generator, idx, rational: bool = True) -> dict[str, dict[str, Fraction]]:
    """Random behavioral strategy over ``idx``'s infosets, occasionally with zero-probability actions."""
    strategy = {}
    for infoset in idx.infosets:
        acts = idx.actions[infoset]
        weights = [int(rng.integers(0, 5)) for _ in acts]
        if sum(weights) == 0:
            weights[int(rng.integers(len(acts)))] = 1
        total = sum(weights)
        strategy[infoset] = {a: Fraction(w, total) if rational else w / total for a, w in zip(acts, weights)}
    return strategy
