from fractions import Fraction
from itertools import product

import numpy as np
import pytest

from conftest import leaf
from exante.auxgame import build_auxiliary, exact_prior, lift_state, nature_prior, product_states, utility_tensors
from exante.errors import StateExplosion
from exante.game import NATURE, Decision, PayoffRow, RawGame, Terminal, build_sequences, enumerate_plans, validate, xi
from exante.generate import GameShape, random_game


def nature_labels(aux):
    idx = aux.nature_idx
    return [idx.label(q) for q in range(len(idx))]


def test_entrant_gets_nature_after_in_and_p(entrant):
    aux = build_auxiliary(entrant)
    assert sorted(aux.nature_action.values()) == ["In", "P"]
    for infoset, dist in aux.nature_strategy.items():
        assert dist == {"E": Fraction(3, 10), "H": Fraction(7, 10)}
    assert aux.receiver_idx[0].sequences == build_sequences(entrant, 1).sequences


def test_singleton_types_add_no_nature_choices():
    only = Terminal((PayoffRow((("a", "only"),), 1, (2,)),))
    raw = RawGame((1,), Decision(1, "I", (("a", only), ("b", leaf(0, 0)))), {"a": [("only", 1)]})
    aux = build_auxiliary(validate(raw))
    assert aux.nature_action == {}
    assert len(aux.nature_idx) == 1
    prior = nature_prior(aux)
    assert prior.probs == (1.0,)


def test_two_receiver_chain_interleaves_nature():
    def typed(*actions):
        rows = tuple(PayoffRow(tuple(sorted(zip(actions, combo))), k, (0, 0))
                     for k, combo in enumerate(product("hl", repeat=len(actions))))
        return Terminal(rows)

    second = lambda: Decision(2, "J", (("c", typed("a", "c")), ("d", typed("a"))))  # noqa: E731
    raw = RawGame((1, 2), Decision(1, "I", (("a", second()), ("b", leaf(0, 0, 0)))),
                  {"a": [("h", "1/2"), ("l", "1/2")], "c": [("h", "1/4"), ("l", "3/4")]})
    g = validate(raw)
    aux = build_auxiliary(g)
    assert sorted(aux.nature_action.values()) == ["a", "c", "c"]
    node = aux.root.actions[0][1]
    assert node.player == NATURE
    assert all(child.player == 2 and child.infoset == "J" for _, child in node.actions)
    for i, p in enumerate(g.receivers):
        assert aux.receiver_idx[i].sequences == build_sequences(g, p).sequences


def test_reconstructed_entrant_prior(entrant):
    aux = build_auxiliary(entrant)
    prior = nature_prior(aux)
    assert len(prior) <= len(aux.nature_idx)
    r = np.zeros(len(aux.nature_idx))
    for plan, p in zip(prior.plans, prior.probs):
        for q in xi(aux.nature_idx, plan):
            r[q] += p
    labels = nature_labels(aux)
    for label, v in zip(labels, r):
        expected = 1.0 if label == "∅" else (0.3 if label.endswith("E") else 0.7)
        assert v == pytest.approx(expected, abs=1e-9)
    assert sorted(prior.probs) == pytest.approx([0.3, 0.7])


def test_two_typed_actions_on_one_path_need_four_nature_plans():
    def typed_leaf():
        rows = tuple(PayoffRow((("a", s), ("c", t)), 0, (0,)) for s in "uv" for t in "uv")
        return Terminal(rows)

    inner = Decision(1, "J", (("c", typed_leaf()), ("d", Terminal(tuple(
        PayoffRow((("a", s),), 0, (0,)) for s in "uv")))))
    half = [("u", "1/2"), ("v", "1/2")]
    g = validate(RawGame((1,), Decision(1, "I", (("a", inner), ("b", leaf()))), {"a": half, "c": half}))
    aux = build_auxiliary(g)
    prior = nature_prior(aux)
    assert len(prior) >= 4 and len(prior) <= len(aux.nature_idx)
    assert prior.probs == pytest.approx((0.25,) * len(prior))


def test_entrant_tensor_entries(entrant):
    aux = build_auxiliary(entrant)
    prior = exact_prior(aux)
    tensors = utility_tensors(aux, prior)
    idx = aux.receiver_idx[0]
    q_in, q_out = idx.seq_of("entrant", "In"), idx.seq_of("entrant", "Out")
    for t, states in enumerate(prior.states):
        key_in, key_out = (t, (q_in,)), (t, (q_out,))
        assert tensors.sender[key_out] == 1 and tensors.receivers[0][key_out] == 0
        assert tensors.sender[key_in] == -1
        assert tensors.receivers[0][key_in] == (1 if states[0]["In"] == "E" else -1)


def test_exact_prior_is_the_product(entrant):
    aux = build_auxiliary(entrant)
    prior = exact_prior(aux)
    assert sorted(prior.probs) == pytest.approx(sorted([0.09, 0.21, 0.21, 0.49]))
    for plan, states in zip(prior.plans, prior.states):
        assert all(lift_state(aux, s) == plan for s in states)


def test_state_cap():
    with pytest.raises(StateExplosion):
        product_states(validate(random_game(3, GameShape(typed_actions=2))), cap=3)


def test_expected_utility_identity_on_random_profiles():
    """Reconstructed and product priors give every plan profile the same expected payoffs."""
    rng = np.random.default_rng(3)
    for k in range(20):
        g = validate(random_game(rng, GameShape(receivers=1 + k % 2, max_plans=8)))
        aux = build_auxiliary(g)
        exact, small = exact_prior(aux), nature_prior(aux)
        te, ts = utility_tensors(aux, exact), utility_tensors(aux, small)
        plans = [enumerate_plans(None, idx.player, idx=idx) for idx in aux.receiver_idx]
        for _ in range(10):
            profile = [ps[int(rng.integers(len(ps)))] for ps in plans]
            sup = [xi(idx, p) for idx, p in zip(aux.receiver_idx, profile)]
            for table_e, table_s in [(te.sender, ts.sender)] + list(zip(te.receivers, ts.receivers)):
                a = sum(p * float(te.value(table_e, t, sup)) for t, p in enumerate(exact.probs))
                b = sum(p * float(ts.value(table_s, t, sup)) for t, p in enumerate(small.probs))
                assert a == pytest.approx(b, abs=1e-9)
