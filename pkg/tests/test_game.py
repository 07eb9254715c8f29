from fractions import Fraction

import pytest

from conftest import leaf, single_infoset_raw
from exante.errors import DistributionSum, PlanExplosion, ValidationError
from exante.game import (Decision, PayoffRow, RawGame, Terminal, behavioral_to_realization, build_sequences,
                         count_plans, enumerate_plans, flow_violations, indicator, outcome, validate, xi)


def seq_labels(idx):
    return [idx.label(q) for q in range(len(idx))]


def test_entrant_game_is_valid(entrant):
    assert entrant.receivers == (1,)
    assert entrant.typed_actions == ("In", "P")
    assert dict(entrant.marginals["In"]) == {"E": Fraction(3, 10), "H": Fraction(7, 10)}


def test_marginal_summing_to_point_nine_is_rejected(entrant):
    raw = RawGame(entrant.receivers, entrant.root,
                  {"In": [("E", "0.3"), ("H", "0.6")], "P": [("E", "3/10"), ("H", "7/10")]})
    with pytest.raises(ValidationError) as err:
        validate(raw)
    assert err.value.kinds == {"ProbabilitySum"}
    assert err.value.violations[0].subject == "In"


def test_non_positive_type_probability_is_rejected():
    raw = RawGame((1,), Decision(1, "I", (("a", Terminal((PayoffRow((("a", "u"),), 0, (0,)),
                                                          PayoffRow((("a", "v"),), 0, (0,))))),
                                          ("b", leaf()))),
                  {"a": [("u", 1), ("v", 0)]})
    with pytest.raises(ValidationError) as err:
        validate(raw)
    assert "ProbabilitySum" in err.value.kinds


def test_three_receivers_are_refused():
    raw = RawGame((1, 2, 3), leaf(0, 0, 0, 0))
    with pytest.raises(ValidationError) as err:
        validate(raw)
    assert err.value.kinds == {"TooManyReceivers"}
    assert "NP-hard" in str(err.value)


def test_infoset_with_different_actions_is_a_mismatch():
    left = Decision(2, "J", (("c", leaf(0, 0, 0)), ("d", leaf(0, 0, 0))))
    right = Decision(2, "J", (("c", leaf(0, 0, 0)), ("e", leaf(0, 0, 0))))
    with pytest.raises(ValidationError) as err:
        validate(RawGame((1, 2), Decision(1, "I", (("a", left), ("b", right)))))
    assert "InfosetMismatch" in err.value.kinds


def test_forgetting_own_move_violates_perfect_recall():
    # player 1 meets J after a and after b: J cannot tell its own earlier choice
    j = lambda: Decision(1, "J", (("c", leaf()), ("d", leaf())))  # noqa: E731
    with pytest.raises(ValidationError) as err:
        validate(RawGame((1,), Decision(1, "I", (("a", j()), ("b", j())))))
    assert "PerfectRecallViolation" in err.value.kinds


def test_missing_payoff_row_for_a_type_is_malformed():
    raw = RawGame((1,), Decision(1, "I", (("a", Terminal((PayoffRow((("a", "u"),), 0, (0,)),))),
                                          ("b", leaf()))),
                  {"a": [("u", "1/2"), ("v", "1/2")]})
    with pytest.raises(ValidationError) as err:
        validate(raw)
    assert err.value.kinds == {"MalformedTree"}


def test_unknown_player_is_malformed():
    with pytest.raises(ValidationError) as err:
        validate(RawGame((1,), Decision(2, "I", (("a", leaf()), ("b", leaf())))))
    assert "MalformedTree" in err.value.kinds


def test_single_infoset_has_four_sequences():
    idx = build_sequences(validate(single_infoset_raw()), 1)
    assert seq_labels(idx) == ["∅", "x", "y", "z"]


def test_two_level_tree_sequences(two_level):
    idx = build_sequences(two_level, 1)
    assert seq_labels(idx) == ["∅", "a", "b", "a.c", "a.d"]
    a = idx.seq_of("I1", "a")
    assert idx.down[a] == ("I2",)
    assert idx.up[idx.seq_of("I2", "c")] == "I2"
    assert idx.parent["I2"] == a and idx.parent["I1"] == 0


def test_entrant_sequences(entrant):
    assert seq_labels(build_sequences(entrant, 1)) == ["∅", "In", "Out", "P"]


def test_plans_of_two_level_tree(two_level):
    plans = enumerate_plans(two_level, 1)
    assert [tuple(a for _, a in p) for p in plans] == [("a", "c"), ("a", "d"), ("b",)]
    assert count_plans(build_sequences(two_level, 1)) == 3


def test_single_infoset_has_three_plans():
    assert len(enumerate_plans(validate(single_infoset_raw()), 1)) == 3


def test_player_without_infosets_has_the_empty_plan():
    g = validate(RawGame((1, 2), Decision(1, "I", (("a", leaf(0, 0, 0)), ("b", leaf(0, 0, 0))))))
    assert enumerate_plans(g, 2) == [()]


def test_plan_cap_is_enforced(two_level):
    with pytest.raises(PlanExplosion):
        enumerate_plans(two_level, 1, cap=2)


def test_xi_examples(two_level):
    idx = build_sequences(two_level, 1)
    a, b = idx.seq_of("I1", "a"), idx.seq_of("I1", "b")
    ac = idx.seq_of("I2", "c")
    assert xi(idx, (("I1", "b"),)) == {0, b}
    assert xi(idx, (("I1", "a"), ("I2", "c"))) == {0, a, ac}
    assert xi(idx, ()) == {0}


def test_uniform_behavioral_strategy_realization(two_level):
    idx = build_sequences(two_level, 1)
    half = Fraction(1, 2)
    r = behavioral_to_realization(idx, {"I1": {"a": half, "b": half}, "I2": {"c": half, "d": half}})
    by_label = dict(zip(seq_labels(idx), r))
    assert by_label == {"∅": 1, "a": half, "b": half, "a.c": Fraction(1, 4), "a.d": Fraction(1, 4)}
    assert flow_violations(idx, r) == []


def test_deterministic_strategy_gives_the_plan_indicator(two_level):
    idx = build_sequences(two_level, 1)
    r = behavioral_to_realization(idx, {"I1": {"a": 1, "b": 0}, "I2": {"c": 0, "d": 1}})
    assert list(r) == indicator(idx, (("I1", "a"), ("I2", "d")))


def test_entrant_uniform_realization(entrant):
    third = Fraction(1, 3)
    r = behavioral_to_realization(build_sequences(entrant, 1), {"entrant": {"In": third, "Out": third, "P": third}})
    assert list(r) == [1, third, third, third]


def test_behavioral_distribution_must_sum_to_one(two_level):
    idx = build_sequences(two_level, 1)
    with pytest.raises(DistributionSum):
        behavioral_to_realization(idx, {"I1": {"a": 0.5, "b": 0.4}, "I2": {"c": 0.5, "d": 0.5}})


def test_outcome_follows_types(entrant):
    assert outcome(entrant, {1: {"entrant": "In"}}, {"In": "E", "P": "H"}).receivers == (1,)
    assert outcome(entrant, {1: {"entrant": "P"}}, {"In": "E", "P": "E"}).receivers == (Fraction(1, 2),)
