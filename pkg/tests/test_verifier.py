import numpy as np
import pytest

from conftest import FIXTURES, leaf
from exante import io
from exante.errors import DenseCapExceeded, MalformedScheme, StateExplosion
from exante.game import Decision, RawGame, validate
from exante.generate import GameShape, random_game
from exante.verifier import (MatrixInstance, brute_force_opt_ea, check_ex_ante, check_ex_interim,
                             export_matrix_form, scheme_array, sender_value)


@pytest.fixture
def common():
    return io.parse_instance((FIXTURES / "entrant_common.instance").read_text())


def scheme(m, name):
    return scheme_array(m, io.parse_scheme((FIXTURES / name).read_text()))


def test_entrant_export(entrant):
    m = export_matrix_form(entrant)
    assert m.states == ("In=E,P=E", "In=E,P=H", "In=H,P=E", "In=H,P=H")
    assert m.prior == pytest.approx([0.09, 0.21, 0.21, 0.49])
    assert m.plans == (("In", "Out", "P"),)


def test_singleton_types_export_one_state():
    g = validate(RawGame((1,), Decision(1, "I", (("a", leaf(1, 1)), ("b", leaf(0, 0))))))
    assert export_matrix_form(g).states == ("-",)


def test_two_binary_typed_actions_give_four_product_states():
    g = validate(random_game(4, GameShape(receivers=2, typed_actions=2)))
    m = export_matrix_form(g)
    assert len(m.states) == 4
    assert sorted(m.prior) == pytest.approx(sorted(
        float(p) * float(q) for _, p in g.marginals[g.typed_actions[0]] for _, q in g.marginals[g.typed_actions[1]]))


def test_state_cap_on_export(entrant):
    with pytest.raises(StateExplosion):
        export_matrix_form(entrant, max_states=3)


def test_phi_prime_is_ex_ante_persuasive_with_binding_p(entrant):
    m = export_matrix_form(entrant)
    report = check_ex_ante(m, scheme(m, "entrant_phi_prime.scheme"))
    assert report.persuasive
    assert report.value == pytest.approx(0.7, abs=1e-12)
    slack = {s.deviation: s.slack for s in report.slacks}
    assert slack["P"] == pytest.approx(0.0, abs=1e-12)
    assert slack["In"] > 0 and slack["Out"] > 0


def test_phi_double_prime_is_ex_interim_persuasive(common):
    report = check_ex_interim(common, scheme(common, "phi_double_prime.scheme"))
    assert report.persuasive
    assert report.value == pytest.approx(0.55, abs=1e-12)


def test_phi_prime_fails_ex_interim_after_out(common):
    report = check_ex_interim(common, scheme(common, "phi_prime.scheme"))
    assert not report.persuasive
    (bad,) = report.violations
    assert (bad.recommendation, bad.deviation) == ("Out", "P")
    # posterior of E after Out is .15/.85, and P pays 1/2 more than Out under E
    assert bad.conditional == pytest.approx(-(0.15 / 0.85) * 0.5)
    assert sender_value(common, scheme(common, "phi_prime.scheme")) == pytest.approx(0.7)


def test_dominant_plan_point_mass_has_positive_slack():
    m = MatrixInstance(("s",), np.array([1.0]), (("a", "b"),), np.zeros((1, 2)), (np.array([[1.0, 0.0]]),))
    report = check_ex_ante(m, np.array([[1.0, 0.0]]))
    assert report.persuasive and report.worst.slack == 0.0
    assert [s.slack for s in report.slacks if s.deviation == "b"] == [1.0]
    assert not check_ex_ante(m, np.array([[0.0, 1.0]])).persuasive


def test_deterministic_scheme_on_one_state():
    m = MatrixInstance(("s",), np.array([1.0]), (("a", "b"),), np.array([[4.0, 7.0]]), (np.zeros((1, 2)),))
    assert sender_value(m, np.array([[0.0, 1.0]])) == 7.0


def test_rows_must_sum_to_one(common):
    with pytest.raises(MalformedScheme):
        check_ex_ante(common, np.array([[0.5, 0.4, 0.0], [0.0, 1.0, 0.0]]))
    with pytest.raises(MalformedScheme):
        scheme_array(common, {"E": {("In",): 1.0}})  # no row for H
    with pytest.raises(MalformedScheme):
        scheme_array(common, {"E": {("Stay",): 1.0}, "H": {("Out",): 1.0}})


def test_brute_force_examples(entrant, common):
    assert brute_force_opt_ea(export_matrix_form(entrant))[0] == pytest.approx(0.7, abs=1e-9)
    assert brute_force_opt_ea(common)[0] == pytest.approx(0.7, abs=1e-9)
    aligned = MatrixInstance(("s",), np.array([1.0]), (("a", "b"), ("c", "d")),
                             np.array([[[1.0, 2.0], [5.0, 0.0]]]),
                             (np.array([[[1.0, 2.0], [5.0, 0.0]]]),) * 2)
    assert brute_force_opt_ea(aligned)[0] == pytest.approx(5.0, abs=1e-9)
    with pytest.raises(DenseCapExceeded):
        brute_force_opt_ea(common, dense_cap=5)


def test_ex_interim_implies_ex_ante_on_random_schemes():
    rng = np.random.default_rng(9)
    for k in range(60):
        g = validate(random_game(rng, GameShape(receivers=1 + k % 2, max_plans=4)))
        m = export_matrix_form(g)
        for _ in range(5):
            # sparse random rows make ex interim acceptance reasonably frequent
            phi = rng.random(m.shape) * (rng.random(m.shape) < 0.3)
            flat = phi.reshape(len(m.states), -1)
            flat[flat.sum(axis=1) == 0, 0] = 1.0
            phi = (flat / flat.sum(axis=1, keepdims=True)).reshape(m.shape)
            if check_ex_interim(m, phi).persuasive:
                assert check_ex_ante(m, phi).persuasive


def test_reported_slacks_recompute_from_tables(common):
    phi = scheme(common, "phi_prime.scheme")
    u = common.receivers[0]
    for s in check_ex_ante(common, phi).slacks:
        d = common.plans[0].index(s.deviation)
        direct = sum(common.prior[k] * phi[k, j] * (u[k, j] - u[k, d]) for k in range(2) for j in range(3))
        assert s.slack == pytest.approx(direct, abs=1e-12)
