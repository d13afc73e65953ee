import json
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from memdp_solve.model import (Mdp, Memdp, ModelError, PomdpModel,
                               distinguishing_pairs, parse_model, prob_str,
                               restrict, serialize_model, validate)

from conftest import card_game, random_mdp


CARD_JSON = json.dumps({
    "type": "memdp",
    "states": ["D", "C1", "C2", "W", "L"],
    "actions": ["draw", "g1", "g2"],
    "environments": ["E1", "E2"],
    "transitions": {
        "E1": {
            "D": {"draw": {"C1": "2/3", "C2": "1/3"}, "g1": {"D": 1}, "g2": {"D": 1}},
            "C1": {"draw": {"D": 1}, "g1": {"W": 1}, "g2": {"L": 1}},
            "C2": {"draw": {"D": 1}, "g1": {"W": 1}, "g2": {"L": 1}},
            "W": {"draw": {"W": 1}, "g1": {"W": 1}, "g2": {"W": 1}},
            "L": {"draw": {"L": 1}, "g1": {"L": 1}, "g2": {"L": 1}},
        },
        "E2": {
            "D": {"draw": {"C1": "1/3", "C2": "2/3"}, "g1": {"D": 1}, "g2": {"D": 1}},
            "C1": {"draw": {"D": 1}, "g1": {"L": 1}, "g2": {"W": 1}},
            "C2": {"draw": {"D": 1}, "g1": {"L": 1}, "g2": {"W": 1}},
            "W": {"draw": {"W": 1}, "g1": {"W": 1}, "g2": {"W": 1}},
            "L": {"draw": {"L": 1}, "g1": {"L": 1}, "g2": {"L": 1}},
        },
    },
    "priority": {"D": 1, "C1": 1, "C2": 1, "W": 2, "L": 1},
})


def test_parse_card_document():
    model = parse_model(CARD_JSON)
    assert isinstance(model, Memdp)
    assert model.environments == ("E1", "E2")
    assert model.row("E1", "D", "draw")["C1"] == Fraction(2, 3)
    assert model.priority.of("W") == 2
    assert validate(model).ok


def test_parse_single_state_mdp():
    text = json.dumps({"type": "mdp", "states": ["s"], "actions": ["a"],
                       "transitions": {"s": {"a": {"s": "1/1"}}}})
    model = parse_model(text)
    assert isinstance(model, Mdp)
    assert model.row("s", "a") == {"s": Fraction(1)}


def test_parse_rejects_bad_sum():
    text = json.dumps({"type": "mdp", "states": ["s", "t"], "actions": ["a"],
                       "transitions": {"s": {"a": {"t": "5/6"}},
                                       "t": {"a": {"t": 1}}}})
    with pytest.raises(ModelError, match="does not sum to 1"):
        parse_model(text)


def test_parse_reports_syntax_position():
    with pytest.raises(ModelError, match="line"):
        parse_model("{not json")


def test_parse_rejects_unknown_successor():
    text = json.dumps({"type": "mdp", "states": ["s"], "actions": ["a"],
                       "transitions": {"s": {"a": {"ghost": 1}}}})
    with pytest.raises(ModelError, match="ghost"):
        parse_model(text)


def test_parse_pomdp():
    text = json.dumps({
        "type": "pomdp", "states": ["x", "y"], "actions": ["a"],
        "observations": ["o"], "obs_map": {"x": "o", "y": "o"},
        "transitions": {"x": {"a": {"y": 1}}, "y": {"a": {"x": 1}}},
        "priority": {"x": 0, "y": 0}})
    model = parse_model(text)
    assert isinstance(model, PomdpModel)
    assert model.obs("y") == "o"


def test_round_trip_card():
    model = parse_model(CARD_JSON)
    text = serialize_model(model)
    again = parse_model(text)
    assert again == model
    assert serialize_model(again) == text


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=10 ** 9))
def test_round_trip_random_models(seed):
    rng = random.Random(seed)
    mdp = random_mdp(rng)
    assert parse_model(serialize_model(mdp)) == mdp


def test_validate_warns_on_unreferenced_state():
    text = json.dumps({"type": "mdp", "states": ["s", "island"], "actions": ["a"],
                       "transitions": {"s": {"a": {"s": 1}},
                                       "island": {"a": {"s": 1}}}})
    report = validate(parse_model(text))
    assert report.ok
    assert any("island" in w for w in report.warnings)


def test_validate_flags_missing_row():
    model = Memdp(("s",), ("a", "b"), ("E1",),
                  {"E1": {("s", "a"): {"s": Fraction(1)}}}, None)
    report = validate(model)
    assert not report.ok
    assert any("missing distribution" in e for e in report.errors)


def test_validate_exact_row_sums(card):
    for e in card.environments:
        for q in card.states:
            for a in card.actions:
                assert sum(card.row(e, q, a).values()) == 1


def test_distinguishing_pairs_card(card):
    pairs = distinguishing_pairs(card)
    assert set(pairs) == {("D", "draw"), ("G", "g1"), ("G", "g2")}
    assert pairs[("D", "draw")] == (("E1", "E2"),)


def test_distinguishing_pairs_identical_envs():
    base = card_game().delta["E1"]
    twin = Memdp(card_game().states, card_game().actions, ("E1", "E2"),
                 {"E1": base, "E2": base}, card_game().priority)
    assert distinguishing_pairs(twin) == {}


def test_distinguishing_pairs_single_difference():
    states, actions = ("x", "y"), ("a",)
    d1 = {("x", "a"): {"y": Fraction(1)}, ("y", "a"): {"y": Fraction(1)}}
    d2 = {("x", "a"): {"x": Fraction(1)}, ("y", "a"): {"y": Fraction(1)}}
    m = Memdp(states, actions, ("E1", "E2"), {"E1": d1, "E2": d2}, None)
    assert set(distinguishing_pairs(m)) == {("x", "a")}


def test_restrict(card):
    one = restrict(card, {"E1"})
    assert one.environments == ("E1",)
    assert one.slice("E1") == card.slice("E1")
    assert restrict(card, card.environments) == card
    with pytest.raises(ModelError):
        restrict(card, set())
    with pytest.raises(ModelError):
        restrict(card, {"E9"})


def test_prob_str_round_trip():
    assert prob_str(Fraction(2, 6)) == "1/3"
