#!/usr/bin/env python3
"""Write the bundled card-game model documents into models/.

The card game: a deck holds two card types, one of which is duplicated;
which one is the hidden environment. From the deal state D a draw reveals
a card (C1 or C2) with deck-dependent odds; the player then either guesses
(moving to G, where g1/g2 resolve to the win/lose sinks according to which
card is actually duplicated) or requests another draw, which is granted
with probability 1 - alpha0. Reaching W is encoded as the parity objective
via priority 2 on W and 1 elsewhere.
"""

import json
import os
import sys
from fractions import Fraction

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from memdp_solve.model import Memdp, ParityObjective, serialize_model  # noqa: E402


def card_game(alpha0: Fraction, a1_e1: Fraction, a1_e2: Fraction = None):
    """Two-environment card game; environment Ei means card i is duplicated."""
    if a1_e2 is None:
        a1_e2 = 1 - a1_e1
    states = ("D", "C1", "C2", "G", "W", "L")
    actions = ("draw", "guess", "g1", "g2")

    def env(a1: Fraction, majority_is_1: bool) -> dict:
        d = {("D", "draw"): {"C1": a1, "C2": 1 - a1}}
        for pad in ("guess", "g1", "g2"):
            d[("D", pad)] = {"D": Fraction(1)}
        for c in ("C1", "C2"):
            if alpha0 == 1:
                d[(c, "draw")] = {"G": Fraction(1)}
            elif alpha0 == 0:
                d[(c, "draw")] = {"D": Fraction(1)}
            else:
                d[(c, "draw")] = {"G": alpha0, "D": 1 - alpha0}
            d[(c, "guess")] = {"G": Fraction(1)}
            for pad in ("g1", "g2"):
                d[(c, pad)] = {c: Fraction(1)}
        d[("G", "g1")] = {"W": Fraction(1)} if majority_is_1 else {"L": Fraction(1)}
        d[("G", "g2")] = {"L": Fraction(1)} if majority_is_1 else {"W": Fraction(1)}
        for pad in ("draw", "guess"):
            d[("G", pad)] = {"G": Fraction(1)}
        for s in ("W", "L"):
            for a in actions:
                d[(s, a)] = {s: Fraction(1)}
        return d

    priority = ParityObjective({"D": 1, "C1": 1, "C2": 1, "G": 1, "W": 2, "L": 1})
    return Memdp(states, actions, ("E1", "E2"),
                 {"E1": env(a1_e1, True), "E2": env(a1_e2, False)}, priority)


def main():
    out_dir = os.path.join(os.path.dirname(__file__), "..", "models")
    os.makedirs(out_dir, exist_ok=True)
    models = {
        # forced guess after one draw, symmetric decks (2/3 vs 1/3)
        "card.json": card_game(Fraction(1), Fraction(2, 3)),
        # forced guess, asymmetric decks (3/5 vs 1/4)
        "card_asym.json": card_game(Fraction(1), Fraction(3, 5), Fraction(1, 4)),
        # redraws always granted
        "card_draw.json": card_game(Fraction(0), Fraction(2, 3)),
        # redraw granted with probability 9/10
        "card_draw_forced.json": card_game(Fraction(1, 10), Fraction(2, 3)),
    }
    for name, model in models.items():
        path = os.path.join(out_dir, name)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(serialize_model(model))
        print("wrote", path)

    broken = {
        "type": "memdp",
        "states": ["s0", "s1"],
        "actions": ["a"],
        "environments": ["E1"],
        "transitions": {"E1": {"s0": {"a": {"s1": "5/6"}},
                               "s1": {"a": {"s1": "1/1"}}}},
        "priority": {"s0": 1, "s1": 2},
    }
    path = os.path.join(out_dir, "broken.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(broken, fh, indent=2)
        fh.write("\n")
    print("wrote", path)

    strategy = {
        "mode": "belief-threshold",
        "rules": [
            {"env": "E1", "min": "1/2",
             "actions": {"D": "draw", "C1": "guess", "C2": "guess", "G": "g1",
                         "W": "g1", "L": "g1"}},
        ],
        "default": {"D": "draw", "C1": "guess", "C2": "guess", "G": "g2",
                    "W": "g1", "L": "g1"},
    }
    path = os.path.join(out_dir, "guess_likelier.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(strategy, fh, indent=2)
        fh.write("\n")
    print("wrote", path)


if __name__ == "__main__":
    main()
