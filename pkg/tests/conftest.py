"""Shared model builders and random-instance generators for the test suite."""

import random
import sys
from fractions import Fraction
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from memdp_solve.model import Mdp, Memdp, ParityObjective, PomdpModel  # noqa: E402


def card_game(alpha0=Fraction(1), a1_e1=Fraction(2, 3), a1_e2=None):
    """The two-card guessing game; environment Ei = card i is duplicated.

    alpha0 is the chance a redraw request is refused (1 = guess after one
    draw, 0 = unlimited redraws). Reaching W is the objective (priority 2;
    everything else 1).
    """
    if a1_e2 is None:
        a1_e2 = 1 - a1_e1
    states = ("D", "C1", "C2", "G", "W", "L")
    actions = ("draw", "guess", "g1", "g2")

    def env(a1, majority_is_1):
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

    prio = ParityObjective({"D": 1, "C1": 1, "C2": 1, "G": 1, "W": 2, "L": 1})
    return Memdp(states, actions, ("E1", "E2"),
                 {"E1": env(a1_e1, True), "E2": env(a1_e2, False)}, prio)


def random_distribution(rng: random.Random, candidates, max_denominator=8,
                        max_support=3):
    """Exact rational distribution over a random subset of candidates."""
    support_size = rng.randint(1, min(max_support, len(candidates)))
    support = rng.sample(list(candidates), support_size)
    if support_size == 1:
        return {support[0]: Fraction(1)}
    den = rng.randint(support_size, max_denominator)
    cuts = sorted(rng.sample(range(1, den), support_size - 1))
    weights = []
    prev = 0
    for c in cuts + [den]:
        weights.append(c - prev)
        prev = c
    return {q: Fraction(w, den) for q, w in zip(support, weights)}


def random_mdp(rng: random.Random, n_states=None, n_actions=None,
               max_priority=3, max_denominator=8):
    n_states = n_states or rng.randint(2, 5)
    n_actions = n_actions or rng.randint(1, 2)
    states = tuple(f"s{i}" for i in range(n_states))
    actions = tuple(f"a{i}" for i in range(n_actions))
    delta = {(q, a): random_distribution(rng, states, max_denominator)
             for q in states for a in actions}
    prio = ParityObjective({q: rng.randint(0, max_priority) for q in states})
    return Mdp(states, actions, delta, prio)


def random_sink_memdp(rng: random.Random, n_transient=2, n_actions=2,
                      sink_mass=Fraction(1, 8), transient_even=False):
    """Two-environment model whose distinguishing rows resolve directly into
    the absorbing win/lose sinks; every row carries sink mass >= sink_mass,
    so runs absorb geometrically fast. Transient priorities are odd unless
    transient_even is set (the finite-horizon oracle needs them odd).
    """
    transients = tuple(f"t{i}" for i in range(n_transient))
    states = transients + ("W", "L")
    actions = tuple(f"a{i}" for i in range(n_actions))

    def sink_split(p):
        row = {}
        if p > 0:
            row["W"] = p
        if p < 1:
            row["L"] = 1 - p
        return row

    d1, d2 = {}, {}
    for q in transients:
        for a in actions:
            if rng.random() < 0.5:
                # distinguishing row: per-environment split over the sinks
                p1 = Fraction(rng.randint(0, 8), 8)
                p2 = Fraction(rng.choice([x for x in range(9)
                                          if Fraction(x, 8) != p1]), 8)
                d1[(q, a)], d2[(q, a)] = sink_split(p1), sink_split(p2)
            else:
                # shared row: transient mass scaled down, fixed sink mass
                inner = random_distribution(rng, transients, max_denominator=8)
                row = {k: v * (1 - 2 * sink_mass) for k, v in inner.items()}
                row["W"] = row.get("W", Fraction(0)) + sink_mass
                row["L"] = row.get("L", Fraction(0)) + sink_mass
                row = {k: v for k, v in row.items() if v > 0}
                d1[(q, a)] = dict(row)
                d2[(q, a)] = dict(row)
    for s in ("W", "L"):
        for a in actions:
            d1[(s, a)] = {s: Fraction(1)}
            d2[(s, a)] = {s: Fraction(1)}
    prio = {q: rng.choice([1, 3]) if not transient_even
            else rng.randint(0, 3) for q in transients}
    prio["W"] = 2
    prio["L"] = 1
    obj = ParityObjective(prio)
    return Memdp(states, actions, ("E1", "E2"), {"E1": d1, "E2": d2}, obj)


def random_dirac_pomdp(rng: random.Random, n_obs=3, max_per_obs=2, n_actions=2):
    """POMDP in which every (state, action) spreads mass over successors
    with pairwise distinct observations: point beliefs stay points."""
    classes = {}
    states = []
    for o in range(n_obs):
        size = rng.randint(1, max_per_obs)
        members = tuple(f"o{o}s{i}" for i in range(size))
        classes[f"o{o}"] = members
        states.extend(members)
    states = tuple(states)
    observations = tuple(classes)
    obs_map = {q: o for o, members in classes.items() for q in members}
    actions = tuple(f"a{i}" for i in range(n_actions))
    delta = {}
    for q in states:
        for a in actions:
            chosen_obs = rng.sample(list(observations), rng.randint(1, n_obs))
            succs = [rng.choice(classes[o]) for o in chosen_obs]
            weights = random_distribution(rng, range(len(succs)),
                                          max_denominator=8,
                                          max_support=len(succs))
            row = {}
            for idx, w in weights.items():
                row[succs[idx]] = row.get(succs[idx], Fraction(0)) + w
            delta[(q, a)] = row
    # observation-compatible priorities: one per class
    per_obs = {o: rng.randint(0, 3) for o in observations}
    prio = ParityObjective({q: per_obs[obs_map[q]] for q in states})
    return PomdpModel(states, actions, observations, delta, obs_map, prio)


def break_dirac(rng: random.Random, pomdp: PomdpModel) -> PomdpModel:
    """Make one (state, action) split mass across two states that share an
    observation; the result is not Dirac-preserving."""
    classes = {}
    for q in pomdp.states:
        classes.setdefault(pomdp.obs_map[q], []).append(q)
    wide = [o for o, members in classes.items() if len(members) >= 2]
    assert wide, "need an observation class with two states"
    o = rng.choice(wide)
    q1, q2 = classes[o][0], classes[o][1]
    q = rng.choice(pomdp.states)
    a = rng.choice(pomdp.actions)
    delta = dict(pomdp.delta)
    delta[(q, a)] = {q1: Fraction(1, 2), q2: Fraction(1, 2)}
    return PomdpModel(pomdp.states, pomdp.actions, pomdp.observations, delta,
                      pomdp.obs_map, pomdp.priority)


@pytest.fixture(scope="session")
def card():
    return card_game()


@pytest.fixture(scope="session")
def card_asym():
    return card_game(Fraction(1), Fraction(3, 5), Fraction(1, 4))


@pytest.fixture(scope="session")
def card_draw():
    return card_game(Fraction(0))
