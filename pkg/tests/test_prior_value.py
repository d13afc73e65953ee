import random
from fractions import Fraction

import pytest

from memdp_solve.belief import Belief, diff, truncate
from memdp_solve.mdp_parity import parity_value
from memdp_solve.model import Memdp, ModelError, ParityObjective
from memdp_solve.prior_value import (PriorSolver, compute_constants,
                                     gap_decide, mdp_from_memdp, prior_value,
                                     support_triples)

from conftest import card_game, random_sink_memdp
from oracles import constants_reference, finite_horizon_dp


def identical_env_model():
    base = card_game().delta["E1"]
    c = card_game()
    return Memdp(c.states, c.actions, ("E1", "E2"),
                 {"E1": base, "E2": base}, c.priority)


def test_constants_identical_envs_conventions():
    m = identical_env_model()
    c = compute_constants(m, Fraction(1, 8))
    assert c.ratio_min == c.ratio_max == 1
    assert c.ratio_min_gt1 == 1
    assert c.iota.is_exact() and c.iota.lo == 0
    assert c.eta.is_exact() and c.eta.lo == 0
    assert c.n3 == 0
    assert c.m == len(m.environments) * c.n1


def test_constants_invariants(card):
    c = compute_constants(card, Fraction(1, 8))
    assert c.ratio_min <= 1 <= c.ratio_max
    assert c.ratio_min_gt1 >= 1
    assert c.p_min > 0
    assert 0 <= c.iota.lo and c.iota.hi <= 1
    assert c.eta.hi < 0
    assert c.m == 2 * (c.n1 + c.n3)


def test_constants_monotone_in_eps(card):
    eps = Fraction(1, 4)
    prev = None
    for _ in range(6):
        m = compute_constants(card, eps).m
        if prev is not None:
            assert m >= prev  # halving eps never decreases m
        prev = m
        eps /= 2


def test_constants_match_straight_line_reference(card, card_asym):
    rng = random.Random(77)
    models = [card, card_asym, identical_env_model()]
    models += [random_sink_memdp(rng) for _ in range(5)]
    for model in models:
        for eps in (Fraction(1, 8), Fraction(1, 100)):
            got = compute_constants(model, eps)
            ref = constants_reference(model, eps)
            assert got.ratio_min == ref["ratio_min"]
            assert got.ratio_max == ref["ratio_max"]
            assert got.ratio_min_gt1 == ref["ratio_min_gt1"]
            assert got.p_min == ref["p_min"]
            assert (got.n1, got.n2, got.n3, got.m) == \
                (ref["n1"], ref["n2"], ref["n3"], ref["m"])


def test_constants_rejects_bad_eps(card):
    with pytest.raises(ModelError):
        compute_constants(card, Fraction(2))


def test_mdp_from_memdp_extremes(card):
    b = Belief.uniform(card.environments)
    triples = support_triples(card, b)
    ones = {t: Fraction(1) for t in triples}
    aug = mdp_from_memdp(card, card.priority, b, ones)
    for (q, a) in [("D", "draw"), ("G", "g1")]:
        assert aug.mdp.row(q, a) == {aug.q_win: Fraction(1)}
    zeros = {t: Fraction(0) for t in triples}
    aug0 = mdp_from_memdp(card, card.priority, b, zeros)
    assert aug0.mdp.row("D", "draw") == {aug0.q_lose: Fraction(1)}
    assert aug0.objective.of(aug0.q_win) == 0
    assert aug0.objective.of(aug0.q_lose) == 1


def test_mdp_from_memdp_mixture_weight(card):
    b = Belief.uniform(card.environments)
    v = {t: Fraction(0) for t in support_triples(card, b)}
    v[("D", "draw", "C1")] = Fraction(1, 3)
    v[("D", "draw", "C2")] = Fraction(2, 3)
    aug = mdp_from_memdp(card, card.priority, b, v)
    # w = p(C1)*1/3 + p(C2)*2/3 with p(C1) = p(C2) = 1/2 at the uniform prior
    assert aug.mdp.row("D", "draw")[aug.q_win] == Fraction(1, 2)
    # non-distinguishing rows are untouched
    assert aug.mdp.row("C1", "guess") == card.row("E1", "C1", "guess")


def test_mdp_from_memdp_missing_entry(card):
    b = Belief.uniform(card.environments)
    with pytest.raises(ModelError, match="missing"):
        mdp_from_memdp(card, card.priority, b, {})


def test_prior_value_card_golden(card):
    res = prior_value(card, card.priority, Belief.uniform(card.environments),
                      Fraction(1, 100))
    assert abs(res.values["D"] - Fraction(2, 3)) <= Fraction(1, 100)
    assert res.accuracy == Fraction(1, 100)


def test_prior_value_dirac_base_case_exact(card):
    for e in card.environments:
        res = prior_value(card, card.priority,
                          Belief.dirac(e, card.environments), Fraction(1, 16))
        assert res.values == parity_value(card.slice(e), card.priority).values
        assert res.accuracy == 0


def test_prior_value_rejects_bad_inputs(card):
    with pytest.raises(ModelError):
        prior_value(card, card.priority, Belief.uniform(card.environments),
                    Fraction(3, 2))
    with pytest.raises(ModelError):
        prior_value(card, card.priority, Belief.uniform(("X", "Y")),
                    Fraction(1, 4))
    with pytest.raises(ModelError):
        prior_value(card, card.priority, Belief.uniform(card.environments),
                    Fraction(1, 4), states=("nope",))


def test_prior_value_matches_dp_oracle_synthetic():
    """3-state model with one distinguishing pair into revealed sinks."""
    rng = random.Random(306)
    model = random_sink_memdp(rng, n_transient=1)
    obj = model.priority
    gamma = Fraction(1, 16)
    b = Belief.from_dict({"E1": Fraction(1, 3), "E2": Fraction(2, 3)},
                         domain=model.environments)
    res = prior_value(model, obj, b, gamma)
    lo, hi = finite_horizon_dp(model, obj, b, gamma / 4)
    for q in model.states:
        assert lo[q] - gamma <= res.values[q] <= hi[q] + gamma


def test_prior_value_depth_override_reports_residual(card):
    b = Belief.uniform(card.environments)
    res = prior_value(card, card.priority, b, Fraction(1, 100),
                      depth_override=5)
    assert res.accuracy is None
    assert res.residual is not None
    # this model settles immediately: the bracket collapses
    assert res.residual <= Fraction(1, 100)
    assert abs(res.values["D"] - Fraction(2, 3)) <= Fraction(1, 50)


def test_prior_value_depth_zero_truncates(card):
    b = Belief.from_dict({"E1": Fraction(1, 3), "E2": Fraction(2, 3)},
                         domain=card.environments)
    res = prior_value(card, card.priority, b, Fraction(1, 16),
                      depth_override=0)
    # immediate truncation onto the heavier environment
    expected = parity_value(card.slice("E2"), card.priority).values
    assert res.values == expected


def test_prior_value_deterministic(card):
    b = Belief.from_dict({"E1": Fraction(2, 5), "E2": Fraction(3, 5)},
                         domain=card.environments)
    r1 = prior_value(card, card.priority, b, Fraction(1, 64))
    r2 = prior_value(card, card.priority, b, Fraction(1, 64))
    assert r1.values == r2.values


def test_prior_value_mixture_bounds(card):
    gamma = Fraction(1, 64)
    solver = PriorSolver(card, card.priority, gamma)
    best_env = max(parity_value(card.slice(e), card.priority).values["D"]
                   for e in card.environments)
    for num in range(1, 8):
        b = Belief.from_dict({"E1": Fraction(num, 8), "E2": 1 - Fraction(num, 8)},
                             domain=card.environments)
        v = solver.values(b, ("D",)).values["D"]
        assert v <= best_env + gamma


def test_prior_value_lipschitz_sampled(card):
    gamma = Fraction(1, 64)
    solver = PriorSolver(card, card.priority, gamma)
    rng = random.Random(8)
    for _ in range(15):
        x, y = Fraction(rng.randint(0, 16), 16), Fraction(rng.randint(0, 16), 16)
        b1 = Belief.from_dict({"E1": x, "E2": 1 - x}, domain=card.environments)
        b2 = Belief.from_dict({"E1": y, "E2": 1 - y}, domain=card.environments)
        v1 = solver.values(b1, ("D",)).values["D"]
        v2 = solver.values(b2, ("D",)).values["D"]
        assert abs(v1 - v2) <= diff(b1, b2) + 2 * gamma


def test_prior_value_truncation_threshold_path(card):
    # a belief below the truncation threshold collapses to the major slice
    gamma = Fraction(1, 16)
    solver = PriorSolver(card, card.priority, gamma)
    tiny = solver.tau / 2
    b = Belief.from_dict({"E1": tiny, "E2": 1 - tiny},
                         domain=card.environments)
    res = solver.values(b)
    assert res.values == parity_value(card.slice("E2"), card.priority).values


def test_solver_iteration_bound(card):
    solver = PriorSolver(card, card.priority, Fraction(1, 100))
    solver.values(Belief.uniform(card.environments))
    assert solver.last_iterations <= solver.budget + 1


def test_gap_decide(card):
    b = Belief.uniform(card.environments)
    assert gap_decide(card, card.priority, b, Fraction(1, 2), Fraction(1, 10),
                      state="D") == "YES"
    assert gap_decide(card, card.priority, b, Fraction(9, 10), Fraction(1, 10),
                      state="D") == "NO"
    # inside the promise gap: any definite answer is acceptable
    answer = gap_decide(card, card.priority, b, Fraction(67, 100),
                        Fraction(1, 50), state="D")
    assert answer in ("YES", "NO")
    with pytest.raises(ModelError):
        gap_decide(card, card.priority, b, Fraction(0), Fraction(1, 10))
