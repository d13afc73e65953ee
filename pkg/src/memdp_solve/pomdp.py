"""POMDP bridge: beliefs over states, entropy, the point-mass-preservation
check, the product embedding of a multi-environment MDP, and the reverse
reduction of a point-mass-preserving POMDP to a multi-environment MDP.

A POMDP is "Dirac-preserving" when every one-step posterior of a point
(Dirac) belief is again a point belief; this is equivalent to the belief
entropy being non-increasing, and it is the structural property that makes
the reduction to a multi-environment MDP possible.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Optional

from .belief import Belief
from .dyadic import Interval, entropy_bounds
from .model import Memdp, ModelError, ParityObjective, PomdpModel

StateBelief = Belief  # beliefs over POMDP states reuse the same arithmetic

BOT = "!"  # dead-branch marker inside tuple-state names


def pomdp_successor(b: StateBelief, a: str, model: PomdpModel) -> dict:
    """Map each observation compatible with (b, a) to its probability and
    the posterior state belief (supported inside that observation class)."""
    if any(x not in model.states for x in b.domain):
        raise ModelError("belief domain contains unknown states")
    raw = {}
    for q_prev, w in b.weights:
        if w == 0:
            continue
        for q, p in model.row(q_prev, a).items():
            raw[q] = raw.get(q, Fraction(0)) + w * p
    by_obs = {}
    for q, mass in raw.items():
        by_obs.setdefault(model.obs(q), {})[q] = mass
    out = {}
    for o in sorted(by_obs):
        masses = by_obs[o]
        p_o = sum(masses.values())
        posterior = Belief.from_dict({q: m / p_o for q, m in masses.items()},
                                     domain=model.states)
        out[o] = (p_o, posterior)
    return out


def entropy(b: Belief, precision: int = 30) -> Interval:
    """Base-2 entropy of a belief as a certified dyadic enclosure of width
    at most 2**-precision (0 * log 0 = 0)."""
    return entropy_bounds((w for _, w in b.weights), precision)


class DiracCheck(NamedTuple):
    ok: bool
    witness: Optional[tuple]  # (state, action, observation) on failure


def is_dirac_preserving(model: PomdpModel) -> DiracCheck:
    """True iff every point belief stays a point belief after one step;
    equivalently, iff the expected belief entropy never increases."""
    for q in model.states:
        for a in model.actions:
            seen = {}
            for q2 in model.row(q, a):
                o = model.obs(q2)
                if o in seen and seen[o] != q2:
                    return DiracCheck(False, (q, a, o))
                seen[o] = q2
    return DiracCheck(True, None)


def is_observation_compatible(model: PomdpModel, obj: ParityObjective) -> bool:
    """True iff the priority labeling factors through the observation map."""
    obj.check_total(model.states)
    by_obs = {}
    for q in model.states:
        o = model.obs(q)
        p = obj.of(q)
        if o in by_obs and by_obs[o] != p:
            return False
        by_obs[o] = p
    return True


def product_state(q: str, e: str) -> str:
    return f"{q}|{e}"


def memdp_to_pomdp(model: Memdp):
    """Product POMDP over (state, environment) pairs; the observation is the
    underlying state. Returns the POMDP and the (state, env) -> name map."""
    name = {}
    states = []
    for q in model.states:
        for e in model.environments:
            s = product_state(q, e)
            name[(q, e)] = s
            states.append(s)
    delta = {}
    for q in model.states:
        for e in model.environments:
            for a in model.actions:
                delta[(name[(q, e)], a)] = {
                    name[(q2, e)]: p for q2, p in model.row(e, q, a).items()}
    obs_map = {name[(q, e)]: q for q in model.states for e in model.environments}
    priority = None
    if model.priority is not None:
        priority = ParityObjective({name[(q, e)]: model.priority.of(q)
                                    for q in model.states for e in model.environments})
    pomdp = PomdpModel(tuple(states), model.actions, model.states, delta,
                       obs_map, priority)
    return pomdp, name


@dataclass
class ReducedMemdp:
    memdp: Memdp
    belief: Belief
    objective: ParityObjective
    initial_state: str
    tuple_states: dict  # name -> tuple of source-indexed entries (BOT = dead)


def _tuple_name(entries) -> str:
    return "<" + ";".join(entries) + ">"


def memdp_from_pomdp(model: PomdpModel, b: StateBelief,
                     obj: ParityObjective) -> ReducedMemdp:
    """Reduce a Dirac-preserving POMDP to a multi-environment MDP.

    The environments are the support states of the initial belief; a model
    state is a tuple that tracks, per environment, where that environment's
    copy of the play currently is (or a dead marker once the observed
    history has become impossible for it). Dead branches loop forever on the
    all-dead tuple, which carries odd priority. Only tuples reachable from
    the initial tuple are materialized.
    """
    check = is_dirac_preserving(model)
    if not check.ok:
        raise ModelError(f"POMDP is not Dirac-preserving: no unique successor "
                         f"for (state, action, observation) = {check.witness}")
    if not is_observation_compatible(model, obj):
        raise ModelError("parity objective is not observation-compatible")
    sources = tuple(sorted(b.support()))
    obs0 = {model.obs(s) for s in sources}
    if len(obs0) != 1:
        raise ModelError("initial belief support must share one observation")

    # successor state of q under (a, o), unique by Dirac preservation
    def succ(q, a, o):
        for q2 in model.row(q, a):
            if model.obs(q2) == o:
                return q2
        return None

    def obs_of(entries):
        for idx, q in enumerate(entries):
            if q != BOT:
                return model.obs(q), idx
        return None, None

    bot_tuple = tuple(BOT for _ in sources)
    init = tuple(sources)
    tuples = {init: _tuple_name(init)}
    order = [init]
    delta = {s: {} for s in sources}
    frontier = [init]
    while frontier:
        t = frontier.pop(0)
        name = tuples[t]
        o_t, _ = obs_of(t)
        assert t == bot_tuple or all(
            q == BOT or model.obs(q) == o_t for q in t), "observation coherence"
        for a in model.actions:
            for i, s in enumerate(sources):
                if t[i] == BOT:
                    row = {_tuple_name(bot_tuple): Fraction(1)}
                    if bot_tuple not in tuples:
                        tuples[bot_tuple] = _tuple_name(bot_tuple)
                        order.append(bot_tuple)
                        frontier.append(bot_tuple)
                    delta[s][(name, a)] = row
                    continue
                row = {}
                for q2, p in model.row(t[i], a).items():
                    o = model.obs(q2)
                    nxt = tuple(
                        (succ(t[j], a, o) or BOT) if t[j] != BOT else BOT
                        for j in range(len(sources)))
                    if nxt not in tuples:
                        tuples[nxt] = _tuple_name(nxt)
                        order.append(nxt)
                        frontier.append(nxt)
                    key = tuples[nxt]
                    row[key] = row.get(key, Fraction(0)) + p
                delta[s][(name, a)] = row

    names = tuple(tuples[t] for t in order)
    priorities = {}
    for t in order:
        if t == bot_tuple:
            priorities[tuples[t]] = 1
        else:
            o_t, idx = obs_of(t)
            priorities[tuples[t]] = obj.of(t[idx])
    objective = ParityObjective(priorities)

    env_belief = Belief(tuple((s, b.get(s)) for s in sources))
    memdp = Memdp(names, model.actions, sources,
                  {s: delta[s] for s in sources}, objective)
    return ReducedMemdp(memdp, env_belief, objective, tuples[init],
                        {tuples[t]: t for t in order})
