"""Monte-Carlo simulation, run statistics, and brute-force oracles.

Randomness comes from the counter-based Philox generator (numpy), keyed as
key = seed * 2**64 + run_index, so batches are reproducible run by run and
trivially shardable. Successor sampling draws an integer below the row's
common denominator and walks the cumulative numerators, so the sampled
measure is exactly the model's rational one.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .belief import Belief, update
from .mdp_parity import ValueTable, solve_linear, _sccs
from .model import Mdp, Memdp, ModelError, ParityObjective, Run, parse_prob, prob_str
from .prior_value import SolverGuard


# ---------------------------------------------------------------------------
# strategies


class Strategy:
    needs_belief = False

    def initial_memory(self):
        return None

    def act(self, memory, state, belief, rng) -> str:
        raise NotImplementedError

    def advance(self, memory, action, next_state):
        return memory


@dataclass(frozen=True)
class MemorylessStrategy(Strategy):
    actions: dict  # state -> action

    def act(self, memory, state, belief, rng):
        return self.actions[state]


@dataclass(frozen=True)
class TabularStrategy(Strategy):
    """Finite-memory strategy: per (memory, state) an action distribution,
    deterministic memory update on (action, next state)."""

    memories: tuple
    initial: str
    action_dist: dict  # (memory, state) -> {action: Fraction}
    update: dict  # (memory, action, next_state) -> memory

    def initial_memory(self):
        return self.initial

    def act(self, memory, state, belief, rng):
        return _sample_row(self.action_dist[(memory, state)], rng)

    def advance(self, memory, action, next_state):
        return self.update.get((memory, action, next_state), memory)


@dataclass(frozen=True)
class BeliefRule:
    env: str
    actions: dict  # state -> action
    lo: Optional[Fraction] = None
    hi: Optional[Fraction] = None

    def matches(self, belief) -> bool:
        w = belief.get(self.env)
        if self.lo is not None and w < self.lo:
            return False
        if self.hi is not None and w > self.hi:
            return False
        return True


@dataclass(frozen=True)
class BeliefThresholdStrategy(Strategy):
    """First matching rule on the current environment belief wins."""

    rules: tuple
    default: dict  # state -> action
    needs_belief = True

    def act(self, memory, state, belief, rng):
        for rule in self.rules:
            if rule.matches(belief):
                return rule.actions.get(state, self.default[state])
        return self.default[state]


def strategy_from_json(text: str) -> Strategy:
    doc = json.loads(text)
    mode = doc.get("mode")
    if mode == "memoryless":
        return MemorylessStrategy(dict(doc["actions"]))
    if mode == "finite-memory":
        dist = {(m, q): {a: parse_prob(p) for a, p in row.items()}
                for m, per_state in doc["actions"].items()
                for q, row in per_state.items()}
        upd = {(m, a, q2): m2
               for m, per_a in doc.get("update", {}).items()
               for a, per_q in per_a.items()
               for q2, m2 in per_q.items()}
        return TabularStrategy(tuple(doc["memories"]), doc["initial"], dist, upd)
    if mode == "belief-threshold":
        rules = tuple(
            BeliefRule(r["env"], dict(r.get("actions", {})),
                       Fraction(r["min"]) if "min" in r else None,
                       Fraction(r["max"]) if "max" in r else None)
            for r in doc.get("rules", []))
        return BeliefThresholdStrategy(rules, dict(doc["default"]))
    raise ModelError(f"unknown strategy mode {mode!r}")


# ---------------------------------------------------------------------------
# sampling


def _generator(seed: int, run_index: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=(seed << 64) + run_index))


_row_cache = {}  # id(row) -> (row, labels, cumulative numerators, denominator)


def _row_sampler(row: dict):
    key = id(row)
    got = _row_cache.get(key)
    if got is None or got[0] is not row:
        items = sorted(row.items())
        den = 1
        for _, p in items:
            den = den * p.denominator // math.gcd(den, p.denominator)
        labels, cum, acc = [], [], 0
        for x, p in items:
            acc += p.numerator * (den // p.denominator)
            labels.append(x)
            cum.append(acc)
        got = (row, labels, cum, den)
        _row_cache[key] = got
    return got


def _sample_row(row: dict, rng) -> str:
    _, labels, cum, den = _row_sampler(row)
    if den == 1:
        return labels[0]
    draw = int(rng.integers(0, den))
    for x, acc in zip(labels, cum):
        if draw < acc:
            return x
    raise AssertionError("row does not sum to 1")


def sample_run(model: Memdp, env: str, strategy: Strategy, start: str,
               horizon: int, seed: int, run_index: int = 0,
               prior: Optional[Belief] = None) -> Run:
    """A run of exactly `horizon` steps under the strategy in environment
    `env`, reproducible from (seed, run_index)."""
    if horizon < 0:
        raise ModelError("horizon must be nonnegative")
    if env not in model.environments:
        raise ModelError(f"unknown environment {env!r}")
    if start not in model.states:
        raise ModelError(f"unknown state {start!r}")
    rng = _generator(seed, run_index)
    _, info = _trace_info(model)
    belief = prior
    if strategy.needs_belief and belief is None:
        belief = Belief.uniform(model.environments)
    memory = strategy.initial_memory()
    state = start
    steps = []
    for _ in range(horizon):
        action = strategy.act(memory, state, belief, rng)
        if action not in model.actions:
            raise ModelError(f"strategy chose unknown action {action!r}")
        nxt = _sample_row(model.row(env, state, action), rng)
        steps.append((action, nxt))
        if belief is not None and info[(state, action)][0]:
            belief, _ = update(belief, state, action, nxt, model)
            assert belief.get(env) > 0, "operating environment belief hit zero"
        memory = strategy.advance(memory, action, nxt)
        state = nxt
    return Run(start, tuple(steps))


# ---------------------------------------------------------------------------
# parity estimation


@dataclass
class ParityEstimate:
    estimate: Fraction
    stderr: float
    runs: int
    absorbed: int
    bias_bound: Fraction  # fraction of runs scored by the horizon fallback

    def as_dict(self):
        return {"estimate": prob_str(self.estimate),
                "estimate_decimal": float(self.estimate),
                "stderr": self.stderr,
                "runs": self.runs,
                "absorbed": self.absorbed,
                "bias_bound": prob_str(self.bias_bound)}


def absorbing_states(model: Memdp, env: str) -> set:
    out = set()
    for q in model.states:
        if all(model.row(env, q, a) == {q: Fraction(1)} for a in model.actions):
            out.add(q)
    return out


def mc_parity_estimate(model: Memdp, env: str, strategy: Strategy, start: str,
                       runs: int, horizon: int, seed: int,
                       obj: Optional[ParityObjective] = None,
                       prior: Optional[Belief] = None) -> ParityEstimate:
    """Monte-Carlo estimate of the parity-objective probability.

    Runs that reach an absorbing state are scored by that state's priority;
    runs cut off at the horizon are scored by the top priority over their
    second half, and their fraction is reported as the bias bound.
    """
    if runs < 1:
        raise ModelError("runs must be at least 1")
    obj = obj or model.priority
    if obj is None:
        raise ModelError("a parity objective is required")
    absorbing = absorbing_states(model, env)
    _, info = _trace_info(model)
    wins = 0
    absorbed = 0
    for i in range(runs):
        rng = _generator(seed, i)
        belief = prior
        if strategy.needs_belief and belief is None:
            belief = Belief.uniform(model.environments)
        memory = strategy.initial_memory()
        state = start
        visited = [start]
        done = False
        for _ in range(horizon):
            if state in absorbing:
                absorbed += 1
                if obj.of(state) % 2 == 0:
                    wins += 1
                done = True
                break
            action = strategy.act(memory, state, belief, rng)
            nxt = _sample_row(model.row(env, state, action), rng)
            if belief is not None and info[(state, action)][0]:
                belief, _ = update(belief, state, action, nxt, model)
                assert belief.get(env) > 0, "operating environment belief hit zero"
            memory = strategy.advance(memory, action, nxt)
            state = nxt
            visited.append(state)
        if not done:
            tail = visited[len(visited) // 2:]
            if max(obj.of(q) for q in tail) % 2 == 0:
                wins += 1
    p = Fraction(wins, runs)
    stderr = math.sqrt(float(p) * (1 - float(p)) / runs)
    return ParityEstimate(p, stderr, runs, absorbed, Fraction(runs - absorbed, runs))


# ---------------------------------------------------------------------------
# run statistics


@dataclass
class TraceStats:
    """Counters that drive the belief-concentration checks.

    ratio_product[(e2, e)] is the exact product of per-step likelihood
    ratios delta_e2/delta_e over distinguishing, non-(e2/e)-revealing steps
    with delta_e > 0; log_ratio_sum is its base-2 logarithm (display only).
    """

    nb_dstg: int
    nb_rev: dict  # (e_from, e_to) -> int
    min_belief: dict  # env -> Fraction
    ratio_product: dict  # (e2, e) -> Fraction
    log_ratio_sum: dict = field(default_factory=dict)  # (e2, e) -> float

    def never_small(self, eps) -> bool:
        eps = Fraction(eps)
        return all(w > eps for w in self.min_belief.values())


_trace_cache = {}  # id(model) -> (model, per-(q, a) step info)

_SAME, _REVEALING, _RATIOS = 0, 1, 2


def _trace_info(model: Memdp):
    """Per (state, action): distinguishing flag and, per ordered environment
    pair, either sameness, a revealing marker, or per-successor ratios."""
    got = _trace_cache.get(id(model))
    if got is not None and got[0] is model:
        return got[1]
    envs = model.environments
    pairs = [(e2, e) for e2 in envs for e in envs if e2 != e]
    info = {}
    for q in model.states:
        for a in model.actions:
            rows = {e: model.row(e, q, a) for e in envs}
            per_pair = []
            dstg = False
            for (e2, e) in pairs:
                if rows[e2] == rows[e]:
                    per_pair.append((_SAME, None))
                    continue
                dstg = True
                if any(q2 not in rows[e2] for q2 in rows[e]):
                    per_pair.append((_REVEALING, None))
                else:
                    zero = Fraction(0)
                    ratios = {q2: rows[e2].get(q2, zero) / p
                              for q2, p in rows[e].items()}
                    per_pair.append((_RATIOS, ratios))
            info[(q, a)] = (dstg, per_pair)
    _trace_cache[id(model)] = (model, (pairs, info))
    return pairs, info


def belief_trace_stats(run: Run, b: Belief, model: Memdp) -> TraceStats:
    pairs, info = _trace_info(model)
    nb_dstg = 0
    nb_rev = {p: 0 for p in pairs}
    ratio_product = {p: Fraction(1) for p in pairs}
    belief = b
    min_belief = {e: b.get(e) for e in b.domain}
    state = run.start
    for a, q_next in run.steps:
        dstg, per_pair = info[(state, a)]
        if dstg:
            nb_dstg += 1
            for pair, (kind, ratios) in zip(pairs, per_pair):
                if kind == _REVEALING:
                    nb_rev[pair] += 1
                elif kind == _RATIOS and q_next in ratios:
                    ratio_product[pair] *= ratios[q_next]
            belief, _ = update(belief, state, a, q_next, model)
            for e, w in belief.weights:
                if w < min_belief[e]:
                    min_belief[e] = w
        state = q_next
    logs = {p: (math.log2(float(r)) if r > 0 else float("-inf"))
            for p, r in ratio_product.items()}
    return TraceStats(nb_dstg, nb_rev, min_belief, ratio_product, logs)


# ---------------------------------------------------------------------------
# brute-force oracle for small MDP parity instances


def _chain_parity_value(mdp: Mdp, obj: ParityObjective, policy: dict) -> dict:
    """Exact parity value of the Markov chain induced by a memoryless policy.

    Independent of the solver pipeline: recurrent classes come from a plain
    SCC pass over chain edges; classes whose top priority is even are
    winning, and absorption into them is solved as an exact linear system.
    """
    succ = {q: sorted(mdp.row(q, policy[q])) for q in mdp.states}
    comps = _sccs(sorted(mdp.states), lambda q: succ[q])
    comp_of = {}
    for i, comp in enumerate(comps):
        for q in comp:
            comp_of[q] = i
    recurrent_win = set()
    recurrent = set()
    for comp in comps:
        closed = all(comp_of[q2] == comp_of[next(iter(comp))]
                     for q in comp for q2 in succ[q])
        if closed:
            recurrent |= comp
            if max(obj.of(q) for q in comp) % 2 == 0:
                recurrent_win |= comp

    values = {}
    for q in mdp.states:
        if q in recurrent:
            values[q] = Fraction(1 if q in recurrent_win else 0)
    # states that can reach a winning class
    can = set(recurrent_win)
    changed = True
    while changed:
        changed = False
        for q in mdp.states:
            if q not in can and any(q2 in can for q2 in succ[q]):
                can.add(q)
                changed = True
    transient = sorted(q for q in mdp.states if q not in recurrent)
    live = [q for q in transient if q in can]
    for q in transient:
        if q not in can:
            values[q] = Fraction(0)
    if live:
        idx = {q: i for i, q in enumerate(live)}
        n = len(live)
        a_mat = [[Fraction(0)] * n for _ in range(n)]
        b_vec = [Fraction(0)] * n
        for q in live:
            i = idx[q]
            a_mat[i][i] += 1
            for q2, p in mdp.row(q, policy[q]).items():
                if q2 in idx:
                    a_mat[i][idx[q2]] -= p
                else:
                    b_vec[i] += p * values[q2]
        for q, v in zip(live, solve_linear(a_mat, b_vec)):
            values[q] = v
    return values


def exact_memoryless_parity_oracle(mdp: Mdp, obj: ParityObjective,
                                   guard: int = 10 ** 6) -> ValueTable:
    """Max over all pure memoryless strategies of the induced chain's parity
    probability. Valid as an oracle because memoryless strategies suffice
    for MDP parity; guarded against oversized enumerations."""
    obj.check_total(mdp.states)
    n_strategies = len(mdp.actions) ** len(mdp.states)
    if n_strategies > guard:
        raise SolverGuard(
            f"{n_strategies} memoryless strategies exceed the oracle guard {guard}")
    best = {q: Fraction(0) for q in mdp.states}
    import itertools
    for combo in itertools.product(mdp.actions, repeat=len(mdp.states)):
        policy = dict(zip(mdp.states, combo))
        vals = _chain_parity_value(mdp, obj, policy)
        for q in mdp.states:
            assert 0 <= vals[q] <= 1
            if vals[q] > best[q]:
                best[q] = vals[q]
    return ValueTable(best, Fraction(0))
