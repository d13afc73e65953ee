"""Environment-averaged parity values under a prior belief, and the gap decision.

The averaged value is approximated by a recursion over beliefs: a Dirac
belief reduces to a single-MDP parity solve; a belief with a tiny positive
weight is truncated onto a smaller support (costing at most the dropped
weight in value); otherwise every distinguishing transition spawns a
posterior child whose grid-rounded value becomes the success weight of a
two-sink MDP, which an exact parity solve then finishes. A budget counter
bounds how many distinguishing steps may occur before truncation is forced;
with the derived budget m the result is within gamma of the true value.

The budget-indexed recursion is realized as synchronous value iteration
over the lazily explored graph of reachable beliefs. Child values are
floored to a fixed rational grid, so iterates live in a finite space; once
an iterate repeats exactly, the remaining (possibly astronomical) budget is
resolved by cycle arithmetic, reproducing the full recursion's output bit
for bit. Values are computed only for the belief/state pairs that can
influence the requested states.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .belief import Belief, successor_dist, truncate, update
from .dyadic import (Interval, ceil_hi, log2_bounds, log2_interval,
                     sqrt_bounds)
from .mdp_parity import Mdp, ValueTable, parity_value, reachability_value, winning_mec_union
from .model import Memdp, ModelError, ParityObjective, distinguishing_pairs


class SolverGuard(RuntimeError):
    """Raised when a resource guard trips instead of running unboundedly."""


# ---------------------------------------------------------------------------
# model constants governing the truncation budget


@dataclass(frozen=True)
class GammaConstants:
    """Model-derived quantities that size the distinguishing-step budget.

    ratio_min/ratio_max bound the per-step likelihood ratio between two
    environments (over transitions positive in both); ratio_min_gt1 is the
    smallest such ratio exceeding 1; p_min the smallest positive transition
    probability. iota and eta are certified dyadic enclosures (eta is the
    negative drift, in bits, of the log likelihood ratio per distinguishing
    non-revealing step). n1 bounds revealing steps, n3 drift steps, and
    m = |E| * (n1 + n3) is the total budget for accuracy eps.
    """

    ratio_min: Fraction
    ratio_max: Fraction
    ratio_min_gt1: Fraction
    p_min: Fraction
    iota: Interval
    eta: Interval
    n1: int
    n2: int
    n3: int
    m: int
    eps: Fraction
    log_bits: int


def _ratio_stats(model: Memdp):
    envs = model.environments
    ratio_min = ratio_max = gt1 = None
    p_min = None
    for q in model.states:
        for a in model.actions:
            rows = [model.row(e, q, a) for e in envs]
            for row in rows:
                for p in row.values():
                    if p_min is None or p < p_min:
                        p_min = p
            for i, row_e in enumerate(rows):
                for j, row_e2 in enumerate(rows):
                    if i == j:
                        continue
                    for q2, p in row_e.items():
                        p2 = row_e2.get(q2)
                        if not p2:
                            continue
                        r = p / p2
                        if ratio_min is None:
                            ratio_min = ratio_max = r
                        else:
                            ratio_min = min(ratio_min, r)
                            ratio_max = max(ratio_max, r)
                        if p > p2 and (gt1 is None or r < gt1):
                            gt1 = r
    one = Fraction(1)
    return (ratio_min or one, ratio_max or one, gt1 or one, p_min)


def _certified_negative_log2(x: Fraction, bits: int) -> Interval:
    """log2 enclosure with hi < 0, escalating precision as needed (x < 1)."""
    while True:
        iv = log2_bounds(x, bits)
        if iv.hi < 0:
            return iv
        bits *= 2
        if bits > 1 << 14:
            raise ArithmeticError(f"cannot certify log2({x}) < 0")


def compute_constants(model: Memdp, eps, log_bits: int = 64) -> GammaConstants:
    """Budget constants for accuracy eps, with outward-rounded ceilings."""
    eps = Fraction(eps)
    if not 0 < eps < 1:
        raise ModelError("eps must lie in (0, 1)")
    k = len(model.environments)
    ratio_min, ratio_max, gt1, p_min = _ratio_stats(model)
    if p_min is None:
        raise ModelError("model has an empty-support transition")
    bits = log_bits

    if gt1 == 1:
        iota = Interval.exact(0)
        eta = Interval.exact(0)
    else:
        root = sqrt_bounds(gt1, bits)
        raw = (root - Interval.exact(1)).square()
        iota = Interval(min(raw.lo, Fraction(1)), min(raw.hi, Fraction(1)))
        arg = Interval.exact(1) - Interval.exact(p_min) * iota
        b = bits
        while True:
            eta = log2_interval(arg, b)
            if eta.hi < 0:
                break
            b *= 2
            if b > 1 << 14:
                raise ArithmeticError("cannot certify eta < 0")

    if p_min == 1:
        n1 = 1  # every revealing step eliminates an environment outright
    else:
        num = _certified_negative_log2(eps / (2 * k), bits)
        den = _certified_negative_log2(1 - p_min, bits)
        n1 = ceil_hi(num / den)

    log_eps = log2_bounds(eps, bits)
    n2 = ceil_hi(2 * abs(log_eps) + Interval.exact(n1) * log2_bounds(ratio_max, bits))

    if eta.is_exact() and eta.lo == 0:
        n3 = 0
    else:
        a1 = abs(log2_bounds(eps / (2 * k), bits))
        spread = log2_bounds(ratio_max / ratio_min, bits).square()
        n3 = ceil_hi(2 * a1 * spread / eta.square() + Interval.exact(2 * n2) / abs(eta))

    m = k * (n1 + n3)
    return GammaConstants(ratio_min, ratio_max, gt1, p_min, iota, eta,
                          n1, n2, n3, m, eps, log_bits)


# ---------------------------------------------------------------------------
# the two-sink MDP built from a belief and child values


@dataclass(frozen=True)
class AugmentedMdp:
    mdp: Mdp
    objective: ParityObjective
    q_win: str
    q_lose: str


def _fresh_sinks(states):
    win, lose = "q_win", "q_lose"
    taken = set(states)
    while win in taken:
        win += "_"
    taken.add(win)
    while lose in taken:
        lose += "_"
    return win, lose


def support_triples(model: Memdp, b: Belief):
    """All (q, a, q') with (q, a) distinguishing and q' possible under b."""
    out = []
    for (q, a) in sorted(distinguishing_pairs(model)):
        for q2 in sorted(successor_dist(b, q, a, model)):
            out.append((q, a, q2))
    return out


def mdp_from_memdp(model: Memdp, obj: ParityObjective, b: Belief, v) -> AugmentedMdp:
    """Collapse distinguishing transitions into win/lose sinks weighted by
    the continuation values v[(q, a, q')]."""
    obj.check_total(model.states)
    triples = support_triples(model, b)
    missing = [t for t in triples if t not in v]
    if missing:
        raise ModelError(f"continuation value missing for {missing[0]}")
    for t in triples:
        val = Fraction(v[t])
        if val < 0 or val > 1:
            raise ModelError(f"continuation value for {t} outside [0, 1]")
    win, lose = _fresh_sinks(model.states)
    dstg = set(distinguishing_pairs(model))
    env0 = model.environments[0]
    rows = {}
    for q in model.states:
        for a in model.actions:
            if (q, a) in dstg:
                p_row = successor_dist(b, q, a, model)
                w = sum(p * Fraction(v[(q, a, q2)]) for q2, p in p_row.items())
                row = {}
                if w > 0:
                    row[win] = w
                if w < 1:
                    row[lose] = 1 - w
                rows[(q, a)] = row
            else:
                rows[(q, a)] = model.row(env0, q, a)
    for a in model.actions:
        rows[(win, a)] = {win: Fraction(1)}
        rows[(lose, a)] = {lose: Fraction(1)}
    states = model.states + (win, lose)
    priorities = {q: obj.of(q) for q in model.states}
    priorities[win] = 0
    priorities[lose] = 1
    aug_obj = ParityObjective(priorities)
    return AugmentedMdp(Mdp(states, model.actions, rows, aug_obj), aug_obj, win, lose)


# ---------------------------------------------------------------------------
# the solver


@dataclass
class PriorValueResult:
    values: dict  # state -> Fraction
    accuracy: Optional[Fraction]  # guaranteed bound; None when forfeited
    residual: Optional[Fraction]  # seeding-bracket width in capped mode
    gamma: Fraction
    iterations: int
    belief_nodes: int

    def __getitem__(self, q):
        return self.values[q]


class _Node:
    __slots__ = ("belief", "need", "reach", "children", "target", "policy",
                 "sorted_need", "need_index")

    def __init__(self, belief):
        self.belief = belief
        self.need = set()
        self.reach = ()
        self.children = {}
        self.target = None
        self.policy = None
        self.sorted_need = ()
        self.need_index = {}


class PriorSolver:
    """Shared-state solver: reuse one instance across beliefs to share the
    boundary-value memo (Dirac slices, truncated supports)."""

    def __init__(self, model: Memdp, obj: ParityObjective, gamma, *,
                 depth_override: Optional[int] = None,
                 node_budget: int = 20000,
                 iteration_budget: int = 20000):
        gamma = Fraction(gamma)
        if not 0 < gamma < 1:
            raise ModelError("gamma must lie in (0, 1)")
        if obj is None:
            raise ModelError("a parity objective is required")
        obj.check_total(model.states)
        if depth_override is not None and depth_override < 0:
            raise ModelError("depth override must be nonnegative")
        self.model = model
        self.obj = obj
        self.gamma = gamma
        self.k = len(model.environments)
        self.tau = gamma / (3 * self.k)
        self.constants = compute_constants(model, self.tau)
        self.override = depth_override is not None
        self.budget = depth_override if self.override else self.constants.m
        self.step = self.tau / self.constants.m
        self.node_budget = node_budget
        self.iteration_budget = iteration_budget
        self._dstg = sorted(distinguishing_pairs(model))
        self._dstg_set = set(self._dstg)
        self._env0 = model.environments[0]
        self._win, self._lose = _fresh_sinks(model.states)
        self._slice_memo = {}
        self._full_memo = {}
        self.last_iterations = 0
        self.total_belief_nodes = 0

    # -- public ------------------------------------------------------------

    def values(self, belief: Belief, states=None) -> PriorValueResult:
        if belief.domain != tuple(self.model.environments):
            raise ModelError("belief domain does not match the model's environments")
        need = tuple(states) if states is not None else self.model.states
        unknown = [q for q in need if q not in self.model.states]
        if unknown:
            raise ModelError(f"unknown state(s): {unknown}")
        if not need:
            raise ModelError("at least one state must be requested")

        self.last_iterations = 0
        exact = belief.is_dirac()
        if not self.override:
            vals = self._solve_masked(belief, need, "trunc")
            acc = Fraction(0) if exact else self.gamma
            return PriorValueResult(vals, acc, None, self.gamma,
                                    self.last_iterations, self.total_belief_nodes)
        v_tr = self._solve_masked(belief, need, "trunc")
        v_lo = self._solve_masked(belief, need, "low")
        v_hi = self._solve_masked(belief, need, "high")
        residual = max(v_hi[q] - v_lo[q] for q in need)
        assert residual >= 0
        acc = Fraction(0) if exact else None
        return PriorValueResult(v_tr, acc, residual, self.gamma,
                                self.last_iterations, self.total_belief_nodes)

    # -- dispatch ----------------------------------------------------------

    def _solve_masked(self, belief, need, seed):
        supp = belief.support()
        if len(supp) == 1:
            table = self._slice_values(supp[0])
            return {q: table[q] for q in need}
        if self.budget == 0 or belief.min_positive() <= self.tau:
            return self._solve_masked(truncate(belief), need, seed)
        return self._table_root(belief, need, seed)

    def _full(self, belief, seed):
        key = (belief.weights, seed)
        cached = self._full_memo.get(key)
        if cached is None:
            cached = self._solve_masked(belief, self.model.states, seed)
            self._full_memo[key] = cached
        return cached

    def _slice_values(self, env):
        table = self._slice_memo.get(env)
        if table is None:
            table = parity_value(self.model.slice(env), self.obj).values
            self._slice_memo[env] = table
        return table

    def _boundary(self, belief, state, seed):
        return self._floor(self._full(belief, seed)[state])

    def _floor(self, v: Fraction) -> Fraction:
        return (v // self.step) * self.step

    # -- belief-graph exploration -------------------------------------------

    def _build_node(self, node, seed):
        model = self.model
        reach = set()
        frontier = list(node.need)
        while frontier:
            q = frontier.pop()
            if q in reach:
                continue
            reach.add(q)
            for a in model.actions:
                if (q, a) in self._dstg_set:
                    continue
                frontier.extend(model.row(self._env0, q, a))
        node.reach = tuple(sorted(reach))
        node.target = None
        node.policy = None
        sup = len(node.belief.support())
        children = {}
        demands = []
        for (q, a) in self._dstg:
            if q not in reach:
                continue
            p_row = successor_dist(node.belief, q, a, model)
            entries = []
            for q2 in sorted(p_row):
                child, degenerate = update(node.belief, q, a, q2, model)
                assert not degenerate
                if (len(child.support()) < sup
                        or child.min_positive() <= self.tau):
                    entries.append((q2, p_row[q2],
                                    ("c", self._boundary(child, q2, seed))))
                else:
                    entries.append((q2, p_row[q2], ("n", child.weights, q2)))
                    demands.append((child, q2))
            children[(q, a)] = entries
        node.children = children
        return demands

    def _explore(self, b0, need0, seed):
        nodes = {}
        pending = deque([(b0, frozenset(need0))])
        while pending:
            bel, want = pending.popleft()
            key = bel.weights
            node = nodes.get(key)
            if node is None:
                node = _Node(bel)
                nodes[key] = node
                if len(nodes) > self.node_budget:
                    raise SolverGuard(
                        f"belief graph exceeds {self.node_budget} nodes; "
                        "rerun with a depth cap (--max-depth) or coarser gamma")
            new = want - node.need
            if node.reach and not new:
                continue
            node.need |= want
            for child, q2 in self._build_node(node, seed):
                pending.append((child, frozenset({q2})))
        for node in nodes.values():
            node.sorted_need = tuple(sorted(node.need))
            node.need_index = {q: i for i, q in enumerate(node.sorted_need)}
        self.total_belief_nodes += len(nodes)
        return nodes

    # -- the budget-indexed iteration ----------------------------------------

    def _solve_node(self, node, nodes, table):
        model = self.model
        rows = {}
        for q in node.reach:
            for a in model.actions:
                if (q, a) in self._dstg_set:
                    w = Fraction(0)
                    for q2, p, ref in node.children[(q, a)]:
                        if ref[0] == "c":
                            v = ref[1]
                        else:
                            child = nodes[ref[1]]
                            v = table[ref[1]][child.need_index[ref[2]]]
                        w += p * v
                    row = {}
                    if w > 0:
                        row[self._win] = w
                    if w < 1:
                        row[self._lose] = 1 - w
                    rows[(q, a)] = row
                else:
                    rows[(q, a)] = model.row(self._env0, q, a)
        for a in model.actions:
            rows[(self._win, a)] = {self._win: Fraction(1)}
            rows[(self._lose, a)] = {self._lose: Fraction(1)}
        states = node.reach + (self._win, self._lose)
        priorities = {q: self.obj.of(q) for q in node.reach}
        priorities[self._win] = 0
        priorities[self._lose] = 1
        mdp = Mdp(states, model.actions, rows, None)
        if node.target is None:
            # the end-component structure does not depend on the sink weights
            node.target = winning_mec_union(mdp, ParityObjective(priorities))
        result = reachability_value(mdp, node.target, policy_hint=node.policy)
        node.policy = result.policy
        return result.values

    def _apply(self, nodes, table, floor_output=True):
        out = {}
        for key, node in nodes.items():
            vals = self._solve_node(node, nodes, table)
            if floor_output:
                out[key] = tuple(self._floor(vals[q]) for q in node.sorted_need)
            else:
                out[key] = {q: vals[q] for q in node.sorted_need}
        return out

    def _seed_table(self, nodes, seed):
        out = {}
        for key, node in nodes.items():
            if seed == "low":
                out[key] = tuple(Fraction(0) for _ in node.sorted_need)
            elif seed == "high":
                out[key] = tuple(Fraction(1) for _ in node.sorted_need)
            else:
                base = self._full(truncate(node.belief), seed)
                out[key] = tuple(self._floor(base[q]) for q in node.sorted_need)
        return out

    def _table_root(self, b0, need0, seed):
        nodes = self._explore(b0, need0, seed)
        order = list(nodes)
        last_index = self.budget - 1  # table index feeding the final solve

        def signature(tab):
            return tuple(tab[key] for key in order)

        history = [self._seed_table(nodes, seed)]
        seen = {signature(history[0]): 0}
        entry_count = sum(len(n.sorted_need) for n in nodes.values())
        while len(history) - 1 < last_index:
            nxt = self._apply(nodes, history[-1])
            sig = signature(nxt)
            if sig in seen:
                start = seen[sig]
                period = len(history) - start
                idx = start + (last_index - start) % period
                last = history[idx]
                break
            seen[sig] = len(history)
            history.append(nxt)
            if len(history) > self.iteration_budget or \
                    len(history) * max(entry_count, 1) > 5_000_000:
                raise SolverGuard(
                    "belief value iteration did not close within the budget; "
                    "rerun with a depth cap (--max-depth) or coarser gamma")
        else:
            last = history[last_index]
        self.last_iterations = max(self.last_iterations, len(history))

        root = nodes[b0.weights]
        final = self._solve_node(root, nodes, last)
        return {q: final[q] for q in need0}


def prior_value(model: Memdp, obj: ParityObjective, b: Belief, gamma, *,
                depth_override: Optional[int] = None, states=None,
                solver: Optional[PriorSolver] = None) -> PriorValueResult:
    """Per-state averaged parity values, within gamma of the true values
    (guaranteed only without a depth override)."""
    s = solver or PriorSolver(model, obj, gamma, depth_override=depth_override)
    return s.values(b, states)


def gap_decide(model: Memdp, obj: ParityObjective, b: Belief, alpha, eps, *,
               state: Optional[str] = None,
               solver: Optional[PriorSolver] = None) -> str:
    """Promise-problem answer: YES when the averaged value is >= alpha,
    NO when it is <= alpha - eps; either answer is sound in between."""
    alpha, eps = Fraction(alpha), Fraction(eps)
    if not 0 < alpha < 1:
        raise ModelError("alpha must lie in (0, 1)")
    if not 0 < eps < 1:
        raise ModelError("eps must lie in (0, 1)")
    q = state if state is not None else model.states[0]
    res = prior_value(model, obj, b, gamma=eps / 3, states=(q,), solver=solver)
    return "YES" if res.values[q] >= alpha - eps / 2 else "NO"
