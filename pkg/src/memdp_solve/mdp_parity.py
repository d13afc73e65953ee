"""Exact optimal values of MDPs with parity objectives.

Pipeline: maximal end-component decomposition, classification of the
almost-surely winning end components (iteratively peeling top odd
priorities), then optimal reachability to their union. The reachability
solve is policy iteration with exact rational policy evaluation (graph
pre-pass for the zero part, Gaussian elimination for the rest), so the
returned values are exact. A float value-iteration fast path is available
behind the `method` flag and reports its final Bellman residual.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .model import Mdp, ModelError, ParityObjective


@dataclass(frozen=True)
class EndComponent:
    states: frozenset
    enabled_actions: dict  # state -> tuple of actions closed inside

    def __contains__(self, q):
        return q in self.states


@dataclass
class ValueTable:
    values: dict  # state -> Fraction (exact path) or float-backed Fraction
    accuracy: Fraction  # 0 for exact results

    def __getitem__(self, q):
        return self.values[q]


def solve_linear(a, b):
    """Solve A x = b exactly by Gaussian elimination with partial pivoting."""
    n = len(b)
    m = [list(row) + [rhs] for row, rhs in zip(a, b)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if m[r][col] != 0), None)
        if pivot is None:
            raise ArithmeticError("singular linear system")
        m[col], m[pivot] = m[pivot], m[col]
        inv = 1 / m[col][col]
        m[col] = [x * inv for x in m[col]]
        for r in range(n):
            if r != col and m[r][col] != 0:
                f = m[r][col]
                m[r] = [x - f * y for x, y in zip(m[r], m[col])]
    return [m[r][n] for r in range(n)]


def _sccs(nodes, successors):
    """Strongly connected components (iterative Tarjan), deterministic order."""
    index = {}
    low = {}
    on_stack = set()
    stack = []
    comps = []
    counter = [0]

    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(successors(root)))]
        index[root] = low[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            node, it = work[-1]
            advanced = False
            for nxt in it:
                if nxt not in index:
                    index[nxt] = low[nxt] = counter[0]
                    counter[0] += 1
                    stack.append(nxt)
                    on_stack.add(nxt)
                    work.append((nxt, iter(successors(nxt))))
                    advanced = True
                    break
                if nxt in on_stack:
                    low[node] = min(low[node], index[nxt])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                comp = set()
                while True:
                    q = stack.pop()
                    on_stack.discard(q)
                    comp.add(q)
                    if q == node:
                        break
                comps.append(comp)
    return comps


def _mecs_within(mdp: Mdp, states, allowed):
    """Maximal end components inside `states` using only `allowed[q]` actions."""
    result = []
    work = [set(states)]
    while work:
        t = work.pop()
        while True:
            enabled = {}
            dead = []
            for q in t:
                acts = tuple(a for a in allowed.get(q, ())
                             if set(mdp.successors(q, a)) <= t)
                if acts:
                    enabled[q] = acts
                else:
                    dead.append(q)
            if not dead:
                break
            t -= set(dead)
        if not t:
            continue

        def succ(q):
            out = set()
            for a in enabled[q]:
                out |= set(mdp.successors(q, a))
            return sorted(out)

        comps = _sccs(sorted(t), succ)
        if len(comps) == 1 and comps[0] == t:
            result.append(EndComponent(frozenset(t), enabled))
        else:
            work.extend(comps)
    result.sort(key=lambda ec: sorted(ec.states))
    return result


def mec_decomposition(mdp: Mdp):
    """Maximal end components of the MDP (pairwise disjoint)."""
    allowed = {q: tuple(mdp.actions) for q in mdp.states}
    return _mecs_within(mdp, mdp.states, allowed)


def _ec_contains_winning(mdp: Mdp, obj: ParityObjective, states, enabled) -> bool:
    top = max(obj.of(q) for q in states)
    if top % 2 == 0:
        return True
    rest = set(q for q in states if obj.of(q) != top)
    for sub in _mecs_within(mdp, rest, enabled):
        if _ec_contains_winning(mdp, obj, sub.states, sub.enabled_actions):
            return True
    return False


def winning_mec_union(mdp: Mdp, obj: ParityObjective) -> frozenset:
    """States of maximal end components from which the parity objective is
    satisfiable almost surely without leaving the component."""
    obj.check_total(mdp.states)
    win = set()
    for mec in mec_decomposition(mdp):
        if _ec_contains_winning(mdp, obj, mec.states, mec.enabled_actions):
            win |= mec.states
    return frozenset(win)


def _backward_reachable(mdp: Mdp, target):
    pred = {q: set() for q in mdp.states}
    for (q, a), row in mdp.delta.items():
        for q2 in row:
            pred[q2].add(q)
    seen = set(target)
    frontier = list(target)
    while frontier:
        q = frontier.pop()
        for p in pred[q]:
            if p not in seen:
                seen.add(p)
                frontier.append(p)
    return seen


def _evaluate_policy(mdp: Mdp, policy, target, unknown):
    """Exact absorption probability into `target` under the fixed policy."""
    # states that reach the target through policy edges; the rest have value 0
    pred = {q: set() for q in mdp.states}
    for q in unknown:
        for q2 in mdp.row(q, policy[q]):
            pred.setdefault(q2, set()).add(q)
    reach = set(target)
    frontier = list(target)
    while frontier:
        q = frontier.pop()
        for p in pred.get(q, ()):
            if p not in reach:
                reach.add(p)
                frontier.append(p)

    values = {q: Fraction(0) for q in mdp.states}
    for q in target:
        values[q] = Fraction(1)
    live = sorted(q for q in unknown if q in reach)
    if live:
        idx = {q: i for i, q in enumerate(live)}
        n = len(live)
        a = [[Fraction(0)] * n for _ in range(n)]
        b = [Fraction(0)] * n
        for q in live:
            i = idx[q]
            a[i][i] += 1
            for q2, p in mdp.row(q, policy[q]).items():
                if q2 in idx:
                    a[i][idx[q2]] -= p
                else:
                    b[i] += p * values[q2]
        sol = solve_linear(a, b)
        for q, v in zip(live, sol):
            values[q] = v
    return values


def reachability_value(mdp: Mdp, target, policy_hint=None):
    """Optimal (maximal) reachability probabilities, exact.

    Returns a ValueTable with accuracy 0. `policy_hint` warm-starts the
    policy iteration; the final policy is attached as `.policy` for reuse.
    """
    target = set(target)
    unknown_targets = target - set(mdp.states)
    if unknown_targets:
        raise ModelError(f"target contains unknown state(s): {sorted(unknown_targets)}")
    positive = _backward_reachable(mdp, target)
    unknown = [q for q in mdp.states if q in positive and q not in target]

    policy = {}
    for q in unknown:
        a = policy_hint.get(q) if policy_hint else None
        policy[q] = a if a in mdp.actions else mdp.actions[0]

    while True:
        values = _evaluate_policy(mdp, policy, target, unknown)
        improved = False
        for q in unknown:
            best_a, best_v = policy[q], values[q]
            for a in mdp.actions:
                v = sum(p * values[q2] for q2, p in mdp.row(q, a).items())
                if v > best_v:
                    best_a, best_v = a, v
            if best_v > values[q]:
                policy[q] = best_a
                improved = True
        if not improved:
            break

    table = ValueTable(values, Fraction(0))
    table.policy = dict(policy)
    return table


def _float_parity_value(mdp: Mdp, target, tol=1e-12, max_iter=100000):
    positive = _backward_reachable(mdp, target)
    v = {q: (1.0 if q in target else 0.0) for q in mdp.states}
    residual = 0.0
    for _ in range(max_iter):
        residual = 0.0
        nxt = {}
        for q in mdp.states:
            if q in target or q not in positive:
                nxt[q] = v[q]
                continue
            best = 0.0
            for a in mdp.actions:
                best = max(best, sum(float(p) * v[q2] for q2, p in mdp.row(q, a).items()))
            nxt[q] = best
            residual = max(residual, abs(best - v[q]))
        v = nxt
        if residual < tol:
            break
    values = {q: Fraction(x) for q, x in v.items()}
    return ValueTable(values, Fraction(residual))


def parity_value(mdp: Mdp, obj: ParityObjective, method: str = "exact") -> ValueTable:
    """Optimal probability of the parity objective from every state.

    method="exact" (default) gives exact rationals; method="float" runs
    plain value iteration and reports the final Bellman residual as the
    accuracy field.
    """
    obj.check_total(mdp.states)
    target = winning_mec_union(mdp, obj)
    if method == "exact":
        return reachability_value(mdp, target)
    if method == "float":
        return _float_parity_value(mdp, target)
    raise ModelError(f"unknown parity_value method {method!r}")
