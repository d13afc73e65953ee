"""Environment-belief arithmetic: Bayes updates, traces, distance, truncation.

A belief is an exact rational distribution over a fixed domain (environment
ids for multi-environment models, state ids when reused for POMDP beliefs).
All operations are pure functions over immutable values.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

from .model import Memdp, ModelError, Run


@dataclass(frozen=True)
class Belief:
    """Probability distribution with an explicit domain, zeros included."""

    weights: tuple  # ((id, Fraction), ...) in a fixed order

    def __post_init__(self):
        total = Fraction(0)
        for x, w in self.weights:
            if w < 0 or w > 1:
                raise ModelError(f"belief weight for {x!r} outside [0, 1]")
            total += w
        if total != 1:
            raise ModelError(f"belief weights sum to {total}, not 1")
        if len({x for x, _ in self.weights}) != len(self.weights):
            raise ModelError("duplicate belief domain entries")

    @staticmethod
    def from_dict(weights, domain=None) -> "Belief":
        if domain is None:
            domain = sorted(weights)
        w = {x: Fraction(weights.get(x, 0)) for x in domain}
        return Belief(tuple((x, w[x]) for x in domain))

    @staticmethod
    def uniform(domain) -> "Belief":
        domain = tuple(domain)
        k = len(domain)
        return Belief(tuple((x, Fraction(1, k)) for x in domain))

    @staticmethod
    def dirac(x, domain) -> "Belief":
        return Belief(tuple((y, Fraction(1 if y == x else 0)) for y in domain))

    @property
    def domain(self) -> tuple:
        return tuple(x for x, _ in self.weights)

    def get(self, x) -> Fraction:
        for y, w in self.weights:
            if y == x:
                return w
        raise KeyError(x)

    def __getitem__(self, x) -> Fraction:
        return self.get(x)

    def as_dict(self) -> dict:
        return {x: w for x, w in self.weights}

    def support(self) -> tuple:
        return tuple(x for x, w in self.weights if w > 0)

    def min_positive(self) -> Fraction:
        return min(w for _, w in self.weights if w > 0)

    def is_dirac(self) -> bool:
        return len(self.support()) == 1


class BeliefUpdate(NamedTuple):
    belief: Belief
    degenerate: bool


def _unchecked(weights: tuple) -> Belief:
    # internal fast path: weights sum to 1 by construction
    b = object.__new__(Belief)
    object.__setattr__(b, "weights", weights)
    return b


def _check_domain(b: Belief, model: Memdp):
    if b.domain != tuple(model.environments):
        raise ModelError("belief domain does not match the model's environments")


def successor_dist(b: Belief, q: str, a: str, model: Memdp) -> dict:
    """Belief-mixture successor distribution: sum_e b(e) * delta_e(q, a)."""
    _check_domain(b, model)
    out = {}
    for e, w in b.weights:
        if w == 0:
            continue
        for q2, p in model.row(e, q, a).items():
            out[q2] = out.get(q2, Fraction(0)) + w * p
    return out


def update(b: Belief, q: str, a: str, q_next: str, model: Memdp) -> BeliefUpdate:
    """Posterior over environments after observing (q, a) -> q_next.

    When the observed transition has mixture probability zero the posterior
    is undefined; we return the uniform belief over support(b) and flag it.
    """
    _check_domain(b, model)
    zero = Fraction(0)
    num = [(e, w * model.delta[e][(q, a)].get(q_next, zero)) for e, w in b.weights]
    total = sum(w for _, w in num)
    if total == 0:
        supp = set(b.support())
        k = len(supp)
        uniform = Belief(tuple((e, Fraction(1, k) if e in supp else zero)
                               for e in b.domain))
        return BeliefUpdate(uniform, True)
    posterior = _unchecked(tuple((e, w / total) for e, w in num))
    return BeliefUpdate(posterior, False)


def likelihood_trace(b: Belief, run: Run, model: Memdp) -> list:
    """Beliefs along the run: one per visited state, the first equals b."""
    if run.start not in model.states:
        raise ModelError(f"run starts at unknown state {run.start!r}")
    out = [b]
    cur, state = b, run.start
    for a, q_next in run.steps:
        cur, _ = update(cur, state, a, q_next, model)
        out.append(cur)
        state = q_next
    return out


def diff(b: Belief, b2: Belief) -> Fraction:
    """Total-variation distance between beliefs on the same domain."""
    if b.domain != b2.domain:
        raise ModelError("beliefs have different domains")
    return sum(abs(w - w2) for (_, w), (_, w2) in zip(b.weights, b2.weights)) / 2


def truncate(b: Belief) -> Belief:
    """Drop the smallest positive weight, merging its mass into another
    support member; the resulting distance to b equals the dropped weight.

    Ties break deterministically: the dropped environment is the smallest
    (by id) among the minimizers, and its mass moves to the smallest other
    support member.
    """
    supp = b.support()
    if len(supp) < 2:
        raise ModelError("truncate requires a belief with support size >= 2")
    low = min(b.get(e) for e in supp)
    dropped = min(e for e in supp if b.get(e) == low)
    target = min(e for e in supp if e != dropped)
    out = []
    for e, w in b.weights:
        if e == dropped:
            out.append((e, Fraction(0)))
        elif e == target:
            out.append((e, w + low))
        else:
            out.append((e, w))
    return Belief(tuple(out))


def revealing_pairs(model: Memdp, e_from: str, e_to: str) -> set:
    """Pairs (q, a) with a successor of probability 0 in e_from but > 0 in e_to.

    Observing such a successor eliminates e_from from the belief support.
    """
    if e_from == e_to:
        raise ModelError("revealing_pairs requires two distinct environments")
    for e in (e_from, e_to):
        if e not in model.environments:
            raise ModelError(f"unknown environment {e!r}")
    out = set()
    for q in model.states:
        for a in model.actions:
            row_from = model.row(e_from, q, a)
            row_to = model.row(e_to, q, a)
            if any(q2 not in row_from for q2 in row_to):
                out.add((q, a))
    return out
