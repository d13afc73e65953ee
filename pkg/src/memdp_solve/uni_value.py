"""Worst-case-environment values via minimization over prior beliefs.

The worst-case value equals the infimum of averaged values over all prior
beliefs. Two routes are provided: a streamed minimization over a covering
grid of beliefs (any number of environments), and, for exactly two
environments, a trisection search that exploits quasi-convexity of the
value as a function of the first environment's prior weight.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

from .belief import Belief
from .dyadic import ceil_log2
from .model import Memdp, ModelError, ParityObjective
from .prior_value import PriorSolver


@dataclass(frozen=True)
class BeliefGrid:
    """Weights on the grid x/(k * 2^(N+1)); covers every belief within eps/2."""

    resolution: int  # N
    k: int
    denominator: int  # k * 2^(N+1)
    envs: Optional[tuple] = None

    def __iter__(self):
        def compositions(remaining, slots):
            if slots == 1:
                yield (remaining,)
                return
            for head in range(remaining + 1):
                for rest in compositions(remaining - head, slots - 1):
                    yield (head,) + rest

        d = self.denominator
        for combo in compositions(d, self.k):
            weights = tuple(Fraction(x, d) for x in combo)
            if self.envs is None:
                yield weights
            else:
                yield Belief(tuple(zip(self.envs, weights)))

    def size(self) -> int:
        # compositions of d into k nonnegative parts
        from math import comb
        return comb(self.denominator + self.k - 1, self.k - 1)


def belief_grid(k: int, eps, envs=None) -> BeliefGrid:
    eps = Fraction(eps)
    if k < 1:
        raise ModelError("k must be at least 1")
    if not 0 < eps < 1:
        raise ModelError("eps must lie in (0, 1)")
    n = ceil_log2(1 / eps)
    return BeliefGrid(n, k, k << (n + 1), tuple(envs) if envs is not None else None)


@dataclass
class UniValueResult:
    value: Fraction
    minimizer: Optional[Belief]
    accuracy: Fraction
    oracle_calls: int = 0
    recursive_calls: int = 0


def uni_value_grid(model: Memdp, obj: ParityObjective, q: str, eps, *,
                   solver: Optional[PriorSolver] = None,
                   grid=None) -> UniValueResult:
    """Minimum averaged value over the covering belief grid; within eps of
    the worst-case value. Ties keep the first grid point in stream order."""
    eps = Fraction(eps)
    if not 0 < eps < 1:
        raise ModelError("eps must lie in (0, 1)")
    if q not in model.states:
        raise ModelError(f"unknown state {q!r}")
    grid = grid or belief_grid(len(model.environments), eps, model.environments)
    solver = solver or PriorSolver(model, obj, eps / 2)
    best = None
    best_b = None
    calls = 0
    for b in grid:
        v = solver.values(b, (q,)).values[q]
        calls += 1
        if best is None or v < best:
            best, best_b = v, b
    return UniValueResult(best, best_b, eps, oracle_calls=calls)


def inf_f_search(f_hat: Callable, eps) -> UniValueResult:
    """Trisection minimization of a quasi-convex 1-Lipschitz f: [0,1] -> [0,1].

    f_hat(x, tol) must return a value within tol of f(x). Keeps the interval
    third whose endpoint is certifiably not better; the candidate interval
    shrinks by 2/3 per recursion, so the recursion count is logarithmic.
    """
    eps = Fraction(eps)
    if not 0 < eps < 1:
        raise ModelError("eps must lie in (0, 1)")
    state = {"oracle": 0, "recursive": 0}

    def query(x, tol):
        state["oracle"] += 1
        return Fraction(f_hat(x, tol))

    fine = eps * eps / 48
    slack = eps * eps / 24

    def search(x, t):
        if t - x <= eps / 2:
            return query(x, eps / 2)
        y = (2 * x + t) / 3
        a_y = query(y, fine)
        z = (x + 2 * t) / 3
        a_z = query(z, fine)
        u = (y + z) / 2
        a_u = query(u, fine)
        if a_u > a_z + slack or a_y > a_u + slack:
            state["recursive"] += 1
            return search(y, t)
        if a_u > a_y + slack or a_z > a_u + slack:
            state["recursive"] += 1
            return search(x, z)
        return a_u

    value = search(Fraction(0), Fraction(1))
    return UniValueResult(value, None, eps,
                          oracle_calls=state["oracle"],
                          recursive_calls=state["recursive"])


def uni_value_two_env(model: Memdp, obj: ParityObjective, q: str, eps, *,
                      solver_factory=None) -> UniValueResult:
    """Two-environment worst-case value by trisection over the prior weight
    of the first environment."""
    eps = Fraction(eps)
    if len(model.environments) != 2:
        raise ModelError("the trisection method requires exactly 2 environments")
    if q not in model.states:
        raise ModelError(f"unknown state {q!r}")
    e1, e2 = model.environments
    solvers = {}
    memo = {}

    def f_hat(x, tol):
        key = (x, tol)
        if key in memo:
            return memo[key]
        solver = solvers.get(tol)
        if solver is None:
            if solver_factory is not None:
                solver = solver_factory(tol)
            else:
                solver = PriorSolver(model, obj, tol)
            solvers[tol] = solver
        b = Belief(((e1, Fraction(x)), (e2, 1 - Fraction(x))))
        v = solver.values(b, (q,)).values[q]
        memo[key] = v
        return v

    res = inf_f_search(f_hat, eps)
    return UniValueResult(res.value, None, eps,
                          oracle_calls=res.oracle_calls,
                          recursive_calls=res.recursive_calls)
