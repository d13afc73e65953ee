"""Data model for MDPs, multi-environment MDPs, and POMDPs.

All transition probabilities are exact rationals (`fractions.Fraction`).
State, action, environment, and observation identifiers are strings, kept
in their declared order. Models are immutable after construction and safe
to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Union


class ModelError(ValueError):
    """Raised for malformed model documents or inconsistent model data."""


Row = dict  # state -> Fraction, support only (no zero entries)


def parse_prob(token) -> Fraction:
    """Parse a probability given as an int, or a string "p", "p/q"."""
    if isinstance(token, bool):
        raise ModelError(f"invalid probability {token!r}")
    if isinstance(token, int):
        p = Fraction(token)
    elif isinstance(token, str):
        try:
            p = Fraction(token.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ModelError(f"invalid probability {token!r}: {exc}") from None
    else:
        raise ModelError(f"invalid probability {token!r} (expected int or string)")
    if p < 0 or p > 1:
        raise ModelError(f"probability {token!r} outside [0, 1]")
    return p


def prob_str(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


@dataclass(frozen=True)
class ParityObjective:
    """Priority labeling; a run wins iff the top priority seen infinitely often is even."""

    priority: Mapping[str, int]

    def of(self, state: str) -> int:
        return self.priority[state]

    def max_priority(self, states: Iterable[str]) -> int:
        return max(self.priority[q] for q in states)

    def check_total(self, states: Iterable[str]):
        missing = [q for q in states if q not in self.priority]
        if missing:
            raise ModelError(f"missing priority for state(s): {', '.join(missing)}")
        for q, p in self.priority.items():
            if not isinstance(p, int) or isinstance(p, bool) or p < 0:
                raise ModelError(f"priority of {q!r} must be a nonnegative integer")


@dataclass(frozen=True)
class Run:
    """A finite run: start state followed by (action, state) steps."""

    start: str
    steps: tuple = ()

    def __len__(self) -> int:
        # number of states along the run
        return 1 + len(self.steps)

    def head(self) -> str:
        return self.steps[-1][1] if self.steps else self.start

    def states(self):
        yield self.start
        for _, q in self.steps:
            yield q

    def extend(self, action: str, state: str) -> "Run":
        return Run(self.start, self.steps + ((action, state),))


def _check_row(row: Mapping, states, where: str) -> Row:
    out = {}
    total = Fraction(0)
    for q, p in row.items():
        if q not in states:
            raise ModelError(f"{where}: successor {q!r} is not a declared state")
        p = p if isinstance(p, Fraction) else parse_prob(p)
        if p == 0:
            continue
        out[q] = p
        total += p
    if total != 1:
        raise ModelError(f"{where}: distribution does not sum to 1 (got {prob_str(total)})")
    return out


@dataclass(frozen=True)
class Mdp:
    states: tuple
    actions: tuple
    delta: Mapping  # (state, action) -> Row
    priority: Optional[ParityObjective] = None

    def row(self, q: str, a: str) -> Row:
        return self.delta[(q, a)]

    def successors(self, q: str, a: str):
        return self.delta[(q, a)].keys()


@dataclass(frozen=True)
class Memdp:
    states: tuple
    actions: tuple
    environments: tuple
    delta: Mapping  # env -> {(state, action) -> Row}
    priority: Optional[ParityObjective] = None

    def row(self, e: str, q: str, a: str) -> Row:
        return self.delta[e][(q, a)]

    def slice(self, e: str) -> Mdp:
        """The single-environment MDP for environment e."""
        if e not in self.delta:
            raise ModelError(f"unknown environment {e!r}")
        return Mdp(self.states, self.actions, self.delta[e], self.priority)


@dataclass(frozen=True)
class PomdpModel:
    states: tuple
    actions: tuple
    observations: tuple
    delta: Mapping  # (state, action) -> Row
    obs_map: Mapping  # state -> observation
    priority: Optional[ParityObjective] = None

    def row(self, q: str, a: str) -> Row:
        return self.delta[(q, a)]

    def obs(self, q: str) -> str:
        return self.obs_map[q]

    def states_with_obs(self, o: str):
        return [q for q in self.states if self.obs_map[q] == o]


Model = Union[Mdp, Memdp, PomdpModel]


def _declared(doc, key, what) -> tuple:
    try:
        items = doc[key]
    except KeyError:
        raise ModelError(f"missing {key!r} list") from None
    if not isinstance(items, list) or not items:
        raise ModelError(f"{key!r} must be a nonempty list")
    if not all(isinstance(x, str) for x in items):
        raise ModelError(f"{key!r} entries must be strings")
    if len(set(items)) != len(items):
        raise ModelError(f"duplicate {what} identifiers")
    return tuple(items)


def _parse_priority(doc, states) -> Optional[ParityObjective]:
    if "priority" not in doc:
        return None
    raw = doc["priority"]
    if not isinstance(raw, dict):
        raise ModelError("'priority' must be an object mapping state -> integer")
    obj = ParityObjective({q: p for q, p in raw.items()})
    for q in raw:
        if q not in states:
            raise ModelError(f"priority given for unknown state {q!r}")
    obj.check_total(states)
    return obj


def _parse_table(raw, states, actions, where) -> dict:
    if not isinstance(raw, dict):
        raise ModelError(f"{where}: transitions must be an object")
    delta = {}
    for q in states:
        rows = raw.get(q)
        if rows is None:
            raise ModelError(f"{where}: missing transitions for state {q!r}")
        for a in actions:
            row = rows.get(a)
            if row is None:
                raise ModelError(f"{where}: missing distribution for ({q!r}, {a!r})")
            delta[(q, a)] = _check_row(row, set(states), f"{where} ({q!r}, {a!r})")
        for a in rows:
            if a not in actions:
                raise ModelError(f"{where}: transition under undeclared action {a!r} at {q!r}")
    for q in raw:
        if q not in states:
            raise ModelError(f"{where}: transitions for undeclared state {q!r}")
    return delta


def parse_model(text: str) -> Model:
    """Parse and validate a JSON model document.

    The document type field selects among "mdp", "memdp", and "pomdp".
    Probabilities may be integers or strings "p/q"; they are kept exact.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ModelError("top-level JSON value must be an object")
    kind = doc.get("type")
    if kind not in ("mdp", "memdp", "pomdp"):
        raise ModelError(f"unknown model type {kind!r} (expected mdp, memdp, or pomdp)")

    states = _declared(doc, "states", "state")
    actions = _declared(doc, "actions", "action")
    priority = _parse_priority(doc, states)

    if kind == "memdp":
        envs = _declared(doc, "environments", "environment")
        raw = doc.get("transitions")
        if not isinstance(raw, dict):
            raise ModelError("'transitions' must map environment -> state -> action -> row")
        delta = {}
        for e in envs:
            if e not in raw:
                raise ModelError(f"missing transitions for environment {e!r}")
            delta[e] = _parse_table(raw[e], states, actions, f"environment {e!r}")
        for e in raw:
            if e not in envs:
                raise ModelError(f"transitions for undeclared environment {e!r}")
        return Memdp(states, actions, envs, delta, priority)

    if kind == "mdp":
        delta = _parse_table(doc.get("transitions"), states, actions, "mdp")
        return Mdp(states, actions, delta, priority)

    observations = _declared(doc, "observations", "observation")
    obs_map = doc.get("obs_map")
    if not isinstance(obs_map, dict):
        raise ModelError("'obs_map' must be an object mapping state -> observation")
    for q in states:
        if q not in obs_map:
            raise ModelError(f"missing observation for state {q!r}")
        if obs_map[q] not in observations:
            raise ModelError(f"state {q!r} maps to undeclared observation {obs_map[q]!r}")
    for q in obs_map:
        if q not in states:
            raise ModelError(f"observation given for undeclared state {q!r}")
    delta = _parse_table(doc.get("transitions"), states, actions, "pomdp")
    return PomdpModel(states, actions, observations, delta, dict(obs_map), priority)


def _row_json(row: Row) -> dict:
    return {q: prob_str(p) for q, p in row.items()}


def _table_json(states, actions, delta) -> dict:
    return {q: {a: _row_json(delta[(q, a)]) for a in actions} for q in states}


def model_to_dict(model: Model) -> dict:
    """Canonical document form: declared order, probabilities as "p/q"."""
    if isinstance(model, Memdp):
        doc = {
            "type": "memdp",
            "states": list(model.states),
            "actions": list(model.actions),
            "environments": list(model.environments),
            "transitions": {e: _table_json(model.states, model.actions, model.delta[e])
                            for e in model.environments},
        }
    elif isinstance(model, Mdp):
        doc = {
            "type": "mdp",
            "states": list(model.states),
            "actions": list(model.actions),
            "transitions": _table_json(model.states, model.actions, model.delta),
        }
    elif isinstance(model, PomdpModel):
        doc = {
            "type": "pomdp",
            "states": list(model.states),
            "actions": list(model.actions),
            "observations": list(model.observations),
            "obs_map": {q: model.obs_map[q] for q in model.states},
            "transitions": _table_json(model.states, model.actions, model.delta),
        }
    else:
        raise ModelError(f"cannot serialize {type(model).__name__}")
    if model.priority is not None:
        doc["priority"] = {q: model.priority.of(q) for q in model.states}
    return doc


def serialize_model(model: Model) -> str:
    return json.dumps(model_to_dict(model), indent=2) + "\n"


@dataclass
class ValidationReport:
    errors: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def validate(model: Model) -> ValidationReport:
    """Re-check model invariants; violations are reported, not raised."""
    report = ValidationReport()
    err, warn = report.errors.append, report.warnings.append

    if not model.states:
        err("model has no states")
    if not model.actions:
        err("model has no actions")

    def check_table(delta, label):
        for q in model.states:
            for a in model.actions:
                row = delta.get((q, a))
                if row is None:
                    err(f"{label}missing distribution for ({q!r}, {a!r})")
                    continue
                total = Fraction(0)
                for q2, p in row.items():
                    if q2 not in model.states:
                        err(f"{label}({q!r}, {a!r}) has undeclared successor {q2!r}")
                    if p < 0 or p > 1:
                        err(f"{label}({q!r}, {a!r}, {q2!r}) probability outside [0, 1]")
                    total += p
                if total != 1:
                    err(f"{label}({q!r}, {a!r}): distribution does not sum to 1 "
                        f"(got {prob_str(total)})")

    if isinstance(model, Memdp):
        if not model.environments:
            err("model has no environments")
        for e in model.environments:
            if e not in model.delta:
                err(f"environments must share (states, actions): no table for {e!r}")
                continue
            check_table(model.delta[e], f"environment {e!r}: ")
        referenced = set()
        for e in model.environments:
            for row in model.delta.get(e, {}).values():
                referenced.update(row)
    elif isinstance(model, (Mdp, PomdpModel)):
        check_table(model.delta, "")
        referenced = set()
        for row in model.delta.values():
            referenced.update(row)
        if isinstance(model, PomdpModel):
            for q in model.states:
                if q not in model.obs_map:
                    err(f"missing observation for state {q!r}")
    else:
        err(f"unknown model kind {type(model).__name__}")
        referenced = set()

    for q in model.states:
        if q not in referenced:
            warn(f"state {q!r} is never a transition successor")

    if model.priority is not None:
        try:
            model.priority.check_total(model.states)
        except ModelError as exc:
            err(str(exc))
    return report


def distinguishing_pairs(model: Memdp) -> dict:
    """All (state, action) pairs where some two environments' rows differ.

    Returns a map (state, action) -> tuple of witness environment pairs
    (e, e'), each in declared order with e before e'.
    """
    out = {}
    envs = model.environments
    for q in model.states:
        for a in model.actions:
            witnesses = []
            for i, e in enumerate(envs):
                for e2 in envs[i + 1:]:
                    if model.delta[e][(q, a)] != model.delta[e2][(q, a)]:
                        witnesses.append((e, e2))
            if witnesses:
                out[(q, a)] = tuple(witnesses)
    return out


def restrict(model: Memdp, env_subset) -> Memdp:
    """Same states and actions, environments limited to the given subset."""
    subset = [e for e in model.environments if e in set(env_subset)]
    unknown = set(env_subset) - set(model.environments)
    if unknown:
        raise ModelError(f"unknown environment(s): {', '.join(sorted(unknown))}")
    if not subset:
        raise ModelError("environment subset must be nonempty")
    return Memdp(model.states, model.actions, tuple(subset),
                 {e: model.delta[e] for e in subset}, model.priority)
