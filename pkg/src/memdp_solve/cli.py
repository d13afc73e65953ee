"""Command-line interface.

Exit codes: 0 success, 1 input error, 2 solver guard (resource limit).
With --json every command emits a single machine-readable document whose
numbers are rational strings or decimals tagged with an accuracy bound;
identical invocations are bit-identical up to the wall_time_s field.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from fractions import Fraction

from .belief import Belief
from .model import (Mdp, Memdp, ModelError, PomdpModel, model_to_dict,
                    parse_model, prob_str, validate)
from .mdp_parity import parity_value
from .pomdp import is_dirac_preserving, is_observation_compatible, memdp_from_pomdp
from .prior_value import PriorSolver, SolverGuard, compute_constants, gap_decide
from .simulate import belief_trace_stats, mc_parity_estimate, sample_run, strategy_from_json
from .uni_value import uni_value_grid, uni_value_two_env


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems are input errors (exit 1)
        self.print_usage(sys.stderr)
        raise CliError(message)


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise CliError(f"invalid rational {text!r} (expected p/q)") from None


def _load_model(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}") from None
    return parse_model(text), hashlib.sha256(text.encode()).hexdigest()


def _require_memdp(model) -> Memdp:
    if not isinstance(model, Memdp):
        raise CliError("this command requires a model of type memdp")
    return model


def _require_priority(model):
    if model.priority is None:
        raise CliError("model document has no 'priority' labeling")
    return model.priority


def _parse_belief(spec: str, model: Memdp) -> Belief:
    if spec == "uniform":
        return Belief.uniform(model.environments)
    try:
        doc = json.loads(spec)
    except json.JSONDecodeError as exc:
        raise CliError(f"invalid belief JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise CliError("belief must be a JSON object or 'uniform'")
    weights = {k: _fraction(str(v)) for k, v in doc.items()}
    unknown = set(weights) - set(model.environments)
    if unknown:
        raise CliError(f"belief names unknown environment(s): {sorted(unknown)}")
    return Belief.from_dict(weights, domain=model.environments)


def _value_entry(v: Fraction) -> dict:
    return {"rational": prob_str(v), "decimal": f"{float(v):.6f}"}


def _emit(args, command, inputs, outputs, accuracy, warnings, started,
          human_lines):
    if args.json:
        doc = {
            "command": command,
            "inputs": inputs,
            "outputs": outputs,
            "accuracy": accuracy if accuracy is None else prob_str(Fraction(accuracy)),
            "warnings": warnings,
            "wall_time_s": round(time.time() - started, 6),
        }
        print(json.dumps(doc, indent=2))
    else:
        for line in human_lines:
            print(line)
        for w in warnings:
            print(f"warning: {w}", file=sys.stderr)


def _jobs(args) -> int:
    if getattr(args, "parallel", None):
        return max(1, args.parallel)
    env = os.environ.get("MEMDP_SOLVE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise CliError("MEMDP_SOLVE_THREADS must be an integer") from None
    return 1


# ---------------------------------------------------------------------------
# subcommands


def _cmd_validate(args, started):
    try:
        model, digest = _load_model(args.model)
    except ModelError as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return 1
    report = validate(model)
    outputs = {"valid": report.ok, "errors": report.errors}
    lines = ["valid" if report.ok else "invalid"]
    lines += [f"error: {e}" for e in report.errors]
    _emit(args, "validate", {"model": args.model, "sha256": digest}, outputs,
          None, report.warnings, started, lines)
    return 0 if report.ok else 1


def _cmd_mdp_parity(args, started):
    model, digest = _load_model(args.model)
    if isinstance(model, Memdp):
        envs = model.environments
        if args.env is not None:
            if args.env not in envs:
                raise CliError(f"unknown environment {args.env!r}")
            mdp = model.slice(args.env)
        elif len(envs) == 1:
            mdp = model.slice(envs[0])
        else:
            raise CliError("multi-environment model: choose a slice with --env")
    elif isinstance(model, Mdp):
        mdp = model
    else:
        raise CliError("mdp-parity expects an mdp (or a memdp slice)")
    obj = _require_priority(mdp)
    table = parity_value(mdp, obj, method=args.method)
    outputs = {"values": {q: _value_entry(table.values[q]) for q in mdp.states}}
    lines = [f"{q}: {prob_str(table.values[q])} = {float(table.values[q]):.6f}"
             for q in mdp.states]
    _emit(args, "mdp-parity", {"model": args.model, "sha256": digest}, outputs,
          table.accuracy, [], started, lines)
    return 0


def _cmd_prior_value(args, started):
    model = _require_memdp(_load_model(args.model)[0])
    digest = _load_model(args.model)[1]
    obj = _require_priority(model)
    belief = _parse_belief(args.belief, model)
    gamma = _fraction(args.gamma)
    states = (args.state,) if args.state else None
    solver = PriorSolver(model, obj, gamma, depth_override=args.max_depth)
    res = solver.values(belief, states)
    warnings = []
    if args.max_depth is not None:
        warnings.append("depth cap given: the gamma accuracy guarantee is forfeited; "
                        "the residual field bounds the unexplored remainder")
    outputs = {"values": {q: _value_entry(v) for q, v in res.values.items()},
               "gamma": prob_str(gamma)}
    if res.residual is not None:
        outputs["residual"] = prob_str(res.residual)
    lines = [f"{q}: {prob_str(v)} = {float(v):.6f}" for q, v in res.values.items()]
    if res.residual is not None:
        lines.append(f"residual: {prob_str(res.residual)}")
    _emit(args, "prior-value", {"model": args.model, "sha256": digest,
                                "belief": {e: prob_str(w) for e, w in belief.weights},
                                "gamma": prob_str(gamma)},
          outputs, res.accuracy, warnings, started, lines)
    return 0


def _cmd_gap(args, started):
    model = _require_memdp(_load_model(args.model)[0])
    digest = _load_model(args.model)[1]
    obj = _require_priority(model)
    belief = _parse_belief(args.belief, model)
    alpha, eps = _fraction(args.alpha), _fraction(args.eps)
    state = args.state or model.states[0]
    if state not in model.states:
        raise CliError(f"unknown state {state!r}")
    answer = gap_decide(model, obj, belief, alpha, eps, state=state)
    outputs = {"answer": answer, "state": state,
               "alpha": prob_str(alpha), "eps": prob_str(eps)}
    _emit(args, "gap", {"model": args.model, "sha256": digest,
                        "belief": {e: prob_str(w) for e, w in belief.weights}},
          outputs, eps, [], started, [answer])
    return 0


def _grid_shard_worker(payload):
    (text, prio_available, eps_str, state, shard, nshards) = payload
    model = parse_model(text)
    obj = model.priority
    eps = Fraction(eps_str)
    from .uni_value import belief_grid
    solver = PriorSolver(model, obj, eps / 2)
    best = None
    best_b = None
    for i, b in enumerate(belief_grid(len(model.environments), eps, model.environments)):
        if i % nshards != shard:
            continue
        v = solver.values(b, (state,)).values[state]
        if best is None or v < best:
            best, best_b = v, b
    if best is None:
        return None
    return (prob_str(best), {e: prob_str(w) for e, w in best_b.weights})


def _cmd_uni_value(args, started):
    model = _require_memdp(_load_model(args.model)[0])
    digest = _load_model(args.model)[1]
    obj = _require_priority(model)
    eps = _fraction(args.eps)
    state = args.state or model.states[0]
    if state not in model.states:
        raise CliError(f"unknown state {state!r}")
    jobs = _jobs(args)
    minimizer = None
    if args.method == "bisect":
        res = uni_value_two_env(model, obj, state, eps)
        value = res.value
    elif jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with open(args.model, "r", encoding="utf-8") as fh:
            text = fh.read()
        payloads = [(text, True, str(eps), state, s, jobs) for s in range(jobs)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = [r for r in pool.map(_grid_shard_worker, payloads) if r]
        value_s, belief_s = min(results, key=lambda r: Fraction(r[0]))
        value = Fraction(value_s)
        minimizer = belief_s
    else:
        res = uni_value_grid(model, obj, state, eps)
        value = res.value
        minimizer = {e: prob_str(w) for e, w in res.minimizer.weights}
    outputs = {"value": _value_entry(value), "state": state, "method": args.method}
    if minimizer:
        outputs["minimizer"] = minimizer
    lines = [f"{state}: {prob_str(value)} = {float(value):.6f}"]
    if minimizer:
        lines.append("minimizer: " + json.dumps(minimizer))
    _emit(args, "uni-value", {"model": args.model, "sha256": digest,
                              "eps": prob_str(eps)},
          outputs, eps, [], started, lines)
    return 0


def _cmd_constants(args, started):
    model = _require_memdp(_load_model(args.model)[0])
    digest = _load_model(args.model)[1]
    eps = _fraction(args.eps)
    c = compute_constants(model, eps)
    outputs = {
        "ratio_min": prob_str(c.ratio_min) if c.ratio_min <= 1 else str(c.ratio_min),
        "ratio_max": str(c.ratio_max),
        "ratio_min_gt1": str(c.ratio_min_gt1),
        "p_min": prob_str(c.p_min),
        "iota": [str(c.iota.lo), str(c.iota.hi)],
        "eta": [str(c.eta.lo), str(c.eta.hi)],
        "n1": c.n1, "n2": c.n2, "n3": c.n3, "m": c.m,
    }
    lines = [f"ratio_min = {c.ratio_min}", f"ratio_max = {c.ratio_max}",
             f"ratio_min_gt1 = {c.ratio_min_gt1}", f"p_min = {c.p_min}",
             f"iota in [{c.iota.lo}, {c.iota.hi}] ~ {float(c.iota):.6g}",
             f"eta in [{c.eta.lo}, {c.eta.hi}] ~ {float(c.eta):.6g}",
             f"n1 = {c.n1}", f"n2 = {c.n2}", f"n3 = {c.n3}", f"m = {c.m}"]
    _emit(args, "constants", {"model": args.model, "sha256": digest,
                              "eps": prob_str(eps)},
          outputs, None, [], started, lines)
    return 0


def _cmd_pomdp_check(args, started):
    model, digest = _load_model(args.model)
    if not isinstance(model, PomdpModel):
        raise CliError("pomdp check expects a model of type pomdp")
    check = is_dirac_preserving(model)
    compatible = None
    if model.priority is not None:
        compatible = is_observation_compatible(model, model.priority)
    outputs = {"dirac_preserving": check.ok}
    lines = [f"dirac-preserving: {'yes' if check.ok else 'no'}"]
    if check.witness:
        outputs["witness"] = list(check.witness)
        lines.append("witness (state, action, observation): " + ", ".join(check.witness))
    if compatible is not None:
        outputs["objective_observation_compatible"] = compatible
        lines.append(f"objective observation-compatible: {'yes' if compatible else 'no'}")
    _emit(args, "pomdp check", {"model": args.model, "sha256": digest},
          outputs, None, [], started, lines)
    return 0


def _cmd_pomdp_convert(args, started):
    model, digest = _load_model(args.model)
    if not isinstance(model, PomdpModel):
        raise CliError("pomdp convert expects a model of type pomdp")
    obj = _require_priority(model)
    try:
        doc = json.loads(args.belief)
    except json.JSONDecodeError as exc:
        raise CliError(f"invalid belief JSON: {exc}") from None
    weights = {k: _fraction(str(v)) for k, v in doc.items()}
    unknown = set(weights) - set(model.states)
    if unknown:
        raise CliError(f"belief names unknown state(s): {sorted(unknown)}")
    belief = Belief.from_dict(weights, domain=model.states)
    reduced = memdp_from_pomdp(model, belief, obj)
    document = {
        "model": model_to_dict(reduced.memdp),
        "belief": {e: prob_str(w) for e, w in reduced.belief.weights},
        "initial_state": reduced.initial_state,
    }
    if args.json:
        _emit(args, "pomdp convert", {"model": args.model, "sha256": digest},
              document, None, [], started, [])
    else:
        print(json.dumps(document, indent=2))
    return 0


def _cmd_simulate(args, started):
    model = _require_memdp(_load_model(args.model)[0])
    digest = _load_model(args.model)[1]
    obj = _require_priority(model)
    try:
        with open(args.strategy, "r", encoding="utf-8") as fh:
            strategy = strategy_from_json(fh.read())
    except OSError as exc:
        raise CliError(f"cannot read {args.strategy}: {exc}") from None
    if args.env not in model.environments:
        raise CliError(f"unknown environment {args.env!r}")
    start = args.start or model.states[0]
    if start not in model.states:
        raise CliError(f"unknown state {start!r}")
    est = mc_parity_estimate(model, args.env, strategy, start,
                             args.runs, args.horizon, args.seed, obj=obj)
    outputs = est.as_dict()
    lines = [f"estimate: {prob_str(est.estimate)} = {float(est.estimate):.6f}",
             f"stderr: {est.stderr:.6f}",
             f"absorbed: {est.absorbed}/{est.runs}",
             f"bias_bound: {prob_str(est.bias_bound)}"]
    if args.stats:
        prior = Belief.uniform(model.environments)
        agg_dstg = 0
        min_belief = {e: Fraction(1) for e in model.environments}
        nb_rev = {}
        for i in range(args.runs):
            run = sample_run(model, args.env, strategy, start, args.horizon,
                             args.seed, run_index=i)
            st = belief_trace_stats(run, prior, model)
            agg_dstg += st.nb_dstg
            for e, w in st.min_belief.items():
                if w < min_belief[e]:
                    min_belief[e] = w
            for k, v in st.nb_rev.items():
                nb_rev[k] = nb_rev.get(k, 0) + v
        outputs["stats"] = {
            "mean_nb_dstg": agg_dstg / args.runs,
            "min_belief": {e: prob_str(w) for e, w in sorted(min_belief.items())},
            "nb_rev_total": {f"{a}->{b}": v for (a, b), v in sorted(nb_rev.items())},
        }
        lines.append("stats: " + json.dumps(outputs["stats"]))
    _emit(args, "simulate", {"model": args.model, "sha256": digest,
                             "env": args.env, "runs": args.runs,
                             "horizon": args.horizon, "seed": args.seed},
          outputs, None, [], started, lines)
    return 0


# ---------------------------------------------------------------------------


def _build_parser():
    parser = _Parser(prog="memdp-solve",
                     description="Solvers for multi-environment MDPs with parity objectives")
    common = _Parser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("validate", parents=[common])
    p.add_argument("model")
    p.set_defaults(run=_cmd_validate)

    p = sub.add_parser("mdp-parity", parents=[common])
    p.add_argument("model")
    p.add_argument("--env", help="slice of a multi-environment model")
    p.add_argument("--method", choices=["exact", "float"], default="exact")
    p.set_defaults(run=_cmd_mdp_parity)

    p = sub.add_parser("prior-value", parents=[common])
    p.add_argument("model")
    p.add_argument("--belief", required=True, help="'uniform' or JSON {env: 'p/q'}")
    p.add_argument("--gamma", required=True, help="accuracy, rational p/q")
    p.add_argument("--max-depth", type=int, default=None,
                   help="cap the distinguishing-step budget (forfeits the guarantee)")
    p.add_argument("--state", help="restrict output to one state")
    p.set_defaults(run=_cmd_prior_value)

    p = sub.add_parser("gap", parents=[common])
    p.add_argument("model")
    p.add_argument("--belief", required=True)
    p.add_argument("--alpha", required=True)
    p.add_argument("--eps", required=True)
    p.add_argument("--state", help="state to decide for (default: first declared)")
    p.set_defaults(run=_cmd_gap)

    p = sub.add_parser("uni-value", parents=[common])
    p.add_argument("model")
    p.add_argument("--eps", required=True)
    p.add_argument("--method", choices=["grid", "bisect"], default="grid")
    p.add_argument("--state", help="state to evaluate (default: first declared)")
    p.add_argument("--parallel", type=int, default=None, help="grid worker processes")
    p.set_defaults(run=_cmd_uni_value)

    p = sub.add_parser("constants", parents=[common])
    p.add_argument("model")
    p.add_argument("--eps", required=True)
    p.set_defaults(run=_cmd_constants)

    p = sub.add_parser("pomdp", parents=[common])
    psub = p.add_subparsers(dest="pomdp_cmd", required=True)
    pc = psub.add_parser("check", parents=[common])
    pc.add_argument("model")
    pc.set_defaults(run=_cmd_pomdp_check)
    pv = psub.add_parser("convert", parents=[common])
    pv.add_argument("model")
    pv.add_argument("--belief", required=True, help="JSON {state: 'p/q'}")
    pv.set_defaults(run=_cmd_pomdp_convert)

    p = sub.add_parser("simulate", parents=[common])
    p.add_argument("model")
    p.add_argument("--env", required=True)
    p.add_argument("--strategy", required=True)
    p.add_argument("--runs", type=int, default=1000)
    p.add_argument("--horizon", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--start", help="start state (default: first declared)")
    p.add_argument("--stats", action="store_true", help="aggregate trace statistics")
    p.add_argument("--parallel", type=int, default=None)
    p.set_defaults(run=_cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    started = time.time()
    try:
        args = parser.parse_args(argv)
        return args.run(args, started)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SolverGuard as exc:
        print(f"solver guard: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
