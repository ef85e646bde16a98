"""Command-line interface for dialogpomdp.

Exit status is 0 on success, 2 for usage errors and 1 for any other failure,
which is reported as a single ``dialogpomdp: error: ...`` line on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import bn, formats
from .compare import CompareConfig, compare, grid_sim_beliefs
from .dialogue import PRESETS, DialogueParams, build_dialogue_model
from .model import ImpossibleObservation, belief_entropy, belief_update
from .policy import SimConfig, evaluate_avg_value, make_policy, simulate
from .solvers import GRID_STRATEGIES, METHODS, GridConfig, SolverConfig, solve

DEFAULT_EPOCHS = {"exact": 10, "grid": 30}


class CliError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dialogpomdp", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    s = sub.add_parser("solve", help="solve a model file and write a policy file")
    s.add_argument("--model", required=True)
    s.add_argument("--method", required=True, choices=METHODS)
    s.add_argument("--epochs", type=int, help="epoch cap (grid runs exactly this many)")
    s.add_argument("--tolerance", type=float, default=1e-6)
    s.add_argument("--grid-strategy", choices=GRID_STRATEGIES, default="fixed")
    s.add_argument("--grid-size", type=int, default=64)
    s.add_argument("--incremental", action="store_true")
    s.add_argument("--sim-beliefs", help="belief file (one belief per line) for the s-grid strategies")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)

    s = sub.add_parser("evaluate", help="average value of a policy over random beliefs")
    s.add_argument("--policy", required=True)
    s.add_argument("--points", type=int, default=10_000)
    s.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("simulate", help="run a policy against its model")
    s.add_argument("--model", required=True)
    s.add_argument("--policy", required=True)
    s.add_argument("--mode", required=True, choices=("dr", "la"))
    s.add_argument("--steps", type=int, default=10_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--report", help="report file (default: stdout)")
    s.add_argument("--beliefs-out", help="also write the belief trace (for --sim-beliefs)")

    s = sub.add_parser("compare", help="solve, evaluate and simulate several methods")
    s.add_argument("--model", required=True)
    s.add_argument("--methods", nargs="+", default=["mdp", "qmdp", "fib", "grid"], choices=METHODS)
    s.add_argument("--seeds", nargs="+", type=int, default=[0])
    s.add_argument("--steps", type=int, default=10_000)
    s.add_argument("--points", type=int, default=10_000)
    s.add_argument("--epochs", type=int, default=30, help="grid epochs")
    s.add_argument("--grid-strategy", choices=GRID_STRATEGIES, default="random-s-grid")
    s.add_argument("--grid-size", type=int, default=64)
    s.add_argument("--report", help="report file (default: stdout)")

    s = sub.add_parser("gen-model", help="write a dialogue model file")
    s.add_argument("--preset", required=True, choices=PRESETS)
    s.add_argument("--params", help="JSON file overriding dialogue parameters")
    s.add_argument("--out", required=True)

    s = sub.add_parser("bn-infer", help="posterior of one Bayesian-network node")
    s.add_argument("--net", required=True, help="net file or a shipped net name")
    s.add_argument("--evidence", nargs="*", default=[], metavar="NODE=VALUE")
    s.add_argument("--query", required=True)

    s = sub.add_parser("bn-extract", help="map evidence to a low-level observation")
    s.add_argument("--net", required=True, help="net file or a shipped net name")
    s.add_argument("--rule", required=True, choices=tuple(bn.RULES))
    s.add_argument("--evidence", nargs="*", default=[], metavar="NODE=VALUE")

    s = sub.add_parser("interact", help="track beliefs from typed observation labels")
    s.add_argument("--model", required=True)
    s.add_argument("--policy", required=True)
    s.add_argument("--mode", required=True, choices=("dr", "la"))
    s.add_argument("--top", type=int, default=5, help="states shown per turn")
    return p


def _write(path, text):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)


def _load_policy(path, model=None):
    vs = formats.read_policy(path)
    if model is not None:
        if vs.dim != model.n_states:
            raise CliError(f"policy has dimension {vs.dim} but the model has {model.n_states} states")
        if vs.action_names is not None and vs.action_names != model.actions:
            raise CliError("policy action names do not match the model")
    return vs


def _load_net(name):
    if os.path.exists(name):
        with open(name, encoding="utf-8") as f:
            return bn.parse_net(f.read())
    if name in bn.EXAMPLE_NETS:
        return bn.EXAMPLE_NETS[name]()
    raise CliError(f"no net file {name!r} (shipped nets: {', '.join(bn.EXAMPLE_NETS)})")


def cmd_solve(args):
    model = formats.read_model(args.model)
    epochs = args.epochs if args.epochs is not None else DEFAULT_EPOCHS.get(args.method, 10_000)
    cfg = SolverConfig(max_epochs=epochs, residual_tolerance=args.tolerance, seed=args.seed)
    grid_cfg = None
    if args.method == "grid":
        sims = None
        if args.grid_strategy.endswith("s-grid"):
            if args.sim_beliefs:
                sims = np.loadtxt(args.sim_beliefs, ndmin=2)
            else:
                # no belief file: take them from a seeded QMDP look-ahead run
                sims = grid_sim_beliefs(model, args.seed + 10_000, 2_000)
        grid_cfg = GridConfig(args.grid_strategy, args.grid_size, args.incremental, sims)
    res = solve(model, args.method, cfg, grid_cfg)
    formats.save_policy(res.vector_set, args.out)
    print(f"{args.method}: {len(res.vector_set)} vectors, {res.epochs} epochs "
          f"({res.terminated_by})")


def cmd_evaluate(args):
    vs = _load_policy(args.policy)
    print(repr(evaluate_avg_value(vs, args.points, args.seed)))


def cmd_simulate(args):
    model = formats.read_model(args.model)
    vs = _load_policy(args.policy, model)
    cfg = SimConfig(args.steps, args.seed, keep_trace=bool(args.beliefs_out))
    rep = simulate(model, make_policy(args.mode, vs, model), cfg)
    _write(args.report, formats.sim_report_tsv(rep))
    if args.beliefs_out:
        np.savetxt(args.beliefs_out, rep.belief_trace, fmt="%.17g")


def cmd_compare(args):
    model = formats.read_model(args.model)
    cfg = CompareConfig(tuple(args.methods), tuple(args.seeds), args.steps, args.points,
                        args.grid_strategy, args.grid_size, args.epochs)
    _write(args.report, formats.compare_tsv(compare(model, cfg)))


def cmd_gen_model(args):
    overrides = {}
    if args.params:
        with open(args.params, encoding="utf-8") as f:
            overrides = json.load(f)
        if not isinstance(overrides, dict):
            raise CliError("--params must hold a JSON object")
        overrides.pop("preset", None)
    try:
        params = DialogueParams.preset_params(args.preset, **overrides)
    except TypeError as e:
        raise CliError(f"bad dialogue parameter: {e}") from None
    model = build_dialogue_model(params)
    formats.save_model(model, args.out)
    print(f"{model.name}: {model.n_states} states, {model.n_actions} actions, "
          f"{model.n_observations} observations")


def cmd_bn_infer(args):
    net = _load_net(args.net)
    ev = bn.parse_evidence_pairs(args.evidence)
    for value, p in bn.infer_posterior(net, ev, args.query).items():
        print(f"{args.query}={value}\t{p!r}")


def cmd_bn_extract(args):
    net = _load_net(args.net)
    res = bn.extract_observation(net, bn.RULES[args.rule], bn.parse_evidence_pairs(args.evidence))
    print(f"observation\t{res.label}")
    print(f"p_channel\t{res.p_channel!r}")
    print(f"p_signal\t{res.p_signal!r}")
    if res.defers_to_parser:
        print("note\tchannel and signal present: the utterance parser decides the observation")


def cmd_interact(args, stdin=None, out=None):
    stdin = stdin or sys.stdin
    out = out or sys.stdout
    model = formats.read_model(args.model)
    policy = make_policy(args.mode, _load_policy(args.policy, model), model)
    b = model.initial_belief.copy()
    while True:
        top = np.argsort(-b, kind="stable")[:max(1, args.top)]
        out.write("belief: " + ", ".join(f"{model.states[s]}={b[s]:.3f}" for s in top)
                  + f"  (entropy {belief_entropy(b):.3f})\n")
        a = policy(b)
        out.write(f"action: {model.actions[a]}\n")
        while True:
            out.write("observation> ")
            out.flush()
            line = stdin.readline()
            if not line or line.strip() == "quit":
                return
            label = line.strip()
            if label not in model.observations:
                out.write(f"unknown observation {label!r}; one of: {' '.join(model.observations)}\n")
                continue
            try:
                b = belief_update(model, b, a, model.observation_index(label))
            except ImpossibleObservation:
                out.write(f"{label} is impossible after {model.actions[a]}; belief unchanged\n")
                continue
            break


COMMANDS = {
    "solve": cmd_solve, "evaluate": cmd_evaluate, "simulate": cmd_simulate,
    "compare": cmd_compare, "gen-model": cmd_gen_model, "bn-infer": cmd_bn_infer,
    "bn-extract": cmd_bn_extract, "interact": cmd_interact,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except (CliError, ValueError, LookupError, OSError) as e:
        msg = str(e).splitlines()[0] if str(e) else type(e).__name__
        print(f"dialogpomdp: error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
