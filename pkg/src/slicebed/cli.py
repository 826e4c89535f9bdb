"""Command-line interface.

Subcommands: gen, validate, solve, simulate, compare, dump-expanded.
Exit codes: 0 success, 1 a solve was blocked, 2 input/usage error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from .model import (Blocked, ResidualState, ScenarioError, UntrustableRequest,
                    allowed_operators, check_embedding, embedding_to_dict,
                    load_request, load_scenario, scenario_from_dict)
from .pricing import PricingPolicy, PriceSnapshot
from .embed_nl import solve_nl
from .embed_pl import solve_pl
from .sim import (ScenarioGen, Workload, compare, config_hash,
                  generate_scenario, run, write_comparison, write_run_outputs)


def _parse_seeds(text: str) -> list[int]:
    if ".." in text:
        a, b = text.split("..", 1)
        lo, hi = int(a), int(b)
        if hi < lo:
            raise ValueError(f"empty seed range {text!r}")
        return list(range(lo, hi + 1))
    return [int(text)]


def _parse_range(text: str) -> tuple[int, int]:
    if ".." in text:
        a, b = text.split("..", 1)
        return (int(a), int(b))
    v = int(text)
    return (v, v)


def _add_workload_flags(p):
    p.add_argument("--lambda", dest="rate", type=float, default=None,
                   help="arrival rate (slices per time unit)")
    p.add_argument("--holding", type=float, default=None, help="mean holding time")
    p.add_argument("--horizon", type=float, default=None, help="simulated horizon")


def _add_engine_flags(p, repeatable=False):
    kwargs = {"action": "append"} if repeatable else {}
    p.add_argument("--engine", choices=["nl", "pl"], default=None,
                   help="embedding engine", **kwargs)
    p.add_argument("--pricing", choices=["static", "kleinrock"], default=None,
                   help="pricing mode (default: scenario setting)")
    p.add_argument("--k-paths", dest="k", type=int, default=8,
                   help="candidate paths per service (pl engine)")
    p.add_argument("--time-limit-ms", dest="time_limit_ms", type=float,
                   default=None, help="per-solve time limit")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="slicebed",
        description="Trust-aware multi-domain network slice embedding: "
                    "exact and path-based ILP engines with an online simulator.")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a random multi-operator scenario")
    g.add_argument("--out", required=True, help="output scenario JSON path")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--operators", type=int, default=3)
    g.add_argument("--nodes-per-op", default="8..12", metavar="A..B")
    g.add_argument("--pi", type=float, default=0.6,
                   help="inter-operator link probability")
    g.add_argument("--rho", type=float, default=0.6,
                   help="target utilization regime (0.3/0.6/0.8/0.95)")
    g.add_argument("--trust-density", type=float, default=0.7)
    g.add_argument("--border-nodes", type=int, default=2)
    _add_workload_flags(g)

    v = sub.add_parser("validate", help="check a scenario file")
    v.add_argument("--scenario", required=True)

    s = sub.add_parser("solve", help="embed one slice request")
    s.add_argument("--scenario", required=True)
    s.add_argument("--request", required=True, help="slice request JSON path")
    _add_engine_flags(s, repeatable=True)
    s.add_argument("--out", default=None,
                   help="directory for embedding_<engine>.json files")

    m = sub.add_parser("simulate", help="run the online simulator")
    m.add_argument("--scenario", required=True)
    _add_engine_flags(m)
    _add_workload_flags(m)
    m.add_argument("--seed", type=int, default=None)
    m.add_argument("--seeds", default=None, metavar="A..B",
                   help="inclusive seed range, one run per seed")
    m.add_argument("--out", default="runs", help="directory for run outputs")
    m.add_argument("--events", action="store_true",
                   help="write per-event trace events.jsonl")
    m.add_argument("--check-conservation", action="store_true",
                   help="verify the resource ledger at every event")

    c = sub.add_parser("compare",
                       help="run several engine/pricing configs on one trace")
    c.add_argument("--scenario", required=True)
    c.add_argument("--engine", choices=["nl", "pl"], action="append",
                   default=None, help="repeatable; default: nl and pl")
    c.add_argument("--pricing", choices=["static", "kleinrock"], action="append",
                   default=None, help="repeatable; default: scenario setting")
    c.add_argument("--k-paths", dest="k", type=int, default=8)
    c.add_argument("--time-limit-ms", dest="time_limit_ms", type=float, default=None)
    _add_workload_flags(c)
    c.add_argument("--seed", type=int, default=None)
    c.add_argument("--out", default="runs")

    d = sub.add_parser("dump-expanded",
                       help="write the layered search graph as DOT")
    d.add_argument("--scenario", required=True)
    d.add_argument("--request", required=True)
    d.add_argument("--service", type=int, default=None,
                   help="service id (default: first)")
    d.add_argument("--out", default=None, help="output path (default: stdout)")

    return ap


def _cmd_gen(args) -> int:
    gen = ScenarioGen(
        operators=args.operators,
        nodes_per_operator=_parse_range(args.nodes_per_op),
        inter_op_prob=args.pi,
        rho=args.rho,
        trust_density=args.trust_density,
        border_nodes=args.border_nodes,
        rate=args.rate if args.rate is not None else 2.0,
        holding=args.holding if args.holding is not None else 10.0,
        horizon=args.horizon if args.horizon is not None else 200.0,
    )
    doc = generate_scenario(gen, args.seed)
    scenario_from_dict(doc)     # self-check before writing
    with open(args.out, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    scn = scenario_from_dict(doc)
    print(f"wrote {args.out}: {len(scn.net.nodes)} nodes, "
          f"{len(scn.net.links)} directed links, "
          f"{len(scn.net.operators)} operators")
    return 0


def _cmd_validate(args) -> int:
    scn = load_scenario(args.scenario)
    n_fn = len(scn.net.function_nodes)
    print(f"ok: {len(scn.net.nodes)} nodes ({n_fn} function), "
          f"{len(scn.net.links)} directed links, "
          f"{len(scn.net.operators)} operators, {len(scn.vnfs)} vnfs, "
          f"{len(scn.slice_types)} slice types")
    return 0


def _cmd_solve(args) -> int:
    scn = load_scenario(args.scenario)
    request = load_request(args.request, scn)
    engines = args.engine or ["nl"]
    policy = PricingPolicy.from_config(
        {**scn.pricing, **({"mode": args.pricing} if args.pricing else {})})

    any_blocked = False
    results = {}
    for engine in engines:
        state = ResidualState(scn.net)
        snapshot = PriceSnapshot(policy, scn.net, state)
        if engine == "nl":
            outcome = solve_nl(scn.net, scn.trust, state, request, snapshot,
                               time_limit_ms=args.time_limit_ms)
        else:
            outcome = solve_pl(scn.net, scn.trust, state, request, snapshot,
                               args.k, time_limit_ms=args.time_limit_ms)
        results[engine] = outcome
        if isinstance(outcome, Blocked):
            any_blocked = True
            detail = f" ({outcome.detail})" if outcome.detail else ""
            print(f"{engine}: blocked: {outcome.reason}{detail}")
            continue
        violations = check_embedding(scn.net, scn.trust, state, request, outcome)
        if violations:
            raise ScenarioError(
                f"{engine}: embedding failed verification: {violations[0]}")
        worst = max((s.latency for s in outcome.services), default=0.0)
        print(f"{engine}: cost {outcome.total_cost:.6g}  "
              f"max service latency {worst:.6g}  "
              f"{'optimal' if outcome.optimal else 'incumbent (time limit)'}")
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            path = os.path.join(args.out, f"embedding_{engine}.json")
            with open(path, "w") as fh:
                json.dump(embedding_to_dict(outcome), fh, indent=2, sort_keys=True)
                fh.write("\n")
    if {"nl", "pl"} <= set(results):
        nl_r, pl_r = results["nl"], results["pl"]
        if not isinstance(nl_r, Blocked) and not isinstance(pl_r, Blocked):
            gap = pl_r.total_cost - nl_r.total_cost
            rel = gap / nl_r.total_cost if nl_r.total_cost else 0.0
            print(f"pl-vs-nl gap: {gap:.6g} ({100 * rel:.2f}%)")
    return 1 if any_blocked else 0


def _run_config_doc(args, scn_doc, seed) -> dict:
    return {
        "scenario_sha": config_hash(scn_doc),
        "engine": args.engine or "pl",
        "pricing": args.pricing,
        "k": args.k,
        "lambda": args.rate,
        "holding": args.holding,
        "horizon": args.horizon,
        "seed": seed,
        "time_limit_ms": args.time_limit_ms,
    }


def _cmd_simulate(args) -> int:
    with open(args.scenario) as fh:
        scn_doc = json.load(fh)
    scn = scenario_from_dict(scn_doc)
    if args.seed is not None and args.seeds is not None:
        raise ScenarioError("--seed and --seeds are mutually exclusive")
    seeds = _parse_seeds(args.seeds) if args.seeds else \
        [args.seed if args.seed is not None else
         int(scn.workload.get("seed", 0))]
    policy = PricingPolicy.from_config(
        {**scn.pricing, **({"mode": args.pricing} if args.pricing else {})})
    engine = args.engine or "pl"
    for seed in seeds:
        workload = Workload.from_scenario(
            scn, **{"lambda": args.rate, "holding": args.holding,
                    "horizon": args.horizon, "seed": seed})
        metrics = run(scn, workload, engine=engine, pricing=policy, k=args.k,
                      time_limit_ms=args.time_limit_ms,
                      collect_events=args.events,
                      check_conservation=args.check_conservation)
        config = _run_config_doc(args, scn_doc, seed)
        run_dir = os.path.join(args.out, f"{config_hash(config)}-s{seed}")
        write_run_outputs(run_dir, metrics, config)
        print(f"seed {seed}: offered {metrics.offered_total()} "
              f"blocked {metrics.blocked_total()} "
              f"p_block {metrics.blocking_probability():.4f} "
              f"mean_cost {metrics.mean_accepted_cost():.6g} -> {run_dir}")
    return 0


def _cmd_compare(args) -> int:
    with open(args.scenario) as fh:
        scn_doc = json.load(fh)
    scenario_from_dict(scn_doc)     # validate early
    engines = args.engine or ["nl", "pl"]
    pricings = args.pricing or [None]
    configs = []
    for engine in engines:
        for pricing in pricings:
            label = engine + (f"-{pricing}" if pricing else "")
            configs.append({
                "label": label, "engine": engine, "pricing": pricing,
                "k": args.k, "lambda": args.rate, "holding": args.holding,
                "horizon": args.horizon, "seed": args.seed,
                "time_limit_ms": args.time_limit_ms,
                "scenario_sha": config_hash(scn_doc),
            })
    if len(configs) < 2:
        raise ScenarioError("compare needs at least 2 configs "
                            "(repeat --engine/--pricing)")
    results = compare(scn_doc, configs, out_dir=args.out)
    os.makedirs(args.out, exist_ok=True)
    out_csv = os.path.join(args.out, "comparison.csv")
    write_comparison(out_csv, results)
    for label, _, metrics, run_dir in results:
        print(f"{label}: offered {metrics.offered_total()} "
              f"blocked {metrics.blocked_total()} "
              f"p_block {metrics.blocking_probability():.4f} "
              f"mean_cost {metrics.mean_accepted_cost():.6g}")
    print(f"wrote {out_csv}")
    return 0


def _cmd_dump_expanded(args) -> int:
    from .expand import UnreachableEndpoints, build_expanded, to_dot

    scn = load_scenario(args.scenario)
    request = load_request(args.request, scn)
    services = {s.id: s for s in request.services}
    if args.service is None:
        svc = request.services[0]
    elif args.service in services:
        svc = services[args.service]
    else:
        raise ScenarioError(f"request has no service id {args.service}")
    state = ResidualState(scn.net)
    policy = PricingPolicy.from_config(scn.pricing)
    snapshot = PriceSnapshot(policy, scn.net, state)
    try:
        allowed = allowed_operators(request, scn.trust)
        exp = build_expanded(scn.net, svc, request, allowed, snapshot)
    except UntrustableRequest as exc:
        print(f"blocked: untrustable_request ({exc})", file=sys.stderr)
        return 1
    except UnreachableEndpoints as exc:
        print(f"blocked: unreachable_endpoints ({exc})", file=sys.stderr)
        return 1
    text = to_dot(exp)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(f"wrote {args.out}: {exp.num_nodes} nodes, {exp.num_edges} edges")
    else:
        print(text)
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "validate": _cmd_validate,
    "solve": _cmd_solve,
    "simulate": _cmd_simulate,
    "compare": _cmd_compare,
    "dump-expanded": _cmd_dump_expanded,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ScenarioError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
