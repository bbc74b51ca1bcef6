"""Command-line entry point.

Subcommands: evt, stationary, condrew, analyze-graph, generate.  Exit codes:
0 success, 1 model or configuration error, 2 solver failure, 3 degenerate
query (e.g. an unreachable target).  JSON reports carry method, criterion,
epsilon, certification, iteration counts, and wall time in milliseconds;
wall time is the only non-deterministic field.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

from . import condrew as condrew_mod
from . import report
from . import solve as kernels
from .errors import EvtkitError, ModelError, QueryError, SolverError
from .evt import METHODS, AnalysisResult, EvtRequest, compute_evts
from .graph import decompose
from .model import parse_model, serialize_model
from .oracle import generate_fdr, generate_random_chain
from .scalars import FLOAT, INF, RATIONAL, format_value
from .stationary import STRATEGIES, stationary_distribution

EXIT_OK = 0
EXIT_MODEL = 1
EXIT_SOLVER = 2
EXIT_QUERY = 3

_ITERATIVE_DEFAULT_EPS = {"vi": 1e-6, "gs-vi": 1e-6}


def _add_common(parser, with_method=True):
    parser.add_argument("model", help="model file in the explicit text format")
    if with_method:
        parser.add_argument("--method", choices=METHODS, default="ii")
        parser.add_argument("--criterion", choices=kernels.CRITERIA, default="rel")
        parser.add_argument("--epsilon", type=float, default=None,
                            help="precision threshold (default 1e-3, VI 1e-6)")
        parser.add_argument("--max-iterations", type=int,
                            default=kernels.DEFAULT_MAX_ITERATIONS)
    parser.add_argument("--backend", choices=(FLOAT, RATIONAL), default=None,
                        help="numeric backend (default float; lu-exact implies rational)")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker cap for topological solving (env EVTKIT_THREADS)")
    parser.add_argument("--json", action="store_true", help="JSON report")
    parser.add_argument("--csv", action="store_true", help="delimited report")
    parser.add_argument("-o", "--output", default=None,
                        help="write the report to a file instead of stdout")
    parser.add_argument("--plot", default=None, metavar="PNG",
                        help="also render the result as a bar chart")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evtkit",
        description="Expected visiting times, stationary distributions, and "
                    "conditional rewards for finite Markov chains.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_evt = sub.add_parser("evt", help="expected visiting times per state")
    _add_common(p_evt)
    p_evt.add_argument("--topological", action="store_true",
                       help="solve SCC-by-SCC with a per-SCC error budget")

    p_st = sub.add_parser("stationary", help="stationary distribution")
    _add_common(p_st)
    p_st.add_argument("--strategy", choices=STRATEGIES, default="evt-full")
    p_st.add_argument("--topological", action="store_true")

    p_cr = sub.add_parser("condrew",
                          help="expected reward conditioned on each absorbing target")
    _add_common(p_cr)
    p_cr.add_argument("--reward", default=None, help="reward structure name")
    p_cr.add_argument("--target", action="append", default=None,
                      help="restrict to this target state (repeatable)")
    p_cr.add_argument("--topological", action="store_true")

    p_gr = sub.add_parser("analyze-graph", help="SCC statistics as JSON")
    _add_common(p_gr, with_method=False)

    p_gen = sub.add_parser("generate", help="emit benchmark models")
    gen_sub = p_gen.add_subparsers(dest="family", required=True)
    p_fdr = gen_sub.add_parser("fdr", help="fair-coin dice roller chain")
    p_fdr.add_argument("--n", type=int, required=True, help="number of faces")
    p_fdr.add_argument("-o", "--output", default=None)
    p_rnd = gen_sub.add_parser("random", help="seeded random chain")
    p_rnd.add_argument("--seed", type=int, required=True)
    p_rnd.add_argument("--states", type=int, required=True)
    p_rnd.add_argument("--density", type=float, default=0.4)
    p_rnd.add_argument("--bsccs", type=int, default=1)
    p_rnd.add_argument("--ctmc", action="store_true")
    p_rnd.add_argument("--reward", action="store_true",
                       help="attach a random reward structure")
    p_rnd.add_argument("-o", "--output", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "generate":
            return _run_generate(args)
        return _run_analysis(args)
    except ModelError as exc:
        print(f"evtkit: model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except SolverError as exc:
        print(f"evtkit: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except QueryError as exc:
        print(f"evtkit: query error: {exc}", file=sys.stderr)
        return EXIT_QUERY
    except EvtkitError as exc:
        print(f"evtkit: {exc}", file=sys.stderr)
        return EXIT_MODEL


def _run_generate(args) -> int:
    if args.family == "fdr":
        chain = generate_fdr(args.n)
    else:
        chain = generate_random_chain(
            args.seed, args.states, density=args.density,
            bscc_count=args.bsccs, ctmc=args.ctmc, reward=args.reward)
    text = serialize_model(chain)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {chain.n} states to {args.output}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("EVTKIT_THREADS")
    return max(1, int(env)) if env else 1


def _load(args, backend: str):
    with open(args.model, encoding="utf-8") as fh:
        return parse_model(fh.read(), backend)


def _pick_backend(args) -> str:
    method = getattr(args, "method", None)
    if method == "lu-exact":
        if args.backend == FLOAT:
            raise ModelError("lu-exact requires the rational backend")
        return RATIONAL
    return args.backend or FLOAT


def _pick_epsilon(args, backend: str):
    if args.epsilon is not None:
        eps = args.epsilon
    elif args.method in _ITERATIVE_DEFAULT_EPS:
        eps = _ITERATIVE_DEFAULT_EPS[args.method]
    elif args.method == "lu-exact" or (args.method == "lu" and backend == RATIONAL):
        eps = 0.0
    else:
        eps = 1e-3
    return eps


def _run_analysis(args) -> int:
    backend = _pick_backend(args)
    chain = _load(args, backend)
    started = time.perf_counter()

    if args.command == "analyze-graph":
        dec = decompose(chain)
        payload = {
            "command": "analyze-graph",
            "model": args.model,
            "scc_count": dec.n_sccs,
            "bscc_count": len(dec.bottom_sccs),
            "transient_states": len(dec.transient_states),
            "longest_nonbottom_chain": dec.longest_chain,
            "max_incoming_transitions": dec.max_incoming,
            "bsccs": [[chain.names[s] for s in dec.members[c]]
                      for c in dec.bottom_sccs],
            "wall_time_ms": _elapsed_ms(started),
        }
        _emit(args, payload, text=json.dumps(payload, indent=2))
        return EXIT_OK

    eps = _pick_epsilon(args, backend)
    threads = _threads(args)

    if args.command == "evt":
        result = compute_evts(EvtRequest(
            chain=chain, method=args.method, criterion=args.criterion,
            epsilon=eps, topological=args.topological,
            max_iterations=args.max_iterations, threads=threads))
        payload = _evt_payload(args, result, started)
        rows = [(name, result.values[i],
                 "yes" if result.certified else "no")
                for i, name in enumerate(result.names)]
        _emit(args, payload, csv_header=["state", "value", "certified"],
              csv_rows=rows,
              human=_human_values(result.names, result.values,
                                  _footer(payload)))
        if args.plot:
            report.render_bar_chart(result.names, result.values, args.plot,
                                    title="expected visiting times")
        return EXIT_OK

    if args.command == "stationary":
        if args.criterion != "rel":
            raise ModelError(
                "stationary certification is relative-only; drop --criterion")
        result = stationary_distribution(
            chain, strategy=args.strategy, method=args.method, epsilon=eps,
            topological=args.topological, threads=threads,
            max_iterations=args.max_iterations)
        payload = {
            "command": "stationary",
            "model": args.model,
            "strategy": result.strategy,
            "method": result.method,
            "criterion": "rel",
            "epsilon": float(eps),
            "backend": backend,
            "certified": result.certified_rel_error is not None,
            "certified_rel_error": _json_value(result.certified_rel_error),
            "iterations": result.iterations,
            "pi": {name: _json_value(v)
                   for name, v in zip(result.names, result.values)},
            "bscc_reach": {f"bscc{j}": _json_value(result.bscc_reach[c])
                           for j, c in enumerate(sorted(result.bscc_reach))},
            "bscc_members": {f"bscc{j}": result.bscc_members[c]
                             for j, c in enumerate(sorted(result.bscc_members))},
            "wall_time_ms": _elapsed_ms(started),
        }
        rows = [(name, v) for name, v in zip(result.names, result.values)]
        _emit(args, payload, csv_header=["state", "probability"], csv_rows=rows,
              human=_human_values(result.names, result.values,
                                  _footer(payload)))
        if args.plot:
            report.render_bar_chart(result.names, result.values, args.plot,
                                    title="stationary distribution",
                                    ylabel="probability")
        return EXIT_OK

    if args.command == "condrew":
        result = condrew_mod.conditional_rewards(
            chain, reward_name=args.reward, method=args.method, epsilon=eps,
            criterion=args.criterion, targets=args.target,
            topological=args.topological, max_iterations=args.max_iterations)
        payload = {
            "command": "condrew",
            "model": args.model,
            "reward": result.reward_name,
            "method": result.method,
            "criterion": args.criterion,
            "epsilon": float(eps),
            "backend": backend,
            "certified": result.intervals is not None
                         or _is_exact_cli(result.method, backend),
            "iterations": result.iterations,
            "values": {k: _json_value(v) for k, v in result.values.items()},
            "probability": {k: _json_value(v)
                            for k, v in result.probabilities.items()},
            "intervals": None if result.intervals is None else {
                k: [_json_value(lo), _json_value(hi)]
                for k, (lo, hi) in result.intervals.items()},
            "wall_time_ms": _elapsed_ms(started),
        }
        names = list(result.values)
        rows = [(k, result.values[k], result.probabilities[k]) for k in names]
        _emit(args, payload,
              csv_header=["target", "conditional_reward", "probability"],
              csv_rows=rows,
              human=_human_values(names, [result.values[k] for k in names],
                                  _footer(payload)))
        if args.plot:
            report.render_bar_chart(names, [result.values[k] for k in names],
                                    args.plot, title="conditional expected rewards")
        return EXIT_OK

    raise EvtkitError(f"unhandled command {args.command!r}")


def _evt_payload(args, result: AnalysisResult, started) -> dict:
    return {
        "command": "evt",
        "model": args.model,
        "method": result.method,
        "criterion": result.criterion,
        "epsilon": float(result.epsilon),
        "backend": result.backend,
        "topological": result.topological,
        "certified": result.certified,
        "certified_bound": _json_value(result.certified_bound),
        "iterations": result.iterations,
        "values": {
            name: {"value": _json_value(v), "certified": result.certified}
            for name, v in zip(result.names, result.values)
        },
        "wall_time_ms": _elapsed_ms(started),
    }


def _is_exact_cli(method: str, backend: str) -> bool:
    return method == "lu-exact" or (method == "lu" and backend == RATIONAL)


def _json_value(v):
    if v is None:
        return None
    if v == INF:
        return "inf"
    if isinstance(v, float):
        return v
    return format_value(v)


def _elapsed_ms(started) -> float:
    return round((time.perf_counter() - started) * 1000.0, 3)


def _footer(payload: dict) -> str:
    keys = ("method", "strategy", "criterion", "epsilon", "certified",
            "certified_bound", "certified_rel_error", "iterations")
    parts = [f"{k}={payload[k]}" for k in keys if k in payload]
    return " ".join(parts)


def _human_values(names, values, footer: str) -> str:
    width = max((len(n) for n in names), default=1)
    lines = [f"{n:<{width}}  {format_value(v)}" for n, v in zip(names, values)]
    lines.append(footer)
    return "\n".join(lines) + "\n"


def _emit(args, payload: dict, csv_header=None, csv_rows=None,
          human=None, text=None) -> None:
    if args.json:
        out = json.dumps(payload, indent=2) + "\n"
    elif args.csv and csv_header is not None:
        out = report.csv_text(csv_header, csv_rows)
    elif text is not None:
        out = text + "\n"
    else:
        out = human if human is not None else json.dumps(payload, indent=2) + "\n"
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(out)
    else:
        sys.stdout.write(out)


if __name__ == "__main__":
    sys.exit(main())
