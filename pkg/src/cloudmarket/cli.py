"""Command-line front end.

Exit codes: 0 success, 2 bad input (unreadable, malformed or invalid
document, bad flags), 3 no profitable price exists, 4 exhaustive search
over the cap. Results go to stdout; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import __version__
from .auction import run_vcg, vcg_payoff
from .bertrand import (
    ConvergenceError,
    DuopolyParams,
    UpdateSchedule,
    iterate_to_equilibrium,
    nash_equilibrium,
)
from .core import Contract, interval_stats
from .formats import (
    FormatError,
    contract_to_doc,
    dumps,
    load_auction,
    load_dag,
    load_scenario,
    load_workload,
    write_csv,
)
from .pricing import EPSILON, price
from .risk import DEFAULT_TV_RADIUS, RiskBounds, RiskParams, price_risk_aware
from .simulator import Metrics, run_market, sweep
from .taskgraph import (
    DEFAULT_SEARCH_CAP,
    SearchCapExceeded,
    linear_profit,
    price_exhaustive,
    price_fine_grained_dp,
    price_greedy,
)

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_CAP = 0, 2, 3, 4


class Infeasible(RuntimeError):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise FormatError(f"expected comma-separated numbers, got {text!r}") from None


# ---------------------------------------------------------------- price

def cmd_price(args) -> dict:
    w = load_workload(args.workload)
    try:
        task = w.task(args.task)
    except KeyError as exc:
        raise FormatError(f"{args.workload}: {exc.args[0]}") from None
    configs = task.configs
    if args.config is not None:
        configs = tuple(c for c in configs if c.id == args.config)
        if not configs:
            raise FormatError(f"{args.workload}: task {task.id!r} has no configuration {args.config!r}")
    u = w.utility(task)
    best = None
    for cfg in configs:
        stats = interval_stats(cfg.histogram, cfg.rate, task.targets)
        if args.risk_lambda > 0:
            coeffs = u.linear_coefficients()
            if coeffs is None or coeffs[0] != 0:
                raise FormatError(f"{args.workload}: risk-aware pricing needs a single linear utility piece")
            lo, hi = args.risk_bound
            bounds = RiskBounds.relative(stats, lo, hi, args.p_radius)
            outcome = price_risk_aware(stats, bounds, RiskParams(lam=args.risk_lambda, seed=args.seed),
                                       coeffs[1], coeffs[2], w.demand, args.epsilon, targets=task.targets)
        else:
            outcome = price(stats, u, w.demand, args.epsilon)
        key = (-outcome.overall_profit, cfg.rate, cfg.id)
        if best is None or key < best[0]:
            best = (key, cfg, stats, outcome)
    _, cfg, stats, outcome = best
    if outcome.overall_profit <= 0:
        raise Infeasible(f"no configuration of task {task.id!r} has positive demand at a positive markup")
    contract = Contract.from_stats(task.id, task.targets, stats, outcome.prices, {"configuration": cfg.id})
    return {
        "configuration": cfg.id,
        "contract": contract_to_doc(contract),
        "outcome": {
            "quoted_prices": contract.quoted_prices(),
            "expected_profit": outcome.expected_profit,
            "expected_demand": outcome.expected_demand,
            "overall_profit": outcome.overall_profit,
            "consumer_expected_utility": outcome.consumer_expected_utility,
        },
    }


# ---------------------------------------------------------------- plan

def cmd_plan(args) -> dict:
    g, (alpha_u, beta_u), demand = load_dag(args.dag)
    profit = linear_profit(alpha_u, beta_u, demand)
    if args.strategy == "dp":
        a = price_fine_grained_dp(g, profit, granularity=args.granularity)
    elif args.strategy == "greedy":
        a = price_greedy(g, profit)
    else:
        a = price_exhaustive(g, profit, cap=args.cap)
    return {
        "strategy": args.strategy,
        "choices": {n: {"option": k, "time": g.options[n][k].time, "cost": g.options[n][k].cost}
                    for n in g.nodes for k in (a.choices[n],)},
        "total_time": a.total_time,
        "total_cost": a.total_cost,
        "profit": a.profit,
    }


# ---------------------------------------------------------------- simulate

SWEEP_NAMES = {"estimator-k": "estimator_k", "risk-lambda": "risk_lambda",
               "vcg-delta": "vcg_delta", "benchmark-repetitions": "benchmark_repetitions"}
SWEEP_FIELDS = {
    "market": ("parameter", "value") + Metrics.AGENT_FIELDS,
    "vcg_delta": ("parameter", "value", "demand", "overall_profit"),
    "benchmark_repetitions": ("parameter", "value", "benchmark_utility", "agent_utility", "crossover"),
}


def cmd_simulate(args) -> str:
    sc = load_scenario(args.scenario, seed=args.seed)
    if args.sweep:
        name, values = args.sweep
        parameter = SWEEP_NAMES[name]
        values = _floats(values)
        try:
            rows = sweep(sc, parameter, values)
        except ValueError as exc:
            raise FormatError(f"{args.scenario}: {exc}") from None
        fields = SWEEP_FIELDS.get(parameter, SWEEP_FIELDS["market"])
        text = write_csv(rows, fields)
    else:
        metrics = run_market(sc)
        text = write_csv(metrics.rows, Metrics.ROW_FIELDS)
        if args.summary:
            with open(args.summary, "w", newline="") as fh:
                fh.write(write_csv(metrics.agents, Metrics.AGENT_FIELDS))
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
        return ""
    return text


# ---------------------------------------------------------------- vcg

def cmd_vcg(args) -> dict:
    bids, alpha_u, beta_u = load_auction(args.auction)
    outcome = run_vcg(bids, alpha_u, beta_u)
    winner = next(b for b in bids if b.agent == outcome.winner)
    doc = {
        "winner": outcome.winner,
        "delta": outcome.delta,
        "payment": {"intercepts": outcome.payment.intercepts, "slopes": outcome.payment.slopes},
        "winner_utility": outcome.winner_utility,
        "runner_up_utility": outcome.runner_up_utility,
        "utilities": outcome.utilities,
    }
    if winner.true_stats is not None:
        doc["winner_payoff"] = vcg_payoff(outcome, winner)
    return doc


# ---------------------------------------------------------------- bertrand

def _pair(values, name):
    if len(values) == 1:
        return (values[0], values[0])
    if len(values) == 2:
        return tuple(values)
    raise FormatError(f"--{name} takes one or two values")


def cmd_bertrand(args) -> dict:
    try:
        params = DuopolyParams(_pair(args.gamma, "gamma"), _pair(args.alpha, "alpha"), _pair(args.beta, "beta"))
    except ValueError as exc:
        raise FormatError(str(exc)) from None
    if args.schedule == "sync":
        schedule = UpdateSchedule.synchronized()
    elif args.schedule == "alternating":
        schedule = UpdateSchedule.alternating()
    else:
        schedule = UpdateSchedule.random(np.random.default_rng(args.seed))
    ne = nash_equilibrium(params)
    doc = {"nash_equilibrium": ne, "contraction": params.contraction}
    if params.contraction < 1:
        prices, steps = iterate_to_equilibrium(params, schedule, args.init, tol=args.tol, max_steps=args.max_steps)
        doc.update({"prices": prices, "steps": steps})
    return doc


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cloudmarket", description="Price and simulate cloud computation contracts.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("price", help="price one task of a workload file")
    sp.add_argument("workload")
    sp.add_argument("task")
    sp.add_argument("--config", help="price only this configuration")
    sp.add_argument("--risk-lambda", type=float, default=0.0)
    sp.add_argument("--risk-bound", type=float, nargs=2, metavar=("LO", "HI"), default=(-0.1, 0.1),
                    help="relative error box on expected times and costs")
    sp.add_argument("--p-radius", type=float, default=DEFAULT_TV_RADIUS)
    sp.add_argument("--epsilon", type=float, default=EPSILON)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(run=cmd_price)

    sp = sub.add_parser("plan", help="assign configurations to the subtasks of a DAG file")
    sp.add_argument("dag")
    sp.add_argument("--strategy", choices=("dp", "greedy", "search"), default="dp")
    sp.add_argument("--granularity", type=float, default=1.0)
    sp.add_argument("--cap", type=int, default=DEFAULT_SEARCH_CAP)
    sp.set_defaults(run=cmd_plan)

    sp = sub.add_parser("simulate", help="run a market scenario and emit CSV metrics")
    sp.add_argument("scenario")
    sp.add_argument("--out", help="CSV path (default: stdout)")
    sp.add_argument("--summary", help="also write per-agent totals to this CSV path")
    sp.add_argument("--sweep", nargs=2, metavar=("NAME", "VALUES"),
                    help=f"one of {', '.join(SWEEP_NAMES)} and comma-separated values")
    sp.add_argument("--seed", type=int, help="override the scenario seed")
    sp.set_defaults(run=cmd_simulate)

    sp = sub.add_parser("vcg", help="run a second-price auction over an auction file")
    sp.add_argument("auction")
    sp.set_defaults(run=cmd_vcg)

    sp = sub.add_parser("bertrand", help="duopoly equilibrium and best-response dynamics")
    sp.add_argument("--gamma", type=float, nargs="+", required=True)
    sp.add_argument("--alpha", type=float, nargs="+", required=True)
    sp.add_argument("--beta", type=float, nargs="+", required=True)
    sp.add_argument("--schedule", choices=("sync", "alternating", "random"), default="sync")
    sp.add_argument("--init", type=float, nargs=2, default=(0.0, 0.0))
    sp.add_argument("--tol", type=float, default=1e-9)
    sp.add_argument("--max-steps", type=int, default=10**6)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(run=cmd_bertrand)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "simulate" and args.sweep and args.sweep[0] not in SWEEP_NAMES:
        parser.error(f"unknown sweep {args.sweep[0]!r}; choose from {', '.join(SWEEP_NAMES)}")
    try:
        result = args.run(args)
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SearchCapExceeded as exc:
        print(f"search cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (ConvergenceError, ZeroDivisionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if isinstance(result, str):
        sys.stdout.write(result)
    else:
        sys.stdout.write(dumps(result) + "\n")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
