"""Seeded market simulation on synthetic workloads.

Agents price each task, consumers accept a number of contracts given by the
demand curve, and every accepted contract is executed by sampling the true
completion-time histogram and settling the price schedule at that time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .core import (
    CompletionHistogram,
    Configuration,
    DemandCurve,
    PiecewiseUtility,
    cosine_similarity,
    interval_stats,
)
from .pricing import EPSILON, PricingOutcome, evaluate, price_linear
from .risk import RiskBounds, RiskParams, price_risk_aware
from .taskgraph import Option, TaskGraph

AGENT_KINDS = ("naive", "expert", "heuristic", "estimator", "risk_aware")
SWEEPS = ("estimator_k", "risk_lambda", "vcg_delta", "benchmark_repetitions")
INTENSITIES = ("cpu", "io")


@dataclass(frozen=True)
class Task:
    id: str
    configs: tuple[Configuration, ...]
    targets: tuple[float, ...]
    intensity: str | None = None

    def __post_init__(self):
        if not self.configs:
            raise ValueError(f"task {self.id!r} has no configurations")
        ids = [c.id for c in self.configs]
        if len(set(ids)) != len(ids):
            raise ValueError(f"task {self.id!r} has duplicate configuration ids")
        object.__setattr__(self, "configs", tuple(self.configs))
        object.__setattr__(self, "targets", tuple(float(t) for t in self.targets))

    def config(self, config_id: str) -> Configuration:
        for c in self.configs:
            if c.id == config_id:
                return c
        raise KeyError(f"task {self.id!r} has no configuration {config_id!r}")


@dataclass(frozen=True)
class AgentModel:
    """How one agent estimates and prices.

    ``k`` scales the agent's estimate of every completion time (and so of
    every cost); ``sigma`` is the relative spread of its Gaussian estimate.
    Risk-aware agents estimate like estimators and then hedge over a box of
    ``[bound_lo, bound_hi]`` times their estimated times and costs.
    """

    name: str
    kind: str
    config_id: str | None = None
    k: float = 1.0
    sigma: float = 0.05
    risk_lambda: float = 0.0
    bound_lo: float = -0.3
    bound_hi: float = 0.3
    p_radius: float = 0.2

    def __post_init__(self):
        if self.kind not in AGENT_KINDS:
            raise ValueError(f"unknown agent kind {self.kind!r}; expected one of {AGENT_KINDS}")
        if self.kind == "naive" and self.config_id is None:
            raise ValueError(f"naive agent {self.name!r} needs a configuration id")
        if self.k <= 0:
            raise ValueError("estimate coefficient must be positive")
        if self.sigma < 0 or self.risk_lambda < 0:
            raise ValueError("sigma and risk weight must be nonnegative")

    @property
    def estimates(self) -> bool:
        return self.kind in ("estimator", "risk_aware")


@dataclass(frozen=True)
class Scenario:
    seed: int
    tasks: tuple[Task, ...]
    agents: tuple[AgentModel, ...]
    demand: DemandCurve = DemandCurve(1000.0, 1.0)
    alpha_u: float = 1.0
    beta_u: float = 1.0
    eps: float = EPSILON
    max_trials: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))
        object.__setattr__(self, "agents", tuple(self.agents))
        names = [a.name for a in self.agents]
        if len(set(names)) != len(names):
            raise ValueError("agent names must be unique")
        for a in self.agents:
            if a.kind == "naive":
                for t in self.tasks:
                    t.config(a.config_id)

    def utility(self, targets) -> PiecewiseUtility:
        return PiecewiseUtility.linear(self.alpha_u, self.beta_u, targets)


@dataclass
class Metrics:
    """Per-(agent, task) rows plus per-agent summaries."""

    rows: list[dict] = field(default_factory=list)
    agents: list[dict] = field(default_factory=list)

    ROW_FIELDS = ("agent", "task", "config", "markup", "expected_profit", "demand", "trials",
                  "overall_profit", "profit", "offered_utility", "utility", "optimal_profit",
                  "relative_loss", "similarity")
    AGENT_FIELDS = ("agent", "kind", "overall_profit", "profit", "offered_utility", "utility",
                    "relative_utility", "mean_relative_loss")


def relative_loss(optimal: float, actual: float) -> float:
    """Share of the optimal profit that was lost."""
    if optimal <= 0:
        raise ValueError(f"relative loss needs a positive optimal profit, got {optimal}")
    return (optimal - actual) / optimal


# ---------------------------------------------------------------- generators

def _check_range(name, lo_hi, positive=True):
    lo, hi = (float(x) for x in lo_hi)
    if lo > hi or lo < 0 or (positive and hi <= 0):
        raise ValueError(f"{name} must satisfy 0 <= lo <= hi with hi > 0, got {lo_hi}")
    return lo, hi


def generate_synthetic_workload(seed: int, n_tasks: int, n_configs: int = 5,
                                mean_range=(1.0, 100.0), var_range=(0.0, 5.0),
                                rate_range=(0.5, 5.0), step: float = 0.1) -> tuple[Task, ...]:
    """Tasks whose configurations have truncated-Gaussian completion times.

    Each task's single deadline is the average of its configurations' mean
    completion times, and each configuration carries random cpu/io scores
    used by the heuristic agent.
    """
    if n_tasks < 1 or n_configs < 1:
        raise ValueError("need at least one task and one configuration")
    mean_lo, mean_hi = _check_range("mean_range", mean_range)
    var_lo, var_hi = _check_range("var_range", var_range, positive=False)
    rate_lo, rate_hi = _check_range("rate_range", rate_range)
    if rate_lo <= 0:
        raise ValueError("rates must be positive")
    rng = np.random.default_rng(seed)
    tasks = []
    for i in range(n_tasks):
        configs = []
        for j in range(n_configs):
            mean = rng.uniform(mean_lo, mean_hi)
            std = math.sqrt(rng.uniform(var_lo, var_hi))
            rate = rng.uniform(rate_lo, rate_hi)
            scores = rng.random(2)
            hist = CompletionHistogram.from_gaussian(mean, std, step=step)
            configs.append(Configuration(f"c{j}", rate, hist, {"cpu": float(scores[0]), "io": float(scores[1])}))
        deadline = float(np.mean([c.histogram.mean() for c in configs]))
        intensity = INTENSITIES[int(rng.integers(0, 2))]
        tasks.append(Task(f"t{i:03d}", tuple(configs), (0.0, deadline, math.inf), intensity))
    return tuple(tasks)


def generate_synthetic_dag(seed: int, n_nodes: int, edge_density: float = 0.02, n_options: int = 5,
                           time_range=(1.0, 100.0), rate_range=(0.5, 5.0)) -> TaskGraph:
    """Random DAG: each forward pair ``i < j`` becomes an edge with probability ``edge_density``.

    Option times are drawn from ``time_range`` and costs are time times a
    random rate, both rounded to 0.1. The default density gives about 1.5
    predecessors per node at 154 nodes, similar to real workflow graphs.
    """
    if n_nodes < 1:
        raise ValueError("a DAG needs at least one node")
    if not 0 <= edge_density <= 1:
        raise ValueError("edge density must lie in [0, 1]")
    t_lo, t_hi = _check_range("time_range", time_range)
    r_lo, r_hi = _check_range("rate_range", rate_range)
    rng = np.random.default_rng(seed)
    width = max(3, len(str(n_nodes - 1)))
    nodes = tuple(f"q{i:0{width}d}" for i in range(n_nodes))
    mask = np.triu(rng.random((n_nodes, n_nodes)) < edge_density, k=1)
    edges = tuple((nodes[i], nodes[j]) for i, j in zip(*np.nonzero(mask)))
    times = np.round(rng.uniform(t_lo, t_hi, (n_nodes, n_options)), 1)
    costs = np.round(times * rng.uniform(r_lo, r_hi, (n_nodes, n_options)), 1)
    options = {n: tuple(Option(float(t), float(c)) for t, c in zip(times[i], costs[i]))
               for i, n in enumerate(nodes)}
    return TaskGraph(nodes, edges, options)


def perfect_scenario(seed: int, n_tasks: int = 20, n_configs: int = 5, **kwargs) -> Scenario:
    """One expert and one naive agent per configuration, all with exact estimates."""
    tasks = generate_synthetic_workload(seed, n_tasks, n_configs)
    agents = [AgentModel("expert", "expert")]
    agents += [AgentModel(f"naive-{c.id}", "naive", config_id=c.id) for c in tasks[0].configs]
    return Scenario(seed, tasks, tuple(agents), **kwargs)


# ---------------------------------------------------------------- pricing per agent

def estimate_histogram(hist: CompletionHistogram, k: float, sigma: float, step: float = 0.1) -> CompletionHistogram:
    """Agent's Gaussian belief: mean ``k`` times the true mean, spread ``sigma`` of that."""
    mean = k * hist.mean()
    return CompletionHistogram.from_gaussian(mean, sigma * mean, step=step)


@dataclass(frozen=True)
class Offer:
    config: Configuration
    belief: CompletionHistogram
    outcome: PricingOutcome      # as the agent sees it


def _menu(agent: AgentModel, task: Task) -> tuple[Configuration, ...]:
    if agent.kind == "naive":
        return (task.config(agent.config_id),)
    if agent.kind == "heuristic":
        tag = task.intensity or INTENSITIES[0]
        best = max(task.configs, key=lambda c: (c.tags.get(tag, -math.inf), -c.rate))
        return (best,)
    return task.configs


def make_offer(agent: AgentModel, task: Task, sc: Scenario) -> Offer:
    """The agent's chosen configuration and its prices for ``task``."""
    best = None
    for cfg in _menu(agent, task):
        belief = estimate_histogram(cfg.histogram, agent.k, agent.sigma) if agent.estimates else cfg.histogram
        stats = interval_stats(belief, cfg.rate, task.targets)
        if agent.kind == "risk_aware" and agent.risk_lambda > 0:
            bounds = RiskBounds.relative(stats, agent.bound_lo, agent.bound_hi, agent.p_radius)
            outcome = price_risk_aware(stats, bounds, RiskParams(lam=agent.risk_lambda, seed=sc.seed),
                                       sc.alpha_u, sc.beta_u, sc.demand, sc.eps, targets=task.targets)
        else:
            outcome = price_linear(stats, sc.alpha_u, sc.beta_u, sc.demand, sc.eps, targets=task.targets)
        key = (-outcome.overall_profit, cfg.rate, cfg.id)
        if best is None or key < best[0]:
            best = (key, Offer(cfg, belief, outcome))
    return best[1]


def optimal_profit(task: Task, configs: Sequence[Configuration], sc: Scenario) -> float:
    """Best overall profit over ``configs`` when pricing on true statistics."""
    return max(price_linear(interval_stats(c.histogram, c.rate, task.targets), sc.alpha_u, sc.beta_u,
                            sc.demand, sc.eps, targets=task.targets).overall_profit for c in configs)


# ---------------------------------------------------------------- market

def _rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng([seed, *keys])


def run_market(sc: Scenario) -> Metrics:
    metrics = Metrics()
    totals: dict[str, dict] = {}
    for a_idx, agent in enumerate(sc.agents):
        acc = totals.setdefault(agent.name, {"overall_profit": 0.0, "profit": 0.0, "offered_utility": 0.0,
                                             "utility": 0.0, "losses": []})
        for t_idx, task in enumerate(sc.tasks):
            row = _trade(agent, task, sc, _rng(sc.seed, a_idx, t_idx))
            metrics.rows.append(row)
            acc["overall_profit"] += row["overall_profit"]
            acc["profit"] += row["profit"]
            acc["offered_utility"] += row["offered_utility"]
            acc["utility"] += row["utility"]
            if not math.isnan(row["relative_loss"]):
                acc["losses"].append(row["relative_loss"])
    expert = next((a.name for a in sc.agents if a.kind == "expert"), None)
    for agent in sc.agents:
        acc = totals[agent.name]
        ref = totals[expert]["offered_utility"] if expert else math.nan
        rel = (acc["offered_utility"] - ref) / abs(ref) if expert and ref != 0 else math.nan
        metrics.agents.append({
            "agent": agent.name, "kind": agent.kind,
            "overall_profit": acc["overall_profit"], "profit": acc["profit"],
            "offered_utility": acc["offered_utility"], "utility": acc["utility"],
            "relative_utility": rel,
            "mean_relative_loss": float(np.mean(acc["losses"])) if acc["losses"] else math.nan,
        })
    return metrics


def _trade(agent: AgentModel, task: Task, sc: Scenario, rng: np.random.Generator) -> dict:
    offer = make_offer(agent, task, sc)
    cfg, prices = offer.config, offer.outcome.prices
    u = sc.utility(task.targets)
    truth = evaluate(prices, interval_stats(cfg.histogram, cfg.rate, task.targets), u, sc.demand)
    # consumers react to what the contract promises
    n = int(round(max(0.0, offer.outcome.expected_demand)))
    if offer.outcome.expected_profit <= 0:
        n = 0
    if sc.max_trials is not None:
        n = min(n, sc.max_trials)
    profit = utility = 0.0
    if n:
        times = cfg.histogram.sample(rng, n)
        paid = prices.settle(times)
        profit = float(np.sum(paid - cfg.rate * times))
        utility = float(np.mean(u.evaluate_many(times, paid)))
    optimal = optimal_profit(task, _menu(agent, task), sc)
    return {
        "agent": agent.name, "task": task.id, "config": cfg.id,
        "markup": offer.outcome.markup,
        "expected_profit": truth.expected_profit,
        "demand": offer.outcome.expected_demand,
        "trials": n,
        "overall_profit": truth.overall_profit,
        "profit": profit,
        "offered_utility": offer.outcome.consumer_expected_utility,
        "utility": utility,
        "optimal_profit": optimal,
        "relative_loss": relative_loss(optimal, truth.overall_profit) if optimal > 0 else math.nan,
        "similarity": cosine_similarity(offer.belief, cfg.histogram),
    }


# ---------------------------------------------------------------- sweeps

def benchmark_crossover(best_utility: float, config_utilities: Sequence[float], agent_utility: float) -> float:
    """Repetitions after which trying every configuration once pays off.

    The benchmarking consumer spends one run per configuration and then
    repeats the best; the agent's consumer gets ``agent_utility`` every time.
    Returns ``inf`` when the agent is at least as good as the best
    configuration.
    """
    gap = best_utility - agent_utility
    if gap <= 0:
        return math.inf
    exploration = float(np.sum(best_utility - np.asarray(config_utilities, dtype=float)))
    return float(max(len(config_utilities), math.ceil(exploration / gap - 1e-12)))


def _raw_utilities(task: Task, sc: Scenario) -> np.ndarray:
    u = sc.utility(task.targets)
    out = []
    for c in task.configs:
        s = interval_stats(c.histogram, c.rate, task.targets)
        out.append(float(np.dot(s.p, u.per_interval(s.that, s.c))))
    return np.array(out)


def _market_rows(sc: Scenario, parameter: str, value: float) -> list[dict]:
    return [{"parameter": parameter, "value": value, **row} for row in run_market(sc).agents]


def sweep(sc: Scenario, parameter: str, values: Sequence[float]) -> list[dict]:
    """One block of metric rows per value of ``parameter``."""
    if parameter not in SWEEPS:
        raise ValueError(f"unknown sweep parameter {parameter!r}; expected one of {SWEEPS}")
    rows: list[dict] = []
    if parameter in ("estimator_k", "risk_lambda"):
        kinds = ("estimator", "risk_aware") if parameter == "estimator_k" else ("risk_aware",)
        if not any(a.kind in kinds for a in sc.agents):
            raise ValueError(f"sweep {parameter!r} needs an agent of kind {' or '.join(kinds)}")
        attr = "k" if parameter == "estimator_k" else "risk_lambda"
        for v in values:
            agents = tuple(replace(a, **{attr: float(v)}) if a.kind in kinds else a for a in sc.agents)
            rows += _market_rows(replace(sc, agents=agents), parameter, float(v))
        return rows
    if parameter == "vcg_delta":
        best = [float(_raw_utilities(t, sc).max()) for t in sc.tasks]
        for v in values:
            d = float(v)
            if d < 0:
                raise ValueError("delta must be nonnegative")
            demand = [float(sc.demand(b - d)) for b in best]
            rows.append({"parameter": parameter, "value": d, "demand": float(sum(demand)),
                         "overall_profit": float(sum(demand)) * d / sc.beta_u})
        return rows
    # benchmark_repetitions
    expert = AgentModel("expert", "expert")
    per_task = []
    for t in sc.tasks:
        raw = _raw_utilities(t, sc)
        agent_u = make_offer(expert, t, sc).outcome.consumer_expected_utility
        per_task.append((raw, agent_u))
    for v in values:
        r = int(v)
        if r < 1:
            raise ValueError("repetitions must be at least 1")
        bench = agent = 0.0
        for raw, agent_u in per_task:
            n = raw.size
            tried = raw[: min(r, n)].sum()
            bench += tried + max(0, r - n) * raw.max()
            agent += r * agent_u
        crossover = [benchmark_crossover(raw.max(), raw, agent_u) for raw, agent_u in per_task]
        rows.append({"parameter": parameter, "value": r, "benchmark_utility": bench, "agent_utility": agent,
                     "crossover": float(np.max(crossover))})
    return rows
