"""Fine-grained pricing over task DAGs.

A task is a DAG of subtasks; each subtask offers a menu of (time, cost)
options. An assignment's completion time is the longest path through the
chosen times and its cost is the sum of chosen costs.

The dynamic program keeps, for every subtask and integer time budget, the
cheapest assignment of the subtask's ancestor closure that finishes within
the budget. Predecessor assignments are merged at joins; subtasks shared by
several predecessors are counted once and conflicting choices for them are
resolved by one of three rules (fastest, cheapest, most profitable).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import networkx as nx
import numpy as np

from .core import Configuration, DemandCurve

TERMINAL = "__terminal__"
STRATEGIES = ("min_time", "min_cost", "max_profit")
DEFAULT_SEARCH_CAP = 10**7

# profit(T, C) must accept numpy arrays and broadcast
ProfitFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


class CycleError(ValueError):
    def __init__(self, edge):
        super().__init__(f"task graph has a cycle through edge {edge[0]!r} -> {edge[1]!r}")
        self.edge = edge


class SearchCapExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class Option:
    time: float
    cost: float

    def __post_init__(self):
        if self.time < 0 or self.cost < 0:
            raise ValueError(f"option times and costs must be nonnegative, got {self}")


@dataclass(frozen=True)
class TaskGraph:
    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]
    options: Mapping[str, tuple[Option, ...]]

    def __post_init__(self):
        nodes = tuple(str(n) for n in self.nodes)
        if len(set(nodes)) != len(nodes):
            raise ValueError("duplicate node ids")
        if TERMINAL in nodes:
            raise ValueError(f"{TERMINAL!r} is reserved")
        edges = tuple((str(a), str(b)) for a, b in self.edges)
        known = set(nodes)
        for a, b in edges:
            if a not in known or b not in known:
                raise ValueError(f"edge ({a!r}, {b!r}) references an unknown node")
        options = {}
        for n in nodes:
            opts = tuple(o if isinstance(o, Option) else Option(*o) for o in self.options.get(n, ()))
            if not opts:
                raise ValueError(f"node {n!r} has no options")
            options[n] = opts
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "options", options)
        topological_sort(self)

    @classmethod
    def from_configurations(cls, nodes, edges, configs: Mapping[str, Sequence[Configuration]]) -> TaskGraph:
        """Expected-value graph: each configuration becomes (mean time, rate * mean time)."""
        options = {n: tuple(Option(cfg.histogram.mean(), cfg.rate * cfg.histogram.mean())
                            for cfg in configs[n]) for n in nodes}
        return cls(tuple(nodes), tuple(edges), options)

    def digraph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.nodes)
        g.add_edges_from(self.edges)
        return g

    def predecessors(self) -> dict[str, list[str]]:
        preds = {n: [] for n in self.nodes}
        for a, b in self.edges:
            if a not in preds[b]:
                preds[b].append(a)
        return {n: sorted(p) for n, p in preds.items()}


@dataclass(frozen=True)
class Assignment:
    choices: Mapping[str, int]
    total_time: float
    total_cost: float
    profit: float

    def option(self, g: TaskGraph, node: str) -> Option:
        return g.options[node][self.choices[node]]


@dataclass
class DPTable:
    """Minimum cost ``f[node][t]`` of the node's ancestor closure within ``t`` steps."""

    f: dict[str, np.ndarray]
    horizon: int
    granularity: float
    strategy: str
    order: list[str] = field(default_factory=list)


def topological_sort(g: TaskGraph) -> list[str]:
    """Topological order, breaking ties by node id."""
    dg = nx.DiGraph()
    dg.add_nodes_from(g.nodes)
    dg.add_edges_from(g.edges)
    try:
        return list(nx.lexicographical_topological_sort(dg))
    except nx.NetworkXUnfeasible:
        cycle = nx.find_cycle(dg)
        raise CycleError(cycle[0][:2]) from None


def evaluate_assignment(g: TaskGraph, choices: Mapping[str, int]) -> tuple[float, float]:
    """(longest-path time, total cost) of an assignment."""
    preds = g.predecessors()
    finish: dict[str, float] = {}
    cost = 0.0
    for n in topological_sort(g):
        opt = g.options[n][choices[n]]
        finish[n] = opt.time + max((finish[p] for p in preds[n]), default=0.0)
        cost += opt.cost
    return max(finish.values()), cost


def _assignment(g: TaskGraph, profit: ProfitFn, choices: Mapping[str, int]) -> Assignment:
    t, c = evaluate_assignment(g, choices)
    return Assignment(dict(choices), t, c, float(profit(np.float64(t), np.float64(c))))


def _units(time: float, granularity: float) -> int:
    return int(math.ceil(time / granularity - 1e-9)) if time > 0 else 0


class _Plan:
    """Index-based view of a graph shared by the DP passes."""

    def __init__(self, g: TaskGraph, granularity: float):
        self.order = topological_sort(g)
        self.index = {n: i for i, n in enumerate(self.order)}
        n = len(self.order)
        preds = g.predecessors()
        self.preds = [[self.index[p] for p in preds[name]] for name in self.order]
        width = max(len(g.options[name]) for name in self.order)
        self.units = np.zeros((n, width), dtype=np.int64)
        self.costs = np.full((n, width), np.inf)
        self.times = np.full((n, width), np.inf)
        self.n_opts = np.zeros(n, dtype=np.int64)
        for i, name in enumerate(self.order):
            opts = g.options[name]
            self.n_opts[i] = len(opts)
            for k, o in enumerate(opts):
                self.units[i, k] = _units(o.time, granularity)
                self.costs[i, k] = o.cost
                self.times[i, k] = o.time
        self.closure = []
        for i in range(n):
            members = {i}
            for p in self.preds[i]:
                members.update(self.closure[p])
            self.closure.append(np.array(sorted(members), dtype=np.int64))
        succ = [0] * n
        for i in range(n):
            for p in self.preds[i]:
                succ[p] += 1
        self.sinks = [i for i in range(n) if succ[i] == 0]
        # longest path under each node's slowest option bounds every assignment
        finish = np.zeros(n, dtype=np.int64)
        for i in range(n):
            slowest = self.units[i, : self.n_opts[i]].max()
            finish[i] = slowest + max((finish[p] for p in self.preds[i]), default=0)
        self.horizon = int(finish.max())
        self.shared = any(self._overlaps(self.preds[i]) for i in range(n)) or self._overlaps(self.sinks)

    def _overlaps(self, preds) -> bool:
        seen: set[int] = set()
        for p in preds:
            members = set(self.closure[p].tolist())
            if seen & members:
                return True
            seen |= members
        return False


class _Join:
    """Static layout of one DP node: where each predecessor's plan lands in the merge."""

    def __init__(self, plan: _Plan, members: np.ndarray, preds: list[int], closures):
        self.preds = preds
        row_of = {node: r for r, node in enumerate(members.tolist())}
        self.rows = np.concatenate([[row_of[x] for x in closures[p].tolist()] for p in preds]).astype(np.int64) \
            if preds else np.zeros(0, dtype=np.int64)
        slots: dict[int, list[int]] = {}
        for k, r in enumerate(self.rows.tolist()):
            slots.setdefault(r, []).append(k)
        shared = sorted(r for r, ks in slots.items() if len(ks) > 1)
        self.shared_rows = np.array(shared, dtype=np.int64)
        self.shared_nodes = members[self.shared_rows]
        width = max((len(slots[r]) for r in shared), default=0)
        # pad with the first slot; duplicates cannot change a min
        self.shared_slots = np.array([slots[r] + slots[r][:1] * (width - len(slots[r])) for r in shared],
                                     dtype=np.int64).reshape(len(shared), width)
        self.upstream_rows = np.array([row_of[x] for x in members.tolist() if x in row_of and
                                       any(x in set(closures[p].tolist()) for p in preds)], dtype=np.int64)
        self.upstream = members[self.upstream_rows]
        self.levels = _levels(plan, self.upstream) if shared else []


def _levels(plan: _Plan, nodes: np.ndarray):
    """Group ``nodes`` by depth with padded predecessor position matrices."""
    pos = {node: i for i, node in enumerate(nodes.tolist())}
    depth = {}
    for node in nodes.tolist():
        depth[node] = 1 + max((depth[p] for p in plan.preds[node]), default=-1)
    sentinel = len(nodes)
    out = []
    for level in range(max(depth.values(), default=-1) + 1):
        members = [x for x in nodes.tolist() if depth[x] == level]
        width = max(1, max(len(plan.preds[x]) for x in members))
        mat = np.full((len(members), width), sentinel, dtype=np.int64)
        for i, x in enumerate(members):
            mat[i, : len(plan.preds[x])] = [pos[p] for p in plan.preds[x]]
        out.append((np.array([pos[x] for x in members], dtype=np.int64), np.array(members, dtype=np.int64), mat))
    return out


def _longest_finish(plan: _Plan, join: _Join, choice: np.ndarray) -> np.ndarray:
    """Longest-path finish (in steps) over the join's upstream nodes, per budget column."""
    finish = np.zeros((join.upstream.size + 1, choice.shape[1]), dtype=np.int64)
    for rows, nodes, mat in join.levels:
        start = finish[mat].max(axis=1)
        finish[rows] = start + plan.units[nodes[:, None], choice[rows]]
    return finish[:-1].max(axis=0)


def _run_dp(plan: _Plan, profit: ProfitFn, strategy: str):
    H = plan.horizon
    n = len(plan.order)
    f: list[np.ndarray] = [None] * (n + 1)
    A: list[np.ndarray] = [None] * (n + 1)
    finite = np.isfinite(plan.costs)
    local_profit = np.where(finite, np.broadcast_to(np.asarray(
        profit(plan.times, np.where(finite, plan.costs, 0.0)), dtype=float), plan.costs.shape), -np.inf)
    dtype = np.int8 if plan.units.shape[1] < 127 else np.int16

    closures = plan.closure + [np.arange(n, dtype=np.int64)]
    preds_all = plan.preds + [plan.sinks]
    for q in range(n + 1):
        members = closures[q]
        join = _Join(plan, members, preds_all[q], closures)
        terminal = q == n
        n_opts = 1 if terminal else int(plan.n_opts[q])
        best = np.full(H + 1, np.inf)
        best_assign = np.full((members.size, H + 1), -1, dtype=dtype)
        own_row = None if terminal else int(np.searchsorted(members, q))
        for k in range(n_opts):
            d = 0 if terminal else int(plan.units[q, k])
            c = 0.0 if terminal else float(plan.costs[q, k])
            L = H + 1 - d
            if L <= 0:
                continue
            merged = np.full((members.size, L), -1, dtype=dtype)
            if not join.preds:
                cand = np.full(L, c)
            else:
                cand = _combine(plan, f, A, join, np.arange(L), merged, strategy, local_profit) + c
            if own_row is not None:
                merged[own_row] = k
            slot = slice(d, H + 1)
            better = cand < best[slot]
            if better.any():
                best[slot] = np.where(better, cand, best[slot])
                best_assign[:, slot] = np.where(better[None, :], merged, best_assign[:, slot])
        # carry forward: a larger budget can always reuse a smaller budget's plan
        running = np.minimum.accumulate(best)
        prev = np.concatenate(([np.inf], running[:-1]))
        source = np.maximum.accumulate(np.where(best < prev, np.arange(H + 1), 0))
        f[q] = running
        A[q] = best_assign[:, source]
        A[q][:, ~np.isfinite(running)] = -1
    return f, A


def _combine(plan, f, A, join, budgets, merged, strategy, local_profit):
    """Merge predecessor plans at each budget; returns the merged cost (inf if infeasible)."""
    ok = np.ones(budgets.size, dtype=bool)
    for p in join.preds:
        ok &= np.isfinite(f[p][budgets])
    blocks = np.concatenate([A[p][:, budgets] for p in join.preds])
    merged[join.rows] = blocks
    if join.shared_rows.size == 0:
        cost = np.zeros(budgets.size)
        for p in join.preds:
            cost = cost + np.where(ok, f[p][budgets], 0.0)
        return np.where(ok, cost, np.inf)
    stack = blocks[join.shared_slots]                      # (shared, slots, L)
    conflicted = bool(np.any(stack != stack[:, :1]))
    if conflicted:
        safe = np.where(stack < 0, 0, stack).astype(np.int64)
        nodes = join.shared_nodes[:, None, None]
        if strategy == "min_time":
            key = plan.times[nodes, safe]
        elif strategy == "min_cost":
            key = plan.costs[nodes, safe]
        else:
            key = -local_profit[nodes, safe]
        pick = np.argmin(key, axis=1)[:, None, :]
        merged[join.shared_rows] = np.take_along_axis(stack, pick, axis=1)[:, 0, :]
    else:
        merged[join.shared_rows] = stack[:, 0, :]
    choice = merged[join.upstream_rows]
    choice = np.where(choice < 0, 0, choice).astype(np.int64)
    cost = plan.costs[join.upstream[:, None], choice].sum(axis=0)
    if conflicted and strategy != "min_time":
        # fastest-option merges can only shorten paths; other rules need a recheck
        ok &= _longest_finish(plan, join, choice) <= budgets
    return np.where(ok, cost, np.inf)


def _plan_for(g: TaskGraph, granularity: float) -> _Plan:
    if granularity <= 0:
        raise ValueError("granularity must be positive")
    return _Plan(g, granularity)


def build_dp_table(g: TaskGraph, profit: ProfitFn, granularity: float = 1.0,
                   strategy: str = "min_time") -> DPTable:
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; choose from {STRATEGIES}")
    plan = _plan_for(g, granularity)
    f, _ = _run_dp(plan, profit, strategy)
    table = {name: f[i] for i, name in enumerate(plan.order)}
    table[TERMINAL] = f[-1]
    return DPTable(table, plan.horizon, granularity, strategy, plan.order + [TERMINAL])


def _best_from_terminal(g: TaskGraph, plan: _Plan, profit: ProfitFn, f, A) -> Assignment | None:
    term = A[-1]
    feasible = np.flatnonzero(np.isfinite(f[-1]))
    if feasible.size == 0:
        return None
    choice = term[:, feasible].astype(np.int64)
    nodes = np.arange(len(plan.order))
    finish = {}
    total_time = np.zeros(feasible.size)
    for i in nodes:
        start = np.zeros(feasible.size)
        for p in plan.preds[i]:
            start = np.maximum(start, finish[p])
        finish[i] = start + plan.times[i][choice[i]]
        total_time = np.maximum(total_time, finish[i])
    total_cost = plan.costs[nodes[:, None], choice].sum(axis=0)
    values = np.broadcast_to(np.asarray(profit(total_time, total_cost), dtype=float), total_time.shape)
    k = int(np.argmax(values))
    choices = {plan.order[i]: int(choice[i, k]) for i in nodes}
    return Assignment(choices, float(total_time[k]), float(total_cost[k]), float(values[k]))


def price_fine_grained_dp(g: TaskGraph, profit: ProfitFn, granularity: float = 1.0,
                          strategies: Sequence[str] = STRATEGIES) -> Assignment:
    """Most profitable assignment found by the budgeted DP.

    Exact when no two predecessors of any subtask share ancestors (in-trees
    and forests). Otherwise every strategy in ``strategies`` is run and the
    most profitable result is kept.
    """
    plan = _plan_for(g, granularity)
    if not plan.shared:
        strategies = strategies[:1]
    best: Assignment | None = None
    for strategy in strategies:
        if strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {strategy!r}")
        f, A = _run_dp(plan, profit, strategy)
        found = _best_from_terminal(g, plan, profit, f, A)
        if found is not None and (best is None or found.profit > best.profit):
            best = found
    if best is None:
        raise RuntimeError("no feasible assignment within the planning horizon")
    return best


def price_greedy(g: TaskGraph, profit: ProfitFn) -> Assignment:
    """Pick each subtask's option by its own profit, ignoring the graph."""
    choices = {}
    for n in g.nodes:
        opts = g.options[n]
        values = np.asarray(profit(np.array([o.time for o in opts]), np.array([o.cost for o in opts])),
                            dtype=float)
        choices[n] = int(np.argmax(np.broadcast_to(values, (len(opts),))))
    return _assignment(g, profit, choices)


def price_uniform(g: TaskGraph, profit: ProfitFn, k: int) -> Assignment:
    """Coarse-grained baseline: option ``k`` everywhere (clipped to each menu)."""
    return _assignment(g, profit, {n: min(k, len(g.options[n]) - 1) for n in g.nodes})


def price_exhaustive(g: TaskGraph, profit: ProfitFn, cap: int = DEFAULT_SEARCH_CAP,
                     chunk: int = 1 << 16) -> Assignment:
    """True optimum by enumerating every assignment (first in lexicographic order on ties)."""
    order = topological_sort(g)
    sizes = [len(g.options[n]) for n in order]
    total = math.prod(sizes)
    if total > cap:
        raise SearchCapExceeded(f"{total} assignments exceed the search cap of {cap}")
    preds = g.predecessors()
    pos = {n: i for i, n in enumerate(order)}
    times = [np.array([o.time for o in g.options[n]]) for n in order]
    costs = [np.array([o.cost for o in g.options[n]]) for n in order]
    # nodes in declaration order vary slowest, matching itertools.product over g.nodes
    decl = [pos[n] for n in g.nodes]
    strides = np.ones(len(order), dtype=np.int64)
    acc = 1
    for i in reversed(decl):
        strides[i] = acc
        acc *= sizes[i]
    best_value, best_index = -np.inf, 0
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
        finish = {}
        t_total = np.zeros(idx.size)
        c_total = np.zeros(idx.size)
        for i, n in enumerate(order):
            pick = (idx // strides[i]) % sizes[i]
            begin = np.zeros(idx.size)
            for p in preds[n]:
                begin = np.maximum(begin, finish[pos[p]])
            finish[i] = begin + times[i][pick]
            t_total = np.maximum(t_total, finish[i])
            c_total = c_total + costs[i][pick]
        values = np.broadcast_to(np.asarray(profit(t_total, c_total), dtype=float), idx.shape)
        k = int(np.argmax(values))
        if values[k] > best_value:
            best_value, best_index = float(values[k]), int(idx[k])
    choices = {n: int((best_index // strides[pos[n]]) % sizes[pos[n]]) for n in g.nodes}
    return _assignment(g, profit, choices)


def linear_profit(alpha_u: float, beta_u: float, m: DemandCurve) -> ProfitFn:
    """Closed-form optimal overall profit of a deterministic (T, C) contract."""
    alpha_m, beta_m = m.time_slope(alpha_u), m.price_slope(beta_u)

    def profit(T, C):
        slack = m.gamma - alpha_m * np.asarray(T, dtype=float) - beta_m * np.asarray(C, dtype=float)
        return np.where(slack > 0, slack * slack / (4.0 * beta_m), 0.0)

    return profit


def knapsack_to_graph(items: Sequence[tuple[float, float]], capacity: float) -> tuple[TaskGraph, ProfitFn]:
    """Chain whose best assignment solves 0-1 knapsack with the given capacity.

    Item i becomes a subtask with options ``(w_i, v0 - v_i)`` (take) and
    ``(0, v0)`` (skip), where ``v0 = max v_i``. Profit is ``n*v0 - C`` when the
    chain finishes within ``capacity`` and 0 otherwise.
    """
    if not items:
        raise ValueError("knapsack needs at least one item")
    if any(w <= 0 or v <= 0 for w, v in items):
        raise ValueError("knapsack weights and values must be positive")
    n = len(items)
    v0 = max(v for _, v in items)
    nodes = tuple(f"item{i:03d}" for i in range(n))
    edges = tuple(zip(nodes, nodes[1:]))
    options = {node: (Option(w, v0 - v), Option(0.0, v0)) for node, (w, v) in zip(nodes, items)}

    def profit(T, C):
        T = np.asarray(T, dtype=float)
        return np.where(T <= capacity, n * v0 - np.asarray(C, dtype=float), 0.0)

    return TaskGraph(nodes, edges, options), profit


def knapsack_brute_force(items: Sequence[tuple[float, float]], capacity: float) -> float:
    best = 0.0
    for mask in itertools.product((0, 1), repeat=len(items)):
        w = sum(it[0] for it, take in zip(items, mask) if take)
        if w <= capacity:
            best = max(best, sum(it[1] for it, take in zip(items, mask) if take))
    return best
