"""Single-vehicle stochastic routing with fail-and-terminate recourse.

The vehicle leaves the depot (node 0) with stock ``Q`` and visits customers
in a fixed order. When a customer's demand exceeds the remaining stock the
vehicle returns to the depot and every customer from the failed one onward
is charged its penalty. Routes are optimized with a CE method over a
next-node transition matrix.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .ce_core import (
    CeSettings,
    ModelCollapseError,
    ParameterError,
    StopHistory,
    elite_select,
    moving_average_stop,
)

__all__ = [
    "RoutingInstance",
    "TransitionModel",
    "RouteResult",
    "route_cost",
    "route_costs",
    "sample_demands",
    "estimate_expected_cost",
    "sample_route",
    "sample_routes",
    "ce_route_optimize",
    "exhaustive_oracle",
]

MAX_EXHAUSTIVE_N = 8
ARC_FLOOR = 1e-6


@dataclass(frozen=True)
class RoutingInstance:
    """Depot-customer graph, vehicle capacity and per-customer demand/penalty.

    ``distances`` is ``(n + 1, n + 1)`` with the depot at index 0; the other
    arrays have one entry per customer ``1..n``.
    """

    distances: np.ndarray
    capacity: float
    demand_mean: np.ndarray
    demand_std: np.ndarray
    penalty: np.ndarray

    def __post_init__(self):
        L = np.array(self.distances, dtype=float)
        if L.ndim != 2 or L.shape[0] != L.shape[1] or L.shape[0] < 2:
            raise ParameterError("distance matrix must be square with at least one customer")
        n = L.shape[0] - 1
        if np.any(np.diag(L) != 0) or np.any(L < 0) or not np.all(np.isfinite(L)):
            raise ParameterError("distances must be finite, non-negative, zero on the diagonal")
        if not self.capacity > 0:
            raise ParameterError("capacity must be > 0")
        arrays = {}
        for name in ("demand_mean", "demand_std", "penalty"):
            a = np.array(getattr(self, name), dtype=float).reshape(-1)
            if a.size != n:
                raise ParameterError(f"{name} needs {n} entries, got {a.size}")
            if np.any(a < 0) or not np.all(np.isfinite(a)):
                raise ParameterError(f"{name} entries must be finite and >= 0")
            a.flags.writeable = False
            arrays[name] = a
        L.flags.writeable = False
        object.__setattr__(self, "distances", L)
        object.__setattr__(self, "capacity", float(self.capacity))
        for name, a in arrays.items():
            object.__setattr__(self, name, a)

    @property
    def n(self) -> int:
        return self.distances.shape[0] - 1

    def check_route(self, route) -> np.ndarray:
        r = np.asarray(route, dtype=np.int64).reshape(-1)
        if r.size != self.n or not np.array_equal(np.sort(r), np.arange(1, self.n + 1)):
            raise ParameterError(f"route must visit customers 1..{self.n} exactly once, got {tuple(r)}")
        return r

    def tour_length(self, route) -> float:
        r = self.check_route(route)
        path = np.concatenate([[0], r, [0]])
        return float(self.distances[path[:-1], path[1:]].sum())


def route_costs(route, demands: np.ndarray, inst: RoutingInstance) -> np.ndarray:
    """Vectorized cost for each row of ``demands`` (shape ``(M, n)``, by customer)."""
    r = inst.check_route(route)
    d = np.atleast_2d(np.asarray(demands, dtype=float))
    if d.shape[1] != inst.n:
        raise ParameterError(f"need one demand per customer ({inst.n}), got {d.shape[1]}")
    L = inst.distances
    pen = inst.penalty
    m = d.shape[0]
    stock = np.full(m, inst.capacity)
    cost = np.zeros(m)
    alive = np.ones(m, dtype=bool)
    # penalty of customers from position i to the end of the route
    tail_pen = np.concatenate([np.cumsum(pen[r[::-1] - 1])[::-1], [0.0]])
    prev = 0
    for i, c in enumerate(r):
        cost[alive] += L[prev, c]
        dem = d[:, c - 1]
        fail = alive & (dem > stock)
        cost[fail] += L[c, 0] + tail_pen[i]
        alive &= ~fail
        stock = np.where(alive, stock - dem, stock)
        prev = c
    cost[alive] += L[prev, 0]
    return cost


def route_cost(route, demands, inst: RoutingInstance) -> float:
    """Cost ``H(r, D)`` of one route under one demand realization.

    ``demands[c - 1]`` is the demand of customer ``c``. Meeting a demand
    exactly is a success; the vehicle then carries on with zero stock.
    """
    return float(route_costs(route, np.asarray(demands, dtype=float)[None, :], inst)[0])


def sample_demands(inst: RoutingInstance, m: int, rng: np.random.Generator) -> np.ndarray:
    """``(m, n)`` normal demands truncated at zero by redrawing negatives."""
    d = rng.normal(inst.demand_mean, inst.demand_std, size=(m, inst.n))
    neg = d < 0
    while np.any(neg):
        cols = np.nonzero(neg)[1]
        d[neg] = rng.normal(inst.demand_mean[cols], inst.demand_std[cols])
        neg = d < 0
    return d


def estimate_expected_cost(route, inst: RoutingInstance, m: int,
                           rng: np.random.Generator) -> tuple[float, float]:
    """Monte Carlo mean of ``H`` over ``m`` demand draws and its standard error."""
    if m < 2:
        raise ParameterError("need at least two replications for a standard error")
    h = route_costs(route, sample_demands(inst, m, rng), inst)
    return float(h.mean()), float(h.std(ddof=1) / math.sqrt(m))


@dataclass
class TransitionModel:
    """Row-stochastic next-node matrix; column 0 (the depot) is never a target."""

    probs: np.ndarray

    def __post_init__(self):
        self.probs = np.array(self.probs, dtype=float)
        self.check()

    @classmethod
    def uniform(cls, n: int) -> "TransitionModel":
        p = np.ones((n + 1, n + 1))
        p[:, 0] = 0.0
        np.fill_diagonal(p, 0.0)
        if n == 1:
            p[1, 1] = 0.0
            p[1, 0] = 1.0
        return cls(p / p.sum(axis=1, keepdims=True))

    @property
    def n(self) -> int:
        return self.probs.shape[0] - 1

    def check(self, tol: float = 1e-9) -> None:
        p = self.probs
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ParameterError("transition matrix must be square")
        if np.any(np.diag(p) != 0) or np.any(p < 0):
            raise ParameterError("transition matrix needs a zero diagonal and non-negative entries")
        bad = np.flatnonzero(np.abs(p.sum(axis=1) - 1) > tol)
        if bad.size:
            raise ModelCollapseError(f"row {bad[0]} of the transition matrix does not sum to one")


def sample_routes(model: TransitionModel, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` routes as an ``(count, n)`` array of customer ids."""
    n = model.n
    routes = np.empty((count, n), dtype=np.int64)
    visited = np.zeros((count, n + 1), dtype=bool)
    visited[:, 0] = True
    cur = np.zeros(count, dtype=np.int64)
    rows = np.arange(count)
    for step in range(n):
        w = np.where(visited, 0.0, model.probs[cur])
        tot = w.sum(axis=1)
        dead = np.flatnonzero(tot <= 0)
        if dead.size:
            raise ModelCollapseError(f"row {int(cur[dead[0]])} has no mass on the unvisited customers")
        cdf = np.cumsum(w, axis=1) / tot[:, None]
        u = rng.random(count)
        nxt = np.minimum((u[:, None] >= cdf).sum(axis=1), n)
        # u can land past a cdf that rounds below one
        off = visited[rows, nxt]
        nxt[off] = np.argmax(w[off], axis=1)
        routes[:, step] = nxt
        visited[rows, nxt] = True
        cur = nxt
    return routes


def sample_route(model: TransitionModel, rng: np.random.Generator) -> tuple:
    """One route from the depot, renormalizing each row over unvisited customers."""
    return tuple(int(c) for c in sample_routes(model, 1, rng)[0])


def arc_frequencies(routes: np.ndarray, n: int) -> np.ndarray:
    """Counts of depot->first and customer->customer arcs in ``routes``."""
    counts = np.zeros((n + 1, n + 1))
    src = np.concatenate([np.zeros((routes.shape[0], 1), dtype=np.int64), routes[:, :-1]], axis=1)
    np.add.at(counts, (src.ravel(), routes.ravel()), 1.0)
    return counts


def update_transitions(elite_routes: np.ndarray, old: TransitionModel, alpha: float) -> TransitionModel:
    """Smoothed elite arc frequencies with a small floor on every feasible arc."""
    n = old.n
    feasible = np.ones((n + 1, n + 1), dtype=bool)
    feasible[:, 0] = False
    np.fill_diagonal(feasible, False)
    freq = arc_frequencies(elite_routes, n) + ARC_FLOOR * feasible
    rows = freq.sum(axis=1, keepdims=True)
    fresh = np.divide(freq, rows, out=old.probs.copy(), where=rows > 0)
    return TransitionModel(alpha * fresh + (1 - alpha) * old.probs)


@dataclass
class RouteResult:
    route: tuple
    cost: float
    stderr: float
    log: list
    model: TransitionModel
    stopped_by: str


def _substream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng([seed, *key])


def ce_route_optimize(inst: RoutingInstance, settings: CeSettings, replications: int = 100,
                      window: int = 5, lookahead: int = 3, final_replications: int | None = None) -> RouteResult:
    """Search for the route of least expected cost.

    Routes come from a :class:`TransitionModel`; each is scored with
    ``replications`` fresh demand draws from a substream keyed by
    ``(seed, iteration, sample)``, so results do not depend on evaluation
    order. The best route seen is re-estimated with ``final_replications``
    draws (default ``10 * replications``).
    """
    n = inst.n
    if n < 2:
        raise ParameterError("route optimization needs at least two customers")
    rng = settings.rng()
    model = TransitionModel.uniform(n)
    history = StopHistory(window, lookahead)
    log = []
    best_route, best_score = None, math.inf
    stopped_by = "max_iterations"
    for it in range(1, settings.max_iterations + 1):
        routes = sample_routes(model, settings.population_size, rng)
        scores = np.array([
            estimate_expected_cost(routes[m], inst, replications, _substream(settings.seed, it, m))[0]
            for m in range(routes.shape[0])
        ])
        idx, gamma_hat = elite_select(scores, settings.elite_count)
        if scores[idx[0]] < best_score:
            best_score = float(scores[idx[0]])
            best_route = tuple(int(c) for c in routes[idx[0]])
        model = update_transitions(routes[idx], model, settings.smoothing)
        log.append({
            "iteration": it,
            "gamma_hat": gamma_hat,
            "best_score": float(scores[idx[0]]),
            "max_sigma": float(1.0 - model.probs.max(axis=1).min()),
        })
        history.append(gamma_hat)
        if moving_average_stop(history, settings.epsilon) is not None:
            stopped_by = "moving_average"
            break
    if best_route is None:
        best_route = tuple(range(1, n + 1))
    m_final = final_replications or 10 * replications
    g, se = estimate_expected_cost(best_route, inst, m_final, _substream(settings.seed, 0, 2**32))
    return RouteResult(best_route, g, se, log, model, stopped_by)


def exhaustive_oracle(inst: RoutingInstance, m: int, rng: np.random.Generator):
    """Score every route on the same ``m`` demand draws.

    Returns the best route and a table ``{route: (G_hat, stderr)}``.
    """
    if inst.n > MAX_EXHAUSTIVE_N:
        raise ParameterError(f"exhaustive search limited to n <= {MAX_EXHAUSTIVE_N}, got {inst.n}")
    if m < 2:
        raise ParameterError("need at least two replications")
    demands = sample_demands(inst, m, rng)
    table = {}
    for route in itertools.permutations(range(1, inst.n + 1)):
        h = route_costs(route, demands, inst)
        table[route] = (float(h.mean()), float(h.std(ddof=1) / math.sqrt(m)))
    best = min(table, key=lambda r: (table[r][0], r))
    return best, table
