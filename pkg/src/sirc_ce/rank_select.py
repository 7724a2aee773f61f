"""Choosing ``k`` of ``N`` sequentially arriving objects to minimize the
expected sum of their absolute ranks.

Only relative ranks are observed. A threshold strategy holds one integer row
per number of picks still to make; the next object is taken as soon as its
relative rank is at most the threshold for its position. The rows are tuned
with a categorical cross-entropy method.

Indexing: ``thresholds[i - 1]`` is the row used while ``i`` picks remain and
covers arrival positions ``k - i + 1 .. N - i + 1`` (1-based). Every row has
``N - k + 1`` entries and its last entry is ``N``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numba as nb
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
    "ThresholdStrategy",
    "CategoricalModel",
    "RankResult",
    "relative_ranks",
    "apply_strategy",
    "repair",
    "estimate_S",
    "estimate_S_with_error",
    "exact_value",
    "enumerate_strategies",
    "brute_force_optimum",
    "ce_rank_optimize",
]

MAX_EXACT_N = 8


def _check_sizes(n: int, k: int) -> None:
    if not 1 <= k <= n:
        raise ParameterError(f"need 1 <= k <= N, got N={n}, k={k}")


def row_start(n: int, k: int, i: int) -> int:
    """First (1-based) arrival position of the row used with ``i`` picks left."""
    return k - i + 1


@dataclass(frozen=True)
class ThresholdStrategy:
    n: int
    k: int
    thresholds: np.ndarray

    def __post_init__(self):
        _check_sizes(self.n, self.k)
        th = np.array(self.thresholds, dtype=np.int64)
        if th.shape != (self.k, self.n - self.k + 1):
            raise ParameterError(f"thresholds must have shape ({self.k}, {self.n - self.k + 1}), got {th.shape}")
        th.flags.writeable = False
        object.__setattr__(self, "thresholds", th)

    @classmethod
    def from_free(cls, n: int, k: int, free) -> "ThresholdStrategy":
        """Build from the ``(k, N - k)`` free entries; the pinned ``N`` column is appended."""
        free = np.asarray(free, dtype=np.int64).reshape(k, n - k)
        return cls(n, k, np.hstack([free, np.full((k, 1), n, dtype=np.int64)]))

    @classmethod
    def pick_first(cls, n: int, k: int) -> "ThresholdStrategy":
        """Accept every arrival: takes positions ``1..k``."""
        return cls(n, k, np.full((k, n - k + 1), n))

    @property
    def free(self) -> np.ndarray:
        return self.thresholds[:, :-1]

    def threshold(self, remaining: int, position: int) -> int:
        """Threshold with ``remaining`` picks left at 1-based ``position``."""
        q = position - row_start(self.n, self.k, remaining)
        return int(self.thresholds[remaining - 1, q])

    def is_valid(self) -> bool:
        th = self.thresholds
        n, k = self.n, self.k
        if np.any(th[:, -1] != n) or np.any(th[:, :-1] < 0) or np.any(th[:, :-1] >= n):
            return False
        if np.any(np.diff(th, axis=1) < 0):
            return False
        # row i (i picks left) starts one position earlier than row i-1;
        # shared positions of rows i-1 and i are row i's entries 1..end
        for i in range(2, k + 1):
            if np.any(th[i - 2, :-1] > th[i - 1, 1:]):
                return False
        return True

    def __hash__(self):
        return hash((self.n, self.k, self.thresholds.tobytes()))

    def __eq__(self, other):
        return (isinstance(other, ThresholdStrategy) and self.n == other.n and self.k == other.k
                and np.array_equal(self.thresholds, other.thresholds))


def relative_ranks(permutation) -> np.ndarray:
    """``Y_i`` = number of ``j <= i`` with ``a_j <= a_i``.

    Accepts one permutation or a 2-D array of them (one per row).
    """
    a = np.asarray(permutation)
    single = a.ndim == 1
    a2 = np.atleast_2d(a).astype(np.int64)
    n = a2.shape[1]
    if not np.array_equal(np.sort(a2, axis=1), np.broadcast_to(np.arange(1, n + 1), a2.shape)):
        raise ParameterError("input is not a permutation of 1..N")
    y = np.empty_like(a2)
    for i in range(n):
        y[:, i] = np.sum(a2[:, : i + 1] <= a2[:, i : i + 1], axis=1)
    return y[0] if single else y


@nb.njit(cache=True)
def _apply_one(th, y, a, k, out_pos):
    n = y.size
    pos = 0
    total = 0
    for stage in range(k):
        remaining = k - stage
        r = remaining - 1
        start = k - remaining  # 0-based first position of this row
        last_allowed = n - remaining  # 0-based last position leaving room for the rest
        chosen = -1
        for m in range(pos, last_allowed + 1):
            if y[m] <= th[r, m - start]:
                chosen = m
                break
        if chosen < 0:
            chosen = last_allowed
        out_pos[stage] = chosen
        total += a[chosen]
        pos = chosen + 1
    return total


@nb.njit(cache=True)
def _rank_sums(th, ys, aa, k):
    out = np.empty(ys.shape[0], dtype=np.int64)
    scratch = np.empty(k, dtype=np.int64)
    for r in range(ys.shape[0]):
        out[r] = _apply_one(th, ys[r], aa[r], k, scratch)
    return out


@nb.njit(cache=True)
def _rank_sums_many(ths, ys, aa, k):
    """Mean rank sum of strategy ``s`` over its own block ``ys[s]``."""
    m = ths.shape[0]
    out = np.empty(m)
    scratch = np.empty(k, dtype=np.int64)
    for s in range(m):
        acc = 0
        for r in range(ys.shape[1]):
            acc += _apply_one(ths[s], ys[s, r], aa[s, r], k, scratch)
        out[s] = acc / ys.shape[1]
    return out


def apply_strategy(strategy: ThresholdStrategy, permutation) -> tuple[tuple, int]:
    """Run the strategy on one arrival order.

    Returns the chosen 1-based positions and the sum of their true ranks. A
    stage that never fires takes its last admissible position, so exactly
    ``k`` objects are always chosen.
    """
    a = np.asarray(permutation, dtype=np.int64)
    if a.size != strategy.n:
        raise ParameterError(f"permutation has length {a.size}, strategy expects {strategy.n}")
    y = relative_ranks(a)
    pos = np.empty(strategy.k, dtype=np.int64)
    total = _apply_one(strategy.thresholds, y, a, strategy.k, pos)
    return tuple(int(p) + 1 for p in pos), int(total)


def _random_permutations(rng: np.random.Generator, shape: tuple, n: int) -> np.ndarray:
    base = np.broadcast_to(np.arange(1, n + 1, dtype=np.int64), shape + (n,))
    return rng.permuted(base, axis=-1)


def _relative_ranks_unchecked(a: np.ndarray) -> np.ndarray:
    y = np.empty_like(a)
    for i in range(a.shape[-1]):
        y[..., i] = np.sum(a[..., : i + 1] <= a[..., i : i + 1], axis=-1)
    return y


def estimate_S(strategy: ThresholdStrategy, replications: int, rng: np.random.Generator) -> float:
    """Mean rank sum over ``replications`` uniform random arrival orders."""
    if replications < 1:
        raise ParameterError("need at least one replication")
    a = _random_permutations(rng, (replications,), strategy.n)
    y = _relative_ranks_unchecked(a)
    return float(_rank_sums(strategy.thresholds, y, a, strategy.k).mean())


def estimate_S_with_error(strategy: ThresholdStrategy, replications: int,
                          rng: np.random.Generator) -> tuple[float, float]:
    """Monte Carlo mean rank sum and its standard error (``replications >= 2``)."""
    if replications < 2:
        raise ParameterError("need at least two replications for a standard error")
    a = _random_permutations(rng, (replications,), strategy.n)
    h = _rank_sums(strategy.thresholds, _relative_ranks_unchecked(a), a, strategy.k)
    return float(h.mean()), float(h.std(ddof=1) / math.sqrt(replications))


def _all_permutations(n: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(1, n + 1))), dtype=np.int64)


def exact_value(strategy: ThresholdStrategy, n: int | None = None, k: int | None = None) -> float:
    """Expected rank sum by averaging over all ``N!`` arrival orders (``N <= 8``)."""
    n = strategy.n if n is None else n
    k = strategy.k if k is None else k
    if (n, k) != (strategy.n, strategy.k):
        raise ParameterError("strategy sizes do not match (N, k)")
    if n > MAX_EXACT_N:
        raise ParameterError(f"exact enumeration limited to N <= {MAX_EXACT_N}, got {n}")
    a = _all_permutations(n)
    y = _relative_ranks_unchecked(a)
    return float(_rank_sums(strategy.thresholds, y, a, k).mean())


def _monotone_rows(length: int, top: int):
    """All nondecreasing integer tuples of ``length`` with entries in ``0..top``."""
    return itertools.combinations_with_replacement(range(top + 1), length)


def enumerate_strategies(n: int, k: int):
    """Yield every valid threshold strategy for ``(N, k)``."""
    _check_sizes(n, k)
    rows = [np.array(r + (n,), dtype=np.int64) for r in _monotone_rows(n - k, n - 1)]
    for combo in itertools.product(rows, repeat=k):
        s = ThresholdStrategy(n, k, np.vstack(combo))
        if s.is_valid():
            yield s


def brute_force_optimum(n: int, k: int) -> tuple[ThresholdStrategy, float]:
    """Best strategy and its exact value over the full enumeration."""
    if n > MAX_EXACT_N:
        raise ParameterError(f"exact enumeration limited to N <= {MAX_EXACT_N}, got {n}")
    a = _all_permutations(n)
    y = _relative_ranks_unchecked(a)
    best, best_val = None, math.inf
    for s in enumerate_strategies(n, k):
        val = float(_rank_sums(s.thresholds, y, a, k).mean())
        if val < best_val - 1e-12:
            best, best_val = s, val
    return best, best_val


def repair(free: np.ndarray, n: int) -> np.ndarray:
    """Project sampled free entries onto the valid strategy set.

    ``free`` has shape ``(..., k, N - k)``. Rows are made nondecreasing by a
    running maximum, then each row is raised to at least the row with one
    fewer pick left on their shared positions.
    """
    x = np.minimum(np.maximum.accumulate(np.asarray(free, dtype=np.int64), axis=-1), n - 1)
    k = x.shape[-2]
    for i in range(1, k):
        # row i (i+1 picks left) entry q+1 shares its position with row i-1 entry q
        x[..., i, 1:] = np.maximum(x[..., i, 1:], x[..., i - 1, :-1])
    return x


@dataclass
class CategoricalModel:
    """Per-slot categorical distributions over threshold values ``0..N-1``.

    ``probs[i, q, l]`` is the probability that the ``q``-th free entry of the
    row with ``i + 1`` picks left equals ``l``. ``initial`` keeps the starting
    matrix for the importance weights.
    """

    probs: np.ndarray
    initial: np.ndarray = field(default=None)

    def __post_init__(self):
        self.probs = np.array(self.probs, dtype=float)
        if self.initial is None:
            self.initial = self.probs.copy()
        self.initial = np.array(self.initial, dtype=float)
        if self.probs.ndim != 3 or self.initial.shape != self.probs.shape:
            raise ParameterError("model must be a 3-D matrix with a matching initial matrix")
        self.check()

    @classmethod
    def uniform(cls, n: int, k: int) -> "CategoricalModel":
        _check_sizes(n, k)
        return cls(np.full((k, n - k, n), 1.0 / n))

    def check(self, tol: float = 1e-9) -> None:
        sums = self.probs.sum(axis=-1)
        bad = np.argwhere(~np.isfinite(sums) | (np.abs(sums - 1) > tol) | np.any(self.probs < 0, axis=-1))
        if bad.size:
            i, q = (int(v) for v in bad[0])
            raise ModelCollapseError(f"categorical slice (i={i + 1}, j={q}) is not a distribution (sum={sums[i, q]!r})")

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """``(count, k, N - k)`` integer draws, one per slot."""
        cdf = np.cumsum(self.probs, axis=-1)
        cdf[..., -1] = 1.0
        u = rng.random((count,) + self.probs.shape[:-1])
        return (u[..., None] >= cdf[None]).sum(axis=-1).astype(np.int64)

    def mode(self) -> np.ndarray:
        return np.argmax(self.probs, axis=-1)


@dataclass
class RankResult:
    strategy: ThresholdStrategy
    s_hat: float
    log: list
    model: CategoricalModel
    stopped_by: str


def weighted_update(model: CategoricalModel, samples: np.ndarray, elite: np.ndarray,
                    previous: np.ndarray | None = None, weights: bool = True) -> np.ndarray:
    """Importance-weighted elite frequencies, normalized per slice.

    ``previous`` is the sampling matrix the draws came from (defaults to
    ``model.probs``). The weight of draw ``n`` in slot ``(i, j)`` is
    ``initial[i, j, X] / previous[i, j, X]``.
    """
    prev = model.probs if previous is None else previous
    x = samples[elite]
    ii, qq = np.indices(x.shape[1:])
    if weights:
        w = model.initial[ii, qq, x] / prev[ii, qq, x]
    else:
        w = np.ones(x.shape)
    counts = np.zeros(prev.shape)
    np.add.at(counts, (np.broadcast_to(ii, x.shape), np.broadcast_to(qq, x.shape), x), w)
    total = counts.sum(axis=-1, keepdims=True)
    if np.any(total <= 0) or not np.all(np.isfinite(total)):
        bad = np.argwhere((total[..., 0] <= 0) | ~np.isfinite(total[..., 0]))[0]
        raise ModelCollapseError(f"all weighted mass lost in slice (i={bad[0] + 1}, j={bad[1]})")
    return counts / total


def ce_rank_optimize(n: int, k: int, settings: CeSettings, replications: int = 200,
                     samples: int | None = None, rho: float | None = None,
                     window: int = 5, lookahead: int = 3, importance_weights: bool = True,
                     rng: np.random.Generator | None = None) -> RankResult:
    """Tune threshold strategies for ``(N, k)`` with the categorical CE method.

    Each iteration draws ``samples`` strategies (default
    ``settings.population_size``), estimates each with ``replications``
    random orders, takes the ``ceil(rho * samples)``-th smallest estimate as
    the level, refits the categorical matrix to the draws at or below it and
    smooths. Stops when the moving-average rule fires on the levels or after
    ``settings.max_iterations``. Returns the repaired modal strategy.
    """
    _check_sizes(n, k)
    if replications < 1:
        raise ParameterError("need at least one replication")
    if rng is None:
        rng = settings.rng()
    n2 = settings.population_size if samples is None else samples
    if n2 < 1:
        raise ParameterError("need at least one sampled strategy per iteration")
    p = settings.elite_count if rho is None else max(1, math.ceil(round(rho * n2, 9)))
    if not 1 <= p <= n2:
        raise ParameterError(f"elite count {p} outside 1..{n2}")

    model = CategoricalModel.uniform(n, k)
    if n == k:
        s = ThresholdStrategy.pick_first(n, k)
        return RankResult(s, estimate_S(s, replications, rng), [], model, "trivial")
    history = StopHistory(window, lookahead)
    log = []
    stopped_by = "max_iterations"
    for it in range(1, settings.max_iterations + 1):
        x = model.sample(n2, rng)
        th = np.concatenate([repair(x, n), np.full((n2, k, 1), n, dtype=np.int64)], axis=-1)
        perms = _random_permutations(rng, (n2, replications), n)
        scores = _rank_sums_many(th, _relative_ranks_unchecked(perms), perms, k)
        elite, gamma_hat = elite_select(scores, p)
        # every sample at or below the level is elite, including ties past p
        elite = np.flatnonzero(scores <= gamma_hat)
        fresh = weighted_update(model, x, elite, weights=importance_weights)
        model.probs = settings.smoothing * fresh + (1 - settings.smoothing) * model.probs
        model.check()
        log.append({
            "iteration": it,
            "gamma_hat": gamma_hat,
            "best_score": float(scores.min()),
            "max_sigma": float(1.0 - model.probs.max(axis=-1).min()),
        })
        history.append(gamma_hat)
        if moving_average_stop(history, settings.epsilon) is not None:
            stopped_by = "moving_average"
            break
    best = ThresholdStrategy.from_free(n, k, repair(model.mode(), n))
    return RankResult(best, estimate_S(best, replications, rng), log, model, stopped_by)
