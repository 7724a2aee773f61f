"""Generic cross-entropy engine for continuous parameter vectors.

The engine keeps an independent Gaussian per coordinate, draws a population,
keeps the ``p`` lowest-cost samples, refits the Gaussians to them and blends
the refit with the previous model. Two stopping rules are provided: a
variance collapse rule and a moving-average stationarity rule on the elite
thresholds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "CeError",
    "DimensionError",
    "ParameterError",
    "EvaluationError",
    "ModelCollapseError",
    "CeSettings",
    "GaussianPopulationModel",
    "StopHistory",
    "IterationRecord",
    "CeResult",
    "elite_count_for",
    "sample_population",
    "elite_select",
    "update_gaussian",
    "smooth",
    "variance_stop",
    "moving_average_stop",
    "ce_minimize",
]


class CeError(Exception):
    """Base class for errors raised by the optimizers."""


class DimensionError(CeError, ValueError):
    pass


class ParameterError(CeError, ValueError):
    pass


class EvaluationError(CeError, RuntimeError):
    """Objective returned a non-finite value."""

    def __init__(self, message: str, sample_index: int | None = None, sample=None):
        super().__init__(message)
        self.sample_index = sample_index
        self.sample = sample


class ModelCollapseError(CeError, RuntimeError):
    pass


def elite_count_for(population_size: int, rho: float = 0.1) -> int:
    """Elite count ``ceil(rho * N)``, at least one."""
    if not 0 < rho <= 1:
        raise ParameterError(f"elite fraction must lie in (0, 1], got {rho}")
    # round first so 0.1 * 200 does not become 21 through float noise
    return max(1, math.ceil(round(rho * population_size, 9)))


@dataclass(frozen=True)
class CeSettings:
    """Hyperparameters shared by every CE driver.

    Parameters
    ----------
    population_size : int
        Samples drawn per iteration (``N``).
    elite_count : int
        Number of best samples kept per iteration (``p``).
    smoothing : float
        Weight of the fresh estimate in the smoothed update, in (0, 1].
    epsilon : float
        Tolerance of the selected stopping rule.
    max_iterations : int
        Hard iteration cap. Zero is allowed and means "evaluate the initial
        model only".
    seed : int
        Seed of the random stream owned by the engine.
    """

    population_size: int = 200
    elite_count: int = 20
    smoothing: float = 0.7
    epsilon: float = 1e-5
    max_iterations: int = 500
    seed: int = 20240101

    def __post_init__(self):
        if self.population_size < 1:
            raise ParameterError("population_size must be >= 1")
        if not 1 <= self.elite_count <= self.population_size:
            raise ParameterError(
                f"elite_count must satisfy 1 <= p <= N, got p={self.elite_count}, "
                f"N={self.population_size}"
            )
        if not 0 < self.smoothing <= 1:
            raise ParameterError(f"smoothing must lie in (0, 1], got {self.smoothing}")
        if not self.epsilon > 0:
            raise ParameterError("epsilon must be > 0")
        if self.max_iterations < 0:
            raise ParameterError("max_iterations must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ParameterError("seed must be a 64-bit unsigned integer")

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


@dataclass(frozen=True)
class GaussianPopulationModel:
    """Independent normal distribution per coordinate."""

    means: np.ndarray
    stddevs: np.ndarray

    def __post_init__(self):
        means = np.array(self.means, dtype=float).reshape(-1)
        stddevs = np.array(self.stddevs, dtype=float).reshape(-1)
        if means.shape != stddevs.shape:
            raise DimensionError(
                f"means and stddevs differ in length ({means.size} vs {stddevs.size})"
            )
        if means.size == 0:
            raise DimensionError("model needs at least one coordinate")
        if np.any(stddevs < 0) or not np.all(np.isfinite(stddevs)):
            raise ParameterError("stddevs must be finite and non-negative")
        means.flags.writeable = False
        stddevs.flags.writeable = False
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "stddevs", stddevs)

    @classmethod
    def constant(cls, dim: int, mean: float, stddev: float) -> "GaussianPopulationModel":
        return cls(np.full(dim, float(mean)), np.full(dim, float(stddev)))

    @property
    def dim(self) -> int:
        return self.means.size

    @property
    def max_sigma(self) -> float:
        return float(self.stddevs.max())


@dataclass
class StopHistory:
    """Elite thresholds seen so far plus the moving-average window sizes."""

    window: int = 5
    lookahead: int = 3
    gammas: list = field(default_factory=list)

    def __post_init__(self):
        if self.window < 2:
            raise ParameterError("moving-average window K must be >= 2")
        if self.lookahead < 1:
            raise ParameterError("lookahead R must be >= 1")
        self.gammas = [float(g) for g in self.gammas]

    def append(self, gamma_hat: float) -> None:
        self.gammas.append(float(gamma_hat))

    def __len__(self) -> int:
        return len(self.gammas)


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    gamma_hat: float
    best_score: float
    max_sigma: float


@dataclass
class CeResult:
    """Outcome of :func:`ce_minimize`.

    ``best`` is the final mean vector and ``best_cost`` its objective value;
    the lowest sampled point is kept separately in ``best_sample``.
    """

    best: np.ndarray
    best_cost: float
    log: list
    model: GaussianPopulationModel
    best_sample: np.ndarray
    best_sample_cost: float
    stopped_by: str

    @property
    def iterations(self) -> int:
        return len(self.log)


def sample_population(model: GaussianPopulationModel, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` vectors, coordinate ``i`` from ``Normal(mu_i, sigma_i**2)``.

    Returns an ``(n, dim)`` array.
    """
    if n < 1:
        raise ParameterError("population size must be >= 1")
    if model.means.ndim != 1 or model.means.shape != model.stddevs.shape:
        raise DimensionError("model means/stddevs must be equal-length vectors")
    return rng.normal(model.means, model.stddevs, size=(n, model.dim))


def elite_select(scores: Sequence[float], p: int) -> tuple[np.ndarray, float]:
    """Indices of the ``p`` smallest scores and the ``p``-th smallest score.

    Ties are broken by the lower sample index. The indices come back ordered
    by score.
    """
    scores = np.asarray(scores, dtype=float).reshape(-1)
    if scores.size == 0:
        raise ParameterError("cannot select elites from an empty score list")
    if not 1 <= p <= scores.size:
        raise ParameterError(f"elite count must satisfy 1 <= p <= {scores.size}, got {p}")
    order = np.argsort(scores, kind="stable")[:p]
    return order, float(scores[order[-1]])


def update_gaussian(elite_samples) -> GaussianPopulationModel:
    """Fit per-coordinate mean and population standard deviation to the elites."""
    elites = np.asarray(elite_samples, dtype=float)
    if elites.size == 0:
        raise ParameterError("elite set is empty")
    if elites.ndim == 1:
        elites = elites[:, None]
    if elites.ndim != 2:
        raise DimensionError("elite samples must form a 2-D array")
    mean = elites.mean(axis=0)
    var = np.mean((elites - mean) ** 2, axis=0)
    return GaussianPopulationModel(mean, np.sqrt(var))


def smooth(new_model: GaussianPopulationModel, old_model: GaussianPopulationModel,
           alpha: float) -> GaussianPopulationModel:
    """Componentwise ``alpha * new + (1 - alpha) * old`` for means and stddevs."""
    if new_model.dim != old_model.dim:
        raise DimensionError(f"cannot smooth models of size {new_model.dim} and {old_model.dim}")
    if not 0 < alpha <= 1:
        raise ParameterError(f"smoothing factor must lie in (0, 1], got {alpha}")
    if alpha == 1:
        return new_model
    beta = 1.0 - alpha
    return GaussianPopulationModel(
        alpha * new_model.means + beta * old_model.means,
        alpha * new_model.stddevs + beta * old_model.stddevs,
    )


def variance_stop(model: GaussianPopulationModel, epsilon: float) -> bool:
    return bool(model.stddevs.max() < epsilon)


def _window_stats(gammas: np.ndarray, window: int) -> np.ndarray:
    """C_t(K) for t = K..len, as a 0-based array (entry 0 is t = K)."""
    out = np.empty(gammas.size - window + 1)
    for j in range(out.size):
        chunk = gammas[j:j + window]
        b = chunk.mean()
        var = np.sum((chunk - b) ** 2) / (window - 1)
        if var == 0:
            out[j] = 0.0
        elif b == 0:
            out[j] = math.inf
        else:
            out[j] = var / b**2
    return out


def moving_average_stop(history: StopHistory, epsilon: float) -> Optional[int]:
    """First iteration ``T`` (1-based) at which the elite thresholds look stationary.

    For each ``t >= K`` the windowed relative variance ``C_t(K)`` of the last
    ``K`` thresholds is formed; ``T`` is the first ``t`` for which the spread
    of ``C_{t+1} .. C_{t+R}`` relative to their maximum is at most
    ``epsilon``. A flat block (maximum zero) counts as stationary. Returns
    ``None`` while fewer than ``K + R`` thresholds are available or no ``t``
    qualifies.
    """
    K, R = history.window, history.lookahead
    if K < 2 or R < 1:
        raise ParameterError("need K >= 2 and R >= 1")
    gammas = np.asarray(history.gammas, dtype=float)
    if gammas.size < K + R:
        return None
    c = _window_stats(gammas, K)
    # c[j] is C_{K+j}; the lookahead block for t needs C_{t+1}..C_{t+R}
    for t in range(K, gammas.size - R + 1):
        block = c[t - K + 1:t - K + 1 + R]
        c_plus, c_minus = block.max(), block.min()
        if c_plus == 0:
            return t
        if math.isinf(c_plus):
            continue
        if (c_plus - c_minus) / c_plus <= epsilon:
            return t
    return None


def _score(objective, batch_objective, samples: np.ndarray) -> np.ndarray:
    if batch_objective is not None:
        scores = np.asarray(batch_objective(samples), dtype=float).reshape(-1)
        if scores.size != samples.shape[0]:
            raise EvaluationError(
                f"batch objective returned {scores.size} scores for {samples.shape[0]} samples"
            )
    else:
        scores = np.array([float(objective(s)) for s in samples])
    bad = np.flatnonzero(~np.isfinite(scores))
    if bad.size:
        i = int(bad[0])
        raise EvaluationError(
            f"objective returned {scores[i]!r} for sample {i}", sample_index=i, sample=samples[i].copy()
        )
    return scores


def ce_minimize(
    objective: Callable[[np.ndarray], float] | None,
    init: GaussianPopulationModel,
    settings: CeSettings,
    stop: str = "variance",
    *,
    batch_objective: Callable[[np.ndarray], np.ndarray] | None = None,
    window: int = 5,
    lookahead: int = 3,
    rng: np.random.Generator | None = None,
    on_iteration: Callable[[IterationRecord], None] | None = None,
) -> CeResult:
    """Minimize ``objective`` with the Gaussian cross-entropy method.

    Parameters
    ----------
    objective : callable
        Pure map from a parameter vector to a finite cost. May be ``None`` if
        ``batch_objective`` is given.
    init : GaussianPopulationModel
        Starting sampling distribution.
    settings : CeSettings
    stop : {"variance", "moving_average"}
        ``"variance"`` stops once every stddev is below ``settings.epsilon``;
        ``"moving_average"`` applies the stationarity rule of
        :func:`moving_average_stop` to the elite thresholds.
    batch_objective : callable, optional
        Scores a whole ``(N, dim)`` population at once, in sample order.
        Used instead of ``objective`` during the iterations when given.
    rng : numpy.random.Generator, optional
        Overrides the stream seeded from ``settings.seed``.

    Returns
    -------
    CeResult
    """
    if stop not in ("variance", "moving_average"):
        raise ParameterError(f"unknown stopping rule {stop!r}")
    if objective is None and batch_objective is None:
        raise ParameterError("need an objective or a batch objective")
    if rng is None:
        rng = settings.rng()

    def single(x: np.ndarray) -> float:
        if objective is not None:
            return float(objective(x))
        return float(np.asarray(batch_objective(x[None, :])).reshape(-1)[0])

    model = init
    history = StopHistory(window, lookahead)
    log: list[IterationRecord] = []
    best_sample = model.means.copy()
    best_sample_cost = math.inf
    stopped_by = "max_iterations"

    if settings.max_iterations > 0 and stop == "variance" and variance_stop(model, settings.epsilon):
        stopped_by = "variance"
    else:
        for it in range(1, settings.max_iterations + 1):
            samples = sample_population(model, settings.population_size, rng)
            scores = _score(objective, batch_objective, samples)
            idx, gamma_hat = elite_select(scores, settings.elite_count)
            if scores[idx[0]] < best_sample_cost:
                best_sample_cost = float(scores[idx[0]])
                best_sample = samples[idx[0]].copy()
            model = smooth(update_gaussian(samples[idx]), model, settings.smoothing)
            rec = IterationRecord(it, gamma_hat, float(scores[idx[0]]), model.max_sigma)
            log.append(rec)
            if on_iteration is not None:
                on_iteration(rec)
            if stop == "variance":
                if variance_stop(model, settings.epsilon):
                    stopped_by = "variance"
                    break
            else:
                history.append(gamma_hat)
                if moving_average_stop(history, settings.epsilon) is not None:
                    stopped_by = "moving_average"
                    break

    best = model.means.copy()
    best_cost = single(best)
    if not math.isfinite(best_cost):
        raise EvaluationError(f"objective returned {best_cost!r} at the final mean", sample=best)
    if not log:
        best_sample, best_sample_cost = best.copy(), best_cost
    return CeResult(best, best_cost, log, model, best_sample, best_sample_cost, stopped_by)
