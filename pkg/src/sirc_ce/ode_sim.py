"""SIRC dynamics and a fixed-step classical Runge-Kutta integrator."""

from __future__ import annotations

from dataclasses import astuple, dataclass
from typing import Callable

import numpy as np

from .ce_core import CeError, ParameterError

__all__ = [
    "DivergenceError",
    "SircParameters",
    "SircState",
    "Solution",
    "Trajectory",
    "time_grid",
    "sirc_rhs",
    "integrate_rk4",
    "simulate_sirc",
]

MAX_STEPS = 50_000_000


class DivergenceError(CeError, ArithmeticError):
    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time


@dataclass(frozen=True)
class SircParameters:
    """Rates are per year; ``sigma`` is the reinfection probability of C.

    Defaults are the influenza A parameter set (mean lifetime 75 years,
    infectious period 5 days, contact rate 146 per year).
    """

    mu: float = 1 / 75
    beta: float = 146.0
    gamma: float = 0.5
    alpha: float = 365 / 5
    delta: float = 1.0
    sigma: float = 0.078
    rho1: float = 2.0
    rho2: float = 2.0

    def __post_init__(self):
        for name in ("mu", "beta", "gamma", "alpha", "delta", "rho1", "rho2"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ParameterError(f"{name} must be finite and >= 0, got {v}")
        if not 0 <= self.sigma <= 1:
            raise ParameterError(f"sigma must lie in [0, 1], got {self.sigma}")

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)


@dataclass(frozen=True)
class SircState:
    S: float
    I: float
    R: float
    C: float

    def __post_init__(self):
        for name, v in zip("SIRC", astuple(self)):
            if not np.isfinite(v) or v < 0:
                raise ParameterError(f"compartment {name} must be finite and >= 0, got {v}")

    @classmethod
    def from_array(cls, y) -> "SircState":
        S, I, R, C = (float(v) for v in y)
        return cls(S, I, R, C)

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)

    @property
    def total(self) -> float:
        return self.S + self.I + self.R + self.C


@dataclass
class Solution:
    """Raw integrator output: ``y[j]`` is the state at ``t[j]``."""

    t: np.ndarray
    y: np.ndarray


@dataclass
class Trajectory:
    """SIRC states and controls on the integration grid.

    ``states`` has shape ``(len(t), 4)`` with columns S, I, R, C.
    """

    t: np.ndarray
    states: np.ndarray
    u: np.ndarray
    v: np.ndarray

    @property
    def S(self):
        return self.states[:, 0]

    @property
    def I(self):
        return self.states[:, 1]

    @property
    def R(self):
        return self.states[:, 2]

    @property
    def C(self):
        return self.states[:, 3]

    def clamped_states(self) -> np.ndarray:
        """States with roundoff negatives set to zero, for reporting only."""
        return np.maximum(self.states, 0.0)


def time_grid(t1: float, t2: float, h: float) -> np.ndarray:
    """Uniform grid from ``t1`` with step ``h``, shortened last step onto ``t2``.

    The last entry is ``t2`` exactly. If ``(t2 - t1) / h`` is an integer up to
    roundoff no short step is added.
    """
    if not (np.isfinite(t1) and np.isfinite(t2)) or not t2 > t1:
        raise ParameterError(f"need t2 > t1, got [{t1}, {t2}]")
    if not h > 0:
        raise ParameterError(f"step must be > 0, got {h}")
    span = t2 - t1
    ratio = span / h
    n = int(round(ratio))
    if n >= 1 and abs(n * h - span) <= 1e-9 * span:
        steps, partial = n, False
    else:
        steps, partial = int(np.floor(ratio)), True
    if steps + partial > MAX_STEPS:
        raise ParameterError(f"{steps} steps exceeds the grid limit {MAX_STEPS}")
    t = t1 + h * np.arange(steps + 1 + partial, dtype=float)
    t[-1] = t2
    return t


def sirc_rhs(state, params: SircParameters, u=0.0, v=0.0) -> np.ndarray:
    """Time derivative of (S, I, R, C) under controls ``u`` and ``v``.

    ``state`` may be a :class:`SircState` or an array whose first axis holds
    the four compartments (extra axes broadcast). With ``u = v = 0`` this is
    the uncontrolled model.
    """
    y = state.as_array() if isinstance(state, SircState) else np.asarray(state, dtype=float)
    S, I, R, C = y[0], y[1], y[2], y[3]
    p = params
    infection = p.beta * S * I
    cross = p.beta * C * I
    g = p.rho1 * S * u
    h = p.rho2 * I * v
    dS = p.mu * (1 - S) - infection + p.gamma * C - g
    dI = infection + p.sigma * cross - (p.mu + p.alpha) * I - h
    dR = (1 - p.sigma) * cross + p.alpha * I - (p.mu + p.delta) * R + g + h
    dC = p.delta * R - cross - (p.mu + p.gamma) * C
    return np.stack([dS, dI, dR, dC])


def integrate_rk4(rhs: Callable[[float, np.ndarray], np.ndarray], initial, t1: float,
                  t2: float, h: float) -> Solution:
    """Classical fourth-order Runge-Kutta with fixed step ``h``.

    ``rhs(t, y)`` returns ``dy/dt``. The result includes both endpoints; the
    final step is shortened so the last time is exactly ``t2``.
    """
    t = time_grid(t1, t2, h)
    y0 = np.array(initial.as_array() if isinstance(initial, SircState) else initial, dtype=float)
    ys = np.empty((t.size,) + y0.shape)
    ys[0] = y = y0
    for j in range(t.size - 1):
        tj = t[j]
        dt = t[j + 1] - tj
        k1 = rhs(tj, y)
        k2 = rhs(tj + dt / 2, y + dt / 2 * k1)
        k3 = rhs(tj + dt / 2, y + dt / 2 * k2)
        k4 = rhs(tj + dt, y + dt * k3)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise DivergenceError(f"non-finite state at t={t[j + 1]!r}", float(t[j + 1]))
        ys[j + 1] = y
    return Solution(t, ys)


def simulate_sirc(initial: SircState, params: SircParameters, t1: float, t2: float,
                  h: float = 1e-3, u: Callable | None = None, v: Callable | None = None) -> Trajectory:
    """Integrate the SIRC model with time-varying controls ``u(t)``, ``v(t)``.

    Controls are callables evaluated at every Runge-Kutta stage time; ``None``
    means identically zero.
    """
    zero = lambda t: 0.0  # noqa: E731
    u = u or zero
    v = v or zero
    sol = integrate_rk4(lambda t, y: sirc_rhs(y, params, u(t), v(t)), initial, t1, t2, h)
    uu = np.array([u(t) for t in sol.t], dtype=float)
    vv = np.array([v(t) for t in sol.t], dtype=float)
    return Trajectory(sol.t, sol.y, uu, vv)
