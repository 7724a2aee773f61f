"""Piecewise-linear control functions built from nodal (hat) basis functions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ce_core import CeError, DimensionError, ParameterError

__all__ = ["DomainError", "ControlGrid", "hat_basis", "eval_control", "check_vector"]


class DomainError(CeError, ValueError):
    pass


@dataclass(frozen=True)
class ControlGrid:
    """Node times of the control plus the box bounds applied on evaluation."""

    nodes: np.ndarray
    lower: float = 0.0
    upper: float = 0.9

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float).reshape(-1)
        if nodes.size < 2:
            raise ParameterError("a control grid needs at least two nodes")
        if not np.all(np.diff(nodes) > 0):
            raise ParameterError("control nodes must be strictly increasing")
        if not 0 <= self.lower <= self.upper:
            raise ParameterError(f"bounds must satisfy 0 <= lower <= upper, got [{self.lower}, {self.upper}]")
        nodes.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "lower", float(self.lower))
        object.__setattr__(self, "upper", float(self.upper))

    @classmethod
    def uniform(cls, t1: float, t2: float, intervals: int = 20,
                lower: float = 0.0, upper: float = 0.9) -> "ControlGrid":
        if intervals < 1:
            raise ParameterError("need at least one interval")
        nodes = np.linspace(t1, t2, intervals + 1)
        nodes[-1] = t2
        return cls(nodes, lower, upper)

    @property
    def size(self) -> int:
        """Number of nodes, i.e. the length of a matching control vector."""
        return self.nodes.size

    @property
    def start(self) -> float:
        return float(self.nodes[0])

    @property
    def end(self) -> float:
        return float(self.nodes[-1])

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)


def _check_time(t, grid: ControlGrid) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(t < grid.start) or np.any(t > grid.end) or np.any(np.isnan(t)):
        raise DomainError(f"time outside the control horizon [{grid.start}, {grid.end}]")
    return t


def check_vector(c, grid: ControlGrid) -> np.ndarray:
    c = np.asarray(c, dtype=float).reshape(-1)
    if c.size != grid.size:
        raise DimensionError(f"control vector has {c.size} values, grid has {grid.size} nodes")
    return c


def hat_basis(i: int, t, grid: ControlGrid):
    """Tent function of node ``i`` evaluated at ``t`` (scalar or array).

    Equals one at ``t_i``, falls linearly to zero at the neighbouring nodes
    and is zero elsewhere. The first and last node keep only their inner half.
    """
    if not 0 <= i < grid.size:
        raise DomainError(f"node index {i} outside 0..{grid.size - 1}")
    tt = _check_time(t, grid)
    x = grid.nodes
    w = np.zeros_like(tt)
    if i > 0:
        left = (tt >= x[i - 1]) & (tt <= x[i])
        w = np.where(left, (tt - x[i - 1]) / (x[i] - x[i - 1]), w)
    if i < grid.size - 1:
        right = (tt >= x[i]) & (tt <= x[i + 1])
        w = np.where(right, (x[i + 1] - tt) / (x[i + 1] - x[i]), w)
    if i == 0 or i == grid.size - 1:
        w = np.where(tt == x[i], 1.0, w)
    return float(w) if w.ndim == 0 else w


def eval_control(c, t, grid: ControlGrid):
    """Value of ``sum_i c_i k_i(t)`` clipped to the grid bounds.

    The raw sum is ordinary linear interpolation between node values.
    """
    c = check_vector(c, grid)
    tt = _check_time(t, grid)
    raw = np.interp(tt, grid.nodes, c)
    out = np.clip(raw, grid.lower, grid.upper)
    return float(out) if out.ndim == 0 else out
