"""Space-time grid plumbing: a uniform window in x and uniform time levels.

The spatial window stands in for the whole line; solvers impose homogeneous
Dirichlet values at its ends, so data should decay well inside it.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ShapeError, ValidationError

__all__ = ["GridSpec", "GridFunction"]


@dataclass(frozen=True)
class GridSpec:
    x_min: float = -10.0
    x_max: float = 10.0
    nx: int = 401
    T: float = 0.5
    nt: int = 201

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValidationError("need x_min < x_max")
        if self.nx < 3:
            raise ValidationError("need nx >= 3")
        if self.T <= 0:
            raise ValidationError("need T > 0")
        if self.nt < 2:
            raise ValidationError("need nt >= 2")

    @cached_property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx)

    @cached_property
    def t(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.nt)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def dt(self) -> float:
        return self.T / (self.nt - 1)

    @cached_property
    def x_weights(self) -> np.ndarray:
        """Trapezoid quadrature weights on the spatial nodes."""
        w = np.full(self.nx, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        return w

    def l2_x(self, values: np.ndarray) -> np.ndarray:
        """Trapezoid L2 norm in x; last axis is space.

        Returns a scalar for a space-only array, one norm per time level for
        a (time, space) array.
        """
        v = np.asarray(values, dtype=float)
        if v.shape[-1] != self.nx:
            raise ShapeError(f"last axis {v.shape[-1]} != nx {self.nx}")
        return np.sqrt((v * v) @ self.x_weights)

    def integrate_x(self, values: np.ndarray) -> float:
        return float(np.asarray(values, dtype=float) @ self.x_weights)

    def time_integral_cumulative(self, series: np.ndarray) -> np.ndarray:
        """Trapezoid cumulative integral over the time levels; entry 0 is 0."""
        s = np.asarray(series, dtype=float)
        out = np.zeros_like(s)
        out[1:] = np.cumsum(0.5 * self.dt * (s[1:] + s[:-1]))
        return out

    def shape_of(self, values: np.ndarray) -> str:
        v = np.asarray(values)
        if v.shape == (self.nx,):
            return "space"
        if v.shape == (self.nt, self.nx):
            return "time_space"
        raise ShapeError(
            f"array shape {v.shape} matches neither ({self.nx},) nor "
            f"({self.nt}, {self.nx})"
        )


@dataclass(frozen=True)
class GridFunction:
    """Values on the grid: (nt, nx) for time-dependent data, (nx,) otherwise."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        self.grid.shape_of(v)
        if not np.all(np.isfinite(v)):
            raise ValidationError("grid function contains non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def time_dependent(self) -> bool:
        return self.values.ndim == 2

    def l2_x(self):
        return self.grid.l2_x(self.values)

    def sup_t_l2_x(self) -> float:
        norms = self.grid.l2_x(self.values)
        return float(np.max(norms)) if self.time_dependent else float(norms)

    def __add__(self, other: "GridFunction") -> "GridFunction":
        self._check(other)
        return GridFunction(self.grid, self.values + other.values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        self._check(other)
        return GridFunction(self.grid, self.values - other.values)

    def __mul__(self, c: float) -> "GridFunction":
        return GridFunction(self.grid, self.values * float(c))

    __rmul__ = __mul__

    def _check(self, other):
        if other.grid != self.grid or other.values.shape != self.values.shape:
            raise ShapeError("grid functions live on different grids")
