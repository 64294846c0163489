"""Closed parametric families of real functions on [0, T].

Every family evaluates vectorised over numpy arrays and carries an exact
derivative, except the grid-sampled ones (forward differences).  These
objects represent the mean a(t), the variance b(t), the operator symbol
theta(t) and the densities Dw of elements of the Cameron-Martin type space.

Functions compose with ``+``, ``-`` and ``*`` (scalars or other functions),
which is how sums of elements and the odot product are built.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch

__all__ = [
    "ParametricFunction",
    "Zero",
    "Constant",
    "Linear",
    "Polynomial",
    "ScaledSine",
    "GridSampled",
    "CellSampled",
    "Sum",
    "Product",
    "PositivePart",
    "NegativePart",
    "Sqrt",
    "positive_part",
    "negative_part",
    "sqrt_of",
    "as_function",
]


def _arr(t) -> np.ndarray:
    return np.asarray(t, dtype=float)


def _frozen(values) -> np.ndarray:
    out = np.array(values, dtype=float)
    out.flags.writeable = False
    return out


class ParametricFunction(ABC):
    """A real function of t with an available derivative."""

    @abstractmethod
    def __call__(self, t) -> np.ndarray: ...

    @abstractmethod
    def derivative(self, t) -> np.ndarray: ...

    @property
    def grid_points(self) -> np.ndarray | None:
        """Grid the function is tied to, or None for analytic families."""
        return None

    def __add__(self, other):
        return Sum(self, as_function(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Sum(self, Product(Constant(-1.0), as_function(other)))

    def __rsub__(self, other):
        return Sum(as_function(other), Product(Constant(-1.0), self))

    def __neg__(self):
        return Product(Constant(-1.0), self)

    def __mul__(self, other):
        return Product(as_function(other), self)

    __rmul__ = __mul__


def as_function(value) -> ParametricFunction:
    if isinstance(value, ParametricFunction):
        return value
    return Constant(float(value))


@dataclass(frozen=True)
class Zero(ParametricFunction):
    def __call__(self, t):
        return np.zeros_like(_arr(t))

    def derivative(self, t):
        return np.zeros_like(_arr(t))


@dataclass(frozen=True)
class Constant(ParametricFunction):
    c: float

    def __call__(self, t):
        return np.full_like(_arr(t), self.c)

    def derivative(self, t):
        return np.zeros_like(_arr(t))


@dataclass(frozen=True)
class Linear(ParametricFunction):
    """alpha * t"""

    alpha: float

    def __call__(self, t):
        return self.alpha * _arr(t)

    def derivative(self, t):
        return np.full_like(_arr(t), self.alpha)


@dataclass(frozen=True)
class Polynomial(ParametricFunction):
    """sum_k coeffs[k] * t**k (ascending order)."""

    coeffs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    @property
    def poly(self) -> np.polynomial.Polynomial:
        return np.polynomial.Polynomial(self.coeffs)

    def __call__(self, t):
        return self.poly(_arr(t))

    def derivative(self, t):
        return self.poly.deriv()(_arr(t))


@dataclass(frozen=True)
class ScaledSine(ParametricFunction):
    """amplitude * sin(frequency * s + phase), with s = t or s = inner(t).

    Passing ``inner=b`` and ``frequency=k*pi/b(T)`` gives the composed
    argument k*pi*b(t)/b(T) used for the eigenfunctions and the sine symbol.
    """

    amplitude: float
    frequency: float
    phase: float = 0.0
    inner: ParametricFunction | None = None

    def _s(self, t):
        return _arr(t) if self.inner is None else self.inner(t)

    def __call__(self, t):
        return self.amplitude * np.sin(self.frequency * self._s(t) + self.phase)

    def derivative(self, t):
        ds = np.ones_like(_arr(t)) if self.inner is None else self.inner.derivative(t)
        return (
            self.amplitude
            * self.frequency
            * np.cos(self.frequency * self._s(t) + self.phase)
            * ds
        )

    @property
    def grid_points(self):
        return None if self.inner is None else self.inner.grid_points


@dataclass(frozen=True, eq=False)
class GridSampled(ParametricFunction):
    """Values on grid points, linearly interpolated; forward-difference slope."""

    t: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "t", _frozen(self.t))
        object.__setattr__(self, "values", _frozen(self.values))
        if self.t.shape != self.values.shape:
            raise ValueError("GridSampled needs one value per grid point")

    @property
    def grid_points(self):
        return self.t

    def __call__(self, t):
        return np.interp(_arr(t), self.t, self.values)

    def derivative(self, t):
        slopes = np.diff(self.values) / np.diff(self.t)
        idx = np.clip(np.searchsorted(self.t, _arr(t), side="right") - 1, 0, slopes.size - 1)
        return slopes[idx]


@dataclass(frozen=True, eq=False)
class CellSampled(ParametricFunction):
    """Piecewise constant: ``values[j]`` on the cell [t_j, t_{j+1}).

    This is the exact discrete density of an element known only through
    its grid values (increment over db increment per cell).
    """

    t: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "t", _frozen(self.t))
        object.__setattr__(self, "values", _frozen(self.values))
        if self.values.shape != (self.t.size - 1,):
            raise ValueError("CellSampled needs one value per grid cell")

    @property
    def grid_points(self):
        return self.t

    def __call__(self, t):
        idx = np.clip(np.searchsorted(self.t, _arr(t), side="right") - 1, 0, self.values.size - 1)
        return self.values[idx]

    def derivative(self, t):
        return np.zeros_like(_arr(t))


def _common_grid(*fs: ParametricFunction) -> np.ndarray | None:
    found = None
    for f in fs:
        g = f.grid_points
        if g is None:
            continue
        if found is None:
            found = g
        elif found.shape != g.shape or not np.array_equal(found, g):
            raise GridMismatch("functions sampled on different grids were combined")
    return found


@dataclass(frozen=True)
class Sum(ParametricFunction):
    f: ParametricFunction
    g: ParametricFunction

    def __call__(self, t):
        return self.f(t) + self.g(t)

    def derivative(self, t):
        return self.f.derivative(t) + self.g.derivative(t)

    @property
    def grid_points(self):
        return _common_grid(self.f, self.g)


@dataclass(frozen=True)
class Product(ParametricFunction):
    f: ParametricFunction
    g: ParametricFunction

    def __call__(self, t):
        return self.f(t) * self.g(t)

    def derivative(self, t):
        return self.f.derivative(t) * self.g(t) + self.f(t) * self.g.derivative(t)

    @property
    def grid_points(self):
        return _common_grid(self.f, self.g)


@dataclass(frozen=True)
class PositivePart(ParametricFunction):
    """max(f, 0)"""

    f: ParametricFunction

    def __call__(self, t):
        return np.maximum(self.f(t), 0.0)

    def derivative(self, t):
        return np.where(self.f(t) > 0.0, self.f.derivative(t), 0.0)

    @property
    def grid_points(self):
        return self.f.grid_points


@dataclass(frozen=True)
class NegativePart(ParametricFunction):
    """max(-f, 0)"""

    f: ParametricFunction

    def __call__(self, t):
        return np.maximum(-self.f(t), 0.0)

    def derivative(self, t):
        return np.where(self.f(t) < 0.0, -self.f.derivative(t), 0.0)

    @property
    def grid_points(self):
        return self.f.grid_points


@dataclass(frozen=True)
class Sqrt(ParametricFunction):
    """sqrt(f) for a nonnegative f; derivative is taken as 0 where f == 0."""

    f: ParametricFunction

    def __call__(self, t):
        v = self.f(t)
        if np.any(v < 0.0):
            raise ValueError("Sqrt of a function with negative values")
        return np.sqrt(v)

    def derivative(self, t):
        v = np.sqrt(np.maximum(self.f(t), 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            d = 0.5 * self.f.derivative(t) / v
        return np.where(v > 0.0, d, 0.0)

    @property
    def grid_points(self):
        return self.f.grid_points


def positive_part(f: ParametricFunction) -> ParametricFunction:
    if isinstance(f, Zero):
        return f
    if isinstance(f, Constant):
        return Constant(max(f.c, 0.0)) if f.c > 0 else Zero()
    return PositivePart(f)


def negative_part(f: ParametricFunction) -> ParametricFunction:
    if isinstance(f, Zero):
        return f
    if isinstance(f, Constant):
        return Constant(-f.c) if f.c < 0 else Zero()
    return NegativePart(f)


def sqrt_of(f: ParametricFunction) -> ParametricFunction:
    if isinstance(f, Zero):
        return f
    if isinstance(f, Constant):
        if f.c < 0:
            raise ValueError("square root of a negative constant")
        return Constant(float(np.sqrt(f.c)))
    return Sqrt(f)
