"""Time grids, the space C'_{a,b}[0,T] and the PWZ stochastic integral.

All quadratures share one discretisation: densities are sampled at cell
midpoints and weighted by the cell increments of b (or a).  With that
choice the discrete PWZ sum of a density against a simulated path is an
exact Gaussian whose mean and variance are the quadrature values of
(w, a) and ||w||^2, so Monte Carlo checks only see sampling noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch, NonFinite, NonMonotoneVariance
from .functions import CellSampled, Constant, ParametricFunction, Product

__all__ = [
    "TimeGrid",
    "MeanVarPair",
    "HPrimeElement",
    "SamplePath",
    "CabSpace",
    "db_weights",
    "inner_product_cab_prime",
    "inner_product_lab",
    "apply_D",
    "apply_D_inverse",
    "odot",
    "pwz_integral",
    "mean_pairing",
    "validate_mean_condition",
    "element_from_values",
]


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing partition 0 = t_0 < ... < t_n = T with n >= 2."""

    t: np.ndarray

    def __post_init__(self):
        t = np.array(self.t, dtype=float)
        if t.ndim != 1 or t.size < 3:
            raise ValueError("a TimeGrid needs n >= 2 cells")
        if t[0] != 0.0:
            raise ValueError("a TimeGrid must start at t_0 = 0")
        if np.any(np.diff(t) <= 0.0):
            raise ValueError("grid points must be strictly increasing")
        t.flags.writeable = False
        object.__setattr__(self, "t", t)

    @classmethod
    def uniform(cls, T: float, n: int = 1024) -> "TimeGrid":
        if T <= 0:
            raise ValueError("horizon T must be positive")
        t = np.linspace(0.0, T, n + 1)
        t[-1] = T
        return cls(t)

    @property
    def T(self) -> float:
        return float(self.t[-1])

    @property
    def n(self) -> int:
        return self.t.size - 1

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.t[:-1] + self.t[1:])

    @property
    def dt(self) -> np.ndarray:
        return np.diff(self.t)

    def same_as(self, other: "TimeGrid") -> bool:
        return self is other or (
            self.t.shape == other.t.shape and bool(np.array_equal(self.t, other.t))
        )

    def __eq__(self, other):
        return isinstance(other, TimeGrid) and self.same_as(other)

    __hash__ = object.__hash__


@dataclass(frozen=True)
class HPrimeElement:
    """An element w(t) = int_0^t z db of C'_{a,b}, stored by its density z = Dw."""

    z: ParametricFunction
    label: str = ""

    def __add__(self, other: "HPrimeElement") -> "HPrimeElement":
        return HPrimeElement(self.z + other.z)

    def __sub__(self, other: "HPrimeElement") -> "HPrimeElement":
        return HPrimeElement(self.z - other.z)

    def __neg__(self) -> "HPrimeElement":
        return HPrimeElement(-self.z)

    def __mul__(self, c: float) -> "HPrimeElement":
        return HPrimeElement(Product(Constant(float(c)), self.z))

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class SamplePath:
    """One realisation x(t_0), ..., x(t_n) of the process, x(t_0) = 0."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.t.shape:
            raise ValueError("path needs one value per grid point")
        if v[0] != 0.0:
            raise ValueError("sample paths start at x(0) = 0")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    def scaled(self, rho: float) -> "SamplePath":
        return SamplePath(self.grid, rho * self.values)

    def shifted(self, w_values: np.ndarray, h: float = 1.0) -> "SamplePath":
        """x + h*w for an element given by its grid values."""
        return SamplePath(self.grid, self.values + h * np.asarray(w_values))


def _check_density_grid(z: ParametricFunction, grid: TimeGrid) -> None:
    g = z.grid_points
    if g is not None and not (g.shape == grid.t.shape and np.array_equal(g, grid.t)):
        raise GridMismatch("element density is sampled on a different grid")


def density_at_midpoints(w: HPrimeElement, grid: TimeGrid) -> np.ndarray:
    _check_density_grid(w.z, grid)
    return np.broadcast_to(np.asarray(w.z(grid.midpoints), dtype=float), (grid.n,))


def db_weights(grid: TimeGrid, b: ParametricFunction) -> np.ndarray:
    """Cell weights b(t_{j+1}) - b(t_j); all positive, summing to b(T)."""
    w = np.diff(b(grid.t))
    if np.any(w <= 0.0) or not np.all(np.isfinite(w)):
        bad = int(np.argmax(~(w > 0.0)))
        raise NonMonotoneVariance(
            f"b is not strictly increasing on cell {bad} "
            f"[{grid.t[bad]:g}, {grid.t[bad + 1]:g}]"
        )
    return w


def inner_product_cab_prime(
    w1: HPrimeElement, w2: HPrimeElement, grid: TimeGrid, b: ParametricFunction
) -> float:
    """(w1, w2)_{C'} = int Dw1 Dw2 db, midpoint rule against db cells."""
    z1 = density_at_midpoints(w1, grid)
    z2 = density_at_midpoints(w2, grid)
    return float(np.sum(z1 * z2 * db_weights(grid, b)))


def abs_a_weights(a: ParametricFunction, grid: TimeGrid) -> np.ndarray:
    """Cell increments of the total variation |a|, int_cell |a'| dt."""
    return np.abs(a.derivative(grid.midpoints)) * grid.dt


def inner_product_lab(
    u: ParametricFunction, v: ParametricFunction, pair: "MeanVarPair", grid: TimeGrid
) -> float:
    """(u, v)_{a,b} = int u v d[b + |a|]."""
    weights = db_weights(grid, pair.b) + abs_a_weights(pair.a, grid)
    m = grid.midpoints
    return float(np.sum(u(m) * v(m) * weights))


def apply_D(w: HPrimeElement) -> ParametricFunction:
    return w.z


def apply_D_inverse(z: ParametricFunction, grid: TimeGrid, b: ParametricFunction) -> np.ndarray:
    """Grid samples of w(t) = int_0^t z db; w(t_0) = 0."""
    _check_density_grid(z, grid)
    cells = np.asarray(z(grid.midpoints), dtype=float) * db_weights(grid, b)
    return np.concatenate(([0.0], np.cumsum(cells)))


def element_from_values(values: np.ndarray, grid: TimeGrid, b: ParametricFunction) -> HPrimeElement:
    """Element whose D^{-1} reproduces ``values`` exactly at the grid points."""
    values = np.asarray(values, dtype=float)
    if values.shape != grid.t.shape or values[0] != 0.0:
        raise ValueError("element values must cover the grid and start at 0")
    return HPrimeElement(CellSampled(grid.t, np.diff(values) / db_weights(grid, b)))


def odot(w: HPrimeElement, k: HPrimeElement) -> HPrimeElement:
    """w (.) k = D^{-1}(Dw Dk)"""
    return HPrimeElement(Product(w.z, k.z))


def pwz_integral(w: HPrimeElement, x: SamplePath) -> float:
    """(w, x)~ as the Stieltjes sum sum_j Dw(mid_j) (x(t_{j+1}) - x(t_j))."""
    z = density_at_midpoints(w, x.grid)
    return float(np.dot(z, x.increments))


def mean_pairing(w: HPrimeElement, pair: "MeanVarPair", grid: TimeGrid) -> float:
    """(w, a)_{C'} = int Dw da, sampled at midpoints against the a-increments."""
    z = density_at_midpoints(w, grid)
    return float(np.dot(z, np.diff(pair.a(grid.t))))


def validate_mean_condition(a: ParametricFunction, grid: TimeGrid) -> float:
    """Value of int |a'|^2 d|a| = int |a'|^3 dt."""
    with np.errstate(over="ignore", invalid="ignore"):
        value = float(np.sum(np.abs(a.derivative(grid.midpoints)) ** 3 * grid.dt))
    if not np.isfinite(value):
        raise NonFinite("mean condition integral is not finite")
    return value


@dataclass(frozen=True)
class MeanVarPair:
    """Mean a(t) and variance b(t) of the generalized Brownian motion."""

    a: ParametricFunction
    b: ParametricFunction

    def validate(self, grid: TimeGrid, atol: float = 1e-12) -> float:
        """Check a(0) = b(0) = 0 and b increasing; return the mean-condition value.

        b' is required to be positive at cell midpoints (where every density
        is sampled); a vanishing b'(0), as for b(t) = t^2, is tolerated.
        """
        if abs(float(self.a(0.0))) > atol:
            raise ValueError("mean function must satisfy a(0) = 0")
        if abs(float(self.b(0.0))) > atol:
            raise ValueError("variance function must satisfy b(0) = 0")
        db_weights(grid, self.b)
        slope = self.b.derivative(grid.midpoints)
        if np.any(slope <= 0.0):
            raise NonMonotoneVariance("b'(t) must be positive on the grid")
        return validate_mean_condition(self.a, grid)

    def mean_element(self, grid: TimeGrid) -> HPrimeElement:
        """The mean a as an element of C'_{a,b}, by its cellwise density da/db."""
        return element_from_values(self.a(grid.t), grid, self.b)


class CabSpace:
    """Quadrature context: one (a, b) pair on one grid, with cached weights.

    The module-level functions recompute weights on every call; this class
    is what the higher layers use.
    """

    def __init__(self, pair: MeanVarPair, grid: TimeGrid, validate: bool = True):
        self.pair = pair
        self.grid = grid
        if validate:
            self.mean_condition = pair.validate(grid)
        self.mid = grid.midpoints
        self.db = db_weights(grid, pair.b)
        self.da = np.diff(pair.a(grid.t))
        self.a_element = pair.mean_element(grid)
        self.bT = float(pair.b(grid.T))

    @property
    def n(self) -> int:
        return self.grid.n

    def density(self, w: HPrimeElement) -> np.ndarray:
        return density_at_midpoints(w, self.grid)

    def inner(self, w1: HPrimeElement, w2: HPrimeElement) -> float:
        return float(np.sum(self.density(w1) * self.density(w2) * self.db))

    def inner_dens(self, z1: np.ndarray, z2: np.ndarray) -> np.ndarray:
        """Inner products of density rows (last axis is the cell index)."""
        return np.sum(z1 * z2 * self.db, axis=-1)

    def norm(self, w: HPrimeElement) -> float:
        return float(np.sqrt(self.inner(w, w)))

    def mean_pairing(self, w: HPrimeElement) -> float:
        return self.inner(w, self.a_element)

    @property
    def a_density(self) -> np.ndarray:
        return self.density(self.a_element)

    @property
    def a_norm(self) -> float:
        return self.norm(self.a_element)

    def values(self, w: HPrimeElement) -> np.ndarray:
        """Grid samples of w = D^{-1}(Dw)."""
        return np.concatenate(([0.0], np.cumsum(self.density(w) * self.db)))
