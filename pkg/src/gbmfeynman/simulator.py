"""Sample paths of the generalized Brownian motion process.

Two generators are provided:

* exact Gaussian increments, x(t_j) - x(t_{j-1}) ~ N(a(t_j) - a(t_{j-1}),
  b(t_j) - b(t_{j-1})), independent across cells;
* a truncated eigenfunction series x = a + sum_{m <= M} xi_m e_m.

Randomness comes from a counter-based Philox generator keyed by
(seed, stream id); the draw index is the counter.  A path therefore depends
only on (seed, stream id), never on which thread produced it.
"""

from __future__ import annotations

import csv
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import CabSpace, HPrimeElement, MeanVarPair, SamplePath, TimeGrid, db_weights
from .functions import GridSampled, ParametricFunction, ScaledSine

__all__ = [
    "RngConfig",
    "standard_normals",
    "sample_path_increments",
    "sample_path_series",
    "increments_for_streams",
    "series_increments_for_streams",
    "EigenSystem",
    "eigenfunction",
    "apply_B",
    "write_path_csv",
]

_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngConfig:
    seed: int
    stream: int = 0

    def __post_init__(self):
        for name in ("seed", "stream"):
            v = getattr(self, name)
            if not 0 <= int(v) <= _U64:
                raise ValueError(f"{name} must be an unsigned 64-bit integer")

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed, self.stream], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(counter=0, key=key))


class _StreamSource:
    """Reusable Philox whose key is reset per stream (cheaper than rebuilding)."""

    def __init__(self):
        self.bitgen = np.random.Philox(counter=0, key=np.zeros(2, dtype=np.uint64))
        self.gen = np.random.Generator(self.bitgen)
        self.state = self.bitgen.state

    def normals(self, seed: int, stream: int, size: int) -> np.ndarray:
        st = self.state
        st["state"]["key"] = np.array([seed, stream], dtype=np.uint64)
        st["state"]["counter"] = np.zeros(4, dtype=np.uint64)
        st["buffer_pos"] = 4
        st["has_uint32"] = 0
        st["uinteger"] = 0
        self.bitgen.state = st
        return self.gen.standard_normal(size)


_local = threading.local()


def _source() -> _StreamSource:
    src = getattr(_local, "source", None)
    if src is None:
        src = _local.source = _StreamSource()
    return src


def standard_normals(seed: int, stream: int, size: int) -> np.ndarray:
    """The first ``size`` standard normals of stream (seed, stream)."""
    return _source().normals(int(seed), int(stream), size)


def _increment_moments(pair: MeanVarPair, grid: TimeGrid):
    return np.diff(pair.a(grid.t)), np.sqrt(db_weights(grid, pair.b))


def increments_for_streams(
    pair: MeanVarPair, grid: TimeGrid, seed: int, streams, moments=None
) -> np.ndarray:
    """Path increments, one row per stream id."""
    da, sd = moments if moments is not None else _increment_moments(pair, grid)
    streams = np.asarray(streams, dtype=np.uint64)
    src = _source()
    out = np.empty((streams.size, grid.n))
    for row, s in enumerate(streams):
        out[row] = src.normals(int(seed), int(s), grid.n)
    out *= sd
    out += da
    return out


def sample_path_increments(pair: MeanVarPair, grid: TimeGrid, rng: RngConfig) -> SamplePath:
    dx = increments_for_streams(pair, grid, rng.seed, [rng.stream])[0]
    return SamplePath(grid, np.concatenate(([0.0], np.cumsum(dx))))


@dataclass(frozen=True)
class EigenSystem:
    """e_m(t) = sqrt(2 b(T)) / ((m - 1/2) pi) * sin((m - 1/2) pi b(t) / b(T)).

    The density is De_m = sqrt(2 / b(T)) cos((m - 1/2) pi b(t) / b(T)) and
    B e_m = lambda_m e_m with lambda_m = (b(T) / ((m - 1/2) pi))^2.
    """

    b: ParametricFunction
    T: float
    M: int

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("truncation order M must be >= 1")

    @property
    def bT(self) -> float:
        return float(self.b(self.T))

    def _freq(self, m) -> np.ndarray:
        return (np.asarray(m, dtype=float) - 0.5) * np.pi / self.bT

    @property
    def eigenvalues(self) -> np.ndarray:
        return 1.0 / self._freq(np.arange(1, self.M + 1)) ** 2

    def element(self, m: int) -> HPrimeElement:
        if m < 1:
            raise ValueError("eigenfunction index starts at 1")
        z = ScaledSine(np.sqrt(2.0 / self.bT), float(self._freq(m)), np.pi / 2, inner=self.b)
        return HPrimeElement(z, label=f"e_{m}")

    def values(self, t) -> np.ndarray:
        """Matrix of e_m(t), shape (M, len(t))."""
        k = self._freq(np.arange(1, self.M + 1))[:, None]
        s = self.b(np.asarray(t, dtype=float))[None, :]
        return np.sqrt(2.0 * self.bT) / (k * self.bT) * np.sin(k * s)

    def gram(self, grid: TimeGrid) -> np.ndarray:
        m = grid.midpoints
        k = self._freq(np.arange(1, self.M + 1))[:, None]
        dens = np.sqrt(2.0 / self.bT) * np.cos(k * self.b(m)[None, :])
        return (dens * db_weights(grid, self.b)) @ dens.T


def eigenfunction(m: int, b: ParametricFunction, grid: TimeGrid) -> HPrimeElement:
    return EigenSystem(b, grid.T, max(m, 1)).element(m)


def series_increments_for_streams(
    pair: MeanVarPair, grid: TimeGrid, seed: int, streams, M: int = 256
) -> np.ndarray:
    """Increments of a + sum_{m<=M} xi_m e_m; xi drawn from each stream."""
    basis = EigenSystem(pair.b, grid.T, M).values(grid.t)
    streams = np.asarray(streams, dtype=np.uint64)
    src = _source()
    xi = np.empty((streams.size, M))
    for row, s in enumerate(streams):
        xi[row] = src.normals(int(seed), int(s), M)
    x = xi @ basis + pair.a(grid.t)[None, :]
    x[:, 0] = 0.0
    return np.diff(x, axis=1)


def sample_path_series(
    pair: MeanVarPair, grid: TimeGrid, rng: RngConfig, M: int = 256
) -> SamplePath:
    dx = series_increments_for_streams(pair, grid, rng.seed, [rng.stream], M)[0]
    return SamplePath(grid, np.concatenate(([0.0], np.cumsum(dx))))


def apply_B(w: HPrimeElement, b: ParametricFunction, grid: TimeGrid) -> HPrimeElement:
    """Bw(t) = int_0^T min(b(s), b(t)) w(s) db(s).

    The kernel integrand is the element value w(s).  Differentiating in t
    gives D(Bw)(t) = int_t^T w(s) db(s), returned grid-sampled (tail sums
    by the trapezoid rule on the grid values of w).
    """
    space = CabSpace(MeanVarPair(b * 0.0, b), grid, validate=False)
    wv = space.values(w)
    cells = 0.5 * (wv[:-1] + wv[1:]) * space.db
    tail = np.concatenate((np.cumsum(cells[::-1])[::-1], [0.0]))
    return HPrimeElement(GridSampled(grid.t, tail), label="Bw")


def write_path_csv(path: SamplePath, target: str | Path) -> None:
    with open(target, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "x"])
        for t, x in zip(path.grid.t, path.values):
            writer.writerow([repr(float(t)), repr(float(x))])
