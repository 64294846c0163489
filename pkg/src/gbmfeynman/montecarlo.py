"""Monte Carlo checks of the probability-side identities.

Every estimator draws path pairs (x1, x2) from streams (2i, 2i+1) of the
counter-based generator, so path i is the same whatever the worker count.
Paths are produced in fixed-size chunks; each chunk writes its per-path
values into a preallocated array and the final reduction is a single
``numpy`` sum over that array.  Thread count therefore never changes a bit
of the result.

Two-sided identities are checked with common random numbers: both sides
are evaluated on the same paths and the z-score is taken from the sample
variance of the pathwise difference.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import CabSpace, HPrimeElement, MeanVarPair, TimeGrid
from .errors import InvalidParameter
from .fresnel import AtomTable, DiscreteMeasure, OperatorPair, analytic_J, feynman_integral
from .simulator import increments_for_streams, series_increments_for_streams
from .variation import DirectionPair, IdentityReport, _jsonable, linear_weighted_J, variation_J

__all__ = [
    "McEstimate",
    "StatReport",
    "PathEngine",
    "mc_expectation",
    "verify_pwz_law",
    "compare_simulators",
    "verify_translation",
    "verify_parts_basic",
    "verify_parts_scaled",
    "verify_continuation",
    "retry_seed",
]

Z_MAX = 4.0
CHUNK = 2048
_GOLDEN = 0x9E3779B97F4A7C15

Kernel = Callable[[np.ndarray, "np.ndarray | None"], np.ndarray]


@dataclass(frozen=True)
class McEstimate:
    """Sample mean of complex per-path values with per-component standard errors."""

    mean: complex
    stderr_re: float
    stderr_im: float
    N: int
    seed: int

    @property
    def stderr(self) -> float:
        return max(self.stderr_re, self.stderr_im)

    @classmethod
    def from_samples(cls, values: np.ndarray, seed: int) -> "McEstimate":
        values = np.asarray(values, dtype=complex)
        n = values.size
        mean = complex(np.sum(values) / n)
        sd_re = float(np.std(values.real, ddof=1)) if n > 1 else 0.0
        sd_im = float(np.std(values.imag, ddof=1)) if n > 1 else 0.0
        return cls(mean, sd_re / math.sqrt(n), sd_im / math.sqrt(n), n, int(seed))

    def z_scores(self, reference: complex) -> tuple[float, float]:
        ref = complex(reference)
        return (
            _z(self.mean.real - ref.real, self.stderr_re),
            _z(self.mean.imag - ref.imag, self.stderr_im),
        )

    def to_dict(self) -> dict:
        return {
            "mean": [self.mean.real, self.mean.imag],
            "stderr": [self.stderr_re, self.stderr_im],
            "N": self.N,
            "seed": self.seed,
        }


def _z(diff: float, se: float) -> float:
    # a vanishing standard error only passes on exact agreement
    if se == 0.0:
        return 0.0 if diff == 0.0 else math.inf
    return abs(diff) / se


@dataclass
class StatReport:
    name: str
    estimate: McEstimate
    reference: complex
    z_score: float
    z_max: float
    passed: bool
    metadata: dict = field(default_factory=dict)

    @classmethod
    def judge(
        cls, name: str, est: McEstimate, reference: complex, z_max: float = Z_MAX, extra_ok: bool = True, **metadata
    ) -> "StatReport":
        zr, zi = est.z_scores(reference)
        z = max(zr, zi)
        return cls(name, est, complex(reference), z, z_max, bool(zr <= z_max and zi <= z_max and extra_ok), metadata)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": "statistical",
            "estimate": self.estimate.to_dict(),
            "reference": [self.reference.real, self.reference.imag],
            "error": abs(self.estimate.mean - self.reference),
            "z": self.z_score,
            "z_max": self.z_max,
            "pass": self.passed,
            "metadata": _jsonable(self.metadata),
        }


class PathEngine:
    """Evaluate a per-path kernel on N path pairs, sharded across threads.

    ``kernel(dx1, dx2)`` receives increment arrays of shape (rows, n) and
    returns (rows, m) values.  ``dx2`` is None when ``two_spaces`` is False;
    x1 still comes from the even streams so it does not depend on that flag.
    """

    def __init__(self, pair: MeanVarPair, grid: TimeGrid, workers: int = 1, series_M: int | None = None):
        if workers < 1:
            raise InvalidParameter("worker count must be >= 1")
        self.pair = pair
        self.grid = grid
        self.workers = int(workers)
        self.series_M = series_M
        space = CabSpace(pair, grid, validate=False)
        self._moments = (space.da, np.sqrt(space.db))

    def _draw(self, seed: int, streams: np.ndarray) -> np.ndarray:
        if self.series_M is None:
            return increments_for_streams(self.pair, self.grid, seed, streams, self._moments)
        return series_increments_for_streams(self.pair, self.grid, seed, streams, self.series_M)

    def run(self, kernel: Kernel, N: int, seed: int, m: int, two_spaces: bool = True, stream_offset: int = 0) -> np.ndarray:
        out = np.empty((N, m), dtype=complex)
        bounds = [(s, min(s + CHUNK, N)) for s in range(0, N, CHUNK)]

        def work(bound):
            lo, hi = bound
            idx = np.arange(lo, hi, dtype=np.uint64)
            dx1 = self._draw(seed, 2 * idx + stream_offset)
            dx2 = self._draw(seed, 2 * idx + 1 + stream_offset) if two_spaces else None
            out[lo:hi] = np.asarray(kernel(dx1, dx2)).reshape(hi - lo, m)

        if self.workers == 1:
            for b in bounds:
                work(b)
        else:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                list(pool.map(work, bounds))
        return out


def retry_seed(seed: int) -> int:
    """Fresh seed derived from ``seed`` for the single allowed retry."""
    return (int(seed) + _GOLDEN) & ((1 << 64) - 1)


def _check_N(N: int, minimum: int = 100) -> None:
    if N < minimum:
        raise InvalidParameter(f"sample count N must be >= {minimum}")


def _fresnel_kernel(table: AtomTable, rho=(1.0, 1.0)) -> Kernel:
    def kernel(dx1, dx2):
        return table.evaluate(dx1, dx2, rho)[:, None]

    return kernel


def mc_expectation(functional, pair: MeanVarPair, grid: TimeGrid, N: int, seed: int, workers: int = 1) -> McEstimate:
    """E[F(x1, x2)] by plain Monte Carlo.

    ``functional`` is either ``(f, ops)`` for a Fresnel functional or a
    callable taking increment arrays ``(dx1, dx2)`` of shape (rows, n) and
    returning one value per row.
    """
    _check_N(N)
    engine = PathEngine(pair, grid, workers)
    if isinstance(functional, tuple):
        f, ops = functional
        table = AtomTable(f, ops, CabSpace(pair, grid))
        kernel, two = _fresnel_kernel(table), table.uses_second_space()
    else:
        kernel, two = functional, True
    values = engine.run(kernel, N, seed, 1, two_spaces=two)
    return McEstimate.from_samples(values[:, 0], seed)


def verify_pwz_law(
    w: HPrimeElement, pair: MeanVarPair, grid: TimeGrid, N: int, seed: int, z_max: float = Z_MAX, workers: int = 1
) -> StatReport:
    """Sample mean of (w, x)~ against (w, a) and its spread against ||w||^2.

    The variance is tested through the mean of (X - (w, a))^2, whose exact
    expectation is ||w||^2.
    """
    _check_N(N)
    space = CabSpace(pair, grid)
    z = space.density(w)
    mu, var = space.mean_pairing(w), space.inner(w, w)

    def kernel(dx1, _):
        x = dx1 @ z
        return np.stack((x, (x - mu) ** 2), axis=1)

    vals = PathEngine(pair, grid, workers).run(kernel, N, seed, 2, two_spaces=False)
    mean_est = McEstimate.from_samples(vals[:, 0], seed)
    var_est = McEstimate.from_samples(vals[:, 1], seed)
    z_var = max(var_est.z_scores(var))
    return StatReport.judge(
        "pwz-law",
        mean_est,
        mu,
        z_max,
        extra_ok=z_var <= z_max,
        variance=var_est.mean.real,
        variance_reference=var,
        variance_stderr=var_est.stderr_re,
        z_variance=z_var,
    )


def compare_simulators(
    pair: MeanVarPair,
    grid: TimeGrid,
    N: int,
    seed: int,
    M: int = 256,
    times=None,
    z_max: float = Z_MAX,
    workers: int = 1,
) -> list[StatReport]:
    """Marginal mean and variance of x(t) from the increment and series generators.

    The two samples are independent (even streams for increments, odd
    streams for the series), so the z-score uses the pooled standard error.
    """
    _check_N(N)
    if times is None:
        times = np.linspace(0.0, grid.T, 7)[1:-1]
    idx = np.array([int(np.argmin(np.abs(grid.t - t))) for t in times])
    a_t = pair.a(grid.t[idx])

    def kernel(dx1, _):
        x = np.cumsum(dx1, axis=1)[:, idx - 1]
        return np.concatenate((x, (x - a_t) ** 2), axis=1)

    m = 2 * idx.size
    inc = PathEngine(pair, grid, workers).run(kernel, N, seed, m, two_spaces=False)
    ser = PathEngine(pair, grid, workers, series_M=M).run(kernel, N, seed, m, two_spaces=False, stream_offset=1)
    reports = []
    for col in range(m):
        e1 = McEstimate.from_samples(inc[:, col], seed)
        e2 = McEstimate.from_samples(ser[:, col], seed)
        diff = McEstimate(e1.mean - e2.mean, math.hypot(e1.stderr_re, e2.stderr_re), 0.0, N, seed)
        k = col % idx.size
        kind = "mean" if col < idx.size else "variance"
        reports.append(
            StatReport.judge(
                f"simulators-{kind}@t={grid.t[idx[k]]:.4g}",
                diff,
                0.0,
                z_max,
                increments=e1.mean.real,
                series=e2.mean.real,
                M=M,
            )
        )
    return reports


def _crn_report(name, samples, seed, closed_lhs, closed_rhs, tol, z_max, **metadata) -> StatReport:
    """Judge a (N, 2) array of pathwise (lhs, rhs) values with common random numbers."""
    diff = McEstimate.from_samples(samples[:, 0] - samples[:, 1], seed)
    lhs = McEstimate.from_samples(samples[:, 0], seed)
    rhs = McEstimate.from_samples(samples[:, 1], seed)
    closed = IdentityReport.compare(name + ":closed-form", closed_lhs, closed_rhs, tol)
    return StatReport.judge(
        name,
        diff,
        0.0,
        z_max,
        extra_ok=closed.passed,
        mc_lhs=lhs.mean,
        mc_rhs=rhs.mean,
        mc_lhs_stderr=lhs.stderr,
        mc_rhs_stderr=rhs.stderr,
        closed_lhs=closed.lhs,
        closed_rhs=closed.rhs,
        closed_rel_err=closed.rel_err,
        closed_tolerance=tol,
        z_vs_closed_lhs=max(lhs.z_scores(closed.lhs)),
        **metadata,
    )


def _dirs_active(dirs: DirectionPair, space: CabSpace) -> bool:
    return bool(np.any(space.density(dirs.g2) != 0.0))


def verify_translation(
    f: DiscreteMeasure,
    ops: OperatorPair,
    w0: HPrimeElement,
    pair: MeanVarPair,
    grid: TimeGrid,
    N: int,
    seed: int,
    z_max: float = Z_MAX,
    tol: float = 1e-12,
    w0_second: HPrimeElement | None = None,
    workers: int = 1,
) -> StatReport:
    """E[F(x + w0)] = exp{-||w0||^2/2 - (w0, a)} E[F(x) exp{(w0, x)~}].

    The shift acts on x1 (and on x2 by ``w0_second`` if given); the factor
    is then a product over the shifted coordinates.  The left side is
    evaluated on explicitly shifted paths, x + w0 at the grid points.
    """
    _check_N(N)
    space = CabSpace(pair, grid)
    table = AtomTable(f, ops, space)
    shifts = [space.density(w0), None if w0_second is None else space.density(w0_second)]
    two = table.uses_second_space() or shifts[1] is not None
    log_factor = 0.0
    for z0 in shifts:
        if z0 is not None:
            log_factor += -0.5 * float(space.inner_dens(z0, z0)) - float(space.inner_dens(z0, space.a_density))
    shift_incr = [None if z0 is None else z0 * space.db for z0 in shifts]

    def kernel(dx1, dx2):
        s1 = dx1 if shift_incr[0] is None else dx1 + shift_incr[0]
        s2 = dx2
        if dx2 is not None and shift_incr[1] is not None:
            s2 = dx2 + shift_incr[1]
        lhs = table.evaluate(s1, s2)
        expo = np.full(dx1.shape[0], log_factor)
        if shifts[0] is not None:
            expo = expo + dx1 @ shifts[0]
        if shifts[1] is not None:
            expo = expo + dx2 @ shifts[1]
        rhs = table.evaluate(dx1, dx2) * np.exp(expo)
        return np.stack((lhs, rhs), axis=1)

    samples = PathEngine(pair, grid, workers).run(kernel, N, seed, 2, two_spaces=two)

    # closed forms: Gaussian characteristic / moment generating functions
    zero = np.zeros(space.n)
    z01 = shifts[0] if shifts[0] is not None else zero
    z02 = shifts[1] if shifts[1] is not None else zero
    lhs_c = 0j
    rhs_c = 0j
    for k in range(table.K):
        v1, v2 = table.V[0][k], table.V[1][k]
        shift_phase = space.inner_dens(v1, z01) + space.inner_dens(v2, z02)
        char = sum(
            1j * space.inner_dens(v, space.a_density) - 0.5 * space.inner_dens(v, v) for v in (v1, v2)
        )
        lhs_c += table.c[k] * np.exp(1j * shift_phase + char)
        mgf = sum(
            space.inner_dens(u, space.a_density) + 0.5 * space.inner_dens(u, u)
            for u in (z01 + 1j * v1, z02 + 1j * v2)
        )
        rhs_c += table.c[k] * np.exp(mgf)
    rhs_c *= np.exp(log_factor)
    return _crn_report("translation", samples, seed, lhs_c, rhs_c, tol, z_max, grid_n=grid.n)


def _parts_kernel(table: AtomTable, dirs: DirectionPair, space: CabSpace, rho):
    """Pathwise lhs dF(rho x | rho g) and rhs F(rho x) {sum (g_j, x_j)~ - sum (g_j, a)}."""
    dg = [space.density(dirs.g1), space.density(dirs.g2)]
    vg = table.pairings(dirs.g1, dirs.g2)
    fac = 1j * (rho[0] * vg[0] + rho[1] * vg[1])
    ga = float(space.inner_dens(dg[0], space.a_density) + space.inner_dens(dg[1], space.a_density))

    def kernel(dx1, dx2):
        e = np.exp(1j * table.phases(dx1, dx2, rho))
        lhs = e @ (table.c * fac)
        F = e @ table.c
        lin = dx1 @ dg[0]
        if dx2 is not None:
            lin = lin + dx2 @ dg[1]
        return np.stack((lhs, F * (lin - ga)), axis=1)

    return kernel, ga


def verify_parts_scaled(
    f: DiscreteMeasure,
    ops: OperatorPair,
    dirs: DirectionPair,
    rho1: float,
    rho2: float,
    pair: MeanVarPair,
    grid: TimeGrid,
    N: int,
    seed: int,
    z_max: float = Z_MAX,
    tol: float = 1e-9,
    workers: int = 1,
    name: str = "parts-scaled",
) -> StatReport:
    """E[dF(rho x | rho g)] = E[F(rho x) {sum_j (g_j, x_j)~}] - {sum_j (g_j, a)} E[F(rho x)].

    Closed forms use lambda_j = rho_j^{-2}: the left side is the variation
    integral with directions rho_j g_j, the right side the weighted integral
    with weights q_j = 1/rho_j minus the mean-pairing term.
    """
    _check_N(N)
    if not (rho1 > 0 and rho2 > 0):
        raise InvalidParameter("scaling factors rho must be positive")
    rho = (float(rho1), float(rho2))
    space = CabSpace(pair, grid)
    table = AtomTable(f, ops, space)
    kernel, ga = _parts_kernel(table, dirs, space, rho)
    two = table.uses_second_space() or _dirs_active(dirs, space)
    samples = PathEngine(pair, grid, workers).run(kernel, N, seed, 2, two_spaces=two)

    lam = (rho[0] ** -2, rho[1] ** -2)
    lhs_c = variation_J(f, ops, dirs.scaled(*rho), lam[0], lam[1], pair, grid)
    rhs_c = linear_weighted_J(f, ops, dirs, (1.0 / rho[0], 1.0 / rho[1]), lam[0], lam[1], pair, grid) - ga * analytic_J(
        f, ops, lam[0], lam[1], pair, grid
    )
    return _crn_report(name, samples, seed, lhs_c, rhs_c, tol, z_max, rho=list(rho), grid_n=grid.n)


def verify_parts_basic(
    f: DiscreteMeasure,
    ops: OperatorPair,
    dirs: DirectionPair,
    pair: MeanVarPair,
    grid: TimeGrid,
    N: int,
    seed: int,
    z_max: float = Z_MAX,
    tol: float = 1e-9,
    workers: int = 1,
) -> StatReport:
    """E[dF(x | g)] = E[F(x) {sum_j (g_j, x_j)~}] - {sum_j (g_j, a)} E[F(x)]."""
    return verify_parts_scaled(f, ops, dirs, 1.0, 1.0, pair, grid, N, seed, z_max, tol, workers, name="parts")


def verify_continuation(
    f: DiscreteMeasure,
    ops: OperatorPair,
    lambdas,
    q,
    pair: MeanVarPair,
    grid: TimeGrid,
    N: int,
    seed: int,
    z_max: float = Z_MAX,
    tol: float = 1e-12,
    workers: int = 1,
) -> list:
    """MC of E[F(lam^{-1/2} x)] against the closed form J(lambda), then J(-iq) against psi.

    Each lambda uses the same paths (seed), scaled per coordinate.
    """
    _check_N(N)
    space = CabSpace(pair, grid)
    table = AtomTable(f, ops, space)
    lambdas = [(float(l1), float(l2)) for l1, l2 in lambdas]
    for l1, l2 in lambdas:
        if not (l1 > 0 and l2 > 0):
            raise InvalidParameter("continuation checks need positive real lambdas")
    rhos = [(l1**-0.5, l2**-0.5) for l1, l2 in lambdas]

    def kernel(dx1, dx2):
        return np.stack([table.evaluate(dx1, dx2, r) for r in rhos], axis=1)

    samples = PathEngine(pair, grid, workers).run(
        kernel, N, seed, len(rhos), two_spaces=table.uses_second_space()
    )
    reports: list = []
    for col, (l1, l2) in enumerate(lambdas):
        est = McEstimate.from_samples(samples[:, col], seed)
        ref = analytic_J(f, ops, l1, l2, pair, grid)
        reports.append(StatReport.judge(f"continuation-J@lambda=({l1:g},{l2:g})", est, ref, z_max, lam=[l1, l2]))
    q1, q2 = (float(v) for v in q)
    lhs = analytic_J(f, ops, -1j * q1, -1j * q2, pair, grid)
    rhs = feynman_integral(f, ops, (q1, q2), pair, grid)
    reports.append(IdentityReport.compare("continuation-boundary", lhs, rhs, tol, q=[q1, q2]))
    return reports
