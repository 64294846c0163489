"""Fresnel-class functionals with discrete measures and their Feynman integrals.

A functional is

    F(x1, x2) = sum_k c_k exp{ i (A1^{1/2} w_k, x1)~ + i (A2^{1/2} w_k, x2)~ }

for a finitely supported complex measure f = sum_k c_k delta_{w_k} and
nonnegative multiplication operators A1, A2 on C'_{a,b}.  Since each PWZ
integral is Gaussian with mean (v, a) and variance ||v||^2, the scaled
expectation J(lambda) and its continuation to lambda = -i q are closed-form
finite sums.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CabSpace, HPrimeElement, MeanVarPair, SamplePath, TimeGrid, density_at_midpoints
from .errors import GridMismatch, InvalidParameter
from .functions import (
    Constant,
    ParametricFunction,
    Product,
    Zero,
    negative_part,
    positive_part,
    sqrt_of,
)

__all__ = [
    "MultiplicationOperator",
    "IDENTITY",
    "ZERO",
    "ThetaOperator",
    "OperatorPair",
    "DiscreteMeasure",
    "FeynmanParams",
    "AtomTable",
    "principal_sqrt",
    "apply_operator",
    "quadratic_form",
    "eval_fresnel",
    "psi",
    "feynman_integral",
    "analytic_J",
    "k_bound",
    "class_report",
]


def principal_sqrt(z: complex) -> complex:
    """Square root with branch cut on the negative real axis (Re >= 0)."""
    return complex(np.sqrt(complex(z)))


@dataclass(frozen=True)
class MultiplicationOperator:
    """w -> D^{-1}(symbol * Dw), i.e. Aw(t) = int_0^t symbol dw."""

    symbol: ParametricFunction
    name: str = ""

    def apply(self, w: HPrimeElement) -> HPrimeElement:
        if isinstance(self.symbol, Zero):
            return HPrimeElement(Zero())
        if isinstance(self.symbol, Constant) and self.symbol.c == 1.0:
            return w
        return HPrimeElement(Product(self.symbol, w.z))

    def sqrt(self) -> "MultiplicationOperator":
        return MultiplicationOperator(sqrt_of(self.symbol), f"{self.name}^1/2")

    def symbol_at(self, grid: TimeGrid) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.symbol(grid.midpoints), dtype=float), (grid.n,))

    def op_norm(self, grid: TimeGrid) -> float:
        """Operator norm of a multiplication operator: sup of |symbol| on the grid."""
        return float(np.max(np.abs(self.symbol_at(grid))))

    def is_identity(self, grid: TimeGrid) -> bool:
        return bool(np.all(self.symbol_at(grid) == 1.0))

    def is_zero(self, grid: TimeGrid) -> bool:
        return bool(np.all(self.symbol_at(grid) == 0.0))


IDENTITY = MultiplicationOperator(Constant(1.0), "I")
ZERO = MultiplicationOperator(Zero(), "0")


@dataclass(frozen=True)
class ThetaOperator:
    """A w = vartheta (.) w with theta = D vartheta, and its +/- decomposition."""

    vartheta: HPrimeElement

    @property
    def theta(self) -> ParametricFunction:
        return self.vartheta.z

    @property
    def theta_plus(self) -> ParametricFunction:
        return positive_part(self.theta)

    @property
    def theta_minus(self) -> ParametricFunction:
        return negative_part(self.theta)

    @property
    def sqrt_theta_plus(self) -> ParametricFunction:
        return sqrt_of(self.theta_plus)

    @property
    def sqrt_theta_minus(self) -> ParametricFunction:
        return sqrt_of(self.theta_minus)

    @property
    def A(self) -> MultiplicationOperator:
        return MultiplicationOperator(self.theta, "A")

    @property
    def A_plus(self) -> MultiplicationOperator:
        return MultiplicationOperator(self.theta_plus, "A+")

    @property
    def A_minus(self) -> MultiplicationOperator:
        return MultiplicationOperator(self.theta_minus, "A-")

    @property
    def A_plus_half(self) -> MultiplicationOperator:
        return self.A_plus.sqrt()

    @property
    def A_minus_half(self) -> MultiplicationOperator:
        return self.A_minus.sqrt()

    @property
    def vartheta_plus_half(self) -> HPrimeElement:
        """D^{-1} sqrt(theta+)"""
        return HPrimeElement(self.sqrt_theta_plus)

    @property
    def vartheta_minus_half(self) -> HPrimeElement:
        """D^{-1} sqrt(theta-)"""
        return HPrimeElement(self.sqrt_theta_minus)

    def pair(self) -> "OperatorPair":
        return OperatorPair(self.A_plus, self.A_minus)


@dataclass(frozen=True)
class OperatorPair:
    """(A1, A2): bounded nonnegative self-adjoint multiplication operators."""

    A1: MultiplicationOperator
    A2: MultiplicationOperator

    @property
    def roots(self) -> tuple[MultiplicationOperator, MultiplicationOperator]:
        return self.A1.sqrt(), self.A2.sqrt()

    def check_nonnegative(self, grid: TimeGrid) -> None:
        for op in (self.A1, self.A2):
            if np.any(op.symbol_at(grid) < 0.0):
                raise InvalidParameter(f"operator {op.name or op} is not nonnegative")


@dataclass(frozen=True)
class DiscreteMeasure:
    """f = sum_k c_k delta_{w_k}, a finitely supported complex measure on C'."""

    atoms: tuple[tuple[complex, HPrimeElement], ...]

    def __post_init__(self):
        atoms = tuple((complex(c), w) for c, w in self.atoms)
        if not atoms:
            raise ValueError("a discrete measure needs at least one atom")
        object.__setattr__(self, "atoms", atoms)

    @classmethod
    def delta_zero(cls, weight: complex = 1.0) -> "DiscreteMeasure":
        return cls(((weight, HPrimeElement(Zero(), "0")),))

    @property
    def weights(self) -> np.ndarray:
        return np.array([c for c, _ in self.atoms], dtype=complex)

    @property
    def elements(self) -> list[HPrimeElement]:
        return [w for _, w in self.atoms]

    @property
    def total_variation(self) -> float:
        return float(np.sum(np.abs(self.weights)))

    def reweighted(self, factors) -> "DiscreteMeasure":
        factors = np.asarray(factors, dtype=complex)
        return DiscreteMeasure(
            tuple((c * fk, w) for (c, w), fk in zip(self.atoms, factors))
        )

    def __len__(self) -> int:
        return len(self.atoms)


@dataclass(frozen=True)
class FeynmanParams:
    q1: float
    q2: float
    lam1: complex | None = None
    lam2: complex | None = None

    def __post_init__(self):
        if self.q1 == 0 or self.q2 == 0:
            raise InvalidParameter("Feynman parameters q1, q2 must be nonzero")
        for lam in (self.lam1, self.lam2):
            if lam is not None and not complex(lam).real > 0:
                raise InvalidParameter("lambda must have positive real part")

    @property
    def q(self) -> tuple[float, float]:
        return (float(self.q1), float(self.q2))

    @property
    def lambdas(self) -> tuple[complex, complex]:
        """-i q_j on the boundary, unless explicit lambdas are given."""
        if self.lam1 is not None and self.lam2 is not None:
            return (complex(self.lam1), complex(self.lam2))
        return (-1j * self.q1, -1j * self.q2)


def _as_params(q) -> FeynmanParams:
    if isinstance(q, FeynmanParams):
        return q
    q1, q2 = q
    return FeynmanParams(float(q1), float(q2))


def _check_lambda(lam: complex) -> complex:
    lam = complex(lam)
    if lam == 0:
        raise InvalidParameter("lambda must be nonzero")
    if lam.real < 0:
        raise InvalidParameter("lambda must have nonnegative real part")
    return lam


class AtomTable:
    """Per-atom quadrature data of one functional on one grid.

    Rows are atoms k, columns are grid cells.  ``V[j]`` holds the densities
    of A_j^{1/2} w_k; ``quad[j]`` is (A_j w_k, w_k); ``apair[j]`` is
    (A_j^{1/2} w_k, a).
    """

    def __init__(self, f: DiscreteMeasure, ops: OperatorPair, space: CabSpace):
        self.f = f
        self.ops = ops
        self.space = space
        grid = space.grid
        ops.check_nonnegative(grid)
        self.c = f.weights
        self.Z = np.array([space.density(w) for w in f.elements])
        sym = [op.symbol_at(grid) for op in (ops.A1, ops.A2)]
        roots = [r.symbol_at(grid) for r in ops.roots]
        self.root_norms = np.array([float(np.max(r)) for r in roots])
        self.V = [self.Z * r[None, :] for r in roots]
        self.quad = np.array([space.inner_dens(s[None, :] * self.Z, self.Z) for s in sym])
        self.apair = np.array([space.inner_dens(v, space.a_density) for v in self.V])
        self.wnorm = np.sqrt(space.inner_dens(self.Z, self.Z))

    @property
    def K(self) -> int:
        return self.c.size

    def uses_second_space(self) -> bool:
        return bool(np.any(self.V[1] != 0.0))

    def pairings(self, g1: HPrimeElement, g2: HPrimeElement) -> np.ndarray:
        """(A_j^{1/2} w_k, g_j) as a (2, K) array."""
        return np.array(
            [self.space.inner_dens(self.V[j], self.space.density(g)) for j, g in enumerate((g1, g2))]
        )

    def phases(self, dx1: np.ndarray, dx2: np.ndarray | None, rho=(1.0, 1.0)) -> np.ndarray:
        """i-less exponents sum_j rho_j (A_j^{1/2} w_k, x_j)~, shape (N, K)."""
        out = rho[0] * (dx1 @ self.V[0].T)
        if dx2 is not None and self.uses_second_space():
            out += rho[1] * (dx2 @ self.V[1].T)
        return out

    def evaluate(self, dx1, dx2, rho=(1.0, 1.0)) -> np.ndarray:
        return np.exp(1j * self.phases(dx1, dx2, rho)) @ self.c

    def j_atoms(self, lam1: complex, lam2: complex) -> np.ndarray:
        """Per-atom E[exp{i sum_j lam_j^{-1/2} (A_j^{1/2} w, x_j)~}]."""
        expo = np.zeros(self.K, dtype=complex)
        for j, lam in enumerate((lam1, lam2)):
            lam = _check_lambda(lam)
            expo += -self.quad[j] / (2.0 * lam) + 1j * np.sqrt(1.0 / lam) * self.apair[j]
        return np.exp(expo)

    def psi_atoms(self, q: FeynmanParams) -> np.ndarray:
        expo = np.zeros(self.K, dtype=complex)
        for j, qj in enumerate(q.q):
            expo += -1j * self.quad[j] / (2.0 * qj) + 1j / principal_sqrt(-1j * qj) * self.apair[j]
        return np.exp(expo)

    def k_atoms(self, q0: float) -> np.ndarray:
        if q0 <= 0:
            raise InvalidParameter("q0 must be positive")
        s = np.sum(self.root_norms) * (2.0 * q0) ** -0.5
        return np.exp(s * self.wnorm * self.space.a_norm)


def apply_operator(op: MultiplicationOperator, w: HPrimeElement) -> HPrimeElement:
    return op.apply(w)


def quadratic_form(op: MultiplicationOperator, w: HPrimeElement, grid: TimeGrid, b) -> float:
    """(A w, w)_{C'} = int symbol (Dw)^2 db."""
    space = CabSpace(MeanVarPair(Zero(), b), grid, validate=False)
    z = space.density(w)
    return float(np.sum(op.symbol_at(grid) * z * z * space.db))


def eval_fresnel(
    f: DiscreteMeasure, ops: OperatorPair, x1: SamplePath, x2: SamplePath
) -> complex:
    if not x1.grid.same_as(x2.grid):
        raise GridMismatch("x1 and x2 are sampled on different grids")
    grid = x1.grid
    r1, r2 = (r.symbol_at(grid) for r in ops.roots)
    total = 0j
    for c, w in f.atoms:
        z = density_at_midpoints(w, grid)
        phase = np.dot(r1 * z, x1.increments) + np.dot(r2 * z, x2.increments)
        total += c * np.exp(1j * phase)
    return complex(total)


def _table(f, ops, pair, grid) -> AtomTable:
    return AtomTable(f, ops, CabSpace(pair, grid))


def psi(q, ops: OperatorPair, w: HPrimeElement, pair: MeanVarPair, grid: TimeGrid) -> complex:
    """psi(-iq; A; w) = exp{sum_j [-i (A_j w, w)/(2 q_j) + i (-i q_j)^{-1/2} (A_j^{1/2} w, a)]}."""
    table = _table(DiscreteMeasure(((1.0, w),)), ops, pair, grid)
    return complex(table.psi_atoms(_as_params(q))[0])


def feynman_integral(f: DiscreteMeasure, ops: OperatorPair, q, pair: MeanVarPair, grid: TimeGrid) -> complex:
    """E^{anf_q}[F] = sum_k c_k psi(-iq; A; w_k)."""
    table = _table(f, ops, pair, grid)
    return complex(np.sum(table.c * table.psi_atoms(_as_params(q))))


def analytic_J(
    f: DiscreteMeasure, ops: OperatorPair, lam1: complex, lam2: complex, pair: MeanVarPair, grid: TimeGrid
) -> complex:
    """Analytic function-space integral E^{an_lambda}[F] (closed form)."""
    table = _table(f, ops, pair, grid)
    return complex(np.sum(table.c * table.j_atoms(lam1, lam2)))


def k_bound(q0: float, ops: OperatorPair, w: HPrimeElement, pair: MeanVarPair, grid: TimeGrid) -> float:
    table = _table(DiscreteMeasure(((1.0, w),)), ops, pair, grid)
    return float(table.k_atoms(q0)[0])


def class_report(f: DiscreteMeasure, q0: float, ops: OperatorPair, pair: MeanVarPair, grid: TimeGrid) -> dict:
    """Bounds sum |c_k| k(q0; A; w_k) and sum |c_k| ||w_k|| k(q0; A; w_k)."""
    table = _table(f, ops, pair, grid)
    k = table.k_atoms(q0)
    mod = np.abs(table.c)
    return {
        "F_bound": float(np.sum(mod * k)),
        "G_bound": float(np.sum(mod * table.wnorm * k)),
    }
