from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pytest

from gbmfeynman.core import HPrimeElement, MeanVarPair, TimeGrid
from gbmfeynman.fresnel import DiscreteMeasure, ThetaOperator
from gbmfeynman.functions import Constant, Linear, Polynomial, ScaledSine, Zero
from gbmfeynman.variation import DirectionPair, sine_vartheta

MEANS = {
    "0": Zero(),
    "t": Linear(1.0),
    "t^2/2": Polynomial((0.0, 0.0, 0.5)),
}
VARIANCES = {
    "t": Linear(1.0),
    "t^2": Polynomial((0.0, 0.0, 1.0)),
    "t+t^2/2": Polynomial((0.0, 1.0, 0.5)),
}
VARTHETAS = ("b", "-b", "sine", "poly")
QS = ((1.0, -1.0), (2.0, 3.0), (-1.0, 5.0))


@dataclass
class RandomConfig:
    pair: MeanVarPair
    grid: TimeGrid
    f: DiscreteMeasure
    vartheta: HPrimeElement
    theta: ThetaOperator
    g: HPrimeElement
    dirs: DirectionPair
    q: tuple[float, float]
    label: str


def random_density(rng: np.random.Generator, b=None):
    kind = rng.integers(3)
    if kind == 0:
        return Polynomial(tuple(rng.normal(0, 0.7, size=rng.integers(1, 4))))
    if kind == 1:
        return ScaledSine(rng.normal(0, 0.8), rng.uniform(0.5, 4.0), rng.uniform(0, np.pi))
    if b is not None:
        return ScaledSine(rng.normal(0, 0.8), rng.uniform(1.0, 4.0), rng.uniform(0, np.pi), inner=b)
    return Constant(rng.normal(0, 0.8))


def random_measure(rng: np.random.Generator, b=None, kmax: int = 4) -> DiscreteMeasure:
    K = int(rng.integers(1, kmax + 1))
    return DiscreteMeasure(
        tuple(
            (complex(rng.normal(0, 0.6), rng.normal(0, 0.6)), HPrimeElement(random_density(rng, b), f"w{k}"))
            for k in range(K)
        )
    )


def random_vartheta(kind: str, rng, b, grid) -> HPrimeElement:
    if kind == "b":
        return HPrimeElement(Constant(1.0), "b")
    if kind == "-b":
        return HPrimeElement(Constant(-1.0), "-b")
    if kind == "sine":
        return sine_vartheta(b, grid)
    return HPrimeElement(Polynomial(tuple(rng.normal(0, 1.0, size=3))), "poly")


def make_random_config(seed: int, n: int = 2048) -> RandomConfig:
    rng = np.random.default_rng(seed)
    a_name = list(MEANS)[rng.integers(len(MEANS))]
    b_name = list(VARIANCES)[rng.integers(len(VARIANCES))]
    pair = MeanVarPair(MEANS[a_name], VARIANCES[b_name])
    grid = TimeGrid.uniform(1.0, n)
    vkind = VARTHETAS[seed % len(VARTHETAS)]
    vartheta = random_vartheta(vkind, rng, pair.b, grid)
    theta = ThetaOperator(vartheta)
    g = HPrimeElement(random_density(rng), "g")
    dirs = DirectionPair(theta.A_plus_half.apply(g), -theta.A_minus_half.apply(g))
    q = QS[rng.integers(len(QS))]
    return RandomConfig(
        pair, grid, random_measure(rng, pair.b), vartheta, theta, g, dirs, q, f"a={a_name},b={b_name},vartheta={vkind}"
    )


@pytest.fixture
def unit_grid():
    return TimeGrid.uniform(1.0, 1024)


@pytest.fixture
def bm_pair():
    return MeanVarPair(Zero(), Linear(1.0))


@pytest.fixture
def drift_pair():
    return MeanVarPair(Linear(1.0), Linear(1.0))


_CRITERIA = pytest.StashKey[list]()


@pytest.fixture
def record_criterion(request):
    """Record one acceptance line; the lines are printed in the terminal summary."""
    lines = request.config.stash.setdefault(_CRITERIA, [])

    def record(number: int, passed: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        lines.append((number, line))
        print(line)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_CRITERIA, [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
