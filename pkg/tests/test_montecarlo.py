"""Monte Carlo estimates, statistical reports and the sampled identities."""

import math

import numpy as np
import pytest

from conftest import make_random_config
from gbmfeynman.core import HPrimeElement, MeanVarPair, TimeGrid
from gbmfeynman.errors import InvalidParameter
from gbmfeynman.fresnel import IDENTITY, ZERO, DiscreteMeasure, OperatorPair, analytic_J
from gbmfeynman.functions import Constant, Linear, Polynomial, ScaledSine, Zero
from gbmfeynman.montecarlo import (
    CHUNK,
    McEstimate,
    PathEngine,
    StatReport,
    compare_simulators,
    mc_expectation,
    retry_seed,
    verify_continuation,
    verify_parts_basic,
    verify_parts_scaled,
    verify_pwz_law,
    verify_translation,
)
from gbmfeynman.variation import DirectionPair

GRID = TimeGrid.uniform(1.0, 128)
BM = MeanVarPair(Zero(), Linear(1.0))
DRIFT = MeanVarPair(Polynomial((0, 0, 0.5)), Polynomial((0, 1, 0.5)))
I0 = OperatorPair(IDENTITY, ZERO)
UNIT = HPrimeElement(Constant(1.0))
ZERO_EL = HPrimeElement(Zero())
N = 40_000


# ---------------------------------------------------------------- estimates


def test_estimate_from_samples_and_z():
    est = McEstimate.from_samples(np.array([1.0, 3.0, 1j, -1j]), 0)
    assert est.mean == 1.0
    assert est.stderr_re == pytest.approx(np.std([1, 3, 0, 0], ddof=1) / 2)
    assert est.stderr == max(est.stderr_re, est.stderr_im)
    assert est.z_scores(1.0) == (0.0, 0.0)


def test_zero_stderr_only_passes_on_exact_agreement():
    est = McEstimate.from_samples(np.zeros(10), 0)
    assert est.z_scores(0.0) == (0.0, 0.0)
    assert math.isinf(est.z_scores(1e-300)[0])
    assert not StatReport.judge("x", est, 1e-300).passed
    assert StatReport.judge("x", est, 0.0).passed


def test_stat_report_dict():
    est = McEstimate.from_samples(np.ones(4) + 0j, 5)
    d = StatReport.judge("r", est, 1.0, 3.0, extra_ok=False, note=1 + 2j).to_dict()
    assert d["kind"] == "statistical" and d["pass"] is False and d["z_max"] == 3.0
    assert d["metadata"]["note"] == [1.0, 2.0]
    assert d["estimate"]["seed"] == 5


def test_retry_seed_is_distinct_and_wraps():
    assert retry_seed(0) == 0x9E3779B97F4A7C15
    assert retry_seed(2**64 - 1) == (2**64 - 1 + 0x9E3779B97F4A7C15) % 2**64
    assert retry_seed(5) != 5


# ---------------------------------------------------------------- engine


def test_engine_is_deterministic_across_workers():
    def kernel(dx1, dx2):
        return np.stack((dx1.sum(axis=1), dx2[:, 0]), axis=1).astype(complex)

    n = CHUNK * 2 + 17
    runs = [PathEngine(DRIFT, GRID, workers=w).run(kernel, n, 9, 2) for w in (1, 2, 3)]
    assert all(r.tobytes() == runs[0].tobytes() for r in runs)
    est = [McEstimate.from_samples(r[:, 0], 9) for r in runs]
    assert est[0] == est[1] == est[2]


def test_engine_prefix_is_independent_of_N():
    def kernel(dx1, _):
        return dx1[:, :1].astype(complex)

    short = PathEngine(BM, GRID).run(kernel, 100, 1, 1, two_spaces=False)
    long = PathEngine(BM, GRID).run(kernel, CHUNK + 5, 1, 1, two_spaces=False)
    assert np.array_equal(short, long[:100])


def test_minimum_sample_size():
    with pytest.raises(InvalidParameter):
        mc_expectation((DiscreteMeasure.delta_zero(), I0), BM, GRID, 99, 0)


# ---------------------------------------------------------------- expectations


def test_expectation_of_delta_zero_is_exact():
    est = mc_expectation((DiscreteMeasure.delta_zero(), I0), BM, GRID, 1000, 3)
    assert est.mean == 1.0 and est.stderr == 0.0


def test_expectation_of_single_atom():
    # E exp{i (w, x)~} = exp{-||w||^2/2} for Brownian motion
    est = mc_expectation((DiscreteMeasure(((1.0, UNIT),)), I0), BM, GRID, N, 4)
    assert max(est.z_scores(math.exp(-0.5))) < 4


def test_expectation_of_callable():
    est = mc_expectation(lambda dx1, dx2: dx1.sum(axis=1) * dx2.sum(axis=1), DRIFT, GRID, N, 8)
    assert max(est.z_scores(0.25)) < 4  # a(1)^2 with independent coordinates


def test_stderr_shrinks_with_root_N():
    f = DiscreteMeasure(((1.0, HPrimeElement(Linear(2.0))),))
    s1 = mc_expectation((f, I0), BM, GRID, 50_000, 11).stderr_re
    s2 = mc_expectation((f, I0), BM, GRID, 100_000, 11).stderr_re
    assert s1 / s2 == pytest.approx(math.sqrt(2), rel=0.1)


# ---------------------------------------------------------------- checks


def test_pwz_law():
    r = verify_pwz_law(HPrimeElement(ScaledSine(1.0, 2.0)), DRIFT, GRID, N, 5)
    assert r.passed, r
    assert r.metadata["variance_reference"] > 0


def test_pwz_law_of_zero_element_is_exact():
    r = verify_pwz_law(ZERO_EL, DRIFT, GRID, 1000, 5)
    assert r.passed and r.z_score == 0.0 and r.estimate.mean == 0.0


def test_simulators_agree():
    reports = compare_simulators(BM, TimeGrid.uniform(1.0, 64), 20_000, 6, M=128)
    assert len(reports) == 10
    assert all(r.passed for r in reports), [r.to_dict() for r in reports if not r.passed]


@pytest.mark.parametrize("seed", range(3))
def test_translation(seed):
    cfg = make_random_config(300 + seed, n=128)
    w0 = HPrimeElement(Polynomial((0.4, -0.3)))
    r = verify_translation(cfg.f, cfg.theta.pair(), w0, DRIFT, cfg.grid, N, seed)
    assert r.passed, r.to_dict()


def test_translation_in_both_coordinates():
    cfg = make_random_config(310, n=128)
    r = verify_translation(
        cfg.f, cfg.theta.pair(), UNIT * 0.5, DRIFT, cfg.grid, N, 2, w0_second=HPrimeElement(Linear(-0.4))
    )
    assert r.passed, r.to_dict()


def test_translation_by_zero_is_exact():
    cfg = make_random_config(1, n=128)
    r = verify_translation(cfg.f, cfg.theta.pair(), ZERO_EL, cfg.pair, cfg.grid, 1000, 1)
    assert r.passed and r.estimate.mean == 0.0 and r.estimate.stderr == 0.0


@pytest.mark.parametrize("seed", range(3))
def test_parts(seed):
    cfg = make_random_config(400 + seed, n=128)
    r = verify_parts_basic(cfg.f, cfg.theta.pair(), cfg.dirs, cfg.pair, cfg.grid, N, seed)
    assert r.passed, r.to_dict()


def test_parts_scaled_with_unit_rho_matches_basic():
    cfg = make_random_config(405, n=128)
    ops = cfg.theta.pair()
    basic = verify_parts_basic(cfg.f, ops, cfg.dirs, cfg.pair, cfg.grid, 2000, 7)
    scaled = verify_parts_scaled(cfg.f, ops, cfg.dirs, 1.0, 1.0, cfg.pair, cfg.grid, 2000, 7)
    assert basic.estimate == scaled.estimate
    assert basic.metadata["closed_lhs"] == scaled.metadata["closed_lhs"]


@pytest.mark.parametrize("rho", [(2.0, 0.5), (0.7, 1.3)])
def test_parts_scaled(rho):
    cfg = make_random_config(410, n=128)
    r = verify_parts_scaled(cfg.f, cfg.theta.pair(), cfg.dirs, *rho, cfg.pair, cfg.grid, N, 12)
    assert r.passed, r.to_dict()


def test_parts_scaled_rejects_nonpositive_rho():
    cfg = make_random_config(0, n=32)
    with pytest.raises(InvalidParameter):
        verify_parts_scaled(cfg.f, cfg.theta.pair(), cfg.dirs, 0.0, 1.0, cfg.pair, cfg.grid, 200, 1)


def test_parts_with_zero_directions_is_exact():
    cfg = make_random_config(2, n=64)
    r = verify_parts_basic(cfg.f, cfg.theta.pair(), DirectionPair.zero(), cfg.pair, cfg.grid, 500, 1)
    assert r.passed and r.estimate.mean == 0.0


def test_delta_zero_with_directions_is_statistical():
    # F = 1 has dF = 0, while the right side is the centred linear functional
    dirs = DirectionPair(HPrimeElement(Constant(0.8)), HPrimeElement(Linear(1.0)))
    r = verify_parts_basic(DiscreteMeasure.delta_zero(), I0, dirs, DRIFT, GRID, N, 3)
    assert r.passed
    assert r.metadata["closed_lhs"] == 0 and abs(r.metadata["closed_rhs"]) < 1e-15
    assert r.estimate.stderr > 0


def test_continuation():
    cfg = make_random_config(500, n=128)
    lambdas = [(1.0, 1.0), (2.0, 0.5), (4.0, 3.0)]
    reports = verify_continuation(cfg.f, cfg.theta.pair(), lambdas, cfg.q, cfg.pair, cfg.grid, N, 21)
    assert len(reports) == 4
    assert all(r.passed for r in reports), [r.to_dict() for r in reports]
    assert reports[-1].name == "continuation-boundary"


def test_continuation_rejects_complex_lambda():
    with pytest.raises(InvalidParameter):
        verify_continuation(DiscreteMeasure.delta_zero(), I0, [(-1.0, 1.0)], (1.0, -1.0), BM, GRID, 200, 0)


def test_continuation_sample_mean_of_unit_atom():
    f = DiscreteMeasure(((1.0, UNIT),))
    reports = verify_continuation(f, I0, [(2.0, 1.0)], (1.0, -1.0), BM, GRID, N, 2)
    assert analytic_J(f, I0, 2.0, 1.0, BM, GRID) == pytest.approx(math.exp(-0.25), rel=1e-12)
    assert reports[0].passed
