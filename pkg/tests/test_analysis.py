import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qimds.analysis import (
    DIP,
    FLAT,
    PEAK,
    LossModel,
    central_feature,
    fringe_contrast,
    hypergeometric_loss_matrix,
    loss_scan,
    loss_sweep,
    parity_table,
    population_scan,
    sign_changes,
    surviving_dips,
)
from qimds.baselines import ssb_scan
from qimds.model import InterferometerConfig
from qimds.quadrature import marginal_p12

LARGE = InterferometerConfig.of(100, 100)


@pytest.fixture(scope="module")
def dip_scan():
    return population_scan(LARGE, 17, 83)


@pytest.fixture(scope="module")
def ssb_large_scan():
    return ssb_scan(LARGE, 17, 83)


def test_central_dip(dip_scan):
    p = dip_scan.probabilities
    assert len(p) == 101
    assert p[50] < p[49] and p[50] < p[51]
    assert dip_scan.central_feature == DIP


def test_central_peak():
    p = population_scan(LARGE, 18, 82).probabilities
    assert p[50] > p[49] and p[50] > p[51]


def test_scan_total_matches_marginal(dip_scan):
    assert dip_scan.total == pytest.approx(marginal_p12(LARGE, 17, 83), rel=1e-10)
    norm = population_scan(LARGE, 17, 83, normalized=True)
    assert math.fsum(norm.probabilities) == pytest.approx(1.0, abs=1e-12)
    assert norm.central_feature == DIP


def test_scan_mirror_symmetry(dip_scan):
    p = dip_scan.probabilities
    assert np.array_equal(p, p[::-1])


def test_ssb_scan_is_flat(ssb_large_scan):
    assert fringe_contrast(ssb_large_scan) < 0.02
    assert central_feature(ssb_large_scan) == PEAK  # unimodal, maximum at centre
    assert sign_changes(np.diff(ssb_large_scan)) == 1


def test_contrast_gap(dip_scan, ssb_large_scan):
    assert dip_scan.contrast > 0.2
    assert dip_scan.contrast >= 10 * fringe_contrast(ssb_large_scan)


# -- fringe_contrast ------------------------------------------------------------------


def test_contrast_binomial():
    b = np.array([math.comb(100, k) for k in range(101)], float) / 2.0**100
    assert fringe_contrast(b) < 0.02


def test_contrast_trivial():
    assert fringe_contrast(np.full(20, 0.3)) == 0.0
    assert fringe_contrast(np.zeros(20)) == 0.0
    assert fringe_contrast([1.0, 2.0]) == 0.0


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-1, 1))
def test_contrast_ignores_quadratic_envelope(a, b, c):
    x = np.linspace(-1, 1, 31)
    assert fringe_contrast(10 + a * x + b * x**2 + c * x**2) == pytest.approx(0.0, abs=1e-12)


def test_contrast_sees_alternation():
    x = np.arange(41)
    assert fringe_contrast(1 + 0.5 * (-1.0) ** x) > 0.3


@pytest.mark.parametrize("window", [1, 2, 4])
def test_contrast_window_validation(window):
    with pytest.raises(ValueError):
        fringe_contrast(np.ones(10), window)


def test_central_feature_cases():
    assert central_feature([3, 1, 3]) == DIP
    assert central_feature([1, 3, 1]) == PEAK
    assert central_feature([1, 2, 3]) == FLAT
    assert central_feature([5, 1, 1, 5]) == DIP
    assert central_feature([1, 4, 4, 1]) == PEAK
    assert central_feature([1, 1]) == FLAT


# -- loss ------------------------------------------------------------------------------


@given(st.integers(0, 30), st.data())
@settings(max_examples=40)
def test_loss_matrix_is_stochastic(total, data):
    lost = data.draw(st.integers(0, total))
    W = hypergeometric_loss_matrix(total, lost)
    assert W.shape == (total - lost + 1, total + 1)
    np.testing.assert_allclose(W.sum(axis=0), 1.0, rtol=1e-12)
    assert W.min() >= 0


def test_loss_matrix_single_loss():
    W = hypergeometric_loss_matrix(4, 1)
    # one of four side particles is lost: true (3, 1) yields (2, 1) w.p. 3/4
    assert W[2, 3] == pytest.approx(0.75)
    assert W[3, 3] == pytest.approx(0.25)


def test_no_loss_is_plain_scan():
    cfg = InterferometerConfig.of(20, 20)
    a = population_scan(cfg, 5, 9).probabilities
    b = loss_scan(cfg, 5, 9, LossModel(0)).probabilities
    np.testing.assert_array_equal(a, b)


def test_total_loss():
    cfg = InterferometerConfig.of(10, 10)
    scan = loss_scan(cfg, 3, 5, LossModel(12))
    assert len(scan.probabilities) == 1
    assert scan.contrast == 0.0
    assert scan.total == pytest.approx(marginal_p12(cfg, 3, 5), rel=1e-10)


@pytest.mark.parametrize("lost", [1, 2, 5])
def test_loss_preserves_mass(lost):
    cfg = InterferometerConfig.of(30, 30)
    scan = loss_scan(cfg, 7, 21, LossModel(lost))
    assert len(scan.probabilities) == 60 - 28 - lost + 1
    assert scan.total == pytest.approx(marginal_p12(cfg, 7, 21), rel=1e-10)


def test_loss_validation():
    with pytest.raises(ValueError):
        LossModel(-1)
    with pytest.raises(ValueError):
        loss_scan(InterferometerConfig.of(3, 3), 2, 2, LossModel(3))


def test_dip_survives_five_lost():
    rows = loss_sweep(LARGE, 100, 5, m1_values=[1, 17, 23])
    assert (1, 99) in surviving_dips(rows)


# -- parity ----------------------------------------------------------------------------


def test_parity_alternates():
    cfg = InterferometerConfig.of(30, 30)
    rows = parity_table(cfg, 30, stride=3, threads=2)
    assert [r.m1 for r in rows] == list(range(0, 31, 3))
    for r in rows:
        assert r.central_feature == (DIP if r.m2 % 2 else PEAK)
        assert r.predicted == r.central_feature


def test_parity_threads_agree():
    cfg = InterferometerConfig.of(12, 12)
    assert parity_table(cfg, 10, threads=1) == parity_table(cfg, 10, threads=4)


def test_sign_changes():
    assert sign_changes([1, -1, 0, -2, 3]) == 2
    assert sign_changes([0, 0]) == 0
