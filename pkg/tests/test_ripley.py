"""Tests for the L-function estimators and Monte Carlo envelopes."""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from segstat import LCurve, NullSpec, ValidationError, l_bivariate, l_envelope, l_univariate

UNIT = (0.0, 0.0, 1.0, 1.0)


def k_univariate_oracle(coords, region, t_grid, correction="none"):
    """Naive double loop over ordered pairs."""
    xmin, ymin, xmax, ymax = region
    area = (xmax - xmin) * (ymax - ymin)
    w, h = xmax - xmin, ymax - ymin
    n = coords.shape[0]
    k_values = np.zeros(len(t_grid))
    for a in range(n):
        for b in range(n):
            if a == b:
                continue
            dx = coords[a, 0] - coords[b, 0]
            dy = coords[a, 1] - coords[b, 1]
            d = np.hypot(dx, dy)
            if correction == "translation":
                weight = area / ((w - abs(dx)) * (h - abs(dy)))
            else:
                weight = 1.0
            k_values += weight * (d <= t_grid)
    return area * k_values / (n * (n - 1))


def k_bivariate_oracle(first, second, region, t_grid):
    xmin, ymin, xmax, ymax = region
    area = (xmax - xmin) * (ymax - ymin)
    k_values = np.zeros(len(t_grid))
    for a in range(first.shape[0]):
        for b in range(second.shape[0]):
            d = np.hypot(first[a, 0] - second[b, 0], first[a, 1] - second[b, 1])
            k_values += d <= t_grid
    return area * k_values / (first.shape[0] * second.shape[0])


def to_l_minus_t(k_values, t_grid):
    return np.sqrt(k_values / np.pi) - t_grid


def test_two_point_curve():
    # distance 0.4: K jumps from 0 to A*2/(2*1) = 1 at t = 0.4
    coords = np.array([[0.2, 0.5], [0.6, 0.5]])
    curve = l_univariate(coords, UNIT, 0.5, 50)
    assert len(curve.t_grid) == 50
    below = curve.t_grid < 0.4
    assert_allclose(curve.l_minus_t[below], -curve.t_grid[below], atol=1e-12)
    above = curve.t_grid >= 0.4
    assert_allclose(
        curve.l_minus_t[above], np.sqrt(1.0 / np.pi) - curve.t_grid[above], atol=1e-12
    )


@pytest.mark.parametrize("seed,n", [(1, 20), (2, 120), (3, 300)])
def test_univariate_matches_oracle(seed, n):
    coords = np.random.default_rng(seed).uniform(0, 1, (n, 2))
    curve = l_univariate(coords, UNIT, 0.25, 40)
    oracle = to_l_minus_t(k_univariate_oracle(coords, UNIT, curve.t_grid), curve.t_grid)
    assert_allclose(curve.l_minus_t, oracle, atol=1e-12)


def test_univariate_translation_correction_matches_oracle():
    coords = np.random.default_rng(4).uniform(0, 1, (60, 2))
    curve = l_univariate(coords, UNIT, 0.25, 30, edge_correction="translation")
    oracle = to_l_minus_t(
        k_univariate_oracle(coords, UNIT, curve.t_grid, correction="translation"),
        curve.t_grid,
    )
    assert_allclose(curve.l_minus_t, oracle, atol=1e-10)


@pytest.mark.parametrize("seed,n1,n2", [(5, 25, 35), (6, 100, 60)])
def test_bivariate_matches_oracle(seed, n1, n2):
    rng = np.random.default_rng(seed)
    a, b = rng.uniform(0, 1, (n1, 2)), rng.uniform(0, 1, (n2, 2))
    curve = l_bivariate(a, b, UNIT, 0.25, 40)
    oracle = to_l_minus_t(k_bivariate_oracle(a, b, UNIT, curve.t_grid), curve.t_grid)
    assert_allclose(curve.l_minus_t, oracle, atol=1e-12)


def test_bivariate_symmetric_in_class_order():
    rng = np.random.default_rng(7)
    a, b = rng.uniform(0, 1, (30, 2)), rng.uniform(0, 1, (45, 2))
    forward = l_bivariate(a, b, UNIT, 0.3, 60)
    backward = l_bivariate(b, a, UNIT, 0.3, 60)
    assert_allclose(forward.l_minus_t, backward.l_minus_t, atol=1e-12)


def test_bivariate_distant_classes():
    # all cross distances exceed t_max, so L - t = -t everywhere
    a = np.array([[0.1, 0.1], [0.15, 0.12]])
    b = np.array([[0.9, 0.9], [0.85, 0.95]])
    curve = l_bivariate(a, b, UNIT, 0.2, 25)
    assert_allclose(curve.l_minus_t, -curve.t_grid, atol=1e-12)


def test_k_monotone_and_l_nonnegative():
    coords = np.random.default_rng(8).uniform(0, 1, (80, 2))
    curve = l_univariate(coords, UNIT, 0.3, 50)
    l_values = curve.l_minus_t + curve.t_grid  # recover sqrt(K/pi)
    assert (l_values >= 0).all()
    k_values = np.pi * l_values**2
    assert (np.diff(k_values) >= -1e-12).all()


def test_estimator_validation():
    with pytest.raises(ValidationError):
        l_univariate(np.array([[0.5, 0.5]]), UNIT, 0.2, 10)  # one point
    with pytest.raises(ValidationError):
        l_univariate(np.zeros((0, 2)), UNIT, 0.2, 10)  # empty class
    coords = np.random.default_rng(9).uniform(0, 1, (5, 2))
    with pytest.raises(ValidationError):
        l_univariate(coords, UNIT, -0.1, 10)  # t_max must be positive
    with pytest.raises(ValidationError):
        l_univariate(coords, UNIT, 0.2, 0)  # no steps
    with pytest.raises(ValidationError):
        l_univariate(coords, (0, 0, 1, 0), 0.2, 10)  # degenerate region
    with pytest.raises(ValidationError):
        l_univariate(coords, UNIT, 0.2, 10, edge_correction="border")
    with pytest.raises(ValidationError):
        l_bivariate(coords, np.zeros((0, 2)), UNIT, 0.2, 10)


def test_envelope_rank_rule_39():
    # ceil(.025*39) = 1 and ceil(.975*39) = 39: pointwise min and max
    spec = NullSpec("csr_independence", 20, 1)
    low, high = l_envelope(spec, "uni-1", 0.25, 20, 39, seed=21)
    sims = []
    for s in range(39):
        rng = np.random.default_rng(np.random.SeedSequence(21, spawn_key=(0, s)))
        coords = rng.uniform((0.0, 0.0), (1.0, 1.0), (20, 2))
        sims.append(l_univariate(coords, UNIT, 0.25, 20).l_minus_t)
    sims = np.array(sims)
    assert_allclose(low, sims.min(axis=0), atol=1e-12)
    assert_allclose(high, sims.max(axis=0), atol=1e-12)


def test_envelope_reproducible_and_ordered():
    spec = NullSpec("csr_independence", 15, 15)
    low1, high1 = l_envelope(spec, "bi", 0.25, 30, 40, seed=33)
    low2, high2 = l_envelope(spec, "bi", 0.25, 30, 40, seed=33)
    assert_array_equal(low1, low2)
    assert_array_equal(high1, high2)
    assert (low1 <= high1).all()


def test_envelope_validation():
    spec = NullSpec("csr_independence", 15, 15)
    with pytest.raises(ValidationError):
        l_envelope(spec, "bi", 0.25, 30, 20, seed=1)  # n_sim < 39
    with pytest.raises(ValidationError):
        l_envelope(spec, "uni-3", 0.25, 30, 39, seed=1)  # unknown statistic
    rl = NullSpec("rl_case2_uniform", 15, 15)
    with pytest.raises(ValidationError):
        l_envelope(rl, "bi", 0.25, 30, 39, seed=1)  # envelopes are CSR-only


def test_cluster_breaks_envelope():
    # one tight blob: strong aggregation at small t
    rng = np.random.default_rng(12)
    coords = np.clip(rng.normal(0.5, 0.02, (50, 2)), 0, 1)
    coords = np.unique(coords, axis=0)
    curve = l_univariate(coords, UNIT, 0.2, 30)
    spec = NullSpec("csr_independence", coords.shape[0], 1)
    low, high = l_envelope(spec, "uni-1", 0.2, 30, 99, seed=13)
    assert (curve.l_minus_t[:10] > high[:10]).any()


def test_lcurve_with_envelope_validation():
    coords = np.random.default_rng(14).uniform(0, 1, (10, 2))
    curve = l_univariate(coords, UNIT, 0.2, 10)
    with pytest.raises(ValidationError):
        curve.with_envelope(np.zeros(5), np.zeros(5))  # grid mismatch
    withenv = curve.with_envelope(curve.l_minus_t - 1, curve.l_minus_t + 1)
    assert isinstance(withenv, LCurve)
    assert (withenv.env_low <= withenv.env_high).all()
