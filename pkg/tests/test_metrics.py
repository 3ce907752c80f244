"""L1 risk against Monte Carlo oracles, accuracy counting."""

import math

import numpy as np
import pytest

import _fixtures as fx
from hawkes_vb import HawkesParams, HistogramBasis
from hawkes_vb.adaptive import SubModel
from hawkes_vb.errors import DataError
from hawkes_vb.metrics import dim_accuracy, graph_accuracy, l1_risk

A = fx.MEMORY_A


class _Post:
    def __init__(self, mean, cov):
        self.mean = np.asarray(mean, float)
        self.cov = np.asarray(cov, float)


def _truth_1d(nu, w, j_bins):
    basis = HistogramBasis(A, j_bins)
    return HawkesParams.build([nu], [[None if w is None else np.asarray(w, float)]],
                              basis)


class TestL1Risk:
    def test_point_mass_at_truth_is_zero(self):
        truth = _truth_1d(7.0, [0.2, 0.1], 2)
        post = _Post([7.0, 0.2, 0.1], np.zeros((3, 3)))
        risk, per_edge = l1_risk([post], [SubModel(column=(1,), depth=1)], truth)
        assert risk == 0.0
        assert per_edge[0, 0] == 0.0

    def test_half_normal_single_bin(self):
        # truth kernel 0, posterior N(0, s^2) on one bin: the kernel error is
        # s * h * sqrt(2/pi) * A with h = 1/A, plus the nu folded term
        truth = _truth_1d(5.0, None, 1)
        s = 0.3
        post = _Post([5.0, 0.0], np.diag([0.04, s**2]))
        risk, per_edge = l1_risk([post], [SubModel(column=(1,), depth=0)], truth)
        kernel_term = s * math.sqrt(2 / math.pi)
        nu_term = 0.2 * math.sqrt(2 / math.pi)
        assert per_edge[0, 0] == pytest.approx(kernel_term, rel=1e-12)
        assert risk == pytest.approx(kernel_term + nu_term, rel=1e-12)

    def test_monte_carlo_oracle(self):
        rng = np.random.default_rng(0)
        truth = _truth_1d(6.5, [0.25, -0.1], 2)
        mean = np.array([6.3, 0.2, -0.05])
        cov = np.diag([0.09, 0.01, 0.02])
        post = _Post(mean, cov)
        risk, _ = l1_risk([post], [SubModel(column=(1,), depth=1)], truth)
        draws = rng.multivariate_normal(mean, cov, size=10**5)
        mc = np.abs(draws[:, 0] - 6.5).mean() \
            + np.abs(draws[:, 1] - 0.25).mean() + np.abs(draws[:, 2] + 0.1).mean()
        assert risk == pytest.approx(mc, abs=1e-2)

    def test_cross_resolution_refinement(self):
        # posterior on 4 bins vs truth on 2: compare via Monte Carlo of the
        # exact piecewise L1 distance
        rng = np.random.default_rng(1)
        truth = _truth_1d(5.0, [0.2, 0.1], 2)
        mean = np.array([5.0, 0.06, 0.05, 0.02, 0.03])
        cov = np.diag([0.0, 0.001, 0.002, 0.001, 0.003])
        post = _Post(mean, cov)
        risk, _ = l1_risk([post], [SubModel(column=(1,), depth=2)], truth)
        h0 = np.repeat(np.array([0.2, 0.1]) * (2 / A), 2)  # on the 4-bin grid
        draws = rng.multivariate_normal(mean[1:], cov[1:, 1:], size=10**5)
        dist = np.abs(draws * (4 / A) - h0).sum(axis=1) * (A / 4)
        assert risk == pytest.approx(dist.mean(), abs=1e-2)

    def test_missing_edge_charges_truth_norm(self):
        truth = _truth_1d(5.0, [0.2, 0.1], 2)
        post = _Post([5.0], np.zeros((1, 1)))
        risk, per_edge = l1_risk([post], [SubModel(column=(0,), depth=0)], truth)
        assert per_edge[0, 0] == pytest.approx(0.3)
        assert risk == pytest.approx(0.3)

    def test_translation_consistency(self):
        base_truth = _truth_1d(5.0, [0.2, 0.1], 2)
        shifted_truth = _truth_1d(6.0, [0.5, 0.4], 2)
        cov = np.diag([0.04, 0.01, 0.01])
        a, _ = l1_risk([_Post([5.2, 0.25, 0.12], cov)],
                       [SubModel(column=(1,), depth=1)], base_truth)
        b, _ = l1_risk([_Post([6.2, 0.55, 0.42], cov)],
                       [SubModel(column=(1,), depth=1)], shifted_truth)
        assert a == pytest.approx(b, rel=1e-12)

    def test_incompatible_memory_rejected(self):
        truth = _truth_1d(5.0, [0.2], 1)
        post = _Post([5.0, 0.2], np.zeros((2, 2)))
        with pytest.raises(DataError):
            l1_risk([post], [SubModel(column=(1,), depth=0)], truth, memory_A=0.2)


class TestAccuracies:
    def test_identical(self):
        d = np.array([[1, 0], [0, 1]])
        assert graph_accuracy(d, d) == 1.0
        assert dim_accuracy([2, 4], [2, 4]) == 1.0

    def test_complement(self):
        d = np.array([[1, 0], [0, 1]])
        assert graph_accuracy(1 - d, d) == 0.0
        assert dim_accuracy([1, 2], [2, 4]) == 0.0

    def test_single_flip_counting(self):
        rng = np.random.default_rng(3)
        d = rng.integers(0, 2, size=(4, 4))
        flipped = d.copy()
        flipped[2, 1] ^= 1
        assert graph_accuracy(flipped, d) == pytest.approx(15 / 16)

    def test_shape_mismatch(self):
        with pytest.raises(DataError):
            graph_accuracy(np.zeros((2, 2)), np.zeros((3, 3)))
