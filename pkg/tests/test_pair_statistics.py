"""
Test cases for pair statistics and the pair probability estimators

Test cases can be run with:
    nosetests tests/test_pair_statistics.py
"""
import logging
import math
import unittest

import numpy as np
from timebin import app
from timebin import pair_statistics as ps
from timebin.models import ChannelParams, DataValidationError
from tests.factories import ChannelParamsFactory


class TestPairNumberDistribution(unittest.TestCase):
    """Poissonian and truncated pair numbers"""

    def test_poisson(self):
        """It should be normalized with the requested mean"""
        dist = ps.PairNumberDistribution.poisson(0.1)
        self.assertEqual(dist.n_max, ps.N_MAX)
        self.assertAlmostEqual(dist.probabilities.sum(), 1.0, places=12)
        self.assertAlmostEqual(dist.mean, 0.1, places=12)
        self.assertAlmostEqual(dist.probabilities[1], 0.1 * math.exp(-0.1), places=12)
        self.assertRaises(DataValidationError, ps.PairNumberDistribution.poisson, -0.1)

    def test_truncated(self):
        """It should keep at most one pair"""
        dist = ps.PairNumberDistribution.truncated(0.05)
        self.assertEqual(dist.probabilities.tolist(), [0.95, 0.05])
        self.assertAlmostEqual(dist.mean, 0.05)
        self.assertIn("n_max=[1]", repr(dist))
        self.assertRaises(DataValidationError, ps.PairNumberDistribution.truncated, 1.5)

    def test_invalid_probabilities(self):
        """It should refuse negative or unnormalized probabilities"""
        self.assertRaises(DataValidationError, ps.PairNumberDistribution, np.array([0.5, 0.4]))
        self.assertRaises(DataValidationError, ps.PairNumberDistribution, np.array([1.5, -0.5]))
        self.assertRaises(DataValidationError, ps.PairNumberDistribution, np.array([]))


class TestMainSideRatio(unittest.TestCase):
    """Start/stop probabilities and the main to side ratio"""

    def test_closed_form(self):
        """It should give P(B|A) / [p (1 - P(B|A) t eta) P(B)]"""
        ch_a = ChannelParams(t=0.3, eta=0.09)
        ch_b = ChannelParams(t=0.3, eta=0.3, p_filter=0.5, p_filter_given_twin=0.8)
        expected = 0.8 / (0.05 * (1 - 0.8 * 0.09) * 0.5)
        self.assertAlmostEqual(ps.main_side_ratio(0.05, ch_a, ch_b), expected)
        self.assertRaises(DataValidationError, ps.main_side_ratio, 0.0, ch_a, ch_b)
        self.assertRaises(DataValidationError, ps.main_side_ratio, 0.05, ch_a, ChannelParams(t=1.0, eta=1.0))

    def test_matches_enumeration(self):
        """It should match the exhaustive enumeration over a parameter sweep"""
        rng = np.random.default_rng(2024)
        for _ in range(100):
            p_pair = rng.uniform(0.01, 0.5)
            ch_a = ChannelParams(*rng.uniform(0.05, 0.95, size=2), p_filter=rng.uniform(0.2, 1.0))
            p_b = rng.uniform(0.2, 1.0)
            ch_b = ChannelParams(*rng.uniform(0.05, 0.95, size=2), p_filter=p_b,
                                 p_filter_given_twin=rng.uniform(p_b, 1.0))
            closed = ps.main_side_ratio(p_pair, ch_a, ch_b)
            enumerated = ps.enumerate_main_side_ratio(p_pair, ch_a, ch_b)
            self.assertLess(abs(closed - enumerated), 1e-12 * closed)

    def test_series_matches_truncated(self):
        """It should reproduce the closed form for a truncated distribution"""
        ch_a, ch_b = ChannelParamsFactory(), ChannelParamsFactory()
        dist = ps.PairNumberDistribution.truncated(0.07)
        self.assertAlmostEqual(
            ps.main_side_ratio_series(dist, ch_a, ch_b) / ps.main_side_ratio(0.07, ch_a, ch_b), 1.0, places=12
        )

    def test_poisson_series(self):
        """It should approach the truncated ratio for small mean pair numbers"""
        ch_a, ch_b = ChannelParams(t=0.3, eta=0.1), ChannelParams(t=0.3, eta=0.3)
        poisson = ps.main_side_ratio_series(ps.PairNumberDistribution.poisson(0.01), ch_a, ch_b)
        truncated = ps.main_side_ratio(0.01, ch_a, ch_b)
        self.assertAlmostEqual(poisson / truncated, 1.0, delta=0.02)

    def test_weights(self):
        """It should give non-negative peak weights and start probabilities"""
        dist = ps.PairNumberDistribution.poisson(0.05)
        ch_a, ch_b = ChannelParamsFactory(), ChannelParamsFactory()
        self.assertGreater(ps.main_peak_weight(dist, ch_a, ch_b), ps.side_peak_weight(dist, ch_a, ch_b))
        self.assertEqual(ps.p_start_given_n(0, ch_a), 0.0)
        self.assertAlmostEqual(ps.p_start_given_n(1, ch_a), ch_a.detection_probability)
        self.assertRaises(DataValidationError, ps.p_start_given_n, -1, ch_a)


class TestEstimators(unittest.TestCase):
    """Side-peak and singles-rate estimators"""

    @classmethod
    def setUpClass(cls):
        app.logger.setLevel(logging.CRITICAL)

    def test_sidepeak_estimate(self):
        """It should divide side by main counts with Poisson uncertainty"""
        estimate = ps.estimate_ppair_sidepeak(1000, 50)
        self.assertAlmostEqual(estimate.value, 0.05)
        self.assertAlmostEqual(estimate.relative_uncertainty, math.sqrt(1 / 50 + 1 / 1000))
        self.assertEqual(estimate.method, ps.EstimateMethod.SIDE_PEAK)
        self.assertFalse(estimate.corrected)

    def test_sidepeak_correction(self):
        """It should correct for Bob's detection probability"""
        ch_b = ChannelParams(t=0.3, eta=0.3)
        self.assertAlmostEqual(ps.sidepeak_correction(ch_b), 0.91)
        estimate = ps.estimate_ppair_sidepeak(1000, 45.5, ch_b)
        self.assertAlmostEqual(estimate.value, 0.05)
        self.assertTrue(estimate.corrected)
        self.assertEqual(estimate.serialize()["method"], "side-peak")

    def test_empty_side_peak(self):
        """It should report an unbounded uncertainty for an empty side peak"""
        estimate = ps.estimate_ppair_sidepeak(1000, 0)
        self.assertTrue(estimate.unbounded)
        self.assertEqual(estimate.absolute_uncertainty, math.inf)
        self.assertIsNone(estimate.serialize()["relative_uncertainty"])
        self.assertRaises(DataValidationError, ps.estimate_ppair_sidepeak, 0, 10)
        self.assertRaises(DataValidationError, ps.estimate_ppair_sidepeak, 10, -1)

    def test_standard_estimate(self):
        """It should divide the singles rate by t eta f"""
        estimate = ps.estimate_ppair_standard(1000.0, 0.1, 0.1, 1e6)
        self.assertAlmostEqual(estimate.value, 0.1)
        self.assertEqual(estimate.relative_uncertainty, 0.0)
        self.assertRaises(DataValidationError, ps.estimate_ppair_standard, 0.0, 0.1, 0.1, 1e6)
        self.assertRaises(DataValidationError, ps.estimate_ppair_standard, 1.0, 0.1, 0.1, 1e6, -0.1)

    def test_uncertainty_comparison(self):
        """It should make the side-peak method far more precise than the standard one"""
        standard = ps.standard_relative_uncertainty(0.30, 0.06, 0.30, 0.06)
        self.assertGreater(standard, 0.28)
        self.assertLess(standard, 0.30)
        sidepeak = ps.estimate_ppair_sidepeak(30_000, 1_000).relative_uncertainty
        self.assertLess(sidepeak, 0.04)
