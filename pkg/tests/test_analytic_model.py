"""
Test cases for the analytic model

Test cases can be run with:
    nosetests tests/test_analytic_model.py
"""
import math
import unittest

import numpy as np
from timebin import analytic_model as am
from timebin.models import DataValidationError, PhaseSetting, Port
from tests.factories import PhaseSettingFactory

MINUS = Port.MINUS


######################################################################
#  S I N G L E   P H O T O N S
######################################################################
class TestSinglePhoton(unittest.TestCase):
    """Pump state and analyzer interferometers"""

    def test_pump_state(self):
        """It should split the pump into bins 0 and 1 with a relative phase"""
        state = am.pump_state(math.pi / 2)
        self.assertAlmostEqual(state.norm, 1.0)
        self.assertAlmostEqual(state.amplitudes[0], 1 / math.sqrt(2))
        self.assertAlmostEqual(state.amplitudes[1], -1j / math.sqrt(2))
        self.assertEqual(state.occupied_bins(), {0, 1})

    def test_pair_state_without_pump_interferometer(self):
        """It should create the pair in bin 0 only"""
        state = am.pair_state(1.0, pump_interferometer=False)
        self.assertEqual(state.occupied_bins(), {0})
        self.assertAlmostEqual(state.norm, 1.0)

    def test_analyzer_preserves_norm(self):
        """It should conserve probability for any input over bins 0 and 1"""
        rng = np.random.default_rng(11)
        for _ in range(20):
            amplitudes = np.zeros(am.N_BINS, dtype=complex)
            amplitudes[:2] = rng.normal(size=2) + 1j * rng.normal(size=2)
            amplitudes /= np.linalg.norm(amplitudes)
            output = am.analyzer_transform(am.TimeBinAmplitudes(amplitudes), rng.uniform(-math.pi, math.pi))
            self.assertEqual(output.amplitudes.shape, am.SINGLE_PORT_SHAPE)
            self.assertAlmostEqual(output.norm, 1.0, places=12)

    def test_analyzer_rejects_bad_input(self):
        """It should refuse photons in bin 2 or with port structure"""
        late = am.TimeBinAmplitudes(np.array([0, 0, 1], dtype=complex))
        self.assertRaises(DataValidationError, am.analyzer_transform, late, 0.0)
        ported = am.TimeBinAmplitudes(np.zeros(am.SINGLE_PORT_SHAPE, dtype=complex))
        self.assertRaises(DataValidationError, am.analyzer_transform, ported, 0.0)
        self.assertRaises(DataValidationError, am.TimeBinAmplitudes, np.zeros(4))
        self.assertRaises(DataValidationError, am.pump_state, math.nan)


######################################################################
#  J O I N T   D I S T R I B U T I O N S
######################################################################
class TestJointDistribution(unittest.TestCase):
    """Two-photon detection probabilities"""

    def test_normalized(self):
        """It should sum to one at random phases"""
        for _ in range(10):
            table = am.joint_detection_distribution(PhaseSettingFactory())
            self.assertEqual(table.shape, am.PAIR_SHAPE)
            self.assertAlmostEqual(table.sum(), 1.0, places=12)

    def test_postselected_fringe(self):
        """It should give P(1-, 1-) = (1 - cos theta) / 16"""
        for theta in np.linspace(0, 2 * math.pi, 9):
            setting = PhaseSetting(alice=theta)
            table = am.joint_detection_distribution(setting)
            self.assertAlmostEqual(table[1, MINUS, 1, MINUS], (1 - math.cos(theta)) / 16, places=12)
            amplitude = am.postselected_amplitude(setting)
            self.assertAlmostEqual(abs(amplitude) ** 2 / 32, table[1, MINUS, 1, MINUS], places=12)
        self.assertAlmostEqual(am.joint_detection_distribution(PhaseSetting())[1, MINUS, 1, MINUS], 0.0)

    def test_depends_on_theta_only(self):
        """It should give the same table for settings sharing theta"""
        first = am.joint_detection_distribution(PhaseSetting(pump=0.3, alice=1.0, bob=0.2))
        second = am.joint_detection_distribution(PhaseSetting(pump=0.0, alice=0.9, bob=0.0))
        np.testing.assert_allclose(first, second, atol=1e-14)

    def test_peak_probabilities(self):
        """It should give a central peak (2 - cos theta)/16 and satellites of 1/16"""
        for theta in (0.0, 1.0, math.pi):
            peaks = am.peak_probabilities(am.joint_detection_distribution(PhaseSetting(alice=theta)))
            self.assertAlmostEqual(peaks["central"], (2 - math.cos(theta)) / 16, places=12)
            self.assertAlmostEqual(peaks["left_satellite"], 1 / 16, places=12)
            self.assertAlmostEqual(peaks["right_satellite"], 1 / 16, places=12)
        self.assertAlmostEqual(am.central_peak_probability(PhaseSetting(alice=math.pi)), 3 / 16)

    def test_twofold_ceiling(self):
        """It should limit the unselected central peak to 50 % visibility"""
        values = [am.central_peak_probability(PhaseSetting(alice=theta)) for theta in np.linspace(0, 2 * math.pi, 13)]
        self.assertAlmostEqual(am.fringe_visibility(values), 0.5, places=12)

    def test_phase_average(self):
        """It should average to central:satellite peaks of 2:1:1"""
        peaks = am.peak_probabilities(am.phase_averaged_distribution())
        self.assertAlmostEqual(peaks["central"], 2 / 16, places=12)
        self.assertAlmostEqual(peaks["left_satellite"], 1 / 16, places=12)
        self.assertAlmostEqual(peaks["right_satellite"], 1 / 16, places=12)
        thetas = np.linspace(0, 2 * math.pi, 64, endpoint=False)
        brute = np.mean([am.joint_detection_distribution(PhaseSetting(alice=t)) for t in thetas], axis=0)
        np.testing.assert_allclose(am.phase_averaged_distribution(), brute, atol=1e-14)

    def test_characterization_geometry(self):
        """It should send both photons to the minus detectors in bin 0 without interferometers"""
        table = am.joint_detection_distribution(PhaseSettingFactory(), pump_interferometer=False, analyzers=False)
        self.assertAlmostEqual(table[0, MINUS, 0, MINUS], 1.0)

    def test_analyzers_without_pump_interferometer(self):
        """It should lose the central interference without the pump interferometer"""
        for theta in (0.0, math.pi):
            table = am.joint_detection_distribution(PhaseSetting(alice=theta), pump_interferometer=False)
            self.assertAlmostEqual(am.peak_probabilities(table)["central"], 1 / 8, places=12)


######################################################################
#  V I S I B I L I T Y
######################################################################
class TestVisibility(unittest.TestCase):
    """Fringe laws and multiphoton visibility"""

    def test_triple_coincidence_rate(self):
        """It should follow 1 - V cos(theta)"""
        self.assertAlmostEqual(am.triple_coincidence_rate(0.0, 1.0), 0.0)
        self.assertAlmostEqual(am.triple_coincidence_rate(math.pi, 1.0), 2.0)
        self.assertAlmostEqual(am.triple_coincidence_rate(math.pi / 2, 0.9), 1.0)
        self.assertRaises(DataValidationError, am.triple_coincidence_rate, 0.0, 1.5)

    def test_multiphoton_visibility(self):
        """It should give (1 + p) / (1 + 2p) and its linear approximation"""
        prediction = am.multiphoton_visibility(0.1)
        self.assertAlmostEqual(prediction.v_exact, 11 / 12)
        self.assertAlmostEqual(prediction.v_linear, 0.9)
        self.assertAlmostEqual(am.multiphoton_visibility(0.05).v_exact, 0.954545, places=6)
        self.assertAlmostEqual(am.multiphoton_visibility(0.1, 0.98).v_total, 0.98 * 11 / 12)
        self.assertAlmostEqual(am.visibility_slope(0.0), -1.0)
        self.assertRaises(DataValidationError, am.multiphoton_visibility, 0.6)

    def test_visibility_slope_at_zero(self):
        """It should start with slope -1 and flatten as p grows"""
        self.assertAlmostEqual(am.visibility_slope(0.0), -1.0)
        self.assertGreater(am.visibility_slope(0.1), -1.0)
        step = 1e-6
        numeric = (am.multiphoton_visibility(step).v_exact - 1.0) / step
        self.assertAlmostEqual(numeric, -1.0, places=4)

    def test_visibility_trend(self):
        """It should fit a line flatter than the tangent over a power scan"""
        mu_list = [0.02, 0.04, 0.06, 0.08, 0.10, 0.12, 0.14]
        slope, intercept = am.visibility_trend(mu_list)
        self.assertAlmostEqual(slope, -0.7494, places=3)
        self.assertAlmostEqual(intercept, 0.9931, places=3)
        slope, intercept = am.visibility_trend(mu_list, 0.98)
        self.assertAlmostEqual(slope, -0.7344, places=3)
        self.assertAlmostEqual(intercept, 0.9732, places=3)
        self.assertRaises(DataValidationError, am.visibility_trend, [0.05, 0.05])

    def test_multiphoton_rates(self):
        """It should add two- and four-photon rates into the visibility law"""
        p = 0.08
        rates = [am.multiphoton_rates(theta, p).rc for theta in np.linspace(0, 2 * math.pi, 25)]
        self.assertAlmostEqual(am.fringe_visibility(rates), (1 + p) / (1 + 2 * p), places=12)
        r2, r4, rc = am.multiphoton_rates(math.pi, p)
        self.assertAlmostEqual(r2, p)
        self.assertAlmostEqual(rc, r2 + r4)
        self.assertAlmostEqual(rc, 0.5 * ((p + 2 * p**2) + (p + p**2)))
        prediction = am.multiphoton_visibility(p)
        self.assertAlmostEqual(prediction.rate(math.pi), rc)

    def test_chsh_significance(self):
        """It should exceed 25 standard deviations for V = 0.91 +/- 0.008"""
        self.assertAlmostEqual(am.chsh_significance(0.91, 0.008), 25.4, delta=0.1)
        self.assertLess(am.chsh_significance(0.7, 0.01), 0)
        self.assertRaises(DataValidationError, am.chsh_significance, 0.9, 0.0)

    def test_fringe_visibility_needs_counts(self):
        """It should refuse a fringe without counts"""
        self.assertRaises(DataValidationError, am.fringe_visibility, [0, 0, 0])
        self.assertAlmostEqual(am.fringe_visibility([1, 3]), 0.5)
