"""
Pair Statistics

Start/stop probabilities of the TAC measurement, the main to side peak
ratio, and the two estimators of the probability to create a pair per
pulse: the side peak ratio and the singles rate method.

Probabilities are relative to the start pulse and are not normalized by
P(Start), which cancels in every ratio used here.
"""
import itertools
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from scipy import stats

from timebin.models import ChannelParams, DataValidationError

logger = logging.getLogger("flask.app")

N_MAX = 20
SUM_TOLERANCE = 1e-12


class EstimateMethod(Enum):
    """How a pair probability was obtained"""

    SIDE_PEAK = "side-peak"
    STANDARD = "standard"


######################################################################
#  P A I R   N U M B E R   D I S T R I B U T I O N
######################################################################
@dataclass(frozen=True, eq=False)
class PairNumberDistribution:
    """Probabilities P(N) of emitting N = 0..N_max pairs in one pulse"""

    probabilities: np.ndarray

    def __post_init__(self):
        weights = np.asarray(self.probabilities, dtype=float)
        if weights.ndim != 1 or weights.size == 0:
            raise DataValidationError("pair number distribution needs at least P(0)")
        if np.any(weights < 0):
            raise DataValidationError("pair number probabilities must be non-negative")
        if abs(weights.sum() - 1.0) > SUM_TOLERANCE:
            raise DataValidationError(f"pair number probabilities sum to {weights.sum()}, not 1")
        object.__setattr__(self, "probabilities", weights)

    def __repr__(self):
        return f"<PairNumberDistribution mean=[{self.mean:.6g}] n_max=[{self.n_max}]>"

    @property
    def n_max(self) -> int:
        """Largest pair number carried by the distribution"""
        return self.probabilities.size - 1

    @property
    def mean(self) -> float:
        """Mean number of pairs per pulse"""
        return float(np.dot(np.arange(self.probabilities.size), self.probabilities))

    @property
    def pair_numbers(self) -> np.ndarray:
        """0, 1, ..., n_max"""
        return np.arange(self.probabilities.size)

    @classmethod
    def poisson(cls, mu: float, n_max: int = N_MAX) -> "PairNumberDistribution":
        """
        Poissonian pair numbers, truncated at n_max and renormalized

        :param mu: mean number of pairs per pulse
        :param n_max: largest pair number kept
        """
        if not (math.isfinite(mu) and mu >= 0):
            raise DataValidationError(f"mean pair number must be non-negative, got {mu}")
        weights = stats.poisson.pmf(np.arange(n_max + 1), mu)
        tail = 1.0 - weights.sum()
        if tail > 1e-15:
            logger.debug("Poisson tail beyond N=%d is %.3g", n_max, tail)
        return cls(weights / weights.sum())

    @classmethod
    def truncated(cls, p_pair: float) -> "PairNumberDistribution":
        """At most one pair: P(0) = 1 - p_pair, P(1) = p_pair"""
        if not 0.0 <= p_pair <= 1.0:
            raise DataValidationError(f"p_pair {p_pair} outside [0, 1]")
        return cls(np.array([1.0 - p_pair, p_pair]))


@dataclass(frozen=True)
class PpairEstimate:
    """An estimate of the pair creation probability per pulse"""

    value: float
    relative_uncertainty: float
    method: EstimateMethod
    corrected: bool = False

    @property
    def unbounded(self) -> bool:
        """True when the uncertainty cannot be bounded (empty side peak)"""
        return math.isinf(self.relative_uncertainty)

    @property
    def absolute_uncertainty(self) -> float:
        """One standard deviation in probability units"""
        if self.unbounded:
            return math.inf
        return self.value * self.relative_uncertainty

    def serialize(self) -> dict:
        """Serializes an estimate into a dictionary"""
        return {
            "value": self.value,
            "relative_uncertainty": None if self.unbounded else self.relative_uncertainty,
            "method": self.method.value,
            "corrected": self.corrected,
        }


######################################################################
#  S T A R T   A N D   S T O P   P R O B A B I L I T I E S
######################################################################
def p_start_given_n(n, ch: ChannelParams):
    """
    Probability that at least one of n photons gives a start

    :param n: number of pairs in the pulse (scalar or array)
    :param ch: Alice's channel
    """
    return _at_least_one(n, ch.p_filter * ch.t * ch.eta)


def p_stop_same_pulse_given_n(n, ch_b: ChannelParams):
    """Probability of a stop by a photon of the same pulse as the start"""
    return _at_least_one(n, ch_b.p_filter_given_twin * ch_b.t * ch_b.eta)


def p_stop_next_pulse(dist: PairNumberDistribution, ch_b: ChannelParams) -> float:
    """
    Probability of a stop by a photon of the following pulse

    Uses the unconditional filter probability since nothing is known about
    the twin of that photon.
    """
    q_b = ch_b.p_filter * ch_b.t * ch_b.eta
    return float(np.dot(dist.probabilities, _at_least_one(dist.pair_numbers, q_b)))


def main_peak_weight(dist: PairNumberDistribution, ch_a: ChannelParams, ch_b: ChannelParams) -> float:
    """Sum over N of P(N) P(Start|N) P(Stop_0|N)"""
    n = dist.pair_numbers
    return float(np.sum(dist.probabilities * p_start_given_n(n, ch_a) * p_stop_same_pulse_given_n(n, ch_b)))


def side_peak_weight(dist: PairNumberDistribution, ch_a: ChannelParams, ch_b: ChannelParams) -> float:
    """Sum over N of P(N) P(Start|N) (1 - P(Stop_0|N)) P(Stop_1)"""
    n = dist.pair_numbers
    no_stop = 1.0 - p_stop_same_pulse_given_n(n, ch_b)
    weight = np.sum(dist.probabilities * p_start_given_n(n, ch_a) * no_stop)
    return float(weight * p_stop_next_pulse(dist, ch_b))


def main_side_ratio_series(dist: PairNumberDistribution, ch_a: ChannelParams, ch_b: ChannelParams) -> float:
    """Main to side peak ratio for any pair number distribution"""
    side = side_peak_weight(dist, ch_a, ch_b)
    if side <= 0:
        raise DataValidationError("side peak has zero probability; the ratio is undefined")
    return main_peak_weight(dist, ch_a, ch_b) / side


def main_side_ratio(p_pair: float, ch_a: ChannelParams, ch_b: ChannelParams) -> float:
    """
    Main to side peak ratio when at most one pair is created per pulse

    :param p_pair: probability of one pair per pulse, in (0, 1)
    :param ch_a: Alice's channel (cancels out)
    :param ch_b: Bob's channel

    :return: P(B|A) / [p_pair (1 - P(B|A) t_B eta_B) P(B)]
    :rtype: float

    """
    if not 0.0 < p_pair < 1.0:
        raise DataValidationError(f"p_pair {p_pair} outside (0, 1)")
    ch_a.validate("alice")
    ch_b.validate("bob")
    denominator = p_pair * (1 - ch_b.p_filter_given_twin * ch_b.t * ch_b.eta) * ch_b.p_filter
    if denominator <= 0:
        raise DataValidationError("side peak vanishes for this channel; the ratio is undefined")
    return ch_b.p_filter_given_twin / denominator


def enumerate_main_side_ratio(p_pair: float, ch_a: ChannelParams, ch_b: ChannelParams) -> float:
    """
    Main to side ratio by enumerating every filter, transmission and
    detection outcome of the start pulse and the following pulse with at
    most one pair each
    """
    if not 0.0 < p_pair < 1.0:
        raise DataValidationError(f"p_pair {p_pair} outside (0, 1)")
    main = side = 0.0
    for n_start, n_next in itertools.product((0, 1), repeat=2):
        weight = _pair_weight(n_start, p_pair) * _pair_weight(n_next, p_pair)
        for outcome in _photon_outcomes(n_start, ch_a, ch_b, conditional=True):
            start_weight, start, stop_0 = outcome
            if not start:
                continue
            for next_weight, _, stop_1 in _photon_outcomes(n_next, ch_a, ch_b, conditional=False):
                joint = weight * start_weight * next_weight
                if stop_0:
                    main += joint
                elif stop_1:
                    side += joint
    if side <= 0:
        raise DataValidationError("side peak has zero probability; the ratio is undefined")
    return main / side


######################################################################
#  E S T I M A T O R S
######################################################################
def sidepeak_correction(ch_b: ChannelParams) -> float:
    """(1 - P(B|A) t_B eta_B) P(B) / P(B|A); 1 for a lossy unfiltered Bob"""
    if ch_b.p_filter_given_twin <= 0:
        raise DataValidationError("bob.p_filter_given_twin must be positive to correct the estimate")
    return (1 - ch_b.p_filter_given_twin * ch_b.t * ch_b.eta) * ch_b.p_filter / ch_b.p_filter_given_twin


def estimate_ppair_sidepeak(
    main_counts: float, side_counts: float, ch_b: Optional[ChannelParams] = None
) -> PpairEstimate:
    """
    Pair probability from the side to main peak count ratio

    :param main_counts: counts in the main peak, positive
    :param side_counts: counts in one side peak
    :param ch_b: Bob's channel; when given the ratio is corrected for
        Bob's finite detection probability and filters

    """
    if not main_counts > 0:
        raise DataValidationError(f"main peak counts must be positive, got {main_counts}")
    if not side_counts >= 0:
        raise DataValidationError(f"side peak counts must be non-negative, got {side_counts}")
    value = side_counts / main_counts
    if ch_b is not None:
        value /= sidepeak_correction(ch_b.validate("bob"))
    if side_counts == 0:
        logger.warning("Empty side peak: pair probability uncertainty is unbounded")
        relative = math.inf
    else:
        relative = math.sqrt(1 / side_counts + 1 / main_counts)
    return PpairEstimate(value, relative, EstimateMethod.SIDE_PEAK, corrected=ch_b is not None)


def standard_relative_uncertainty(t: float, sigma_t: float, eta: float, sigma_eta: float) -> float:
    """Relative uncertainty of N/(t eta f) from the uncertainties of t and eta"""
    return math.hypot(sigma_t / t, sigma_eta / eta)


def estimate_ppair_standard(
    singles_rate: float,
    t_a: float,
    eta_a: float,
    f: float,
    sigma_t: float = 0.0,
    sigma_eta: float = 0.0,
) -> PpairEstimate:
    """
    Pair probability from Alice's singles rate

    :param singles_rate: Alice's detected photons per second
    :param t_a: Alice's coupling and transmission
    :param eta_a: Alice's detector efficiency
    :param f: laser repetition rate in Hz
    :param sigma_t: uncertainty of t_a
    :param sigma_eta: uncertainty of eta_a

    """
    for name, value in (("singles_rate", singles_rate), ("t_a", t_a), ("eta_a", eta_a), ("f", f)):
        if not value > 0:
            raise DataValidationError(f"{name} must be positive, got {value}")
    if sigma_t < 0 or sigma_eta < 0:
        raise DataValidationError("uncertainties must be non-negative")
    value = singles_rate / (t_a * eta_a * f)
    relative = standard_relative_uncertainty(t_a, sigma_t, eta_a, sigma_eta)
    return PpairEstimate(value, relative, EstimateMethod.STANDARD)


######################################################################
#  U T I L I T Y   F U N C T I O N S
######################################################################
def _at_least_one(n, q: float):
    """1 - (1 - q)**n, for scalar or array n"""
    if np.any(np.asarray(n) < 0):
        raise DataValidationError(f"pair number must be non-negative, got {n}")
    return 1.0 - (1.0 - q) ** n


def _pair_weight(n: int, p_pair: float) -> float:
    return p_pair if n == 1 else 1.0 - p_pair


def _bernoulli(p: float):
    """The two outcomes of a Bernoulli trial with their weights"""
    return ((True, p), (False, 1.0 - p))


def _photon_outcomes(n: int, ch_a: ChannelParams, ch_b: ChannelParams, conditional: bool):
    """
    Yields (weight, start, stop) over every outcome of at most one pair

    conditional selects P(B|A) for Bob's filter when Alice's twin passed,
    as for the pulse that gave the start.
    """
    if n == 0:
        yield 1.0, False, False
        return
    for (filter_a, w1), (trans_a, w2), (click_a, w3) in itertools.product(
        _bernoulli(ch_a.p_filter), _bernoulli(ch_a.t), _bernoulli(ch_a.eta)
    ):
        p_filter_b = ch_b.p_filter_given_twin if (conditional and filter_a) else ch_b.p_filter
        for (filter_b, w4), (trans_b, w5), (click_b, w6) in itertools.product(
            _bernoulli(p_filter_b), _bernoulli(ch_b.t), _bernoulli(ch_b.eta)
        ):
            weight = w1 * w2 * w3 * w4 * w5 * w6
            yield weight, filter_a and trans_a and click_a, filter_b and trans_b and click_b
