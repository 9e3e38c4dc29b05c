"""
Analytic Model

Closed-form amplitudes and detection probabilities of the Franson
arrangement: a pump interferometer prepares the creation-time superposition,
a pair is created, and each photon passes an analyzer interferometer with the
same path difference. Everything here is a pure function of its arguments and
is the oracle the Monte Carlo engine is checked against.

Amplitude arrays are indexed by time bin (0, 1, 2) and output port
(Port.MINUS, Port.PLUS); a pair is indexed (bin_a, port_a, bin_b, port_b).
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, NamedTuple, Sequence, Tuple

import numpy as np

from timebin.models import DataValidationError, PhaseSetting, Port

logger = logging.getLogger("flask.app")

N_BINS = 3
N_PORTS = 2
NORM_TOLERANCE = 1e-12
CHSH_THRESHOLD = 1 / math.sqrt(2)
MAX_MULTIPHOTON_P = 0.5

SINGLE_BIN_SHAPE = (N_BINS,)
SINGLE_PORT_SHAPE = (N_BINS, N_PORTS)
PAIR_SHAPE = (N_BINS, N_PORTS, N_BINS, N_PORTS)


######################################################################
#  D O M A I N   T Y P E S
######################################################################
@dataclass(frozen=True, eq=False)
class TimeBinAmplitudes:
    """
    Probability amplitudes of one photon or of a photon pair

    Allowed shapes are (bin,) before an analyzer, (bin, port) after one and
    (bin_a, port_a, bin_b, port_b) for a pair.
    """

    amplitudes: np.ndarray

    def __post_init__(self):
        shape = np.shape(self.amplitudes)
        if shape not in (SINGLE_BIN_SHAPE, SINGLE_PORT_SHAPE, PAIR_SHAPE):
            raise DataValidationError(f"Invalid amplitude shape {shape}")

    @property
    def norm(self) -> float:
        """Sum of squared magnitudes"""
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    @property
    def is_pair(self) -> bool:
        """True for two-photon amplitudes"""
        return self.amplitudes.ndim == 4

    def probabilities(self) -> np.ndarray:
        """Squared magnitudes with the same indexing as the amplitudes"""
        return np.abs(self.amplitudes) ** 2

    def occupied_bins(self) -> set:
        """Time bins holding a non-zero amplitude (first photon for pairs)"""
        weights = self.probabilities()
        if weights.ndim > 1:
            weights = weights.reshape(N_BINS, -1).sum(axis=1)
        return {int(b) for b in np.flatnonzero(weights > NORM_TOLERANCE)}


class VisibilityPrediction(NamedTuple):
    """Multiphoton visibility of the triple coincidence fringe"""

    p_pair: float
    v_exact: float
    v_linear: float
    intrinsic_v: float
    constant_coefficient: float
    fringe_coefficient: float

    @property
    def v_total(self) -> float:
        """Visibility including the interferometer quality ceiling"""
        return self.intrinsic_v * self.v_exact

    def rate(self, theta: float) -> float:
        """Relative triple coincidence rate at theta"""
        return 0.5 * (self.constant_coefficient - self.intrinsic_v * self.fringe_coefficient * math.cos(theta))


class MultiphotonRates(NamedTuple):
    """Two-photon, four-photon and total coincidence rates"""

    r2: float
    r4: float
    rc: float


######################################################################
#  S I N G L E   P H O T O N   S T A T E S
######################################################################
def pump_state(phi: float) -> TimeBinAmplitudes:
    """
    Time-bin qubit leaving the pump interferometer

    :param phi: relative phase of the pump interferometer
    :type phi: float

    :return: amplitudes (1/sqrt2, -exp(i phi)/sqrt2, 0) on bins 0, 1, 2
    :rtype: TimeBinAmplitudes

    """
    _require_finite("phi", phi)
    amplitudes = np.zeros(N_BINS, dtype=complex)
    amplitudes[0] = 1 / math.sqrt(2)
    amplitudes[1] = -np.exp(1j * phi) / math.sqrt(2)
    return TimeBinAmplitudes(amplitudes)


def pair_state(phi: float, pump_interferometer: bool = True) -> TimeBinAmplitudes:
    """Creation-time amplitudes of a pair; bin 0 only without pump interferometer"""
    if pump_interferometer:
        return pump_state(phi)
    _require_finite("phi", phi)
    amplitudes = np.zeros(N_BINS, dtype=complex)
    amplitudes[0] = 1.0
    return TimeBinAmplitudes(amplitudes)


def analyzer_matrix(phase: float) -> np.ndarray:
    """
    Map of an unbalanced analyzer, indexed [bin_out, port, bin_in]

    Each input bin j leaves on bin j (short arm) or j + 1 (long arm, phase
    factor exp(i phase)) at either port, with amplitude 1/2 each.
    """
    _require_finite("phase", phase)
    delay = np.exp(1j * phase)
    matrix = np.zeros((N_BINS, N_PORTS, N_BINS), dtype=complex)
    for j in (0, 1):
        matrix[j, Port.MINUS, j] = 0.5
        matrix[j + 1, Port.MINUS, j] = -0.5 * delay
        matrix[j, Port.PLUS, j] = 0.5j
        matrix[j + 1, Port.PLUS, j] = 0.5j * delay
    return matrix


def direct_matrix() -> np.ndarray:
    """Without an analyzer every photon reaches the detector in its own bin"""
    matrix = np.zeros((N_BINS, N_PORTS, N_BINS), dtype=complex)
    for j in range(N_BINS):
        matrix[j, Port.MINUS, j] = 1.0
    return matrix


def analyzer_transform(state: TimeBinAmplitudes, phase: float) -> TimeBinAmplitudes:
    """
    Sends a single photon through an analyzer interferometer

    :param state: single photon amplitudes over bins 0 and 1
    :type state: TimeBinAmplitudes

    :param phase: relative phase of the analyzer
    :type phase: float

    :return: amplitudes indexed by (bin, port)
    :rtype: TimeBinAmplitudes

    """
    if state.amplitudes.shape != SINGLE_BIN_SHAPE:
        raise DataValidationError("analyzer_transform expects a single photon without port structure")
    if abs(state.amplitudes[N_BINS - 1]) > 0:
        raise DataValidationError("input occupies bin 2; a further delay would leave the three-bin model")
    return TimeBinAmplitudes(np.einsum("bpj,j->bp", analyzer_matrix(phase), state.amplitudes))


######################################################################
#  P A I R   D I S T R I B U T I O N S
######################################################################
def joint_amplitudes(
    ps: PhaseSetting, pump_interferometer: bool = True, analyzers: bool = True
) -> TimeBinAmplitudes:
    """Two-photon amplitudes after both analyzers"""
    creation = pair_state(ps.pump, pump_interferometer).amplitudes
    if analyzers:
        map_a, map_b = analyzer_matrix(ps.alice), analyzer_matrix(ps.bob)
    else:
        map_a = map_b = direct_matrix()
    return TimeBinAmplitudes(np.einsum("apj,bqj,j->apbq", map_a, map_b, creation))


def joint_detection_distribution(
    ps: PhaseSetting, pump_interferometer: bool = True, analyzers: bool = True
) -> np.ndarray:
    """
    Probability of every (bin_a, port_a, bin_b, port_b) outcome

    :param ps: the three interferometer phases
    :type ps: PhaseSetting

    :return: a (3, 2, 3, 2) table summing to 1
    :rtype: numpy.ndarray

    """
    table = joint_amplitudes(ps, pump_interferometer, analyzers).probabilities()
    total = table.sum()
    if abs(total - 1.0) > NORM_TOLERANCE:
        raise DataValidationError(f"joint distribution not normalized: {total}")
    return table


def phase_averaged_distribution(pump_interferometer: bool = True, analyzers: bool = True) -> np.ndarray:
    """Joint table averaged over theta"""
    # entries are first harmonics of theta, so four equally spaced phases average exactly
    tables = [
        joint_detection_distribution(PhaseSetting(pump=k * math.pi / 2), pump_interferometer, analyzers)
        for k in range(4)
    ]
    return np.mean(tables, axis=0)


def postselected_amplitude(ps: PhaseSetting) -> complex:
    """Unnormalized amplitude of the |0,1,0>_A- |0,1,0>_B- event"""
    return complex(np.exp(1j * ps.theta) - 1)


def peak_probabilities(table: np.ndarray) -> Dict[str, float]:
    """
    A-B- coincidence probability of the three peaks of the TAC histogram

    The start is Alice; a stop one bin earlier than the start lands in the
    left satellite.
    """
    minus = table[:, Port.MINUS, :, Port.MINUS]
    return {
        "central": float(np.trace(minus)),
        "left_satellite": float(np.trace(minus, offset=-1)),
        "right_satellite": float(np.trace(minus, offset=1)),
    }


def central_peak_probability(ps: PhaseSetting) -> float:
    """Two-fold central peak without postselection: (2 - cos theta)/16"""
    return peak_probabilities(joint_detection_distribution(ps))["central"]


######################################################################
#  F R I N G E S   A N D   V I S I B I L I T Y
######################################################################
def triple_coincidence_rate(theta: float, v: float) -> float:
    """
    Relative triple coincidence rate 1 - v cos(theta)

    :param theta: alice + bob - pump phase
    :param v: fringe visibility in [0, 1]
    """
    _require_finite("theta", theta)
    if not 0.0 <= v <= 1.0:
        raise DataValidationError(f"visibility {v} outside [0, 1]")
    return 1.0 - v * math.cos(theta)


def fringe_visibility(values: Sequence[float]) -> float:
    """(max - min)/(max + min) of a sampled fringe"""
    values = np.asarray(values, dtype=float)
    high, low = values.max(), values.min()
    if high + low <= 0:
        raise DataValidationError("fringe without counts has no visibility")
    return float((high - low) / (high + low))


def multiphoton_visibility(p_pair: float, intrinsic_v: float = 1.0) -> VisibilityPrediction:
    """
    Visibility of the triple coincidence fringe with double-pair emission

    Four-photon events are two independent pairs with Poissonian weight
    p_pair**2 / 2; six-photon events are neglected.

    :param p_pair: probability of one pair per pulse, in [0, 0.5)
    :param intrinsic_v: interferometer quality ceiling in [0, 1]
    """
    if not 0.0 <= p_pair < MAX_MULTIPHOTON_P:
        raise DataValidationError(f"p_pair {p_pair} outside [0, {MAX_MULTIPHOTON_P})")
    if not 0.0 <= intrinsic_v <= 1.0:
        raise DataValidationError(f"intrinsic visibility {intrinsic_v} outside [0, 1]")
    return VisibilityPrediction(
        p_pair=p_pair,
        v_exact=(1 + p_pair) / (1 + 2 * p_pair),
        v_linear=1 - p_pair,
        intrinsic_v=intrinsic_v,
        constant_coefficient=p_pair + 2 * p_pair**2,
        fringe_coefficient=p_pair + p_pair**2,
    )


def visibility_slope(p_pair: float) -> float:
    """dV/dp of the multiphoton visibility; -1 at p = 0"""
    multiphoton_visibility(p_pair)
    return -1.0 / (1 + 2 * p_pair) ** 2


def visibility_trend(p_values: Sequence[float], intrinsic_v: float = 1.0) -> Tuple[float, float]:
    """
    Slope and intercept of the least-squares line through the multiphoton
    visibility at p_values

    This is the line a power scan fits. Over a finite range it is flatter
    than the tangent -1 at p = 0: about -0.75 and 0.993 for seven points
    over [0.02, 0.14].
    """
    p_values = [float(p) for p in p_values]
    if len(set(p_values)) < 2:
        raise DataValidationError("a visibility trend needs at least two distinct values of p_pair")
    visibilities = [multiphoton_visibility(p, intrinsic_v).v_total for p in p_values]
    slope, intercept = np.polyfit(p_values, visibilities, 1)
    return float(slope), float(intercept)


def multiphoton_rates(theta: float, p_pair: float) -> MultiphotonRates:
    """Two-photon and four-photon contributions to the coincidence rate"""
    multiphoton_visibility(p_pair)
    cos_theta = math.cos(theta)
    r2 = p_pair * (1 - cos_theta) / 2
    p_four = p_pair**2 / 2
    # same-pair detections interfere fully, cross-pair ones not at all
    r4 = p_four * (2 * (1 - cos_theta) / 2 + 2 * 0.5)
    return MultiphotonRates(r2=r2, r4=r4, rc=r2 + r4)


def chsh_significance(v: float, sigma_v: float) -> float:
    """Standard deviations by which v exceeds the local bound 1/sqrt(2)"""
    if not sigma_v > 0:
        raise DataValidationError(f"sigma_v must be positive, got {sigma_v}")
    _require_finite("v", v)
    return (v - CHSH_THRESHOLD) / sigma_v


def _require_finite(name: str, value: float):
    if not isinstance(value, (int, float, np.floating, np.integer)) or not math.isfinite(value):
        raise DataValidationError(f"{name} must be a finite number, got {value!r}")
