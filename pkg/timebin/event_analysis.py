"""
Event Analysis

Turns event streams into measured quantities: start/stop time histograms,
window counts, postselected coincidences, fringe scans with their
sinusoidal fits, power scans and pair-probability estimates.

All time differences are reported relative to the nominal Bob minus Alice
delay of the configuration, so the central peak of every geometry is at 0.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Union

import numpy as np

from timebin import montecarlo_engine
from timebin.models import (
    DataValidationError,
    Detector,
    EventStream,
    ExperimentConfig,
    FitError,
    Origin,
    PhaseSetting,
)
from timebin.pair_statistics import PpairEstimate, estimate_ppair_sidepeak, estimate_ppair_standard

logger = logging.getLogger("flask.app")

DEFAULT_BIN_WIDTH = 50
DEFAULT_HALF_WIDTH = 300
MIN_SCAN_POINTS = 5
MIN_SCAN_SPAN = 1.5 * math.pi
MAX_POWER_SCAN_MU = 0.2


class AccidentalMode(Enum):
    """How the shifted window estimates accidental coincidences"""

    NOISE = "noise"
    SHIFTED = "shifted"


######################################################################
#  H I S T O G R A M S   A N D   W I N D O W S
######################################################################
@dataclass(frozen=True, eq=False)
class TacHistogram:
    """
    Start/stop histogram over [t_min, t_max) with half-open bins

    delays holds every recorded stop time minus start time, at most one per
    start, so window counts never depend on the binning.
    """

    bin_width: int
    t_min: int
    t_max: int
    counts: np.ndarray
    n_starts: int
    delays: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def edges(self) -> np.ndarray:
        """Bin edges, len(counts) + 1 values"""
        return self.t_min + self.bin_width * np.arange(self.counts.size + 1, dtype=np.int64)

    @property
    def centers(self) -> np.ndarray:
        """Bin centres in ps"""
        return self.edges[:-1] + self.bin_width / 2

    @property
    def total(self) -> int:
        """Number of recorded stops"""
        return int(self.counts.sum())

    @classmethod
    def from_delays(cls, delays, bin_width: int, t_min: int, t_max: int, n_starts: int) -> "TacHistogram":
        """Bins recorded delays, which must lie in [t_min, t_max)"""
        if not bin_width > 0:
            raise DataValidationError(f"bin_width must be positive, got {bin_width}")
        if not t_max > t_min:
            raise DataValidationError(f"empty histogram range [{t_min}, {t_max})")
        delays = np.asarray(delays, dtype=np.int64)
        if delays.size and (delays.min() < t_min or delays.max() >= t_max):
            raise DataValidationError("delays outside the histogram range")
        n_bins = math.ceil((t_max - t_min) / bin_width)
        counts = np.bincount((delays - t_min) // bin_width, minlength=n_bins).astype(np.int64)
        return cls(bin_width, t_min, t_max, counts, int(n_starts), delays)


class PeakWindow(NamedTuple):
    """Counting window [center - half_width, center + half_width)"""

    center: int
    half_width: int
    label: str

    @property
    def low(self) -> int:
        return self.center - self.half_width

    @property
    def high(self) -> int:
        return self.center + self.half_width


class PeakWindows(tuple):
    """A labeled set of pairwise disjoint windows"""

    def __new__(cls, windows: Iterable[PeakWindow]):
        windows = tuple(PeakWindow(*window) for window in windows)
        labels = [window.label for window in windows]
        if len(set(labels)) != len(labels):
            raise DataValidationError(f"duplicate window labels in {labels}")
        for window in windows:
            if not window.half_width > 0:
                raise DataValidationError(f"window {window.label} has non-positive half width")
        ordered = sorted(windows, key=lambda window: window.low)
        for lower, upper in zip(ordered, ordered[1:]):
            if upper.low < lower.high:
                raise DataValidationError(f"windows {lower.label} and {upper.label} overlap")
        return super().__new__(cls, windows)

    def __getitem__(self, key):
        if isinstance(key, str):
            for window in self:
                if window.label == key:
                    return window
            raise KeyError(key)
        return super().__getitem__(key)


def bell_windows(config: ExperimentConfig, half_width: int = DEFAULT_HALF_WIDTH) -> PeakWindows:
    """Central and satellite windows of the Bell geometry"""
    return PeakWindows(
        [
            PeakWindow(-config.bin_separation, half_width, "left_satellite"),
            PeakWindow(0, half_width, "central"),
            PeakWindow(config.bin_separation, half_width, "right_satellite"),
        ]
    )


def characterization_windows(config: ExperimentConfig, half_width: int = DEFAULT_HALF_WIDTH) -> PeakWindows:
    """Main and side-peak windows of the geometry without interferometers"""
    return PeakWindows(
        [
            PeakWindow(-config.pulse_period, half_width, "left_side"),
            PeakWindow(0, half_width, "main"),
            PeakWindow(config.pulse_period, half_width, "right_side"),
        ]
    )


def default_tac_range(config: ExperimentConfig) -> tuple:
    """
    Half a period around the central peak for the Bell geometry, one and a
    half periods otherwise so that both side peaks are covered
    """
    reach = config.pulse_period // 2 if config.is_bell else config.pulse_period + config.pulse_period // 2
    return (-reach, reach)


def build_tac_histogram(
    stream: EventStream, bin_width: int = DEFAULT_BIN_WIDTH, t_range: Optional[Sequence[int]] = None
) -> TacHistogram:
    """
    Histogram of the first Bob stop after every Alice start

    :param stream: the clicks of one run
    :param bin_width: bin width in ps
    :param t_range: (t_min, t_max) relative to the nominal twin delay

    """
    if not bin_width > 0:
        raise DataValidationError(f"bin_width must be positive, got {bin_width}")
    config = stream.config
    t_min, t_max = t_range if t_range is not None else default_tac_range(config)
    starts = stream.times(Detector.ALICE)
    stops = stream.times(Detector.BOB)
    if starts.size == 0 or stops.size == 0:
        return TacHistogram.from_delays([], bin_width, t_min, t_max, starts.size)
    origin = starts + config.relative_delay
    first = np.searchsorted(stops, origin + t_min, side="left")
    found = first < stops.size
    delays = stops[np.minimum(first, stops.size - 1)] - origin
    recorded = found & (delays < t_max)
    histogram = TacHistogram.from_delays(delays[recorded], bin_width, t_min, t_max, starts.size)
    logger.debug("TAC: %d stops for %d starts", histogram.total, histogram.n_starts)
    return histogram


def count_windows(hist: TacHistogram, windows: PeakWindows) -> Dict[str, int]:
    """
    Recorded stops per labeled window

    Windows are half-open, so a stop on a shared boundary belongs to the
    window that starts there.
    """
    windows = PeakWindows(windows)
    counts = {}
    for window in windows:
        if window.low < hist.t_min or window.high > hist.t_max:
            raise DataValidationError(
                f"window {window.label} [{window.low}, {window.high}) outside [{hist.t_min}, {hist.t_max})"
            )
        counts[window.label] = int(np.count_nonzero((hist.delays >= window.low) & (hist.delays < window.high)))
    return counts


def out_of_window_count(hist: TacHistogram, windows: PeakWindows) -> int:
    """Recorded stops that fall in none of the windows"""
    return hist.total - sum(count_windows(hist, windows).values())


def singles_rate(stream: EventStream, detector: Detector) -> float:
    """Clicks per second of one detector over the run"""
    duration = stream.config.duration
    if not duration > 0:
        raise DataValidationError("singles rate of a run without pulses")
    return float(np.count_nonzero(stream.mask(detector))) / duration


######################################################################
#  C O I N C I D E N C E S
######################################################################
class CoincidenceCounts(NamedTuple):
    """Coincidences in a window and the shifted-window accidental estimate"""

    count: int
    accidental: int

    @property
    def net(self) -> int:
        return self.count - self.accidental


def coincidence_counts(  # pylint: disable=too-many-arguments
    stream: EventStream,
    config: ExperimentConfig,
    window: PeakWindow,
    shift_periods: int = 0,
    alice_bin: Optional[int] = None,
    noise_only: bool = False,
) -> int:
    """
    Number of Alice starts with at least one Bob click in the window

    :param window: window relative to the nominal twin delay
    :param shift_periods: moves the window by whole pulse periods
    :param alice_bin: keeps only Alice clicks inside this time slot of the
        pump clock (pulse_index * period + bin * bin_separation)
    :param noise_only: counts only coincidences with a dark-count member

    """
    alice = stream.mask(Detector.ALICE)
    starts = stream.time[alice]
    alice_dark = stream.origin[alice] == Origin.DARK
    if alice_bin is not None:
        slot = starts - config.alice.delay - alice_bin * config.bin_separation + window.half_width
        in_slot = np.mod(slot, config.pulse_period) < 2 * window.half_width
        starts, alice_dark = starts[in_slot], alice_dark[in_slot]
    bob = stream.mask(Detector.BOB)
    stops = stream.time[bob]
    if starts.size == 0 or stops.size == 0:
        return 0
    origin = starts + config.relative_delay + shift_periods * config.pulse_period
    low = np.searchsorted(stops, origin + window.low, side="left")
    high = np.searchsorted(stops, origin + window.high, side="left")
    hit = high > low
    if noise_only:
        dark_before = np.concatenate([[0], np.cumsum(stream.origin[bob] == Origin.DARK)])
        hit &= alice_dark | (dark_before[high] > dark_before[low])
    return int(np.count_nonzero(hit))


def _window_and_accidentals(
    stream: EventStream,
    config: ExperimentConfig,
    window: PeakWindow,
    alice_bin: Optional[int],
    accidentals: AccidentalMode,
) -> CoincidenceCounts:
    accidentals = AccidentalMode(accidentals)
    count = coincidence_counts(stream, config, window, 0, alice_bin)
    accidental = coincidence_counts(
        stream, config, window, 1, alice_bin, noise_only=accidentals is AccidentalMode.NOISE
    )
    return CoincidenceCounts(count, accidental)


def triple_coincidence_counts(
    stream: EventStream,
    config: ExperimentConfig,
    central_window: Optional[PeakWindow] = None,
    accidentals: AccidentalMode = AccidentalMode.NOISE,
) -> CoincidenceCounts:
    """
    Central-window coincidences whose Alice click sits in the middle time bin

    These are the events where both photons left in the middle bin, the
    only ones that interfere. The accidental estimate applies the same
    window one pulse period later.
    """
    if not config.is_bell:
        raise DataValidationError("triple coincidences need the pump interferometer and both analyzers")
    window = central_window or bell_windows(config)["central"]
    return _window_and_accidentals(stream, config, window, 1, accidentals)


def twofold_fringe_counts(
    stream: EventStream,
    config: ExperimentConfig,
    central_window: Optional[PeakWindow] = None,
    accidentals: AccidentalMode = AccidentalMode.NOISE,
) -> CoincidenceCounts:
    """Central-window coincidences without postselecting Alice's time bin"""
    window = central_window or bell_windows(config)["central"]
    return _window_and_accidentals(stream, config, window, None, accidentals)


######################################################################
#  F R I N G E   F I T S
######################################################################
@dataclass(frozen=True)
class FringeSample:
    """Counts measured at one phase setting"""

    phase: float
    triple_count: float
    accidental_count: float
    n_pulses: int

    def __post_init__(self):
        if self.triple_count < 0 or self.accidental_count < 0:
            raise DataValidationError(f"negative counts at phase {self.phase}")


@dataclass(frozen=True)
class FringeScan:
    """A fringe scan, one sample per phase setting"""

    samples: List[FringeSample]
    config: Optional[ExperimentConfig] = None

    @property
    def phases(self) -> np.ndarray:
        return np.array([sample.phase for sample in self.samples], dtype=float)

    @property
    def triple_counts(self) -> np.ndarray:
        return np.array([sample.triple_count for sample in self.samples], dtype=float)

    @property
    def accidental_counts(self) -> np.ndarray:
        return np.array([sample.accidental_count for sample in self.samples], dtype=float)

    @property
    def span(self) -> float:
        phases = self.phases
        return float(phases.max() - phases.min()) if phases.size else 0.0


class SinusoidFit(NamedTuple):
    """Result of fitting A (1 - V cos(phase - offset))"""

    amplitude: float
    visibility: float
    phase_offset: float
    sigma_v: float


@dataclass(frozen=True)
class VisibilityFit:  # pylint: disable=too-many-instance-attributes
    """Raw and accidental-subtracted fringe visibilities"""

    raw_v: float
    net_v: float
    phase_offset: float
    amplitude: float
    sigma_v: float
    sigma_raw_v: float = math.nan
    success: bool = True
    message: str = ""

    @classmethod
    def failed(cls, message: str) -> "VisibilityFit":
        """A fit that did not produce a visibility"""
        return cls(math.nan, math.nan, math.nan, math.nan, math.nan, math.nan, False, message)

    def serialize(self) -> dict:
        return {
            "raw_v": self.raw_v,
            "net_v": self.net_v,
            "phase_offset": self.phase_offset,
            "amplitude": self.amplitude,
            "sigma_v": self.sigma_v,
            "sigma_raw_v": self.sigma_raw_v,
            "success": self.success,
            "message": self.message,
        }


def fit_sinusoid(phases, counts, variances=None) -> SinusoidFit:
    """
    Weighted linear least squares of counts against (1, cos, sin)

    With counts = a + b cos(phase) + c sin(phase), the fringe has amplitude a,
    visibility sqrt(b^2 + c^2) / a and offset atan2(-c, -b). Weights are
    1 / variance with the variance floored at 1; sigma_v is propagated from
    the parameter covariance.
    """
    phases = np.asarray(phases, dtype=float)
    counts = np.asarray(counts, dtype=float)
    variances = counts if variances is None else np.asarray(variances, dtype=float)
    if phases.size == 0 or np.ptp(phases) == 0:
        raise FitError("degenerate fringe scan: all phases are equal")
    weights = 1.0 / np.maximum(variances, 1.0)
    design = np.column_stack([np.ones_like(phases), np.cos(phases), np.sin(phases)])
    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise FitError("the phases do not resolve a sinusoid, at least three distinct phases are needed")
    normal = design.T @ (design * weights[:, None])
    try:
        covariance = np.linalg.inv(normal)
    except np.linalg.LinAlgError as error:
        raise FitError("singular fringe fit, the phases do not resolve a sinusoid") from error
    a, b, c = covariance @ (design.T @ (weights * counts))
    if not a > 0:
        raise FitError(f"non-positive fringe amplitude {a}")
    modulation = math.hypot(b, c)
    visibility = modulation / a
    if modulation > 0:
        gradient = np.array([-visibility / a, b / (a * modulation), c / (a * modulation)])
    else:
        gradient = np.array([0.0, 1.0 / a, 0.0])
    sigma_v = math.sqrt(max(float(gradient @ covariance @ gradient), 0.0))
    return SinusoidFit(float(a), visibility, math.atan2(-c, -b), sigma_v)


def fit_fringe(scan: FringeScan) -> VisibilityFit:
    """
    Fits the raw counts and the accidental-subtracted counts of a scan

    Raises FitError for a scan whose phases are all equal; any other fit
    failure is returned as a VisibilityFit with success False.
    """
    phases = scan.phases
    if phases.size == 0 or np.ptp(phases) == 0:
        raise FitError("degenerate fringe scan: all phases are equal")
    if phases.size < MIN_SCAN_POINTS or scan.span < MIN_SCAN_SPAN:
        logger.warning("Fringe scan with %d points over %.2f rad is poorly conditioned", phases.size, scan.span)
    triple = scan.triple_counts
    accidental = scan.accidental_counts
    try:
        raw = fit_sinusoid(phases, triple)
        net = fit_sinusoid(phases, triple - accidental, triple + accidental)
    except FitError as error:
        logger.error("Fringe fit failed: %s", error)
        return VisibilityFit.failed(str(error))
    return VisibilityFit(
        raw_v=raw.visibility,
        net_v=net.visibility,
        phase_offset=net.phase_offset,
        amplitude=net.amplitude,
        sigma_v=net.sigma_v,
        sigma_raw_v=raw.sigma_v,
    )


######################################################################
#  S C A N S
######################################################################
def scan_phases(points: int) -> np.ndarray:
    """points equally spaced phases over one full period"""
    if points < 1:
        raise DataValidationError(f"a scan needs at least one point, got {points}")
    return 2 * math.pi * np.arange(points) / points


def derived_seed(seed: int, index: int) -> int:
    """Independent seed for the index-th run of a scan"""
    return int(np.random.SeedSequence([seed, index]).generate_state(1, dtype=np.uint64)[0])


def with_theta(config: ExperimentConfig, theta: float) -> ExperimentConfig:
    """Sets Alice's analyzer so that the fringe phase equals theta"""
    phases = config.phases
    return replace(config, phases=PhaseSetting(phases.pump, theta + phases.pump - phases.bob, phases.bob))


def run_fringe_scan(  # pylint: disable=too-many-arguments
    base_config: ExperimentConfig,
    phases: Sequence[float],
    postselect: bool = True,
    chunks: int = 1,
    accidentals: AccidentalMode = AccidentalMode.NOISE,
) -> FringeScan:
    """
    Simulates one run per phase and counts its coincidences

    Run k uses a seed derived from (base seed, k), so scans are reproducible
    and every point is statistically independent.
    """
    return run_fringe_scans(base_config, phases, (postselect,), chunks, accidentals)[0]


def run_fringe_scans(
    base_config: ExperimentConfig,
    phases: Sequence[float],
    postselect_modes: Sequence[bool] = (True, False),
    chunks: int = 1,
    accidentals: AccidentalMode = AccidentalMode.NOISE,
) -> List[FringeScan]:
    """Like run_fringe_scan, counting the same runs once per postselection mode"""
    counters = [triple_coincidence_counts if mode else twofold_fringe_counts for mode in postselect_modes]
    samples = [[] for _ in counters]
    for index, theta in enumerate(phases):
        config = replace(with_theta(base_config, float(theta)), seed=derived_seed(base_config.seed, index))
        stream = montecarlo_engine.simulate_run(config, chunks)
        for counter, column in zip(counters, samples):
            counts = counter(stream, config, accidentals=accidentals)
            logger.info("theta=%.4f: %d coincidences, %d accidentals", theta, counts.count, counts.accidental)
            column.append(FringeSample(float(theta), counts.count, counts.accidental, config.n_pulses))
    return [FringeScan(column, base_config) for column in samples]


class PowerScanPoint(NamedTuple):
    mu: float
    net_v: float
    sigma_v: float
    raw_v: float


@dataclass(frozen=True)
class PowerScan:
    """Fitted visibility versus mean pairs per pulse, with a linear fit"""

    points: List[PowerScanPoint]
    slope: float
    intercept: float


def power_scan_visibility(
    mu_list: Sequence[float], base_config: ExperimentConfig, points: int = 12, chunks: int = 1
) -> PowerScan:
    """
    Net visibility of a fringe scan at every mu, and its linear trend

    Raises FitError when a scan cannot be fitted.
    """
    if len(mu_list) < 2:
        raise DataValidationError("a power scan needs at least two values of mu")
    rows = []
    for index, mu in enumerate(mu_list):
        if not 0 < mu <= MAX_POWER_SCAN_MU:
            raise DataValidationError(f"mu {mu} outside (0, {MAX_POWER_SCAN_MU}]")
        config = replace(base_config, mu=float(mu), seed=derived_seed(base_config.seed, 1000 + index))
        fit = fit_fringe(run_fringe_scan(config, scan_phases(points), chunks=chunks))
        if not fit.success:
            raise FitError(f"fringe fit failed at mu={mu}: {fit.message}")
        rows.append(PowerScanPoint(float(mu), fit.net_v, fit.sigma_v, fit.raw_v))
    slope, intercept = np.polyfit([row.mu for row in rows], [row.net_v for row in rows], 1)
    logger.info("Power scan: slope %.4f, intercept %.4f", slope, intercept)
    return PowerScan(rows, float(slope), float(intercept))


@dataclass(frozen=True)
class SidePeakAnalysis:
    """Window counts of a characterization run and the resulting estimates"""

    counts: Dict[str, int]
    raw: PpairEstimate
    corrected: PpairEstimate


def analyze_side_peaks(
    hist: TacHistogram, config: ExperimentConfig, half_width: int = DEFAULT_HALF_WIDTH
) -> SidePeakAnalysis:
    """
    Pair probability from the right side peak over the main peak

    Starts preempted by a left side stop are lost for both peaks alike, so
    the ratio is unaffected.
    """
    counts = count_windows(hist, characterization_windows(config, half_width))
    raw = estimate_ppair_sidepeak(counts["main"], counts["right_side"])
    corrected = estimate_ppair_sidepeak(counts["main"], counts["right_side"], config.bob.channel)
    return SidePeakAnalysis(counts, raw, corrected)


class PairRatePoint(NamedTuple):
    mu: float
    singles_rate: float
    sidepeak_p: float
    sidepeak_relative_uncertainty: float
    standard_p: float


def characterization_config(config: ExperimentConfig) -> ExperimentConfig:
    """The same experiment with all interferometers removed"""
    return replace(config, pump_interferometer_enabled=False, analyzers_enabled=False)


def pair_rate_scan(
    mu_list: Sequence[float], base_config: ExperimentConfig, chunks: int = 1, bin_width: int = DEFAULT_BIN_WIDTH
) -> List[PairRatePoint]:
    """Side-peak and singles-rate estimates of the pair probability versus mu"""
    rows = []
    alice = base_config.alice
    for index, mu in enumerate(mu_list):
        config = characterization_config(
            replace(base_config, mu=float(mu), seed=derived_seed(base_config.seed, 2000 + index))
        )
        stream = montecarlo_engine.simulate_run(config, chunks)
        rate = singles_rate(stream, Detector.ALICE)
        side = analyze_side_peaks(build_tac_histogram(stream, bin_width), config).corrected
        photon_rate = rate - alice.dark_rate_hz
        if photon_rate > 0:
            standard = estimate_ppair_standard(
                photon_rate, alice.channel.t * alice.channel.p_filter, alice.channel.eta, config.pulse_rate
            ).value
        else:
            standard = math.nan
        rows.append(PairRatePoint(float(mu), rate, side.value, side.relative_uncertainty, standard))
    return rows


######################################################################
#  E X P O R T S
######################################################################
def _header(kind: str, config: Optional[ExperimentConfig], columns: str) -> str:
    lines = [f"timebin-lab {kind}"]
    if config is not None:
        lines.append(f"config: {config.to_json()}")
    lines.append(f"columns: {columns}")
    return "\n".join(lines)


def write_table(path, kind: str, config, columns: str, rows, fmt) -> Path:  # pylint: disable=too-many-arguments
    """Writes a comma-separated table under a `#` header echoing the config"""
    path = Path(path)
    table = np.asarray(rows, dtype=float).reshape(-1, len(columns.split(",")))
    np.savetxt(path, table, fmt=fmt, delimiter=",", header=_header(kind, config, columns), comments="# ")
    logger.info("Wrote %s to %s", kind, path)
    return path


def write_histogram_csv(hist: TacHistogram, config: ExperimentConfig, path: Union[str, Path]) -> Path:
    """Writes (bin_center_ps, count)"""
    rows = np.column_stack([hist.centers, hist.counts])
    return write_table(path, "tac histogram", config, "bin_center_ps,count", rows, ["%.1f", "%d"])


def write_scan_csv(scan: FringeScan, path: Union[str, Path]) -> Path:
    """Writes (phase_rad, triple_count, accidental_count)"""
    rows = np.column_stack([scan.phases, scan.triple_counts, scan.accidental_counts])
    return write_table(
        path, "fringe scan", scan.config, "phase_rad,triple_count,accidental_count", rows, ["%.6f", "%d", "%d"]
    )


def write_power_scan_csv(scan: PowerScan, config: ExperimentConfig, path: Union[str, Path]) -> Path:
    """Writes (mu, net_v, sigma_v)"""
    rows = [(point.mu, point.net_v, point.sigma_v) for point in scan.points]
    return write_table(path, "power scan", config, "mu,net_v,sigma_v", rows, "%.6f")


def write_pair_rate_csv(rows: Sequence[PairRatePoint], config: ExperimentConfig, path: Union[str, Path]) -> Path:
    """Writes (mu, singles_rate_hz, sidepeak_p, sidepeak_rel_uncertainty, standard_p)"""
    return write_table(
        path,
        "pair rate scan",
        config,
        "mu,singles_rate_hz,sidepeak_p,sidepeak_rel_uncertainty,standard_p",
        [tuple(row) for row in rows],
        ["%.6f", "%.3f", "%.6g", "%.6g", "%.6g"],
    )


def read_config_echo(path: Union[str, Path]) -> ExperimentConfig:
    """Re-parses the configuration embedded in an exported file"""
    path = Path(path)
    with path.open(encoding="utf-8") as handle:
        for line in handle:
            if not line.startswith("#"):
                break
            text = line.lstrip("#").strip()
            if text.startswith("config:"):
                return ExperimentConfig.from_json(text[len("config:"):].strip())
    raise DataValidationError(f"{path}: no config echo in the header")
