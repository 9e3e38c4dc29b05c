"""
Monte Carlo Engine

Generates time-stamped clicks by simulating the optical chain pulse by
pulse: pair numbers, the joint time-bin/port outcome of every pair, filters,
coupling losses, detector efficiency, dark counts and Bob's gate.

Pulses are grouped in fixed blocks of BLOCK_PULSES. Every block draws from
its own generator seeded with SeedSequence(seed, spawn_key=(block,)), and
gating and dead time are applied once all blocks are merged, so a run is
bit-identical for any number of chunks.
"""
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, NamedTuple, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed

from timebin.analytic_model import PAIR_SHAPE, joint_detection_distribution, phase_averaged_distribution
from timebin.models import (
    DataValidationError,
    Detector,
    DetectorParams,
    EventStream,
    ExperimentConfig,
    Origin,
    PairMode,
    PhaseSetting,
    Port,
)

logger = logging.getLogger("flask.app")

BLOCK_PULSES = 1 << 16
MAX_MU = 0.5
NO_BIN = -1
STREAM_COLUMNS = "time_ps detector origin pulse_index bin_index"


######################################################################
#  D O M A I N   T Y P E S
######################################################################
@dataclass(frozen=True, eq=False)
class PairOutcomes:
    """Every pair of a range of pulses with its sampled bins and ports"""

    first_pulse: int
    pairs_per_pulse: np.ndarray
    pulse_index: np.ndarray
    bin_a: np.ndarray
    port_a: np.ndarray
    bin_b: np.ndarray
    port_b: np.ndarray

    @property
    def n_pulses(self) -> int:
        """Number of pulses covered"""
        return int(self.pairs_per_pulse.size)

    @property
    def n_pairs(self) -> int:
        """Number of pairs created"""
        return int(self.pulse_index.size)


class _Clicks(NamedTuple):
    time: np.ndarray
    origin: np.ndarray
    pulse_index: np.ndarray
    bin_index: np.ndarray

    def select(self, keep: np.ndarray) -> "_Clicks":
        return _Clicks(*(column[keep] for column in self))

    @classmethod
    def concat(cls, parts: Sequence["_Clicks"]) -> "_Clicks":
        return cls(*(np.concatenate(columns) for columns in zip(*parts)))


######################################################################
#  R A N D O M   S T R E A M S
######################################################################
def block_rng(seed: int, block: int) -> np.random.Generator:
    """Independent generator of one pulse block"""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(block,)))


######################################################################
#  S A M P L E R S
######################################################################
def sample_pairs_per_pulse(mu: float, rng: np.random.Generator, size=None):
    """
    Poissonian number of pairs created by one pulse (or by size pulses)

    :param mu: mean pairs per pulse, in [0, 0.5)
    :param rng: the random generator
    """
    if not 0.0 <= mu < MAX_MU:
        raise DataValidationError(f"mu {mu} outside [0, {MAX_MU})")
    counts = rng.poisson(mu, size)
    if size is None:
        return int(counts)
    return counts.astype(np.int16)


def outcome_table(
    ps: PhaseSetting,
    pump_interferometer: bool = True,
    analyzers: bool = True,
    intrinsic_visibility: float = 1.0,
) -> np.ndarray:
    """Flat 36-entry outcome distribution used by the sampler"""
    if not 0.0 <= intrinsic_visibility <= 1.0:
        raise DataValidationError(f"intrinsic visibility {intrinsic_visibility} outside [0, 1]")
    table = joint_detection_distribution(ps, pump_interferometer, analyzers)
    if intrinsic_visibility < 1.0:
        # phase randomized with probability 1 - V
        averaged = phase_averaged_distribution(pump_interferometer, analyzers)
        table = intrinsic_visibility * table + (1.0 - intrinsic_visibility) * averaged
    flat = table.ravel()
    return flat / flat.sum()


def sample_pair_outcome(
    ps: PhaseSetting,
    rng: np.random.Generator,
    size=None,
    *,
    pump_interferometer: bool = True,
    analyzers: bool = True,
    intrinsic_visibility: float = 1.0,
):
    """
    Draws (bin_a, port_a, bin_b, port_b) from the joint detection table

    Each pair is drawn independently of any other pair of the same pulse.
    Returns a tuple of ints, or a tuple of arrays when size is given.
    """
    table = outcome_table(ps, pump_interferometer, analyzers, intrinsic_visibility)
    index = rng.choice(table.size, size=size, p=table)
    outcome = np.unravel_index(index, PAIR_SHAPE)
    if size is None:
        return tuple(int(value) for value in outcome)
    return tuple(value.astype(np.int8) for value in outcome)


def sample_block_outcomes(
    config: ExperimentConfig, rng: np.random.Generator, first_pulse: int, n_pulses: int
) -> PairOutcomes:
    """Pair numbers and pair outcomes of n_pulses consecutive pulses"""
    if config.pair_mode is PairMode.SINGLE:
        counts = np.ones(n_pulses, dtype=np.int16)
    else:
        counts = sample_pairs_per_pulse(config.mu, rng, n_pulses)
    pulse_index = first_pulse + np.repeat(np.arange(n_pulses, dtype=np.int64), counts)
    bin_a, port_a, bin_b, port_b = sample_pair_outcome(
        config.phases,
        rng,
        pulse_index.size,
        pump_interferometer=config.pump_interferometer_enabled,
        analyzers=config.analyzers_enabled,
        intrinsic_visibility=config.intrinsic_visibility,
    )
    return PairOutcomes(first_pulse, counts, pulse_index, bin_a, port_a, bin_b, port_b)


######################################################################
#  C H A N N E L   A N D   D E T E C T O R S
######################################################################
def twin_failed_filter_probability(config: ExperimentConfig) -> float:
    """
    Bob's filter pass probability when Alice's twin was blocked

    Chosen so that Bob's marginal pass probability stays bob.p_filter.
    """
    p_a = config.alice.channel.p_filter
    p_b = config.bob.channel.p_filter
    if p_a >= 1.0:
        return p_b
    return float(np.clip((p_b - config.bob.channel.p_filter_given_twin * p_a) / (1.0 - p_a), 0.0, 1.0))


def apply_channel_and_detectors(
    outcomes: PairOutcomes, config: ExperimentConfig, rng: np.random.Generator
) -> EventStream:
    """
    Turns pair outcomes into the clicks of both detectors

    Losses and filters thin the photons, dark counts are added, Bob keeps
    only clicks inside a gate opened by an Alice click when gated.
    """
    raw = _detect(outcomes, config, rng, last_block=True)
    return _finalize([raw], config, outcomes.pairs_per_pulse)


def simulate_run(config: ExperimentConfig, chunks: int = 1) -> EventStream:
    """
    Simulates a complete run

    :param config: the experiment; validated before anything is drawn
    :param chunks: number of joblib workers sharing the pulse blocks

    :return: the clicks of both detectors, identical for any chunk count
    :rtype: EventStream

    """
    config.validate()
    if config.n_pulses == 0:
        logger.info("Run with zero pulses, returning an empty stream")
        return EventStream.empty(config)
    n_blocks = math.ceil(config.n_pulses / BLOCK_PULSES)
    chunks = max(1, min(int(chunks), n_blocks))
    groups = [group.tolist() for group in np.array_split(np.arange(n_blocks), chunks)]
    logger.info(
        "Simulating %d pulses (mu=%g, theta=%.4f) in %d blocks over %d chunk(s)",
        config.n_pulses,
        config.mu,
        config.phases.theta,
        n_blocks,
        chunks,
    )
    results = Parallel(n_jobs=chunks, prefer="threads")(
        delayed(_simulate_blocks)(config, group) for group in groups
    )
    blocks = [block for chunk in results for block in chunk]
    pairs_per_pulse = np.concatenate([pairs for pairs, _ in blocks])
    stream = _finalize([raw for _, raw in blocks], config, pairs_per_pulse)
    logger.info("Run finished with %d clicks from %d pairs", len(stream), int(pairs_per_pulse.sum()))
    return stream


######################################################################
#  E V E N T   S T R E A M   F I L E S
######################################################################
def write_event_stream(stream: EventStream, path: Union[str, Path]) -> Path:
    """Writes one click per line, `time_ps detector origin pulse_index bin_index`"""
    path = Path(path)
    lines = [
        "# timebin-lab event stream",
        f"# config: {stream.config.to_json()}",
        f"# columns: {STREAM_COLUMNS}",
    ]
    for event in stream.events():
        bin_text = "-" if event.bin_index is None else str(event.bin_index)
        lines.append(
            f"{event.time} {event.detector.name.lower()} {event.origin.name.lower()} {event.pulse_index} {bin_text}"
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.info("Wrote %d events to %s", len(stream), path)
    return path


def read_event_stream(path: Union[str, Path]) -> EventStream:
    """Reads a file written by write_event_stream"""
    path = Path(path)
    config = None
    rows = []
    with path.open(encoding="utf-8") as handle:
        for number, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line.startswith("# config:"):
                    config = ExperimentConfig.from_json(line[len("# config:"):].strip())
                continue
            try:
                time, detector, origin, pulse, bin_text = line.split()
                rows.append(
                    (
                        int(time),
                        Detector[detector.upper()],
                        Origin[origin.upper()],
                        int(pulse),
                        NO_BIN if bin_text == "-" else int(bin_text),
                    )
                )
            except (KeyError, ValueError) as error:
                raise DataValidationError(f"{path}:{number}: invalid event line {line!r}") from error
    if config is None:
        raise DataValidationError(f"{path}: missing '# config:' header")
    columns = list(zip(*rows)) if rows else [(), (), (), (), ()]
    return EventStream(
        config=config,
        time=np.array(columns[0], dtype=np.int64),
        detector=np.array(columns[1], dtype=np.int8),
        origin=np.array(columns[2], dtype=np.int8),
        pulse_index=np.array(columns[3], dtype=np.int64),
        bin_index=np.array(columns[4], dtype=np.int8),
    )


######################################################################
#  U T I L I T Y   F U N C T I O N S
######################################################################
def _simulate_blocks(config: ExperimentConfig, blocks: List[int]) -> List[Tuple[np.ndarray, tuple]]:
    results = []
    for block in blocks:
        rng = block_rng(config.seed, block)
        first = block * BLOCK_PULSES
        count = min(BLOCK_PULSES, config.n_pulses - first)
        outcomes = sample_block_outcomes(config, rng, first, count)
        raw = _detect(outcomes, config, rng, last_block=first + count == config.n_pulses)
        logger.debug("Block %d: %d pairs", block, outcomes.n_pairs)
        results.append((outcomes.pairs_per_pulse, raw))
    return results


def _detect(
    outcomes: PairOutcomes, config: ExperimentConfig, rng: np.random.Generator, last_block: bool
) -> Tuple[_Clicks, _Clicks]:
    """Photon and dark clicks of both detectors before thresholding and gating"""
    alice, bob = config.alice, config.bob
    n_pairs = outcomes.n_pairs
    passed_a = rng.random(n_pairs) < alice.channel.p_filter
    arrived_a = passed_a & (rng.random(n_pairs) < alice.channel.t * alice.channel.eta)
    p_filter_b = np.where(passed_a, bob.channel.p_filter_given_twin, twin_failed_filter_probability(config))
    passed_b = rng.random(n_pairs) < p_filter_b
    arrived_b = passed_b & (rng.random(n_pairs) < bob.channel.t * bob.channel.eta)
    # only the minus ports carry detectors
    clicked_a = arrived_a & (outcomes.port_a == Port.MINUS)
    clicked_b = arrived_b & (outcomes.port_b == Port.MINUS)

    start = outcomes.first_pulse * config.pulse_period
    stop = (outcomes.first_pulse + outcomes.n_pulses) * config.pulse_period
    bob_stop = stop
    if last_block and bob.gated:
        bob_stop += config.bob_gate_offset + bob.gate_width
    alice_clicks = _Clicks.concat(
        [
            _photon_clicks(outcomes, clicked_a, outcomes.bin_a, alice, config, rng),
            _dark_clicks(alice.dark_rate_hz, start, stop, config.pulse_period, rng),
        ]
    )
    bob_clicks = _Clicks.concat(
        [
            _photon_clicks(outcomes, clicked_b, outcomes.bin_b, bob, config, rng),
            _dark_clicks(bob.dark_rate_hz, start, bob_stop, config.pulse_period, rng),
        ]
    )
    return alice_clicks, bob_clicks


def _photon_clicks(
    outcomes: PairOutcomes,
    clicked: np.ndarray,
    bins: np.ndarray,
    detector: DetectorParams,
    config: ExperimentConfig,
    rng: np.random.Generator,
) -> _Clicks:
    pulses = outcomes.pulse_index[clicked]
    bin_index = bins[clicked].astype(np.int8)
    times = pulses * config.pulse_period + bin_index.astype(np.int64) * config.bin_separation + detector.delay
    if detector.jitter > 0:
        times = np.maximum(times + np.rint(rng.normal(0.0, detector.jitter, times.size)).astype(np.int64), 0)
    origin = np.full(times.size, Origin.PHOTON, dtype=np.int8)
    return _Clicks(times.astype(np.int64), origin, pulses.astype(np.int64), bin_index)


def _dark_clicks(rate_hz: float, start: int, stop: int, period: int, rng: np.random.Generator) -> _Clicks:
    expected = rate_hz * (stop - start) * 1e-12
    count = rng.poisson(expected) if expected > 0 else 0
    times = np.sort(rng.integers(start, stop, count, dtype=np.int64)) if count else np.zeros(0, dtype=np.int64)
    return _Clicks(
        times,
        np.full(times.size, Origin.DARK, dtype=np.int8),
        times // period,
        np.full(times.size, NO_BIN, dtype=np.int8),
    )


def _sorted_threshold(clicks: _Clicks) -> _Clicks:
    """Sorts by time; photons at the same picosecond make a single click"""
    order = np.lexsort((clicks.origin, clicks.time))
    clicks = clicks.select(order)
    keep = np.ones(clicks.time.size, dtype=bool)
    keep[1:] = np.diff(clicks.time) != 0
    return clicks.select(keep)


def _apply_gate(clicks: _Clicks, triggers: np.ndarray, offset: int, width: int) -> _Clicks:
    """Keeps clicks inside any [trigger + offset, trigger + offset + width)"""
    if triggers.size == 0 or width <= 0:
        return clicks.select(np.zeros(clicks.time.size, dtype=bool))
    opens = triggers + offset
    latest = np.searchsorted(opens, clicks.time, side="right") - 1
    inside = (latest >= 0) & (clicks.time < opens[np.maximum(latest, 0)] + width)
    return clicks.select(inside)


def _apply_dead_time(clicks: _Clicks, dead_time: int) -> _Clicks:
    if dead_time <= 0 or clicks.time.size == 0:
        return clicks
    keep = np.zeros(clicks.time.size, dtype=bool)
    last = None
    for index, time in enumerate(clicks.time.tolist()):
        if last is None or time - last >= dead_time:
            keep[index] = True
            last = time
    return clicks.select(keep)


def _finalize(
    raw_blocks: Sequence[Tuple[_Clicks, _Clicks]], config: ExperimentConfig, pairs_per_pulse: np.ndarray
) -> EventStream:
    alice = _sorted_threshold(_Clicks.concat([alice for alice, _ in raw_blocks]))
    bob = _sorted_threshold(_Clicks.concat([bob for _, bob in raw_blocks]))
    alice = _apply_dead_time(alice, config.alice.dead_time)
    if config.bob.gated:
        bob = _apply_gate(bob, alice.time, config.bob_gate_offset, config.bob.gate_width)
    bob = _apply_dead_time(bob, config.bob.dead_time)

    detector = np.concatenate(
        [np.full(alice.time.size, Detector.ALICE, dtype=np.int8), np.full(bob.time.size, Detector.BOB, dtype=np.int8)]
    )
    merged = _Clicks.concat([alice, bob])
    order = np.lexsort((detector, merged.time))
    return EventStream(
        config=config,
        time=merged.time[order],
        detector=detector[order],
        origin=merged.origin[order],
        pulse_index=merged.pulse_index[order],
        bin_index=merged.bin_index[order],
        pairs_per_pulse=pairs_per_pulse,
    )
