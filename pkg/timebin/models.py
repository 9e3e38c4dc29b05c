# Copyright 2016, 2023 John Rofrano. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the 'License');
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an 'AS IS' BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""
Models for the Time-Bin Laboratory

All of the shared domain types are stored in this module

Models
------
PhaseSetting - relative phases of the pump, Alice and Bob interferometers
ChannelParams - filter, coupling/transmission and detector efficiency of one arm
DetectorParams - a ChannelParams plus dark counts, gating and timing of one detector
ExperimentConfig - every physical parameter of a simulated run plus its RNG seed
DetectionEvent - one detector click
EventStream - the time ordered clicks of a run, stored column-wise

Attributes of ExperimentConfig:
-------------------------------
pulse_period (int) - laser pulse period in picoseconds
bin_separation (int) - interferometer path difference in picoseconds
n_pulses (int) - number of laser pulses to simulate
mu (float) - mean number of pairs per pulse
pair_mode (PairMode) - Poissonian pair numbers or exactly one pair per pulse

"""
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum
from typing import Iterator, List, NamedTuple, Optional

import numpy as np

logger = logging.getLogger("flask.app")

DEFAULT_SEED = 20020101
MAX_SEED = 2**64 - 1


class DataValidationError(Exception):
    """Used for any invalid argument or invalid configuration value"""


class FitError(DataValidationError):
    """Used when a fringe fit cannot produce a visibility"""


class Port(IntEnum):
    """Output port of an analyzer interferometer"""

    MINUS = 0
    PLUS = 1


class Detector(IntEnum):
    """The two detectors of the experiment"""

    ALICE = 0
    BOB = 1


class Origin(IntEnum):
    """What produced a click"""

    PHOTON = 0
    DARK = 1


class PairMode(Enum):
    """How many pairs a pulse creates"""

    POISSON = "poisson"
    SINGLE = "single"


class Diagnostic(NamedTuple):
    """A violated configuration rule"""

    field: str
    value: object
    rule: str

    def __str__(self):
        return f"{self.field}={self.value!r}: {self.rule}"


######################################################################
#  P H A S E   S E T T I N G
######################################################################
@dataclass(frozen=True)
class PhaseSetting:
    """Relative phases (radians) of the pump, Alice and Bob interferometers"""

    pump: float = 0.0
    alice: float = 0.0
    bob: float = 0.0

    @property
    def theta(self) -> float:
        """The phase that controls the fringe: alice + bob - pump"""
        return self.alice + self.bob - self.pump

    @property
    def display_theta(self) -> float:
        """theta reduced to (-pi, pi]"""
        reduced = math.remainder(self.theta, 2 * math.pi)
        return math.pi if reduced == -math.pi else reduced

    def serialize(self) -> dict:
        """Serializes a PhaseSetting into a dictionary"""
        return {"pump": self.pump, "alice": self.alice, "bob": self.bob}

    @classmethod
    def deserialize(cls, data: dict) -> "PhaseSetting":
        """Creates a PhaseSetting from a dictionary"""
        values = _known_keys("phases", data, ("pump", "alice", "bob"))
        return cls(**{key: _as_float(f"phases.{key}", value) for key, value in values.items()})


######################################################################
#  C H A N N E L   A N D   D E T E C T O R
######################################################################
@dataclass(frozen=True)
class ChannelParams:
    """
    Loss budget of one arm of the experiment

    t is the coupling and transmission probability, eta the detector quantum
    efficiency, p_filter the probability that a photon passes the interference
    filter and p_filter_given_twin the probability that it passes knowing its
    twin passed the filter on the other side.
    """

    t: float = 1.0
    eta: float = 1.0
    p_filter: float = 1.0
    p_filter_given_twin: float = 1.0

    @property
    def detection_probability(self) -> float:
        """Probability that a photon of this arm produces a click"""
        return self.p_filter * self.t * self.eta

    def diagnostics(self, prefix: str = "channel") -> List[Diagnostic]:
        """Lists every field outside [0, 1]"""
        problems = []
        for name in ("t", "eta", "p_filter", "p_filter_given_twin"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and 0.0 <= value <= 1.0):
                problems.append(Diagnostic(f"{prefix}.{name}", value, "must be a probability in [0, 1]"))
        return problems

    def validate(self, prefix: str = "channel") -> "ChannelParams":
        """Raises a DataValidationError naming the first invalid field"""
        _raise_first(self.diagnostics(prefix))
        return self


@dataclass(frozen=True)
class DetectorParams:  # pylint: disable=too-many-instance-attributes
    """
    One detector and the arm that feeds it

    dark_rate is in Hz for a free-running detector and a probability per ns
    for a gated one. Times are integer picoseconds; gate_offset None means the
    gate is centred on the twin photon.
    """

    channel: ChannelParams = field(default_factory=ChannelParams)
    dark_rate: float = 0.0
    gated: bool = False
    gate_offset: Optional[int] = None
    gate_width: int = 50_000
    delay: int = 0
    jitter: float = 0.0
    dead_time: int = 0

    @property
    def dark_rate_hz(self) -> float:
        """Dark count rate in counts per second"""
        return self.dark_rate * 1e9 if self.gated else self.dark_rate

    def diagnostics(self, prefix: str) -> List[Diagnostic]:
        """Lists every violated detector rule"""
        problems = self.channel.diagnostics(prefix)
        if not self.dark_rate >= 0:
            problems.append(Diagnostic(f"{prefix}.dark_rate", self.dark_rate, "must be non-negative"))
        elif self.gated and self.dark_rate > 1:
            problems.append(
                Diagnostic(
                    f"{prefix}.dark_rate", self.dark_rate, "a gated dark rate is a probability per ns, at most 1"
                )
            )
        for name in ("gate_width", "delay", "jitter", "dead_time"):
            value = getattr(self, name)
            if not value >= 0:
                problems.append(Diagnostic(f"{prefix}.{name}", value, "must be non-negative"))
        if self.gate_offset is not None and self.gate_offset < 0:
            problems.append(
                Diagnostic(f"{prefix}.gate_offset", self.gate_offset, "gate cannot open before the triggering click")
            )
        return problems

    def serialize(self) -> dict:
        """Serializes a DetectorParams into a flat dictionary"""
        return {
            "t": self.channel.t,
            "eta": self.channel.eta,
            "p_filter": self.channel.p_filter,
            "p_filter_given_twin": self.channel.p_filter_given_twin,
            "dark_rate": self.dark_rate,
            "gated": self.gated,
            "gate_offset": self.gate_offset,
            "gate_width": self.gate_width,
            "delay": self.delay,
            "jitter": self.jitter,
            "dead_time": self.dead_time,
        }

    @classmethod
    def deserialize(cls, data: dict, prefix: str, base: "DetectorParams") -> "DetectorParams":
        """
        Deserializes a DetectorParams from a flat dictionary

        Args:
            data (dict): the section of the configuration file
            prefix (str): section name used in error messages
            base (DetectorParams): values used for missing keys
        """
        channel_keys = ("t", "eta", "p_filter", "p_filter_given_twin")
        detector_keys = ("dark_rate", "gated", "gate_offset", "gate_width", "delay", "jitter", "dead_time")
        values = _known_keys(prefix, data, channel_keys + detector_keys)
        channel = replace(
            base.channel,
            **{key: _as_float(f"{prefix}.{key}", values[key]) for key in channel_keys if key in values},
        )
        updates = {}
        for key in detector_keys:
            if key not in values:
                continue
            name = f"{prefix}.{key}"
            if key == "gated":
                updates[key] = _as_bool(name, values[key])
            elif key == "gate_offset":
                updates[key] = None if values[key] is None else _as_int(name, values[key])
            elif key in ("dark_rate", "jitter"):
                updates[key] = _as_float(name, values[key])
            else:
                updates[key] = _as_int(name, values[key])
        return replace(base, channel=channel, **updates)


def default_alice() -> DetectorParams:
    """Free-running start detector: 10 % efficiency, 20 kHz dark counts"""
    return DetectorParams(channel=ChannelParams(t=0.3, eta=0.1), dark_rate=20e3)


def default_bob() -> DetectorParams:
    """Gated stop detector: 30 % efficiency, 1e-4 dark counts per ns, 50 ns gate"""
    return DetectorParams(
        channel=ChannelParams(t=0.3, eta=0.3), dark_rate=1e-4, gated=True, gate_width=50_000, delay=30_000
    )


######################################################################
#  E X P E R I M E N T   C O N F I G U R A T I O N
######################################################################
@dataclass(frozen=True)
class ExperimentConfig:  # pylint: disable=too-many-instance-attributes
    """
    Class that represents one simulated experiment

    Construction never fails on out-of-range values so that every problem of a
    configuration file can be reported at once; call validate() before use.
    """

    pulse_period: int = 13_158
    bin_separation: int = 1_200
    n_pulses: int = 1_000_000
    mu: float = 0.05
    phases: PhaseSetting = field(default_factory=PhaseSetting)
    pump_interferometer_enabled: bool = True
    analyzers_enabled: bool = True
    pair_mode: PairMode = PairMode.POISSON
    alice: DetectorParams = field(default_factory=default_alice)
    bob: DetectorParams = field(default_factory=default_bob)
    intrinsic_visibility: float = 1.0
    seed: int = DEFAULT_SEED

    ##################################################
    # DERIVED QUANTITIES
    ##################################################

    @property
    def is_bell(self) -> bool:
        """True for the Franson geometry with all three interferometers"""
        return self.pump_interferometer_enabled and self.analyzers_enabled

    @property
    def relative_delay(self) -> int:
        """Nominal Bob minus Alice arrival time of twin photons, in ps"""
        return self.bob.delay - self.alice.delay

    @property
    def bob_gate_offset(self) -> int:
        """Gate opening time after the triggering Alice click, in ps"""
        if self.bob.gate_offset is not None:
            return self.bob.gate_offset
        return max(0, self.relative_delay - self.bob.gate_width // 2)

    @property
    def pulse_rate(self) -> float:
        """Laser repetition rate in Hz"""
        return 1e12 / self.pulse_period

    @property
    def duration(self) -> float:
        """Length of the run in seconds"""
        return self.n_pulses * self.pulse_period * 1e-12

    ##################################################
    # VALIDATION
    ##################################################

    def diagnostics(self) -> List[Diagnostic]:
        """Returns every violated invariant, empty if the configuration is valid"""
        problems = []
        if not self.pulse_period > 0:
            problems.append(Diagnostic("pulse_period", self.pulse_period, "must be positive"))
        if not self.bin_separation > 0:
            problems.append(Diagnostic("bin_separation", self.bin_separation, "must be positive"))
        elif not 2 * self.bin_separation < self.pulse_period:
            problems.append(
                Diagnostic(
                    "bin_separation",
                    self.bin_separation,
                    f"must be below half the pulse period ({self.pulse_period} ps) or peaks alias",
                )
            )
        if not self.n_pulses >= 0:
            problems.append(Diagnostic("n_pulses", self.n_pulses, "must be non-negative"))
        if not 0.0 <= self.mu < 0.5:
            problems.append(Diagnostic("mu", self.mu, "mean pairs per pulse must be in [0, 0.5)"))
        if not 0.0 <= self.intrinsic_visibility <= 1.0:
            problems.append(Diagnostic("intrinsic_visibility", self.intrinsic_visibility, "must be in [0, 1]"))
        if not 0 <= self.seed <= MAX_SEED:
            problems.append(Diagnostic("seed", self.seed, "must be an unsigned 64-bit integer"))
        for name, value in self.phases.serialize().items():
            if not math.isfinite(value):
                problems.append(Diagnostic(f"phases.{name}", value, "must be finite"))
        problems.extend(self.alice.diagnostics("alice"))
        problems.extend(self.bob.diagnostics("bob"))
        if self.alice.gated:
            problems.append(Diagnostic("alice.gated", True, "the start detector has no trigger and must run free"))
        twin_pass = self.bob.channel.p_filter_given_twin * self.alice.channel.p_filter
        if twin_pass > self.bob.channel.p_filter + 1e-12:
            problems.append(
                Diagnostic(
                    "bob.p_filter",
                    self.bob.channel.p_filter,
                    "must be at least bob.p_filter_given_twin * alice.p_filter",
                )
            )
        return problems

    def validate(self) -> "ExperimentConfig":
        """Raises a DataValidationError naming every violated invariant"""
        problems = self.diagnostics()
        if problems:
            raise DataValidationError("; ".join(str(problem) for problem in problems))
        return self

    ##################################################
    # SERIALIZATION
    ##################################################

    def serialize(self) -> dict:
        """Serializes an ExperimentConfig into a dictionary of flat sections"""
        return {
            "pulse_period": self.pulse_period,
            "bin_separation": self.bin_separation,
            "n_pulses": self.n_pulses,
            "mu": self.mu,
            "phases": self.phases.serialize(),
            "pump_interferometer_enabled": self.pump_interferometer_enabled,
            "analyzers_enabled": self.analyzers_enabled,
            "pair_mode": self.pair_mode.value,
            "alice": self.alice.serialize(),
            "bob": self.bob.serialize(),
            "intrinsic_visibility": self.intrinsic_visibility,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        """Single-line JSON echo used in output headers"""
        return json.dumps(self.serialize(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def deserialize(cls, data: dict) -> "ExperimentConfig":
        """
        Deserializes an ExperimentConfig from a dictionary

        Missing keys keep their defaults; unknown keys are rejected.

        Args:
            data (dict): A dictionary containing the configuration
        """
        try:
            values = _known_keys("config", data, tuple(cls().serialize()))
            defaults = cls()
            updates = {}
            for key in ("pulse_period", "bin_separation", "n_pulses", "seed"):
                if key in values:
                    updates[key] = _as_int(key, values[key])
            for key in ("mu", "intrinsic_visibility"):
                if key in values:
                    updates[key] = _as_float(key, values[key])
            for key in ("pump_interferometer_enabled", "analyzers_enabled"):
                if key in values:
                    updates[key] = _as_bool(key, values[key])
            if "pair_mode" in values:
                updates["pair_mode"] = PairMode(values["pair_mode"])
            if "phases" in values:
                updates["phases"] = PhaseSetting.deserialize(values["phases"])
            if "alice" in values:
                updates["alice"] = DetectorParams.deserialize(values["alice"], "alice", defaults.alice)
            if "bob" in values:
                updates["bob"] = DetectorParams.deserialize(values["bob"], "bob", defaults.bob)
        except ValueError as error:
            raise DataValidationError("Invalid configuration: " + str(error)) from error
        except (AttributeError, TypeError) as error:
            raise DataValidationError(
                "Invalid configuration: body contained bad or no data " + str(error)
            ) from error
        return replace(defaults, **updates)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        """Parses the JSON echo written by to_json()"""
        try:
            data = json.loads(text)
        except json.JSONDecodeError as error:
            raise DataValidationError(f"Invalid configuration JSON: {error}") from error
        return cls.deserialize(data)


######################################################################
#  D E T E C T I O N   E V E N T S
######################################################################
@dataclass(frozen=True)
class DetectionEvent:
    """One detector click; bin_index is None for dark counts"""

    time: int
    detector: Detector
    origin: Origin
    pulse_index: int
    bin_index: Optional[int]


@dataclass(eq=False)
class EventStream:
    """
    The clicks of one run, sorted by time then detector

    Columns are numpy arrays of equal length. pairs_per_pulse is the ground
    truth number of pairs in every pulse, kept for test introspection; it is
    None for streams read back from a file.
    """

    config: ExperimentConfig
    time: np.ndarray
    detector: np.ndarray
    origin: np.ndarray
    pulse_index: np.ndarray
    bin_index: np.ndarray
    pairs_per_pulse: Optional[np.ndarray] = None

    def __len__(self):
        return int(self.time.shape[0])

    def __repr__(self):
        return f"<EventStream events=[{len(self)}] pulses=[{self.config.n_pulses}]>"

    @classmethod
    def empty(cls, config: ExperimentConfig) -> "EventStream":
        """A stream without any click"""
        return cls(
            config=config,
            time=np.zeros(0, dtype=np.int64),
            detector=np.zeros(0, dtype=np.int8),
            origin=np.zeros(0, dtype=np.int8),
            pulse_index=np.zeros(0, dtype=np.int64),
            bin_index=np.zeros(0, dtype=np.int8),
            pairs_per_pulse=np.zeros(config.n_pulses, dtype=np.int16),
        )

    def mask(self, detector: Detector, origin: Optional[Origin] = None) -> np.ndarray:
        """Boolean selector of one detector, optionally of one origin"""
        selected = self.detector == detector
        if origin is not None:
            selected &= self.origin == origin
        return selected

    def times(self, detector: Detector, origin: Optional[Origin] = None) -> np.ndarray:
        """Sorted click times of one detector"""
        return self.time[self.mask(detector, origin)]

    def events(self) -> Iterator[DetectionEvent]:
        """Iterates over the clicks as DetectionEvent objects"""
        for time, detector, origin, pulse, bin_index in zip(
            self.time.tolist(),
            self.detector.tolist(),
            self.origin.tolist(),
            self.pulse_index.tolist(),
            self.bin_index.tolist(),
        ):
            yield DetectionEvent(
                time=time,
                detector=Detector(detector),
                origin=Origin(origin),
                pulse_index=pulse,
                bin_index=None if bin_index < 0 else bin_index,
            )

    def fingerprint(self) -> str:
        """SHA-256 over every column; identical streams share a fingerprint"""
        digest = hashlib.sha256()
        for column in (self.time, self.detector, self.origin, self.pulse_index, self.bin_index):
            digest.update(np.ascontiguousarray(column).tobytes())
        return digest.hexdigest()


######################################################################
#  U T I L I T Y   F U N C T I O N S
######################################################################
def _known_keys(section: str, data: dict, allowed: tuple) -> dict:
    """Checks that a section is a dictionary without unknown keys"""
    if not isinstance(data, dict):
        raise DataValidationError(f"Invalid section [{section}]: expected an object, got {type(data).__name__}")
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise DataValidationError(f"Invalid attribute in [{section}]: {', '.join(unknown)}")
    return data


def _as_float(name: str, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise DataValidationError(f"Invalid type for number [{name}]: {type(value).__name__}")
    return float(value)


def _as_int(name: str, value) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise DataValidationError(f"Invalid type for integer [{name}]: {type(value).__name__}")
    if isinstance(value, float):
        if not value.is_integer():
            raise DataValidationError(f"Invalid value for integer [{name}]: {value}")
        value = int(value)
    return value


def _as_bool(name: str, value) -> bool:
    if not isinstance(value, bool):
        raise DataValidationError(f"Invalid type for boolean [{name}]: {type(value).__name__}")
    return value


def _raise_first(problems: List[Diagnostic]):
    if problems:
        raise DataValidationError(str(problems[0]))
