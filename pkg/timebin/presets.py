"""
Experiment Presets

Wires a configuration file and command line overrides to the pipelines that
simulate, analyze and export one experiment. Every preset writes its tables
into an output directory together with a manifest.txt listing them.

Presets
-------
bell-scan - fringe scan of the Bell geometry, postselected and two-fold
power-scan - net visibility versus mean pairs per pulse
sidepeak - pair probability from the side peaks of the characterization geometry
tac-histogram - start/stop histogram of one run
analytic-tables - joint detection table and visibility curves, no simulation
pair-rate-scan - side-peak and singles-rate estimates versus mean pairs per pulse
"""
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from timebin import analytic_model, event_analysis, montecarlo_engine
from timebin.models import (
    DataValidationError,
    Detector,
    Diagnostic,
    ExperimentConfig,
    FitError,
    _as_bool,
    _as_float,
    _as_int,
)

logger = logging.getLogger("flask.app")

PRESETS = ("bell-scan", "power-scan", "sidepeak", "tac-histogram", "analytic-tables", "pair-rate-scan")
SIMULATING_PRESETS = frozenset(PRESETS) - {"analytic-tables"}
SCAN_SECTION = "scan"
DEFAULT_MU_LIST = (0.02, 0.04, 0.06, 0.08, 0.10, 0.12, 0.14)
ANALYTIC_P_GRID = tuple(round(0.01 * step, 2) for step in range(21))
ANALYTIC_THETA_POINTS = 24


######################################################################
#  S C A N   S E T T I N G S
######################################################################
@dataclass(frozen=True)
class ScanSettings:  # pylint: disable=too-many-instance-attributes
    """Analysis settings read from the optional "scan" section"""

    points: int = 12
    mu_list: Tuple[float, ...] = DEFAULT_MU_LIST
    bin_width: int = event_analysis.DEFAULT_BIN_WIDTH
    half_width: int = event_analysis.DEFAULT_HALF_WIDTH
    accidentals: event_analysis.AccidentalMode = event_analysis.AccidentalMode.NOISE
    write_events: bool = False

    def serialize(self) -> dict:
        """Serializes the settings into a dictionary"""
        return {
            "points": self.points,
            "mu_list": list(self.mu_list),
            "bin_width": self.bin_width,
            "half_width": self.half_width,
            "accidentals": self.accidentals.value,
            "write_events": self.write_events,
        }

    @classmethod
    def deserialize(cls, data: dict) -> "ScanSettings":
        """Creates ScanSettings from a dictionary, rejecting unknown keys"""
        if not isinstance(data, dict):
            raise DataValidationError(f"section '{SCAN_SECTION}' must be an object")
        unknown = set(data) - set(cls().serialize())
        if unknown:
            raise DataValidationError(f"unknown keys in '{SCAN_SECTION}': {sorted(unknown)}")
        mu_list = data.get("mu_list", cls.mu_list)
        if not isinstance(mu_list, (list, tuple)):
            raise DataValidationError(f"Invalid type for list [{SCAN_SECTION}.mu_list]: {type(mu_list).__name__}")
        try:
            accidentals = event_analysis.AccidentalMode(data.get("accidentals", cls.accidentals.value))
        except ValueError as error:
            raise DataValidationError(f"Invalid scan settings: {error}") from error
        settings = cls(
            points=_as_int(f"{SCAN_SECTION}.points", data.get("points", cls.points)),
            mu_list=tuple(_as_float(f"{SCAN_SECTION}.mu_list", mu) for mu in mu_list),
            bin_width=_as_int(f"{SCAN_SECTION}.bin_width", data.get("bin_width", cls.bin_width)),
            half_width=_as_int(f"{SCAN_SECTION}.half_width", data.get("half_width", cls.half_width)),
            accidentals=accidentals,
            write_events=_as_bool(f"{SCAN_SECTION}.write_events", data.get("write_events", cls.write_events)),
        )
        if settings.points < 3:
            raise DataValidationError(f"scan.points must be at least 3, got {settings.points}")
        if settings.bin_width <= 0 or settings.half_width <= 0:
            raise DataValidationError("scan.bin_width and scan.half_width must be positive")
        return settings


######################################################################
#  R U N   M A N I F E S T
######################################################################
@dataclass
class RunManifest:  # pylint: disable=too-many-instance-attributes
    """What a preset run produced"""

    preset: str
    config: ExperimentConfig
    output_dir: Path
    files: List[Path] = field(default_factory=list)
    duration: float = 0.0
    success: bool = True
    message: str = ""

    @property
    def seed(self) -> int:
        return self.config.seed

    def add(self, path: Path) -> Path:
        """Records an emitted file"""
        self.files.append(Path(path))
        return path

    def write(self) -> Path:
        """Writes manifest.txt into the output directory"""
        path = self.output_dir / "manifest.txt"
        lines = [
            f"preset = {self.preset}",
            f"seed = {self.seed}",
            f"status = {'ok' if self.success else 'failed'}",
            f"duration_s = {self.duration:.3f}",
            f"config = {self.config.to_json()}",
        ]
        if self.message:
            lines.append(f"message = {self.message}")
        lines.extend(f"file = {file.name}" for file in self.files)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path


######################################################################
#  C O N F I G U R A T I O N
######################################################################
def load_config_file(path: Union[str, Path, None]) -> dict:
    """Reads a JSON configuration; no path means all defaults"""
    if path is None:
        return {}
    path = Path(path)
    with path.open(encoding="utf-8") as handle:
        try:
            data = json.load(handle)
        except json.JSONDecodeError as error:
            raise DataValidationError(f"{path}: invalid JSON: {error}") from error
    if not isinstance(data, dict):
        raise DataValidationError(f"{path}: the configuration must be a JSON object")
    return data


def parse_override(text: str) -> Tuple[List[str], object]:
    """Splits `dotted.key=value`; the value is a JSON literal or a plain string"""
    key, separator, raw = text.partition("=")
    if not separator or not key.strip():
        raise DataValidationError(f"override {text!r} is not of the form key=value")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip().split("."), value


def apply_overrides(data: dict, overrides: Iterable[str]) -> dict:
    """Returns a copy of data with every override applied in order"""
    result = json.loads(json.dumps(data))
    for text in overrides:
        keys, value = parse_override(text)
        section = result
        for key in keys[:-1]:
            section = section.setdefault(key, {})
            if not isinstance(section, dict):
                raise DataValidationError(f"override {text!r}: '{key}' is not a section")
        section[keys[-1]] = value
    return result


def resolve_config(
    config_file: Union[str, Path, None] = None,
    overrides: Sequence[str] = (),
    seed: Optional[int] = None,
    default_seed: Optional[int] = None,
) -> Tuple[ExperimentConfig, ScanSettings]:
    """
    Builds the experiment and scan settings of a run

    Precedence, lowest first: defaults, default_seed, the file, overrides, seed.
    """
    data = apply_overrides(load_config_file(config_file), overrides)
    scan = ScanSettings.deserialize(data.pop(SCAN_SECTION, {}))
    if seed is not None:
        data["seed"] = seed
    elif default_seed is not None:
        data.setdefault("seed", default_seed)
    return ExperimentConfig.deserialize(data), scan


def validate_config(config_file: Union[str, Path], overrides: Sequence[str] = ()) -> List[Diagnostic]:
    """
    Every violated invariant of a configuration file, empty when valid

    Unreadable files raise OSError; malformed values are reported as a
    diagnostic instead of an exception.
    """
    try:
        config, _ = resolve_config(config_file, overrides)
    except DataValidationError as error:
        return [Diagnostic("config", str(config_file), str(error))]
    return config.diagnostics()


######################################################################
#  R U N   A   P R E S E T
######################################################################
def run_preset(  # pylint: disable=too-many-arguments
    preset: str,
    config_file: Union[str, Path, None] = None,
    overrides: Sequence[str] = (),
    output_dir: Union[str, Path] = "results",
    seed: Optional[int] = None,
    chunks: int = 1,
    default_seed: Optional[int] = None,
) -> RunManifest:
    """
    Runs one preset and writes its outputs

    Raises DataValidationError for an unknown preset or an invalid
    configuration. A failing fit does not raise: the manifest is returned
    with success False and keeps the outputs written so far.
    """
    if preset not in PRESETS:
        raise DataValidationError(f"unknown preset {preset!r}, expected one of {', '.join(PRESETS)}")
    config, scan = resolve_config(config_file, overrides, seed, default_seed)
    config.validate()
    if preset in SIMULATING_PRESETS and config.n_pulses <= 0:
        raise DataValidationError(str(Diagnostic("n_pulses", config.n_pulses, "must be positive to simulate")))

    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(preset, config, output_dir)
    logger.info("Running preset %s into %s (seed %d)", preset, output_dir, config.seed)
    started = time.perf_counter()
    try:
        PIPELINES[preset](config, scan, manifest, chunks)
    except FitError as error:
        logger.error("Preset %s failed: %s", preset, error)
        manifest.success = False
        manifest.message = str(error)
    manifest.duration = time.perf_counter() - started
    manifest.add(manifest.write())
    logger.info("Preset %s finished in %.1f s with %d files", preset, manifest.duration, len(manifest.files))
    return manifest


######################################################################
#  P I P E L I N E S
######################################################################
def _bell_scan(config: ExperimentConfig, scan: ScanSettings, manifest: RunManifest, chunks: int):
    out = manifest.output_dir
    triple, twofold = event_analysis.run_fringe_scans(
        config, event_analysis.scan_phases(scan.points), (True, False), chunks, scan.accidentals
    )
    manifest.add(event_analysis.write_scan_csv(triple, out / "fringe.csv"))
    manifest.add(event_analysis.write_scan_csv(twofold, out / "twofold.csv"))
    fit = event_analysis.fit_fringe(triple)
    if not fit.success:
        raise FitError(fit.message)
    values = dict(fit.serialize())
    try:
        values["twofold_v"] = event_analysis.fit_fringe(twofold).raw_v
    except FitError as error:
        logger.warning("Two-fold fringe could not be fitted: %s", error)
        values["twofold_v"] = math.nan
    if fit.sigma_v > 0:
        values["chsh_sigmas"] = analytic_model.chsh_significance(fit.net_v, fit.sigma_v)
    manifest.add(write_summary(out / "visibility.txt", "bell scan", config, values))


def _power_scan(config: ExperimentConfig, scan: ScanSettings, manifest: RunManifest, chunks: int):
    out = manifest.output_dir
    result = event_analysis.power_scan_visibility(scan.mu_list, config, scan.points, chunks)
    manifest.add(event_analysis.write_power_scan_csv(result, config, out / "power.csv"))
    predicted_slope, predicted_intercept = analytic_model.visibility_trend(scan.mu_list, config.intrinsic_visibility)
    values = {
        "slope": result.slope,
        "intercept": result.intercept,
        "predicted_slope": predicted_slope,
        "predicted_intercept": predicted_intercept,
        "tangent_slope": analytic_model.visibility_slope(0.0),
    }
    manifest.add(write_summary(out / "power_fit.txt", "power scan fit", config, values))


def _sidepeak(config: ExperimentConfig, scan: ScanSettings, manifest: RunManifest, chunks: int):
    out = manifest.output_dir
    config = event_analysis.characterization_config(config)
    stream = montecarlo_engine.simulate_run(config, chunks)
    hist = event_analysis.build_tac_histogram(stream, scan.bin_width)
    manifest.add(event_analysis.write_histogram_csv(hist, config, out / "tac.csv"))
    analysis = event_analysis.analyze_side_peaks(hist, config, scan.half_width)
    values = {f"{label}_counts": count for label, count in analysis.counts.items()}
    values.update(
        {
            "ppair": analysis.raw.value,
            "ppair_relative_uncertainty": analysis.raw.relative_uncertainty,
            "ppair_corrected": analysis.corrected.value,
            "ppair_corrected_uncertainty": analysis.corrected.absolute_uncertainty,
            "alice_singles_hz": event_analysis.singles_rate(stream, Detector.ALICE),
        }
    )
    manifest.add(write_summary(out / "ppair.txt", "side-peak estimate", config, values))


def _tac_histogram(config: ExperimentConfig, scan: ScanSettings, manifest: RunManifest, chunks: int):
    out = manifest.output_dir
    stream = montecarlo_engine.simulate_run(config, chunks)
    if scan.write_events:
        manifest.add(montecarlo_engine.write_event_stream(stream, out / "events.txt"))
    hist = event_analysis.build_tac_histogram(stream, scan.bin_width)
    manifest.add(event_analysis.write_histogram_csv(hist, config, out / "tac.csv"))
    if config.is_bell:
        windows = event_analysis.bell_windows(config, scan.half_width)
    else:
        windows = event_analysis.characterization_windows(config, scan.half_width)
    values = event_analysis.count_windows(hist, windows)
    values["out_of_window"] = event_analysis.out_of_window_count(hist, windows)
    values["starts"] = hist.n_starts
    manifest.add(write_summary(out / "windows.txt", "window counts", config, values))


def _analytic_tables(config: ExperimentConfig, scan: ScanSettings, manifest: RunManifest, chunks: int):
    # pylint: disable=unused-argument
    out = manifest.output_dir
    table = analytic_model.joint_detection_distribution(
        config.phases, config.pump_interferometer_enabled, config.analyzers_enabled
    )
    rows = [(*index, value) for index, value in np.ndenumerate(table)]
    manifest.add(
        event_analysis.write_table(
            out / "joint.csv",
            "joint detection distribution",
            config,
            "bin_a,port_a,bin_b,port_b,probability",
            rows,
            ["%d", "%d", "%d", "%d", "%.12f"],
        )
    )
    curve = []
    for p_pair in ANALYTIC_P_GRID:
        prediction = analytic_model.multiphoton_visibility(p_pair, config.intrinsic_visibility)
        curve.append((p_pair, prediction.v_exact, prediction.v_linear, prediction.v_total))
    manifest.add(
        event_analysis.write_table(
            out / "visibility_curve.csv", "visibility curve", config, "p_pair,v_exact,v_linear,v_total", curve, "%.6f"
        )
    )
    rates = []
    for theta in event_analysis.scan_phases(ANALYTIC_THETA_POINTS):
        r2, r4, rc = analytic_model.multiphoton_rates(float(theta), config.mu)
        rates.append((theta, r2, r4, rc))
    manifest.add(
        event_analysis.write_table(out / "rates.csv", "coincidence rates", config, "theta_rad,r2,r4,rc", rates, "%.8g")
    )


def _pair_rate_scan(config: ExperimentConfig, scan: ScanSettings, manifest: RunManifest, chunks: int):
    rows = event_analysis.pair_rate_scan(scan.mu_list, config, chunks, scan.bin_width)
    manifest.add(event_analysis.write_pair_rate_csv(rows, config, manifest.output_dir / "pair_rate.csv"))


PIPELINES = {
    "bell-scan": _bell_scan,
    "power-scan": _power_scan,
    "sidepeak": _sidepeak,
    "tac-histogram": _tac_histogram,
    "analytic-tables": _analytic_tables,
    "pair-rate-scan": _pair_rate_scan,
}


def write_summary(path: Path, kind: str, config: ExperimentConfig, values: dict) -> Path:
    """Writes `key = value` lines under a `#` header echoing the config"""
    lines = [f"# timebin-lab {kind}", f"# config: {config.to_json()}"]
    for key, value in values.items():
        if isinstance(value, float):
            value = f"{value:.10g}"
        lines.append(f"{key} = {value}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.info("Wrote %s to %s", kind, path)
    return path
