######################################################################
# Copyright 2016, 2022 John J. Rofrano. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
######################################################################

"""
Time-Bin Lab JSON Service

Read-only endpoints over the analytic model and the pair estimators.
Nothing is simulated here; Monte Carlo runs go through the command line.
"""
import math

from flask import jsonify, request, abort
from timebin import analytic_model, pair_statistics
from timebin.models import ChannelParams, DataValidationError, ExperimentConfig, PhaseSetting
from timebin.common import status  # HTTP Status Codes
from . import app


######################################################################
# H E A L T H   C H E C K
######################################################################
@app.route("/health")
def healthcheck():
    """Let them know our heart is still beating"""
    return jsonify(status=200, message="OK"), status.HTTP_200_OK


######################################################################
#  U T I L I T Y   F U N C T I O N S
######################################################################
def check_content_type(content_type):
    """Checks that the media type is correct"""
    if "Content-Type" not in request.headers:
        app.logger.error("No Content-Type specified.")
        abort(
            status.HTTP_415_UNSUPPORTED_MEDIA_TYPE,
            f"Content-Type must be {content_type}",
        )

    if request.headers["Content-Type"] == content_type:
        return

    app.logger.error("Invalid Content-Type: %s", request.headers["Content-Type"])
    abort(
        status.HTTP_415_UNSUPPORTED_MEDIA_TYPE,
        f"Content-Type must be {content_type}",
    )


def float_arg(name: str, default=None) -> float:
    """Reads a finite float query parameter"""
    raw = request.args.get(name)
    if raw is None:
        if default is None:
            raise DataValidationError(f"missing query parameter '{name}'")
        return default
    try:
        value = float(raw)
    except ValueError as error:
        raise DataValidationError(f"query parameter '{name}' is not a number: {raw!r}") from error
    if not math.isfinite(value):
        raise DataValidationError(f"query parameter '{name}' must be finite")
    return value


def json_body() -> dict:
    """The JSON object posted with the request"""
    check_content_type("application/json")
    data = request.get_json(silent=True)
    if not isinstance(data, dict):
        raise DataValidationError("request body must be a JSON object")
    return data


def channel_from(data: dict, key: str) -> ChannelParams:
    """A ChannelParams from a nested object of the body"""
    values = data.get(key, {})
    if not isinstance(values, dict):
        raise DataValidationError(f"'{key}' must be an object")
    try:
        return ChannelParams(**{name: float(value) for name, value in values.items()}).validate(key)
    except (TypeError, ValueError) as error:
        raise DataValidationError(f"invalid channel '{key}': {error}") from error


def number_field(data: dict, name: str, default=None) -> float:
    """Reads a numeric field of the body"""
    value = data.get(name, default)
    if value is None:
        raise DataValidationError(f"missing field '{name}'")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise DataValidationError(f"field '{name}' must be a number, got {value!r}")
    return float(value)


def complex_pair(value: complex) -> list:
    """Encodes a complex amplitude as [real, imag] for JSON"""
    return [value.real, value.imag]


######################################################################
#  A N A L Y T I C   M O D E L
######################################################################
@app.route("/analytic/pump-state", methods=["GET"])
def get_pump_state():
    """Amplitudes of the time-bin qubit leaving the pump interferometer"""
    phi = float_arg("phi", 0.0)
    app.logger.info("Request for the pump state at phi=%s", phi)
    state = analytic_model.pump_state(phi)
    return (
        jsonify(phi=phi, amplitudes=[complex_pair(value) for value in state.amplitudes], norm=state.norm),
        status.HTTP_200_OK,
    )


@app.route("/analytic/joint", methods=["GET"])
def get_joint_distribution():
    """Joint detection table and its peak probabilities at one phase setting"""
    setting = PhaseSetting(float_arg("pump", 0.0), float_arg("alice", 0.0), float_arg("bob", 0.0))
    app.logger.info("Request for the joint distribution at %s", setting)
    table = analytic_model.joint_detection_distribution(setting)
    return (
        jsonify(
            phases=setting.serialize(),
            theta=setting.display_theta,
            table=table.tolist(),
            peaks=analytic_model.peak_probabilities(table),
            postselected=complex_pair(analytic_model.postselected_amplitude(setting)),
        ),
        status.HTTP_200_OK,
    )


@app.route("/analytic/fringe", methods=["GET"])
def get_fringe_rate():
    """Triple coincidence rate at one fringe phase"""
    theta, v = float_arg("theta"), float_arg("v", 1.0)
    return jsonify(theta=theta, v=v, rate=analytic_model.triple_coincidence_rate(theta, v)), status.HTTP_200_OK


@app.route("/analytic/visibility", methods=["GET"])
def get_visibility():
    """Visibility expected with double-pair emission"""
    prediction = analytic_model.multiphoton_visibility(float_arg("p_pair"), float_arg("intrinsic_v", 1.0))
    return (
        jsonify(
            p_pair=prediction.p_pair,
            v_exact=prediction.v_exact,
            v_linear=prediction.v_linear,
            v_total=prediction.v_total,
            slope=analytic_model.visibility_slope(prediction.p_pair),
        ),
        status.HTTP_200_OK,
    )


@app.route("/analytic/chsh", methods=["GET"])
def get_chsh_significance():
    """Standard deviations above the local bound"""
    v, sigma = float_arg("v"), float_arg("sigma")
    return (
        jsonify(v=v, sigma=sigma, threshold=analytic_model.CHSH_THRESHOLD,
                significance=analytic_model.chsh_significance(v, sigma)),
        status.HTTP_200_OK,
    )


######################################################################
#  P A I R   S T A T I S T I C S
######################################################################
@app.route("/statistics/main-side-ratio", methods=["POST"])
def post_main_side_ratio():
    """Main to side peak ratio for a pair probability and two channels"""
    data = json_body()
    p_pair = number_field(data, "p_pair")
    ch_a, ch_b = channel_from(data, "alice"), channel_from(data, "bob")
    app.logger.info("Request for the main/side ratio at p=%s", p_pair)
    return (
        jsonify(
            p_pair=p_pair,
            ratio=pair_statistics.main_side_ratio(p_pair, ch_a, ch_b),
            poisson_ratio=pair_statistics.main_side_ratio_series(
                pair_statistics.PairNumberDistribution.poisson(p_pair, app.config["SERIES_N_MAX"]), ch_a, ch_b
            ),
        ),
        status.HTTP_200_OK,
    )


@app.route("/statistics/sidepeak", methods=["POST"])
def post_sidepeak_estimate():
    """Pair probability from measured main and side peak counts"""
    data = json_body()
    ch_b = channel_from(data, "bob") if "bob" in data else None
    estimate = pair_statistics.estimate_ppair_sidepeak(
        number_field(data, "main_counts"), number_field(data, "side_counts"), ch_b
    )
    return jsonify(estimate.serialize()), status.HTTP_200_OK


@app.route("/statistics/standard", methods=["POST"])
def post_standard_estimate():
    """Pair probability from the singles rate and the calibrated losses"""
    data = json_body()
    arguments = {name: number_field(data, name) for name in ("singles_rate", "t_a", "eta_a", "f")}
    arguments["sigma_t"] = number_field(data, "sigma_t", 0.0)
    arguments["sigma_eta"] = number_field(data, "sigma_eta", 0.0)
    estimate = pair_statistics.estimate_ppair_standard(**arguments)
    return jsonify(estimate.serialize()), status.HTTP_200_OK


######################################################################
#  C O N F I G U R A T I O N
######################################################################
@app.route("/config/validate", methods=["POST"])
def post_validate_config():
    """Diagnostics of an experiment configuration, empty when valid"""
    data = json_body()
    config = ExperimentConfig.deserialize(data)
    diagnostics = config.diagnostics()
    return (
        jsonify(
            valid=not diagnostics,
            diagnostics=[
                {"field": item.field, "value": item.value, "rule": item.rule} for item in diagnostics
            ],
            config=config.serialize(),
        ),
        status.HTTP_200_OK,
    )
