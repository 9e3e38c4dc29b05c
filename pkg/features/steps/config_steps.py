######################################################################
# Copyright 2016, 2023 John J. Rofrano. All Rights Reserved.
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

# pylint: disable=function-redefined, missing-function-docstring
# flake8: noqa
"""
Configuration and Command Line Steps

Steps file for presets.feature
"""
import json

from behave import given, when, then
from timebin import presets
from timebin.common.cli_commands import timebin_lab
from timebin.event_analysis import read_config_echo
from timebin.models import ExperimentConfig


def write_config(context) -> str:
    path = context.folder / "config.json"
    path.write_text(json.dumps(context.experiment), encoding="utf-8")
    return str(path)


def run_preset(context, preset, seed=None):
    out = context.folder / f"{preset}-{len(context.runs)}"
    args = [preset, "--config", write_config(context), "--out", str(out)]
    if seed is not None:
        args += ["--seed", seed]
    context.result = context.runner.invoke(timebin_lab, args)
    context.out = out
    context.runs.append(out)


@given('the following configuration')
def step_impl(context):
    """ Builds the experiment from dotted keys """
    overrides = [f"{row['key']}={row['value']}" for row in context.table]
    context.experiment = presets.apply_overrides(context.experiment, overrides)


@when('I set "{key}" to "{value}"')
def step_impl(context, key, value):
    context.experiment = presets.apply_overrides(context.experiment, [f"{key}={value}"])


@when('I run the "{preset}" preset')
def step_impl(context, preset):
    run_preset(context, preset)


@when('I run the "{preset}" preset with seed "{seed}"')
def step_impl(context, preset, seed):
    run_preset(context, preset, seed)


@when('I repeat the "{preset}" preset with seed "{seed}"')
def step_impl(context, preset, seed):
    run_preset(context, preset, seed)


@when('I validate the configuration')
def step_impl(context):
    context.result = context.runner.invoke(timebin_lab, ["validate-config", write_config(context)])


@then('the command should succeed')
def step_impl(context):
    assert context.result.exit_code == 0, context.result.output


@then('the command should fail with exit code "{code:d}"')
def step_impl(context, code):
    assert context.result.exit_code == code, f"{context.result.exit_code}: {context.result.output}"


@then('the output should contain "{text}"')
def step_impl(context, text):
    assert text in context.result.output, context.result.output


@then('the manifest should list "{name}"')
def step_impl(context, name):
    manifest = (context.out / "manifest.txt").read_text(encoding="utf-8")
    assert f"file = {name}\n" in manifest, manifest


@then('"{name}" should contain "{text}"')
def step_impl(context, name, text):
    content = (context.out / name).read_text(encoding="utf-8")
    assert text in content, content


@then('"{name}" should echo the configuration')
def step_impl(context, name):
    echo = read_config_echo(context.out / name)
    expected = ExperimentConfig.deserialize({**context.experiment, "seed": echo.seed})
    assert echo == expected, f"{echo} != {expected}"


@then('both runs should write the same "{name}"')
def step_impl(context, name):
    first, second = context.runs[-2:]
    assert first != second
    assert (first / name).read_bytes() == (second / name).read_bytes()
