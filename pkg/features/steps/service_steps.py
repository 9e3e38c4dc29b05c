######################################################################
# Copyright 2016, 2021 John J. Rofrano. All Rights Reserved.
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
Service Steps

Steps file for analytic.feature, run against the Flask test client
"""
import json
import math

from behave import when, then


@when('I request "{url}"')
def step_impl(context, url):
    context.resp = context.client.get(url)


@when('I post to "{url}"')
def step_impl(context, url):
    payload = {row["key"]: json.loads(row["value"]) for row in context.table}
    context.resp = context.client.post(url, json=payload)


@then('the response status should be "{code:d}"')
def step_impl(context, code):
    assert context.resp.status_code == code, context.resp.get_data(as_text=True)


@then('the "{field}" field should be "{value}"')
def step_impl(context, field, value):
    assert str(context.resp.get_json()[field]) == value


@then('the "{field}" field should be about "{value:g}"')
def step_impl(context, field, value):
    actual = context.resp.get_json()[field]
    assert math.isclose(actual, value, abs_tol=1e-6), f"{field}={actual}, expected {value}"
