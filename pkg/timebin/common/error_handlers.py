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
"""
Module: error_handlers

Every error leaves the service as {status, error, message}
"""
import logging

from flask import jsonify
from timebin.models import DataValidationError, FitError
from timebin import app
from . import status


def _error_response(code: int, error: str, message: str, level: int = logging.WARNING):
    app.logger.log(level, message)
    return jsonify(status=code, error=error, message=message), code


######################################################################
# Error Handlers
######################################################################
@app.errorhandler(FitError)
def fit_error(error):
    """Handles fringe fits that cannot produce a visibility"""
    return _error_response(status.HTTP_400_BAD_REQUEST, "Fit Failed", str(error))


@app.errorhandler(DataValidationError)
def request_validation_error(error):
    """Handles invalid arguments and configurations"""
    return bad_request(error)


@app.errorhandler(status.HTTP_400_BAD_REQUEST)
def bad_request(error):
    """Handles bad requests with 400_BAD_REQUEST"""
    return _error_response(status.HTTP_400_BAD_REQUEST, "Bad Request", str(error))


@app.errorhandler(status.HTTP_404_NOT_FOUND)
def not_found(error):
    """Handles resources not found with 404_NOT_FOUND"""
    return _error_response(status.HTTP_404_NOT_FOUND, "Not Found", str(error))


@app.errorhandler(status.HTTP_405_METHOD_NOT_ALLOWED)
def method_not_supported(error):
    """Handles unsupported HTTP methods with 405_METHOD_NOT_SUPPORTED"""
    return _error_response(status.HTTP_405_METHOD_NOT_ALLOWED, "Method not Allowed", str(error))


@app.errorhandler(status.HTTP_415_UNSUPPORTED_MEDIA_TYPE)
def mediatype_not_supported(error):
    """Handles unsupported media requests with 415_UNSUPPORTED_MEDIA_TYPE"""
    return _error_response(status.HTTP_415_UNSUPPORTED_MEDIA_TYPE, "Unsupported media type", str(error))


@app.errorhandler(status.HTTP_500_INTERNAL_SERVER_ERROR)
def internal_server_error(error):
    """Handles unexpected server error with 500_SERVER_ERROR"""
    return _error_response(
        status.HTTP_500_INTERNAL_SERVER_ERROR, "Internal Server Error", str(error), logging.ERROR
    )
