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
Log Handlers

This module contains utility functions to set up logging
consistently for the service and the command line
"""
import logging
import sys

FORMAT_STRING = "[%(asctime)s] [%(levelname)s] [%(module)s] %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S %z"


def init_logging(app, logger_name: str):
    """
    Routes the app logger through the handlers of logger_name

    Under gunicorn these are its error handlers. Outside of it (the command
    line, the tests) a stderr stream handler at app.config["LOGGING_LEVEL"]
    is installed instead.
    """
    app.logger.propagate = False
    server_logger = logging.getLogger(logger_name)
    if server_logger.handlers:
        app.logger.handlers = server_logger.handlers
        app.logger.setLevel(server_logger.level)
    else:
        app.logger.handlers = [logging.StreamHandler(sys.stderr)]
        app.logger.setLevel(app.config.get("LOGGING_LEVEL", logging.INFO))
    # Make all log formats consistent
    formatter = logging.Formatter(FORMAT_STRING, DATE_FORMAT)
    for handler in app.logger.handlers:
        handler.setFormatter(formatter)
    app.logger.debug("Logging handler established")


def set_level(app, level: int):
    """Changes the level of the app logger, used by --verbose/--quiet"""
    app.logger.setLevel(level)
