"""
Environment for Behave Testing

Scenarios drive the JSON service through the Flask test client and the
command line through click's CliRunner, so no server has to be running.
"""
import logging
import tempfile
from pathlib import Path

from click.testing import CliRunner
from timebin import app


def before_all(context):
    """ Executed once before all tests """
    app.config["TESTING"] = True
    app.logger.setLevel(logging.CRITICAL)
    context.client = app.test_client()
    context.runner = CliRunner()
    context.config.setup_logging()


def before_scenario(context, scenario):  # pylint: disable=unused-argument
    """ Gives every scenario its own scratch directory and configuration """
    context.scratch = tempfile.TemporaryDirectory()
    context.folder = Path(context.scratch.name)
    context.experiment = {}
    context.runs = []


def after_scenario(context, scenario):  # pylint: disable=unused-argument
    """ Removes the scratch directory """
    context.scratch.cleanup()
