"""
Command Line Interface

    timebin-lab <preset> [--config PATH] [--set key=value ...] [--out DIR] [--seed N]
    timebin-lab validate-config PATH [--set key=value ...]

The same group is registered on the Flask CLI as `flask timebin-lab`.
Exit codes: 0 success, 1 configuration or runtime failure, 2 usage error.
"""
import logging
from pathlib import Path

import click
from timebin import app, presets
from timebin.models import MAX_SEED, DataValidationError
from timebin.common import status
from timebin.common.log_handlers import set_level


def _check_overrides(ctx, param, values):  # pylint: disable=unused-argument
    """Rejects --set values that are not key=value"""
    for value in values:
        try:
            presets.parse_override(value)
        except DataValidationError as error:
            raise click.BadParameter(str(error)) from error
    return values


def _preset_command(preset: str) -> click.Command:
    """Builds the sub-command that runs one preset"""

    @click.command(name=preset, help=f"Run the {preset} preset.")
    @click.option("--config", "-c", "config_file", type=click.Path(exists=True, dir_okay=False),
                  help="JSON experiment configuration.")
    @click.option("--set", "overrides", multiple=True, callback=_check_overrides, metavar="KEY=VALUE",
                  help="Override one configuration value, e.g. alice.eta=0.1 (repeatable).")
    @click.option("--out", "output_dir", type=click.Path(file_okay=False),
                  help="Output directory [default: TIMEBIN_OUTPUT_DIR/<preset>].")
    @click.option("--seed", type=click.IntRange(0, MAX_SEED), help="Random seed of the run.")
    @click.option("--chunks", type=click.IntRange(min=1), help="Parallel Monte Carlo chunks.")
    @click.option("--verbose", "-v", is_flag=True, help="Log every block.")
    def command(config_file, overrides, output_dir, seed, chunks, verbose):  # pylint: disable=too-many-arguments
        if verbose:
            set_level(app, logging.DEBUG)
        output_dir = output_dir or Path(app.config["OUTPUT_DIR"]) / preset
        try:
            manifest = presets.run_preset(
                preset,
                config_file,
                overrides,
                output_dir,
                seed=seed,
                chunks=chunks or app.config["CHUNKS"],
                default_seed=app.config["DEFAULT_SEED"],
            )
        except (DataValidationError, OSError) as error:
            raise click.ClickException(str(error)) from error
        for path in manifest.files:
            click.echo(str(path))
        if not manifest.success:
            click.echo(f"Error: {manifest.message}", err=True)
            raise SystemExit(status.EXIT_FAILURE)

    return command


@click.group(name="timebin-lab")
def timebin_lab():
    """Simulate and analyze time-bin entanglement experiments."""


for _preset in presets.PRESETS:
    timebin_lab.add_command(_preset_command(_preset))


@timebin_lab.command("validate-config")
@click.argument("config_file", type=click.Path(dir_okay=False))
@click.option("--set", "overrides", multiple=True, callback=_check_overrides, metavar="KEY=VALUE",
              help="Override one configuration value before validating.")
def validate_config(config_file, overrides):
    """Print every violated invariant of CONFIG_FILE."""
    try:
        diagnostics = presets.validate_config(config_file, overrides)
    except OSError as error:
        raise click.ClickException(f"cannot read {config_file}: {error}") from error
    if not diagnostics:
        click.echo("OK")
        return
    for diagnostic in diagnostics:
        click.echo(str(diagnostic))
    raise SystemExit(status.EXIT_FAILURE)


######################################################################
# Register the group on the Flask CLI
# Usage: flask timebin-lab <preset>
######################################################################
app.cli.add_command(timebin_lab)
