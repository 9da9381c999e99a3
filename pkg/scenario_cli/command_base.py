"""
Shared flags and error handling for the scenario commands.

Option precedence: command-line flag > AFC_* environment variable >
scenario [numerics]/[output] > settings default.
"""
import logging
import os
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from bloch_prop.propagator_service import MAX_TOL, MIN_TOL
from core.exceptions import ConfigError, ModelError
from .scenario_service import ScenarioRunner, load_scenario

logger = logging.getLogger(__name__)


def _env(name):
    value = os.environ.get(settings.AFC_ENV_PREFIX + name)
    return value if value not in (None, '') else None


def resolve_tol(flag, scenario):
    if flag is not None:
        tol = flag
    elif _env('TOL') is not None:
        try:
            tol = float(_env('TOL'))
        except ValueError:
            raise ConfigError(f"AFC_TOL is not a number: '{_env('TOL')}'")
    elif scenario.numerics.tol is not None:
        tol = scenario.numerics.tol
    else:
        tol = settings.AFC_SIMULATION['TOLERANCE']
    if not MIN_TOL <= tol <= MAX_TOL:
        raise ConfigError(f"Tolerance {tol} outside [{MIN_TOL}, {MAX_TOL}]")
    return tol


def resolve_decimation(no_decimation_flag, scenario):
    if no_decimation_flag:
        return False
    if _env('NO_DECIMATION') is not None:
        return _env('NO_DECIMATION').strip().lower() not in ('1', 'true', 'yes', 'on')
    if scenario.numerics.decimation is not None:
        return scenario.numerics.decimation
    return settings.AFC_SIMULATION['DECIMATION_ENABLED']


def resolve_threads(flag, scenario):
    if flag is not None:
        threads = flag
    elif _env('THREADS') is not None:
        try:
            threads = int(_env('THREADS'))
        except ValueError:
            raise ConfigError(f"AFC_THREADS is not an integer: '{_env('THREADS')}'")
    elif scenario.numerics.threads is not None:
        threads = scenario.numerics.threads
    else:
        threads = settings.AFC_SIMULATION['THREADS']
    if threads < 1:
        raise ConfigError(f"Thread count must be >= 1, got {threads}")
    return threads


def resolve_out(flag, scenario):
    if flag:
        return Path(flag)
    if _env('OUT') is not None:
        return Path(_env('OUT'))
    if scenario.output_dir:
        return Path(scenario.output_dir)
    return Path(settings.AFC_OUT) / scenario.name


class ScenarioCommand(BaseCommand):
    """Base for every verb: parse flags, load the scenario, map errors to exit codes"""

    def add_arguments(self, parser):
        parser.add_argument('--scenario', help='Scenario file or canned scenario name (default: AFC_SCENARIO)')
        parser.add_argument('--out', help='Output directory (default: AFC_OUT/<scenario>)')
        parser.add_argument('--tol', type=float, help='Integrator tolerance')
        parser.add_argument('--no-decimation', action='store_true', help='Solve every detuning exactly')
        parser.add_argument('--threads', type=int, help='Worker threads')

    def handle(self, *args, **options):
        try:
            scenario = self.load(options)
            runner = ScenarioRunner(
                scenario,
                resolve_out(options['out'], scenario),
                tol=resolve_tol(options['tol'], scenario),
                decimate=resolve_decimation(options['no_decimation'], scenario),
                threads=resolve_threads(options['threads'], scenario),
            )
            self.stdout.write(f"Scenario '{scenario.name}' (config sha256 {scenario.config_sha})")
            self.run(runner, options)
            self.stdout.write(self.style.SUCCESS(f"Results written to {runner.out_dir}"))
        except ConfigError as exc:
            logger.error(f"Configuration error: {exc}")
            raise CommandError(str(exc), returncode=2)
        except ModelError as exc:
            logger.error(f"Model error: {exc}")
            raise CommandError(str(exc), returncode=3)

    def load(self, options):
        return load_scenario(options['scenario'] or settings.AFC_SCENARIO)

    def run(self, runner, options):
        raise NotImplementedError

    def write_fields(self, values, keys):
        for key in keys:
            self.stdout.write(f"  {key}: {values.get(key)}")
