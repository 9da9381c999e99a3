import dataclasses
import math

from rest_framework import serializers

from core.exceptions import ConfigError
from scenario_cli.command_base import ScenarioCommand
from scenario_cli.models import SweepSettings
from scenario_cli.serializers import parse_families

TWO_PI = 2 * math.pi


class Command(ScenarioCommand):
    help = 'Rabi-frequency sweep per pulse family, with the closed-form predictions alongside'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--omega-min-hz', type=float, help='Lowest Rabi frequency, Hz')
        parser.add_argument('--omega-max-hz', type=float, help='Highest Rabi frequency, Hz')
        parser.add_argument('--points', type=int, help='Number of Rabi frequencies')
        parser.add_argument('--families', help="e.g. 'pi, allen_eberly:2, allen_eberly:15.7'")

    def load(self, options):
        scenario = super().load(options)
        overrides = {}
        if options['omega_min_hz'] is not None:
            overrides['omega_min'] = TWO_PI * options['omega_min_hz']
        if options['omega_max_hz'] is not None:
            overrides['omega_max'] = TWO_PI * options['omega_max_hz']
        if options['points'] is not None:
            overrides['points'] = options['points']
        if options['families']:
            try:
                overrides['families'] = parse_families(options['families'])
            except serializers.ValidationError as exc:
                raise ConfigError(f"--families: {exc.detail[0]}")
        if not overrides:
            return scenario
        if scenario.sweep is None:
            missing = {'omega_min', 'omega_max', 'points'} - set(overrides)
            if missing:
                raise ConfigError(f"Scenario has no [sweep] section; give {', '.join(sorted(missing))} as flags")
            overrides.setdefault('families', parse_families('pi, allen_eberly:2, allen_eberly:15.7'))
            sweep = SweepSettings(**overrides)
        else:
            sweep = dataclasses.replace(scenario.sweep, **overrides)
        if not 0 < sweep.omega_min < sweep.omega_max or sweep.points < 2:
            raise ConfigError("Sweep needs 0 < omega_min < omega_max and at least 2 points")
        return dataclasses.replace(scenario, sweep=sweep)

    def run(self, runner, options):
        summary = runner.run_sweep()
        for label, omega in summary['crossings'].items():
            self.stdout.write(f"  {label}: eta_sq = 0.9 at Omega = {omega / TWO_PI:.6g} Hz")
        for label, ratio in summary['rabi_ratios'].items():
            self.stdout.write(self.style.SUCCESS(
                f"Omega_pi / Omega_{label} = {ratio:.3f} (intensity gain {ratio ** 2:.2f})"
            ))
        failed = [row for row in summary['rows'] if row['error']]
        if failed:
            self.stdout.write(self.style.WARNING(f"{len(failed)} sweep points failed, see the error column"))
