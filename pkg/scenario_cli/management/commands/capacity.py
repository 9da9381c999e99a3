import dataclasses
import math

from core.exceptions import ConfigError
from scenario_cli.command_base import ScenarioCommand

TWO_PI = 2 * math.pi


class Command(ScenarioCommand):
    help = 'Multimode capacity per Rabi frequency at the configured total efficiency'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--omegas-hz', help="Comma separated Rabi frequencies in Hz, e.g. '1e6, 5e6'")

    def load(self, options):
        scenario = super().load(options)
        if not options['omegas_hz']:
            return scenario
        try:
            omegas = tuple(TWO_PI * float(item) for item in options['omegas_hz'].split(',') if item.strip())
        except ValueError:
            raise ConfigError(f"--omegas-hz is not a list of numbers: '{options['omegas_hz']}'")
        if not omegas or any(omega <= 0 for omega in omegas):
            raise ConfigError("--omegas-hz needs positive Rabi frequencies")
        if scenario.capacity is None:
            raise ConfigError("Scenario has no [capacity] section")
        return dataclasses.replace(scenario, capacity=dataclasses.replace(scenario.capacity, omegas=omegas))

    def run(self, runner, options):
        for row in runner.run_capacity():
            omega = row.get('omega_rad_s', float('nan')) / TWO_PI
            if row['error']:
                self.stdout.write(self.style.WARNING(f"  {row['family']} at {omega:.6g} Hz: {row['error']}"))
                continue
            line = (
                f"  {row['family']} at {omega:.6g} Hz: T_cut = {row['t_cut_s'] * 1e6:.4g} us, "
                f"capacity {row['capacity_int']} ({row['capacity_real']:.3f}), "
                f"predicted eta_tot {row['predicted_eta_tot']:.3f}"
            )
            self.stdout.write(self.style.SUCCESS(line) if row['reachable'] else self.style.WARNING(line))
