from scenario_cli.command_base import ScenarioCommand


class Command(ScenarioCommand):
    help = 'Write Rabi frequency and detuning samples of the control pulses'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--samples', type=int, default=2048, help='Samples across the gate')

    def run(self, runner, options):
        for path in runner.run_dump_pulse(options['samples']):
            self.stdout.write(f"Pulse samples: {path}")
