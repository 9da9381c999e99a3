from scenario_cli.command_base import ScenarioCommand


class Command(ScenarioCommand):
    help = 'Write the optical depth and dispersion phase of the comb'

    def run(self, runner, options):
        path = runner.run_dump_comb()
        self.stdout.write(f"Comb profile: {path}")
