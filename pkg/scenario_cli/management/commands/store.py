from scenario_cli.command_base import ScenarioCommand


class Command(ScenarioCommand):
    help = 'Full storage protocol with the control pulse pair of the scenario'

    def run(self, runner, options):
        row = runner.run_store()
        self.stdout.write(self.style.SUCCESS(
            f"eta_sq = {row['eta_sq']:.4f}, eta_tot = {row['eta_tot']:.4f}, overlap = {row['overlap']:.4f}"
        ))
        self.write_fields(row, [
            'eta_echo', 'echo_time_s', 'expected_echo_time_s', 'leakage', 'spectral_eta_sq',
            'capacity_int', 't_cut_s', 'storage_time_s',
        ])
