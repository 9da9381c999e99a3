from scenario_cli.command_base import ScenarioCommand


class Command(ScenarioCommand):
    help = 'Forward echo without control fields: writes the output envelope and echo summary'

    def run(self, runner, options):
        summary = runner.run_echo()
        self.stdout.write(self.style.SUCCESS(
            f"eta_echo = {summary['eta_echo']:.4f}, echo time {summary['echo_time_s'] * 1e6:.4f} us "
            f"(expected {summary['echo_time_expected_s'] * 1e6:.4f} us)"
        ))
        self.write_fields(summary, ['eta_echo_analytic_forward', 'window_start_s', 'window_end_s'])
