from scenario_cli.command_base import ScenarioCommand


class Command(ScenarioCommand):
    help = 'Resolve the control pulse of the scenario and report its design figures'

    def run(self, runner, options):
        row = runner.run_design()
        self.stdout.write(self.style.SUCCESS(
            f"{row['kind']} pulse: tau_c = {row['tau_c_s']:.6g} s, T_cut = {row['t_cut_s']:.6g} s"
        ))
        self.write_fields(row, [
            'omega_rad_s', 'chirp_product', 'area_rad', 'predicted_eta', 'covers_band', 'duration_ok',
            'capacity_int', 'rabi_ratio', 'intensity_ratio', 'duration_ratio',
        ])
