import csv
import math
from io import StringIO
from pathlib import Path

import pytest
from django.core.management import call_command, get_commands
from django.core.management.base import CommandError

from core.exceptions import ConfigError, ScenarioParseError
from scenario_cli.command_base import resolve_decimation, resolve_out, resolve_threads, resolve_tol
from scenario_cli.scenario_service import canned_scenarios, load_scenario, parse_scenario

TWO_PI = 2 * math.pi

PR_COMB = """\
[comb]
peak_width_hz = 25e3
peak_spacing_hz = 100e3
peak_count = 40
depth_per_peak = {depth}
"""


def read_rows(path):
    lines = [line for line in Path(path).read_text().splitlines() if not line.startswith('#')]
    return list(csv.DictReader(lines))


def run(command, tmp_path, **options):
    out = StringIO()
    call_command(command, out=str(tmp_path), stdout=out, **options)
    return out.getvalue()


def write_scenario(tmp_path, text, name='custom'):
    path = tmp_path / f"{name}.ini"
    path.write_text(text)
    return str(path)


def test_canned_scenarios():
    assert {'pr_fig2', 'pr_fig2_long', 'pr_narrow', 'eu_sectionV'} <= set(canned_scenarios())


def test_europium_scenario():
    scenario = load_scenario('eu_sectionV')
    assert scenario.comb.bandwidth == pytest.approx(TWO_PI * 12e6)
    assert scenario.control.design.omega_available == pytest.approx(TWO_PI * 1e6)
    assert scenario.control.design.eta_target == pytest.approx(0.9428)
    assert scenario.capacity.readout == 'backward'
    assert scenario.capacity.omegas == pytest.approx((TWO_PI * 0.5e6, TWO_PI * 1e6, TWO_PI * 5e6))
    assert scenario.sweep is None


def test_praseodymium_scenario():
    scenario = load_scenario('pr_fig2')
    assert scenario.name == 'pr_fig2'
    assert scenario.signal.mode_duration == pytest.approx(1.5e-6)
    assert scenario.timeline.storage_time is None
    assert [family.label for family in scenario.sweep.families] == ['pi', 'allen_eberly_bt2', 'allen_eberly_bt15.7']
    assert scenario.sweep.log_spacing
    assert scenario.control.omega_max == pytest.approx(TWO_PI * 1.7044e6)


def test_unknown_scenario():
    with pytest.raises(ConfigError):
        load_scenario('no_such_scenario')


@pytest.mark.parametrize('text, key, line', [
    (PR_COMB.format(depth=4) + 'peak_widht_hz = 1\n', 'peak_widht_hz', 6),
    ('[comb]\npeak_width_hz = 25e3\npeak_spacing_hz = 100e3\ndepth_per_peak = 4\n', 'peak_count', 1),
    (PR_COMB.format(depth=-1), 'depth_per_peak', 5),
    (PR_COMB.format(depth=4) + '\n[combs]\npeak_count = 2\n', 'combs', 7),
    ('[signal]\nmode_count = 1\n', 'comb', None),
    (PR_COMB.format(depth=4) + '\n[sweep]\nomega_min_hz = 1e5\nomega_max_hz = 1e6\npoints = 4\n'
     'families = pi, square\n', 'families', 11),
    (PR_COMB.format(depth=4) + '\n[grid]\nsample_count = 1000\n', 'sample_count', 8),
])
def test_parse_errors_name_key_and_line(text, key, line):
    with pytest.raises(ScenarioParseError) as info:
        parse_scenario(text)
    assert info.value.key == key
    assert info.value.line == line
    assert info.value.exit_code == 2


def test_complex_mode_amplitudes():
    text = PR_COMB.format(depth=4) + '\n[signal]\nmode_count = 3\nmode_amplitudes = 1, 0.5j, -0.8+0.1j\n'
    scenario = parse_scenario(text)
    assert scenario.signal.mode_amplitudes == (1 + 0j, 0.5j, -0.8 + 0.1j)
    with pytest.raises(ScenarioParseError) as info:
        parse_scenario(text.replace('-0.8+0.1j', '-0.8 + i'))
    assert info.value.key == 'mode_amplitudes'
    assert info.value.line == 9


def test_effective_config_lists_defaults():
    scenario = parse_scenario(PR_COMB.format(depth=4), name='minimal')
    lines = scenario.effective_config.splitlines()
    assert '[signal]' in lines
    assert 'mode_count = 1' in lines
    assert 'mode_duration_s = auto' in lines
    assert 'tol = auto' in lines
    assert '[control]' not in lines
    assert scenario.control is None
    assert scenario.capacity is None


def test_config_hash_ignores_comments():
    plain = parse_scenario(PR_COMB.format(depth=4))
    commented = parse_scenario('# Pr comb\n' + PR_COMB.format(depth=4) + '# trailing\n')
    assert plain.config_sha == commented.config_sha
    assert plain.config_sha != parse_scenario(PR_COMB.format(depth=3)).config_sha


def test_option_precedence(monkeypatch, settings, tmp_path):
    scenario = parse_scenario(PR_COMB.format(depth=4) + '\n[numerics]\ntol = 1e-7\nthreads = 2\n', name='pr')
    monkeypatch.setenv('AFC_TOL', '1e-8')
    assert resolve_tol(1e-10, scenario) == 1e-10
    assert resolve_tol(None, scenario) == 1e-8
    monkeypatch.delenv('AFC_TOL')
    assert resolve_tol(None, scenario) == 1e-7
    assert resolve_tol(None, parse_scenario(PR_COMB.format(depth=4))) == settings.AFC_SIMULATION['TOLERANCE']
    with pytest.raises(ConfigError):
        resolve_tol(1e-2, scenario)

    assert resolve_threads(None, scenario) == 2
    monkeypatch.setenv('AFC_THREADS', 'many')
    with pytest.raises(ConfigError):
        resolve_threads(None, scenario)

    monkeypatch.setenv('AFC_NO_DECIMATION', 'true')
    assert resolve_decimation(False, scenario) is False
    monkeypatch.delenv('AFC_NO_DECIMATION')
    assert resolve_decimation(True, scenario) is False

    settings.AFC_OUT = str(tmp_path)
    monkeypatch.delenv('AFC_OUT', raising=False)
    assert resolve_out(None, scenario) == tmp_path / 'pr'
    assert resolve_out('elsewhere', scenario) == Path('elsewhere')


def test_capacity_command_europium(tmp_path):
    output = run('capacity', tmp_path, scenario='eu_sectionV')
    assert 'allen_eberly' in output
    rows = read_rows(tmp_path / 'capacity.csv')
    chirped = {float(row['omega_rad_s']): row for row in rows if row['family'] == 'allen_eberly'}
    assert int(chirped[TWO_PI * 1e6]['capacity_int']) == 75
    assert float(chirped[TWO_PI * 1e6]['t_cut_s']) == pytest.approx(12.1e-6, rel=5e-3)
    assert int(chirped[TWO_PI * 5e6]['capacity_int']) == 99
    assert int(chirped[TWO_PI * 0.5e6]['capacity_int']) >= 1
    for row in chirped.values():
        assert row['reachable'] == 'true'
        assert float(row['predicted_eta_tot']) == pytest.approx(0.8, abs=0.03)

    pi_rows = [row for row in rows if row['family'] == 'pi']
    assert all(row['reachable'] == 'false' for row in pi_rows)
    single = next(row for row in rows if row['family'] == 'allen_eberly_single_mode')
    assert float(single['omega_rad_s']) / TWO_PI == pytest.approx(0.496e6, rel=0.01)
    assert int(single['capacity_int']) == 1


def test_capacity_command_overrides_rabi_frequencies(tmp_path):
    run('capacity', tmp_path, scenario='eu_sectionV', omegas_hz='1e10')
    rows = read_rows(tmp_path / 'capacity.csv')
    pi_row = next(row for row in rows if row['family'] == 'pi')
    assert pi_row['reachable'] == 'true'
    assert int(pi_row['capacity_int']) == 99


def test_echo_command(tmp_path):
    output = run('echo', tmp_path, scenario='pr_fig2')
    assert 'eta_echo' in output
    summary = read_rows(tmp_path / 'echo_summary.csv')[0]
    assert float(summary['eta_echo']) == pytest.approx(0.25, abs=0.05)
    assert float(summary['echo_time_s']) == pytest.approx(10e-6, abs=0.15e-6)
    assert float(summary['eta_echo_analytic_forward']) == pytest.approx(0.2505, abs=1e-3)
    config = (tmp_path / 'effective_config.ini').read_text().splitlines()
    sha = config[0]
    assert sha.startswith('# config_sha256=')
    assert (tmp_path / 'echo_envelope.csv').read_text().splitlines()[0] == sha


def test_echo_command_without_absorption(tmp_path):
    scenario = write_scenario(tmp_path, PR_COMB.format(depth=0), name='empty')
    run('echo', tmp_path / 'out', scenario=scenario)
    summary = read_rows(tmp_path / 'out' / 'echo_summary.csv')[0]
    assert float(summary['eta_echo']) < 1e-9


def test_store_command(tmp_path):
    output = run('store', tmp_path, scenario='pr_fig2')
    assert 'eta_sq' in output
    row = read_rows(tmp_path / 'store_result.csv')[0]
    assert float(row['eta_sq']) == pytest.approx(0.90, abs=0.05)
    assert float(row['echo_time_s']) == pytest.approx(20e-6, abs=0.15e-6)
    assert int(row['capacity_int']) == 5
    assert (tmp_path / 'recall_envelope.csv').exists()
    transfer_lines = (tmp_path / 'transfer_profile.csv').read_text().splitlines()
    assert transfer_lines[0].startswith('# config_sha256=')
    assert 'detuning_rad_s,re_t1,im_t1,re_t2,im_t2,re_tdouble,im_tdouble' in transfer_lines
    transfer = read_rows(tmp_path / 'transfer_profile.csv')
    assert max(math.hypot(float(row['re_tdouble']), float(row['im_tdouble'])) for row in transfer) <= 1 + 1e-9


def test_design_command(tmp_path):
    run('design', tmp_path, scenario='pr_fig2')
    row = read_rows(tmp_path / 'design.csv')[0]
    assert row['kind'] == 'allen_eberly'
    assert float(row['predicted_eta']) == pytest.approx(0.95, abs=1e-3)
    assert float(row['chirp_product']) == pytest.approx(2.0)
    assert float(row['rabi_ratio']) == pytest.approx(8.10, abs=0.01)
    assert row['covers_band'] == 'true'


def test_design_command_europium(tmp_path):
    run('design', tmp_path, scenario='eu_sectionV')
    row = read_rows(tmp_path / 'design.csv')[0]
    assert float(row['tau_c_s']) == pytest.approx(1.728e-6, rel=2e-3)
    assert int(row['capacity_int']) == 75


def test_sweep_command(tmp_path):
    output = run('sweep', tmp_path, scenario='pr_fig2', points=2, families='pi',
                 omega_min_hz=1e6, omega_max_hz=8e7)
    assert 'pi: eta_sq = 0.9' in output
    rows = read_rows(tmp_path / 'sweep_pi.csv')
    assert [row['family'] for row in rows] == ['pi', 'pi']
    assert float(rows[0]['eta_sq']) < 0.9 < float(rows[1]['eta_sq'])
    assert len(read_rows(tmp_path / 'sweep_comparison.csv')) == 2


def test_command_verbs_are_registered():
    commands = get_commands()
    for verb in ('echo', 'store', 'sweep', 'capacity', 'design', 'dump-comb', 'dump-pulse'):
        assert commands[verb] == 'scenario_cli'


def test_dump_comb_is_deterministic(tmp_path):
    run('dump-comb', tmp_path / 'a', scenario='pr_fig2')
    run('dump-comb', tmp_path / 'b', scenario='pr_fig2')
    first = (tmp_path / 'a' / 'comb_profile.csv').read_text()
    assert first == (tmp_path / 'b' / 'comb_profile.csv').read_text()
    assert 'omega_rad_s,depth,phase_rad' in first.splitlines()


def test_dump_pulse(tmp_path):
    run('dump-pulse', tmp_path, scenario='pr_fig2', samples=101)
    assert len(read_rows(tmp_path / 'pulse1_samples.csv')) == 101
    assert not (tmp_path / 'pulse2_samples.csv').exists()


def test_configuration_errors_exit_with_2(tmp_path):
    with pytest.raises(CommandError) as info:
        run('echo', tmp_path, scenario='no_such_scenario')
    assert info.value.returncode == 2
    bad = write_scenario(tmp_path, PR_COMB.format(depth=4) + 'peak_widht_hz = 1\n')
    with pytest.raises(CommandError) as info:
        run('echo', tmp_path, scenario=bad)
    assert info.value.returncode == 2
    assert 'peak_widht_hz' in str(info.value)


def test_model_errors_exit_with_3(tmp_path):
    text = load_scenario('eu_sectionV').effective_config.replace('omega_available_hz = 1e6',
                                                                  'omega_available_hz = 1e3')
    scenario = write_scenario(tmp_path, text, name='weak')
    with pytest.raises(CommandError) as info:
        run('design', tmp_path, scenario=scenario)
    assert info.value.returncode == 3
