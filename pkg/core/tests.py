import time

import numpy as np
import pytest

from core.csv_export import config_hash, write_columns, write_rows
from core.exceptions import (
    ConfigError,
    DegenerateCrossingError,
    GridCoverageError,
    GridError,
    ModelError,
    ScenarioParseError,
)
from core.workers import ordered_map, resolve_threads


def _read(path):
    return path.read_text().splitlines()


def test_exit_codes_follow_branches():
    assert ConfigError.exit_code == 2
    assert ScenarioParseError('x').exit_code == 2
    assert ModelError.exit_code == 3
    assert DegenerateCrossingError.exit_code == 3
    assert issubclass(GridCoverageError, GridError)


def test_parse_error_names_key_and_line():
    error = ScenarioParseError('Unknown key in [comb]', key='peak_widht_hz', line=4)
    assert error.key == 'peak_widht_hz'
    assert error.line == 4
    assert "key 'peak_widht_hz', line 4" in str(error)
    assert str(ScenarioParseError('Missing section', key='comb')).endswith("(key 'comb')")


def test_config_hash_is_stable():
    assert config_hash('[comb]\n') == config_hash('[comb]\n')
    assert config_hash('[comb]\n') != config_hash('[comb] \n')
    assert len(config_hash('')) == 64


def test_write_columns_header_and_precision(tmp_path):
    path = write_columns(
        tmp_path / 'out' / 'columns.csv',
        {'t_s': np.array([0.0, 1e-7]), 're_E': np.array([1 / 3, -2.5])},
        config_sha='abc',
        metadata={'finesse': 4.0},
    )
    lines = _read(path)
    assert lines[0] == '# config_sha256=abc'
    assert lines[1] == '# finesse=4.0'
    assert lines[2] == 't_s,re_E'
    assert float(lines[3].split(',')[1]) == 1 / 3
    assert len(lines) == 5


def test_write_rows_formats_cells(tmp_path):
    path = write_rows(
        tmp_path / 'rows.csv',
        ['family', 'eta_sq', 'monotone', 'error'],
        [{'family': 'pi', 'eta_sq': 0.5, 'monotone': True, 'extra': 1}, {'family': 'pi', 'error': 'boom'}],
    )
    lines = _read(path)
    assert lines[0] == '# config_sha256=none'
    assert lines[1] == 'family,eta_sq,monotone,error'
    assert lines[2] == 'pi,0.5,true,'
    assert lines[3] == 'pi,,,boom'


def test_ordered_map_keeps_input_order():
    def slow_square(value):
        time.sleep(0.001 * (5 - value))
        return value * value

    assert ordered_map(slow_square, range(5), threads=4) == [0, 1, 4, 9, 16]
    assert ordered_map(slow_square, range(5), threads=1) == [0, 1, 4, 9, 16]


def test_resolve_threads(settings):
    settings.AFC_SIMULATION = {**settings.AFC_SIMULATION, 'THREADS': 3}
    assert resolve_threads() == 3
    assert resolve_threads(0) == 1


@pytest.mark.parametrize('threads', [1, 2, 8])
def test_ordered_map_empty(threads):
    assert ordered_map(lambda x: x, [], threads=threads) == []
