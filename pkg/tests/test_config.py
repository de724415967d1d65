import json

import pytest

from ehpolicy.config import ExperimentDefaults, load_experiment_config
from ehpolicy.errors import ConfigError
from ehpolicy.utils import dumps, parse_range, parse_spec, to_jsonable


def test_defaults():
    cfg = load_experiment_config()
    assert cfg['UTILITY'] == ExperimentDefaults.UTILITY
    assert cfg['GRID'] == 401
    assert cfg['DETERMINISTIC'] is False


def test_file_then_env_then_flags(tmp_path, monkeypatch):
    path = tmp_path / 'exp.json'
    path.write_text(json.dumps({'utility': 'sqrt', 'battery': 2.0, 'trials': 5, 'emit-csv': 'out.csv'}))
    monkeypatch.setenv('EHPOLICY_TRIALS', '7')
    cfg = load_experiment_config(str(path), {'battery': 3.0, 'horizon': None})
    assert cfg['UTILITY'] == 'sqrt'
    assert cfg['EMIT_CSV'] == 'out.csv'
    assert cfg['TRIALS'] == 7
    assert cfg['BATTERY'] == 3.0
    assert cfg['HORIZON'] == ExperimentDefaults.HORIZON


def test_toml_file(tmp_path):
    path = tmp_path / 'exp.toml'
    path.write_text('utility = "exp_sat:beta=2"\narrivals = "uniform:lo=0,hi=4"\nbattery = 4.0\n')
    cfg = load_experiment_config(str(path))
    assert cfg['ARRIVALS'] == 'uniform:lo=0,hi=4'


def test_bad_files(tmp_path):
    unknown = tmp_path / 'bad.json'
    unknown.write_text(json.dumps({'colour': 'red'}))
    with pytest.raises(ConfigError):
        load_experiment_config(str(unknown))
    broken = tmp_path / 'broken.json'
    broken.write_text('{not json')
    with pytest.raises(ConfigError):
        load_experiment_config(str(broken))
    with pytest.raises(ConfigError):
        load_experiment_config(str(tmp_path / 'exp.yaml'))


def test_parse_spec():
    assert parse_spec('exp_sat:beta=2') == ('exp_sat', {'beta': 2.0})
    assert parse_spec('discrete:v=0|2,p=0.5|0.5') == ('discrete', {'v': [0.0, 2.0], 'p': [0.5, 0.5]})
    assert parse_spec('sqrt') == ('sqrt', {})
    with pytest.raises(ConfigError):
        parse_spec('exp_sat:beta')
    with pytest.raises(ConfigError):
        parse_spec('  ')


def test_parse_range():
    mus = parse_range('1e1:1e6:log')
    assert len(mus) == 6
    assert mus[0] == pytest.approx(10.0) and mus[-1] == pytest.approx(1e6)
    assert list(parse_range('0:1:lin:3')) == [0.0, 0.5, 1.0]
    with pytest.raises(ConfigError):
        parse_range('1:2:cubic')
    with pytest.raises(ConfigError):
        parse_range('a:b')


def test_non_finite_values_serialize_as_strings():
    assert to_jsonable({'a': float('-inf'), 'b': float('nan')}) == {'a': '-inf', 'b': 'nan'}
    assert dumps({'b': 1, 'a': 2}).index('"a"') < dumps({'b': 1, 'a': 2}).index('"b"')
