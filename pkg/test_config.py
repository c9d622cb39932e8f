"""Tests for defaults, experiment documents and result files."""

import json
import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from src.config import Config, ExperimentConfig
from src.errors import ConfigError
from src.reporting import decode_float, format_real, read_csv, read_json, write_csv, write_json

DOCUMENT = """
[experiment]
operation = estimate
eta = 0.1

[estimate]
kind = strong_at
map = {"type": "perturbed_ramp"}
x_bar = 0.0
radius = 0.1
radii = 0.1, 0.01, 0.001
"""


def test_defaults_are_consistent():
    assert Config.validate() == []


def test_create_directories(tmp_path):
    out = Config.create_directories(tmp_path / 'a' / 'b')
    assert out.is_dir()


def test_document_values_are_typed():
    cfg = ExperimentConfig.from_ini(DOCUMENT)
    assert cfg.operation == 'estimate'
    assert cfg.get('experiment', 'eta') == 0.1
    assert cfg.get('estimate', 'x_bar') == (0.0,)
    assert cfg.get('estimate', 'radii') == (0.1, 0.01, 0.001)
    assert cfg.get('estimate', 'map') == '{"type":"perturbed_ramp"}'
    assert cfg.get('estimate', 'step') is None
    assert cfg.section('estimate')['kind'] == 'strong_at'


def test_canonical_text_is_stable():
    cfg = ExperimentConfig.from_ini(DOCUMENT)
    text = cfg.to_ini()
    assert ExperimentConfig.from_ini(text) == cfg
    assert ExperimentConfig.from_ini(text).to_ini() == text


@pytest.mark.parametrize("text", [
    "[plotting]\ncolour = red\n",
    "[estimate]\nkind = strong_at\nspeed = 3\n",
    "[estimate]\nkind = weak_at\n",
    "[estimate]\nradius = wide\n",
    "[estimate]\nmap = {not json}\n",
    "no section header\n",
])
def test_malformed_documents(text):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_ini(text)


def test_require_and_set():
    cfg = ExperimentConfig()
    with pytest.raises(ConfigError):
        cfg.require('certify', 'alpha')
    cfg.set('certify', 'alpha', 0.5)
    cfg.set('certify', 'x_bar', [0.0, 1.0])
    cfg.set('certify', 'map', {'type': 'ramp'})
    assert cfg.require('certify', 'alpha') == 0.5
    assert cfg.get('certify', 'x_bar') == (0.0, 1.0)
    assert json.loads(cfg.get('certify', 'map')) == {'type': 'ramp'}
    with pytest.raises(ConfigError):
        cfg.set('certify', 'colour', 'red')


def test_missing_document(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.load(tmp_path / 'absent.ini')


# ---------------------------------------------------------------------------
# Result files
# ---------------------------------------------------------------------------

def test_json_records_keep_nonfinite_values(tmp_path):
    path = write_json(tmp_path / 'record.json', {'value': math.inf, 'witness': None, 'n': 3})
    record = read_json(path)
    assert record == {'value': 'inf', 'witness': None, 'n': 3}
    assert decode_float(record['value']) == math.inf
    assert not (tmp_path / 'record.json.tmp').exists()


def test_json_rewrite_keeps_a_backup(tmp_path):
    path = tmp_path / 'record.json'
    write_json(path, {'round': 1})
    write_json(path, {'round': 2})
    assert read_json(Path(str(path) + '.bak')) == {'round': 1}
    path.write_text('{broken', encoding='utf-8')
    assert read_json(path) == {'round': 1}


def test_csv_reals_are_written_in_full(tmp_path):
    path = write_csv(tmp_path / 'table.csv', ('radius', 'estimate'), [[0.1, 1 / 3], [0.01, math.inf]])
    rows = read_csv(path)
    assert float(rows[0]['estimate']) == 1 / 3
    assert rows[1]['estimate'] == 'inf'
    assert format_real(0.1) == '1.0000000000000001e-01'
