"""End-to-end runs of the command-line subcommands."""

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from src.main import COMMANDS, EXIT_INTERNAL, EXIT_OK, EXIT_USAGE, EXIT_VIOLATED, run
from src.reporting import read_csv, read_json


def _document(tmp_path, text, name='experiment.ini'):
    path = tmp_path / name
    path.write_text(text, encoding='utf-8')
    return str(path)


CERTIFY_CALM = """
[experiment]
operation = certify

[certify]
rule = calm
map = {"type": "lift", "g": {"rule": "identity"}}
perturbation = {"rule": "sine", "amplitude": 0.1}
x_bar = 0.0
alpha = 0.5
radius = 0.25
step = 0.01
"""


def test_counterexample_is_confirmed(tmp_path):
    assert run(['counterexample', '--out', str(tmp_path)]) == EXIT_OK
    record = read_json(tmp_path / 'counterexample.json')
    assert record['confirmed'] == {'subregular': True, 'calm': True, 'divergent': True}
    assert all(g >= 9 for g in record['growth_factors'])
    rows = read_csv(tmp_path / 'divergence.csv')
    assert [float(r['radius']) for r in rows] == [0.1, 0.01, 0.001]
    assert (tmp_path / 'regcert.log').exists()


ESTIMATE_STRONG_AT = """
[experiment]
operation = estimate

[estimate]
kind = strong_at
map = {"type": "perturbed_ramp"}
x_bar = 0.0
radius = 0.01
step = 1e-4
"""


def test_estimate_writes_its_record(tmp_path):
    config = _document(tmp_path, ESTIMATE_STRONG_AT)
    assert run(['estimate', '--config', config, '--out', str(tmp_path)]) == EXIT_OK
    record = read_json(tmp_path / 'estimate.json')
    assert record['kind'] == 'strong_at'
    assert record['estimates'][0]['value'] >= 90


def test_divergence_estimate_writes_a_table(tmp_path):
    config = _document(tmp_path, """
[estimate]
kind = divergence
map = {"type": "perturbed_ramp"}
x_bar = 0.0
radii = 0.1, 0.01
""")
    assert run(['estimate', '--config', config, '--out', str(tmp_path)]) == EXIT_OK
    assert len(read_csv(tmp_path / 'divergence.csv')) == 2
    assert read_json(tmp_path / 'estimate.json')['growth_factors'][0] >= 9


def test_certify_calm_rule(tmp_path):
    config = _document(tmp_path, CERTIFY_CALM)
    assert run(['certify', '--config', config, '--out', str(tmp_path)]) == EXIT_OK
    record = read_json(tmp_path / 'certify.json')
    assert record['output']['kind'] == 'strong-at'
    assert all(v['holds'] for v in record['validation'].values())


def test_certify_reports_an_understated_constant(tmp_path):
    config = _document(tmp_path, CERTIFY_CALM + "kappa = 0.5\n")
    assert run(['certify', '--config', config, '--out', str(tmp_path)]) == EXIT_VIOLATED
    record = read_json(tmp_path / 'certify.json')
    assert not record['validation']['input']['holds']


def test_certify_hypothesis_failure_is_a_usage_error(tmp_path):
    config = _document(tmp_path, CERTIFY_CALM + "kappa = 20.0\n")
    assert run(['certify', '--config', config, '--out', str(tmp_path)]) == EXIT_USAGE


def test_uniformize_locates_centres(tmp_path):
    config = _document(tmp_path, """
[uniformize]
family = {"rule": "additive"}
map = {"type": "lift", "g": {"rule": "constant"}}
t_values = 0.0, 0.05, 0.5
guess = 0.0
a = 0.5
b = 0.5
step = 0.01
""")
    assert run(['uniformize', '--config', config, '--out', str(tmp_path)]) == EXIT_OK
    record = read_json(tmp_path / 'uniform.json')
    assert record['validation']['holds']
    assert record['subcover'] == [0, 2]
    assert len(read_csv(tmp_path / 'uniform.csv')) == 3


def test_follow_certifies_the_trajectory(tmp_path):
    config = _document(tmp_path, """
[follow]
family = {"rule": "static", "g": {"rule": "identity"}}
map = {"type": "normal_cone_box", "box": [[-1.0, 1.0]]}
path = {"rule": "linear", "slope": 0.5}
horizon = 1.0
t_steps = 11
x0 = 0.0
trust_radius = 0.5
a = 0.25
b = 0.25
step = 0.01
""")
    assert run(['follow', '--config', config, '--out', str(tmp_path)]) == EXIT_OK
    record = read_json(tmp_path / 'follow.json')
    assert record['trajectory']['status'] == 'complete'
    assert record['warm_start_violations'] == []
    assert len(read_csv(tmp_path / 'trajectory.csv')) == 11


@pytest.mark.parametrize("argv", [
    ['estimate'],
    ['counterexample', '--radii', '0.01,0.1'],
    ['counterexample', '--eta', '0'],
])
def test_usage_errors(tmp_path, argv):
    assert run(argv + ['--out', str(tmp_path)]) == EXIT_USAGE


def test_document_for_another_operation(tmp_path):
    config = _document(tmp_path, CERTIFY_CALM)
    assert run(['estimate', '--config', config, '--out', str(tmp_path)]) == EXIT_USAGE


def test_unexpected_failure_is_an_internal_error(tmp_path, monkeypatch):
    def broken(ctx):
        raise ZeroDivisionError("division by zero")

    config = _document(tmp_path, ESTIMATE_STRONG_AT)
    monkeypatch.setitem(COMMANDS, 'estimate', broken)
    assert run(['estimate', '--config', config, '--out', str(tmp_path)]) == EXIT_INTERNAL
    assert 'ZeroDivisionError' in (tmp_path / 'regcert.log').read_text(encoding='utf-8')
