import json
import math
from functools import partial
from pathlib import Path

import pytest
from flask import Flask

import app as tempo_app
from config import TestingConfig
from core.lhv_model import DerivationReport


def _json(result):
    assert result.exit_code == 0, result.output
    return json.loads(result.stdout)


def test_exact_sqrt2_configuration(invoke):
    result = invoke('exact', '--b', '0,0,1', '--c', '1,0,0', '--a-bisect-diff', '--json')
    data = _json(result)
    assert data['report']['functional_value'] == pytest.approx(1.414213562, abs=1e-9)
    assert data['report']['violated'] is True


def test_exact_text_output(invoke):
    result = invoke('exact', '--a', '0,0,1', '--b', '0,0,1', '--c', '0,0,1')
    assert result.exit_code == 0
    assert 'not violated' in result.output


def test_exact_zero_vector_is_a_usage_error(invoke):
    result = invoke('exact', '--a', '0,0,0', '--b', '0,0,1', '--c', '1,0,0')
    assert result.exit_code == 2
    assert 'ZeroVector' in result.output


def test_exact_bisect_of_equal_directions(invoke):
    result = invoke('exact', '--b', '0,0,1', '--c', '0,0,1', '--a-bisect-diff')
    assert result.exit_code == 2
    assert 'ZeroVector' in result.output


def test_optimize_finds_three_halves(invoke):
    data = _json(invoke('optimize', '--restarts', '20', '--tol', '1e-8', '--seed', '0', '--json'))
    assert data['value'] == pytest.approx(1.5, abs=1e-6)
    assert data['sqrt2_instance_value'] == pytest.approx(math.sqrt(2), abs=1e-12)


def test_optimize_output_is_reproducible(invoke):
    args = ('optimize', '--restarts', '5', '--tol', '1e-6', '--seed', '4', '--json')
    first = invoke(*args)
    second = invoke('optimize', '--restarts', '5', '--tol', '1e-6', '--seed', '4', '--workers', '3', '--json')
    assert first.stdout == second.stdout


def test_optimize_invalid_restarts(invoke):
    result = invoke('optimize', '--restarts', '0')
    assert result.exit_code == 2


def test_simulate_single_trial_is_insufficient(invoke):
    result = invoke('simulate', '--trials', '1', '--seed', '0')
    assert result.exit_code == 3
    assert 'InsufficientTrials' in result.output


def test_simulate_sqrt2_configuration(invoke):
    data = _json(invoke('simulate', '--trials', '200000', '--seed', '42', '--json'))
    assert data['report']['violated'] is True
    for label in ('ab', 'ac', 'bc'):
        assert abs(data['estimates'][f'p_{label}'] - data['exact'][f'p_{label}']) <= 0.01


def test_simulate_shards_do_not_change_output(invoke):
    one = invoke('simulate', '--trials', '150000', '--seed', '7', '--shards', '1', '--json')
    eight = invoke('simulate', '--trials', '150000', '--seed', '7', '--shards', '8', '--json')
    assert _json(one)['estimates'] == _json(eight)['estimates']


def test_simulate_rejects_bad_initial_state(invoke):
    assert invoke('simulate', '--initial', 'bloch:1,1,0').exit_code == 2
    assert invoke('simulate', '--initial', 'spiral').exit_code == 2
    assert invoke('simulate', '--times', '0,2,1').exit_code == 2


def test_simulate_seed_from_environment(monkeypatch, tmp_path):
    monkeypatch.setenv('TEMPO_BELL_SEED', '9')
    app = tempo_app.create_app(TestingConfig)
    assert app.config['SEED'] == 9
    app.config['MANIFEST_DIR'] = str(tmp_path)
    result = app.test_cli_runner().invoke(tempo_app.cli, ['simulate', '--trials', '3000', '--json'])
    assert _json(result)['experiment']['seed'] == 9


def test_manifest_replay_reproduces_output(invoke, tmp_path):
    out = tmp_path / 'run.json'
    first = invoke('simulate', '--trials', '20000', '--seed', '5', '--selection', 'cyclic',
                   '--precession', 'axis:0,1,0,0.7', '--json', '--out', str(out))
    manifest = tmp_path / 'run.json.manifest.json'
    assert manifest.exists()
    data = json.loads(manifest.read_text())
    assert data['command'] == 'simulate'
    assert data['seed'] == 5
    replay = invoke('simulate', '--config', str(manifest), '--json')
    assert _json(replay) == _json(first)
    assert json.loads(out.read_text()) == _json(first)


def test_config_flag_overrides_file(invoke, tmp_path):
    cfg = tmp_path / 'cfg.json'
    cfg.write_text(json.dumps({'restarts': 3, 'seed': 1, 'tol': 1e-4}))
    data = _json(invoke('optimize', '--config', str(cfg), '--seed', '2', '--json'))
    assert data['restarts_used'] == 3
    bad = tmp_path / 'bad.json'
    bad.write_text(json.dumps({'no_such_option': 1}))
    assert invoke('optimize', '--config', str(bad)).exit_code == 2


def test_out_into_missing_directory_is_io_error(invoke, tmp_path):
    result = invoke('exact', '--b', '0,0,1', '--c', '1,0,0', '--a-bisect-diff',
                    '--out', str(tmp_path / 'missing' / 'x.json'))
    assert result.exit_code == 4


def test_sweep_csv(invoke, tmp_path):
    out = tmp_path / 'sweep.csv'
    result = invoke('sweep', '--grid-points', '201', '--out', str(out))
    assert result.exit_code == 0, result.output
    lines = out.read_text().splitlines()
    assert lines[0] == 'u,functional'
    assert len(lines) == 202
    rows = {round(float(u), 9): float(g) for u, g in (line.split(',') for line in lines[1:])}
    assert rows[0.0] == pytest.approx(math.sqrt(2), abs=1e-8)
    assert rows[0.5] == pytest.approx(1.5, abs=1e-8)
    assert (tmp_path / 'sweep.csv.manifest.json').exists()


def test_sweep_json_and_invalid_grid(invoke, tmp_path):
    out = tmp_path / 'sweep.json'
    assert invoke('sweep', '--grid-points', '5', '--out', str(out), '--format', 'json').exit_code == 0
    rows = json.loads(out.read_text())
    assert [r['u'] for r in rows] == [-1.0, -0.5, 0.0, 0.5, 1.0]
    assert invoke('sweep', '--grid-points', '1', '--out', str(out)).exit_code == 2


def test_lhv_scan_extremals(invoke):
    data = _json(invoke('lhv', '--scan-extremals', '--json'))
    assert len(data['strategies']) == 8
    assert data['max_functional'] == 1
    assert all(row['functional'] <= 1 for row in data['strategies'])


def test_lhv_random_mixtures(invoke):
    data = _json(invoke('lhv', '--random', '10000', '--seed', '3', '--json'))
    assert data['passed'] == 10000
    assert data['max_functional'] <= 1 + 1e-12


def test_lhv_mixture_file(invoke, tmp_path):
    mixture = tmp_path / 'mixture.json'
    mixture.write_text(json.dumps({'strategies': {'+++': 0.5, '+-+': 0.25, '++-': 0.25}}))
    data = _json(invoke('lhv', '--mixture', str(mixture), '--trials', '30000', '--json'))
    assert data['correlations'] == {'p_ab': 0.5, 'p_ac': 0.5, 'p_bc': 0.0}
    assert data['simulation']['report']['violated'] is False


def test_lhv_invalid_mixture(invoke, tmp_path):
    mixture = tmp_path / 'mixture.json'
    mixture.write_text(json.dumps({'weights': [0.5, 0.6, 0, 0, 0, 0, 0, 0]}))
    result = invoke('lhv', '--mixture', str(mixture))
    assert result.exit_code == 2
    assert 'InvalidMixture' in result.output


def test_lhv_requires_one_mode(invoke):
    assert invoke('lhv').exit_code == 2
    assert invoke('lhv', '--scan-extremals', '--random', '3').exit_code == 2


def test_derive_check_passes(invoke):
    data = _json(invoke('derive-check', '--random', '1000', '--seed', '0', '--json'))
    assert data['passed'] == 1000
    assert data['failures'] == []


def test_derive_check_failure_exit_code(invoke, monkeypatch):
    broken = DerivationReport(True, 0.0, True, 0.0, False, -0.5)
    monkeypatch.setattr(tempo_app, 'verify_derivation_chain', lambda mixture: broken)
    result = invoke('derive-check', '--random', '3', '--seed', '0')
    assert result.exit_code == 1
    assert 'FAIL' in result.output


def test_analyze_records_round_trip(invoke, tmp_path):
    records = tmp_path / 'records.csv'
    simulated = _json(invoke('simulate', '--trials', '9000', '--seed', '2', '--records-out', str(records), '--json'))
    analyzed = _json(invoke('analyze', '--records', str(records), '--json'))
    assert analyzed['records'] == 9000
    assert analyzed['estimates'] == simulated['estimates']


def test_analyze_rejects_malformed_records(invoke, tmp_path):
    records = tmp_path / 'records.csv'
    records.write_text('pair,first,second\nAB,1,0\n')
    assert invoke('analyze', '--records', str(records)).exit_code == 2
    records.write_text('pair,first\nAB,1\n')
    assert invoke('analyze', '--records', str(records)).exit_code == 2


def test_runs_are_recorded_in_ledger(invoke):
    invoke('exact', '--b', '0,0,1', '--c', '1,0,0', '--a-bisect-diff')
    invoke('optimize', '--restarts', '2', '--tol', '1e-4', '--seed', '1')
    runs = _json(invoke('runs', '--json'))
    assert [r['command'] for r in runs][:2] == ['optimize', 'exact']
    assert runs[0]['manifest']['config']['seed'] == 1


@pytest.mark.parametrize('content', [
    '{not json',
    json.dumps({'weights': ['x'] * 8}),
    json.dumps({'strategies': {'+++': 'half'}}),
    json.dumps([0.125] * 8),
])
def test_lhv_malformed_mixture_file_is_a_usage_error(invoke, tmp_path, content):
    mixture = tmp_path / 'mixture.json'
    mixture.write_text(content)
    result = invoke('lhv', '--mixture', str(mixture))
    assert result.exit_code == 2
    assert 'InvalidMixture' in result.output
    assert 'Traceback' not in result.output


def test_analyze_rejects_row_with_missing_cell(invoke, tmp_path):
    records = tmp_path / 'records.csv'
    records.write_text('pair,first,second\nAB,1,1\nAB,1\n')
    result = invoke('analyze', '--records', str(records))
    assert result.exit_code == 2
    assert ':3:' in result.output


class _SmallBlockConfig(TestingConfig):
    BLOCK_SIZE = 1000
    DEFAULT_TRIALS = 5000
    SEED = 17


def test_manifest_records_defaults_from_app_config(invoke, tmp_path):
    app = tempo_app.create_app(_SmallBlockConfig)
    out = tmp_path / 'run.json'
    with app.app_context():
        first = app.test_cli_runner().invoke(tempo_app.cli, ['simulate', '--json', '--out', str(out)])
    data = _json(first)
    assert data['experiment']['block_size'] == 1000

    manifest = json.loads((tmp_path / 'run.json.manifest.json').read_text())
    assert manifest['seed'] == 17
    assert manifest['config']['trials'] == 5000
    assert manifest['config']['block_size'] == 1000
    assert manifest['config']['seed'] == 17
    assert manifest['config']['sigma'] == 3.0

    replay = invoke('simulate', '--config', str(tmp_path / 'run.json.manifest.json'), '--json')
    assert _json(replay) == data


def test_block_size_option_changes_the_sample(invoke):
    default = _json(invoke('simulate', '--trials', '5000', '--seed', '4', '--json'))
    small = _json(invoke('simulate', '--trials', '5000', '--seed', '4', '--block-size', '1000', '--json'))
    assert small['experiment']['block_size'] == 1000
    assert small['estimates'] != default['estimates']


def test_optimize_manifest_records_search_settings(invoke, tmp_path):
    manifest = tmp_path / 'optimize.manifest.json'
    first = invoke('optimize', '--restarts', '2', '--tol', '1e-4', '--seed', '3', '--json',
                   '--manifest', str(manifest))
    config_values = json.loads(manifest.read_text())['config']
    assert config_values['initial_step'] == pytest.approx(math.pi / 8)
    assert config_values['max_sweeps'] == 100000
    replay = invoke('optimize', '--config', str(manifest), '--json')
    assert _json(replay) == _json(first)


def test_simulate_without_out_still_writes_a_manifest(app, invoke):
    first = invoke('simulate', '--trials', '4000', '--seed', '8', '--json')
    manifests = list(Path(app.config['MANIFEST_DIR']).glob('simulate-*.manifest.json'))
    assert len(manifests) == 1
    replay = invoke('simulate', '--config', str(manifests[0]), '--json')
    assert _json(replay) == _json(first)


def test_unreachable_ledger_degrades_to_no_recording(tmp_path):
    class UnreachableLedgerConfig(TestingConfig):
        LEDGER_MAX_RETRIES = 1
        SQLALCHEMY_DATABASE_URI = f"sqlite:///{tmp_path}/missing/ledger.db"

    app = tempo_app.create_app(UnreachableLedgerConfig)
    assert app.extensions['run_ledger'].enabled is False
    runner = app.test_cli_runner()
    result = runner.invoke(tempo_app.cli, ['exact', '--b', '0,0,1', '--c', '1,0,0', '--a-bisect-diff'])
    assert result.exit_code == 0, result.output
    runs = runner.invoke(tempo_app.cli, ['runs'])
    assert runs.exit_code == 0
    assert 'No runs recorded.' in runs.output


class _FileLedgerConfig(TestingConfig):
    SQLALCHEMY_DATABASE_URI = None


def test_default_ledger_persists_across_processes(monkeypatch, tmp_path):
    monkeypatch.setattr(tempo_app, 'Flask', partial(Flask, instance_path=str(tmp_path / 'instance')))
    first = tempo_app.create_app(_FileLedgerConfig)
    assert first.config['SQLALCHEMY_DATABASE_URI'].startswith('sqlite:///')
    assert first.config['MANIFEST_DIR'] == str(tmp_path / 'instance' / 'manifests')
    result = first.test_cli_runner().invoke(tempo_app.cli, ['exact', '--b', '0,0,1', '--c', '1,0,0',
                                                            '--a-bisect-diff'])
    assert result.exit_code == 0, result.output
    assert (tmp_path / 'instance' / 'tempo_bell_ledger.db').exists()

    second = tempo_app.create_app(_FileLedgerConfig)
    runs = _json(second.test_cli_runner().invoke(tempo_app.cli, ['runs', '--json']))
    assert [r['command'] for r in runs] == ['exact']
