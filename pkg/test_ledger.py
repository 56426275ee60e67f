from unittest import mock

from sqlalchemy.exc import OperationalError

from core.database import RunRecord, db
from core.ledger import RunLedger
from utils.helpers import RunManifest


def _manifest(seed=3):
    return RunManifest(command='exact', config={'a_bisect_diff': True}, version='1.0.0', seed=seed)


def test_record_and_fetch_run(app):
    ledger = app.extensions['run_ledger']
    record = ledger.record_run(_manifest(), summary={'value': 1.5}, output_path='out.json')
    assert record.id is not None

    fetched = ledger.get_run(record.id).to_dict()
    assert fetched['command'] == 'exact'
    assert fetched['seed'] == '3'
    assert fetched['summary'] == {'value': 1.5}
    assert fetched['manifest']['config'] == {'a_bisect_diff': True}
    assert fetched['output_path'] == 'out.json'


def test_large_seed_is_stored_exactly(app):
    seed = 2 ** 64 - 1
    record = app.extensions['run_ledger'].record_run(_manifest(seed))
    assert int(db.session.get(RunRecord, record.id).seed) == seed


def test_get_runs_newest_first_with_limit(app):
    ledger = app.extensions['run_ledger']
    ids = [ledger.record_run(_manifest(seed)).id for seed in range(4)]
    runs = ledger.get_runs(limit=2)
    assert [r.id for r in runs] == ids[::-1][:2]


def test_disabled_ledger_records_nothing(app):
    ledger = RunLedger({'LEDGER_ENABLED': False})
    assert ledger.record_run(_manifest()) is None
    assert RunRecord.query.count() == 0


def test_database_errors_are_retried_then_swallowed(app):
    ledger = RunLedger({'LEDGER_MAX_RETRIES': 2, 'LEDGER_RETRY_DELAY': 0})
    error = OperationalError('INSERT', {}, Exception('database is locked'))
    with mock.patch.object(db.session, 'commit', side_effect=error) as commit:
        assert ledger.record_run(_manifest()) is None
    assert commit.call_count == 2


def test_initialize_disables_ledger_when_tables_cannot_be_created(app):
    ledger = RunLedger({'LEDGER_MAX_RETRIES': 2, 'LEDGER_RETRY_DELAY': 0})
    error = OperationalError('CREATE TABLE', {}, Exception('unable to open database file'))
    with mock.patch.object(db, 'create_all', side_effect=error):
        assert ledger.initialize() is False
    assert ledger.enabled is False
    assert ledger.record_run(_manifest()) is None
    assert ledger.get_runs() == []


def test_initialize_on_working_database(app):
    assert RunLedger({'LEDGER_RETRY_DELAY': 0}).initialize() is True
    assert RunLedger({'LEDGER_ENABLED': False}).initialize() is False
