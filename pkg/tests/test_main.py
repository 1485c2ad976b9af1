import json

import pytest

import main
from main import EXIT_OK, EXIT_RESOURCE, EXIT_USAGE


def run(capsys, *argv):
    code = main.main(['--format', 'json', *argv])
    return code, capsys.readouterr().out


def test_thresholds_finite_dp(capsys):
    code, out = run(capsys, 'thresholds', '--theta', '1', '--s', '2', '--n', '4')
    assert code == EXIT_OK
    rows = json.loads(out)
    assert rows[0]['win_probability'] == pytest.approx(17 / 24)


def test_thresholds_asymptotic_list(capsys):
    code, out = run(capsys, 'thresholds', '--theta', '0.5,2', '--s', '2')
    assert code == EXIT_OK
    rows = json.loads(out)
    assert [r['last_threshold'] for r in rows] == [2, 0]
    assert rows[1]['win_probability'] == pytest.approx(0.90167379, abs=5e-9)


def test_thresholds_uniform(capsys):
    code, out = run(capsys, 'thresholds', '--uniform', '--s', '1')
    assert code == EXIT_OK
    assert json.loads(out)[0]['win_probability'] == pytest.approx(0.3678794412, abs=1e-9)


def test_evaluate(capsys):
    code, out = run(capsys, 'evaluate', '--n', '10', '--theta', '1', '--k', '3')
    assert code == EXIT_OK
    rows = json.loads(out)
    assert [r['r'] for r in rows] == [0, 1]
    assert rows[0]['win_probability'] == pytest.approx(0.3 * sum(1 / i for i in range(3, 10)))


def test_expect_selections_limit(capsys):
    code, out = run(capsys, 'expect', '--theta', '0.5', '--s', '5')
    assert code == EXIT_OK
    row = json.loads(out)[0]
    assert row['unconditional'] == pytest.approx(2.5, abs=1e-6)


def test_expect_stop_finite(capsys):
    code, out = run(capsys, 'expect', '--theta', '1', '--n', '20', '--k', '5,9', '--what', 'stop',
                    '--model', 'dowry')
    assert code == EXIT_OK
    row = json.loads(out)[0]
    assert 0 < row['esr_unconditional'] <= 1


def test_simulate(capsys):
    code, out = run(capsys, 'simulate', '--n', '10', '--theta', '1', '--k', '3',
                    '--trials', '2000', '--seed', '4')
    assert code == EXIT_OK
    row = json.loads(out)[0]
    assert row['trials'] == 2000 and row['ks'] == '3'


def test_oracle_dumps(capsys):
    code, out = run(capsys, 'oracle', '--n', '4', '--theta', '1', '--s', '2', '--dump', 'tree')
    assert code == EXIT_OK
    assert json.loads(out)['win_probability'] == '17/24'
    code, out = run(capsys, 'oracle', '--n', '4', '--theta', '1/2', '--s', '2', '--dump', 'strike')
    assert code == EXIT_OK
    assert json.loads(out)['violations'] == []
    code, out = run(capsys, 'oracle', '--n', '4', '--theta', '1', '--k', '1')
    assert json.loads(out)[0]['win_probability'] == '11/24'


def test_output_file_relative_to_output_dir(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(main.config, 'OUTPUT_DIR', tmp_path)
    code = main.main(['--format', 'csv', '--output', 'dp.csv',
                      'thresholds', '--theta', '1', '--s', '1', '--n', '10'])
    assert code == EXIT_OK
    text = (tmp_path / 'dp.csv').read_text(encoding='utf-8')
    assert text.startswith('theta,s,n,thresholds,win_probability')
    assert capsys.readouterr().out == ''


def test_exit_codes(capsys):
    assert run(capsys, 'thresholds', '--theta', '-1')[0] == EXIT_USAGE
    assert run(capsys, 'evaluate', '--n', '5', '--theta', '1', '--k', '3,1')[0] == EXIT_USAGE
    assert run(capsys, 'oracle', '--n', '12', '--theta', '1')[0] == EXIT_RESOURCE
    with pytest.raises(SystemExit) as excinfo:
        main.main([])
    assert excinfo.value.code == 2


def test_evaluate_worked_example(capsys):
    code, out = run(capsys, 'evaluate', '--n', '4', '--theta', '1', '--k', '0,1')
    assert code == EXIT_OK
    assert json.loads(out)[0]['win_probability'] == pytest.approx(17 / 24)


def test_expect_uniform_stop_ratio(capsys):
    code, out = run(capsys, 'expect', '--uniform', '--s', '1', '--what', 'stop', '--model', 'genie')
    assert code == EXIT_OK
    row = json.loads(out)[0]
    assert row['esr_unconditional'] == pytest.approx(0.7357, abs=1e-3)
    assert row['esr_conditional'] == pytest.approx(0.6321, abs=1e-3)


def test_oracle_strike_dump_with_full_selections(capsys):
    code, out = run(capsys, 'oracle', '--n', '5', '--theta', '1', '--s', '5', '--dump', 'strike')
    assert code == EXIT_OK
    assert json.loads(out)['violations'] == []
    assert json.loads(out)['win_probability'] == '1'
