import json

import numpy as np
import pytest

from main import main
from model.physical import PhysicalProblem
from utils.serialization import InstanceFile, dump_instance, read_csv

SYMMETRIC = {'version': 1, 'kind': 'reduced',
             'problem': {'r': 1.0, 'q1': 0.0, 'q2': 0.0, 'c1': 1.0, 'c2': 1.0, 'd1': 0.0, 'd2': 0.0}}


@pytest.fixture
def write(tmp_path):
    def writer(name, payload):
        path = tmp_path / name
        path.write_text(payload if isinstance(payload, str) else json.dumps(payload), encoding='utf-8')
        return str(path)
    return writer


@pytest.fixture
def physical_instance(write):
    # SINR ceilings: p2 ||h2||^2 = 3.51 and p1 ||h1||^2 = 4.545
    h1 = 1.5 * np.array([1.0, 0.5j, -0.3, 0.8 + 0.2j])
    h2 = 1.5 * np.array([0.2, 1.0, 0.4j, -0.6])
    prob = PhysicalProblem(h1=h1, h2=h2, gamma1=1.5, gamma2=2.0)
    return write('physical.json', dump_instance(InstanceFile(problem=prob, id='ch-31', seed=31)))


def test_solve_reduced_instance(write, capsys):
    assert main(['--quiet', 'solve', write('sym.json', SYMMETRIC), '--no-timing']) == 0
    record = json.loads(capsys.readouterr().out)
    assert record['kind'] == 'result' and record['status'] == 'ok'
    assert record['power'] == pytest.approx(0.5)
    assert 'wall_time' not in record


def test_solve_physical_instance_meets_targets(physical_instance, tmp_path, capsys):
    trace = tmp_path / 'trace.csv'
    code = main(['--quiet', 'solve', physical_instance, '--trace', str(trace), '--verify', '--starts', '4'])
    assert code == 0
    record = json.loads(capsys.readouterr().out)
    assert record['sinr1'] >= 1.5 * (1 - 1e-6)
    assert record['sinr2'] >= 2.0 * (1 - 1e-6)
    assert record['physical_power'] > 0
    assert record['oracle_gap'] <= 5e-3
    assert len(record['beamformer']) == 4
    assert trace.read_text().splitlines()[0] == 'branch,w,power,lambda1,lambda2'


def test_solve_writes_csv(write, capsys):
    assert main(['--quiet', 'solve', write('sym.json', SYMMETRIC), '--format', 'csv']) == 0
    rows = read_csv(capsys.readouterr().out)
    assert len(rows) == 1 and float(rows[0]['power']) == pytest.approx(0.5)


def test_parallel_channels_exit_3(write, capsys):
    h = [[1.0, 0.5], [0.0, -1.0], [0.3, 0.0]]
    instance = {'version': 1, 'kind': 'physical', 'problem': {'h1': h, 'h2': h}}
    assert main(['--quiet', 'solve', write('par.json', instance)]) == 3
    assert 'DegenerateChannels' in capsys.readouterr().err


def test_unreachable_targets_exit_4(write):
    instance = {'version': 1, 'kind': 'physical',
                'problem': {'h1': [1.0, 0.0], 'h2': [0.0, 1.0], 'gamma1': 5.0}}
    assert main(['--quiet', 'solve', write('inf.json', instance), '--starts', '2']) == 4


def test_parse_errors_exit_2(write, capsys):
    assert main(['--quiet', 'solve', write('bad.json', '{"version": 1,\n "kind": }')]) == 2
    error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert error['error'] == 'InstanceParseError' and error['line'] == 2
    assert main(['--quiet', 'solve', 'does-not-exist.json']) == 2


def test_bad_option_values_exit_2(write):
    assert main(['--quiet', 'solve', write('sym.json', SYMMETRIC), '--steps', '0']) == 2
    solver_block = dict(SYMMETRIC, solver={'stepz': 3})
    assert main(['--quiet', 'solve', write('blk.json', solver_block)]) == 2


def test_usage_errors_exit_via_argparse():
    with pytest.raises(SystemExit):
        main(['solve'])


def test_batch_is_reproducible(capsys):
    argv = ['--quiet', 'batch', '--count', '3', '-M', '4', '--gamma', '0dB,3dB', '--seed', '5']
    assert main(argv) == 0
    first = capsys.readouterr().out
    assert main(argv + ['--workers', '2']) == 0
    assert capsys.readouterr().out == first

    rows = read_csv(first)
    assert len(rows) == 8
    assert [r['id'] for r in rows] == ['0', '1', '2', 'summary'] * 2
    for summary in (rows[3], rows[7]):
        assert int(summary['n_ok']) + int(summary['n_failed']) == 3
    assert float(rows[0]['gamma1']) == pytest.approx(1.0)
    assert float(rows[4]['gamma1']) == pytest.approx(10 ** 0.3)


def test_batch_json_without_timing(capsys):
    argv = ['--quiet', 'batch', '--count', '2', '--gamma', '1', '--seed', '1',
            '--format', 'json', '--no-timing', '--starts', '4']
    assert main(argv) == 0
    first = capsys.readouterr().out
    assert main(argv) == 0
    assert capsys.readouterr().out == first
    rows = json.loads(first)
    assert rows[-1]['id'] == 'summary'
    assert all('wall_time' not in row for row in rows)


def test_batch_power_grows_with_target(capsys):
    argv = ['--quiet', 'batch', '--count', '6', '-M', '8', '--gamma', '0.25,0.5,1', '--seed', '3']
    assert main(argv) == 0
    summaries = [r for r in read_csv(capsys.readouterr().out) if r['id'] == 'summary']
    assert all(s['n_failed'] == '0' for s in summaries)
    powers = [float(s['physical_power']) for s in summaries]
    assert powers == sorted(powers)


def test_verify_round_trip(write, physical_instance, capsys):
    assert main(['--quiet', 'solve', physical_instance]) == 0
    solution = write('solution.json', capsys.readouterr().out)
    assert main(['--quiet', 'verify', physical_instance, solution, '--starts', '4']) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary['passed']
    assert summary['realification_case'] is None


def test_verify_rejects_the_zero_matrix(write, capsys):
    zero = {'version': 1, 'kind': 'solution', 'matrix': [0, 0, 0, 0]}
    assert main(['--quiet', 'verify', write('sym.json', SYMMETRIC), write('zero.json', zero),
                 '--starts', '2']) == 0
    summary = json.loads(capsys.readouterr().out)
    assert not summary['passed']


def test_verify_realifies_a_complex_solution(write, capsys):
    a = np.exp(0.4j) * np.array([0.5, 0.0, 0.0, -0.5])
    pairs = [[[v.real, v.imag] for v in row] for row in a.reshape(2, 2)]
    sol = {'version': 1, 'kind': 'solution', 'matrix': pairs}
    assert main(['--quiet', 'verify', write('sym.json', SYMMETRIC), write('c.json', sol),
                 '--starts', '4']) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary['passed']
    assert summary['input_power'] == pytest.approx(0.5)
    assert summary['power'] == pytest.approx(0.5)


def test_verify_physical_matrix(physical_instance, write, capsys):
    assert main(['--quiet', 'solve', physical_instance]) == 0
    record = json.loads(capsys.readouterr().out)
    sol = {'version': 1, 'kind': 'solution', 'space': 'physical', 'matrix': record['beamformer']}
    assert main(['--quiet', 'verify', physical_instance, write('phys.json', sol), '--starts', '4']) == 0
    summary = json.loads(capsys.readouterr().out)
    names = [c['name'] for c in summary['checks']]
    assert names[:2] == ['sinr_1', 'sinr_2']
    assert summary['passed']


def test_reduce_emits_reduced_instance(physical_instance, capsys):
    assert main(['--quiet', 'reduce', physical_instance]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data['kind'] == 'reduced' and data['id'] == 'ch-31'
    assert 0 < data['problem']['r'] <= 1
    assert 'lift' in data['problem']
