import json

import numpy as np
import pytest

from model.physical import random_channels
from model.reduction import ReducedProblem, reduce
from utils.errors import InstanceParseError
from utils.serialization import (
    CSV_COLUMNS, InstanceFile, ResultRecord, SolutionFile, csv_text, decode_complex,
    dump_instance, encode_complex, format_number, parse_instance, parse_solution,
    read_csv, solution_to_dict,
)


def _physical_text(**problem):
    body = {'h1': [[1.0, 0.0], [0.0, 1.0]], 'h2': [[0.5, -0.5], [2.0, 0.0]], 'gamma1': 2.0}
    body.update(problem)
    return json.dumps({'version': 1, 'kind': 'physical', 'problem': body}, indent=2)


def test_physical_instance_round_trip():
    prob = random_channels(4, M=3, p1=0.5, gamma2=3.0)
    inst = InstanceFile(problem=prob, id='ch-4', seed=4, solver={'steps': 50})
    back = parse_instance(dump_instance(inst))
    assert back.kind == 'physical'
    np.testing.assert_array_equal(back.problem.h1, prob.h1)
    np.testing.assert_array_equal(back.problem.h2, prob.h2)
    assert (back.problem.p1, back.problem.gamma2) == (0.5, 3.0)
    assert (back.id, back.seed, back.solver) == ('ch-4', 4, {'steps': 50})


def test_reduced_instance_round_trip_keeps_lift():
    red = reduce(random_channels(2, M=4))
    back = parse_instance(dump_instance(InstanceFile(problem=red))).problem
    assert isinstance(back, ReducedProblem)
    assert back.coefficients() == red.coefficients()
    assert back.scale == red.scale
    np.testing.assert_array_equal(back.lift.left, red.lift.left)
    np.testing.assert_array_equal(back.lift.right, red.lift.right)


def test_real_channels_are_accepted():
    inst = parse_instance(_physical_text(h1=[1.0, 2.0], h2=[0.0, 1.0]))
    np.testing.assert_array_equal(inst.problem.h1, [1.0, 2.0])
    assert inst.problem.gamma1 == 2.0
    assert inst.problem.p1 == 1.0


def test_decode_complex_distinguishes_rank():
    real_matrix = decode_complex([[1.0, 2.0], [3.0, 4.0]], 'm', ndim=2)
    assert real_matrix.shape == (2, 2) and not np.any(real_matrix.imag)
    pairs = decode_complex([[1.0, 2.0], [3.0, 4.0]], 'v', ndim=1)
    np.testing.assert_array_equal(pairs, [1 + 2j, 3 + 4j])
    np.testing.assert_array_equal(decode_complex(encode_complex([1 - 1j, 2j]), 'v'), [1 - 1j, 2j])


def test_json_syntax_error_reports_the_line():
    text = '{\n  "version": 1,\n  "kind": "physical",\n  "problem": {,}\n}'
    with pytest.raises(InstanceParseError) as info:
        parse_instance(text)
    assert info.value.line == 4
    assert info.value.exit_code == 2


def test_missing_field_is_named():
    text = json.dumps({'version': 1, 'kind': 'reduced', 'problem': {'r': 0.5, 'q1': 1, 'q2': 1,
                                                                     'c1': 1, 'c2': 1, 'd1': 0}})
    with pytest.raises(InstanceParseError) as info:
        parse_instance(text)
    assert info.value.field == 'problem.d2'
    assert "problem.d2" in str(info.value)


@pytest.mark.parametrize("text, field", [
    (json.dumps({'kind': 'physical', 'problem': {}}), 'version'),
    (json.dumps({'version': 2, 'kind': 'physical', 'problem': {}}), 'version'),
    (json.dumps({'version': 1, 'kind': 'magic', 'problem': {}}), 'kind'),
    (_physical_text(gamma1=True), 'problem.gamma1'),
    (_physical_text(h1=[[1.0, 'x']]), 'problem.h1'),
    (_physical_text(gamma1=-1.0), 'problem'),
    (_physical_text(h1=[1.0, 2.0, 3.0]), 'problem'),
])
def test_invalid_instances(text, field):
    with pytest.raises(InstanceParseError) as info:
        parse_instance(text)
    assert info.value.field == field


def test_non_object_top_level():
    with pytest.raises(InstanceParseError):
        parse_instance('[1, 2]')


def test_solution_files():
    sol = parse_solution(json.dumps({'version': 1, 'kind': 'solution', 'matrix': [0.5, 0, 0, -0.5],
                                     'lambda1': 0.25}))
    assert sol.matrix.shape == (2, 2) and not sol.is_complex
    assert (sol.lambda1, sol.lambda2) == (0.25, None)

    complex_sol = SolutionFile(matrix=np.array([[1 + 1j, 0], [0, 1]]), space='reduced')
    back = parse_solution(json.dumps(solution_to_dict(complex_sol)))
    assert back.is_complex
    np.testing.assert_array_equal(back.matrix, complex_sol.matrix)

    physical = parse_solution(json.dumps({'version': 1, 'kind': 'solution', 'space': 'physical',
                                          'matrix': np.eye(3).tolist()}))
    assert physical.space == 'physical' and physical.matrix.shape == (3, 3)


def test_result_record_is_a_solution():
    record = ResultRecord(id='x', a=[0.5, 0.0, 0.0, -0.5], lambda1=0.25, lambda2=0.25, wall_time=0.1)
    sol = parse_solution(json.dumps(record.to_dict()))
    np.testing.assert_array_equal(sol.matrix, [[0.5, 0.0], [0.0, -0.5]])
    assert sol.lambda2 == 0.25


def test_bad_solutions():
    with pytest.raises(InstanceParseError):
        parse_solution(json.dumps({'version': 1, 'kind': 'solution', 'matrix': [1, 2, 3]}))
    with pytest.raises(InstanceParseError):
        parse_solution(json.dumps({'version': 1, 'kind': 'solution', 'space': 'other', 'matrix': [1, 0, 0, 1]}))
    with pytest.raises(InstanceParseError):
        parse_solution(json.dumps({'version': 1, 'kind': 'result', 'a': None}))


def test_record_timing_is_optional():
    record = ResultRecord(id='1', power=0.5, wall_time=0.25, beamformer=np.eye(2) * 1j)
    assert 'wall_time' not in record.to_dict(include_timing=False)
    data = record.to_dict()
    assert data['kind'] == 'result' and data['wall_time'] == 0.25
    back = ResultRecord.from_dict(json.loads(json.dumps(data)))
    np.testing.assert_array_equal(back.beamformer, np.eye(2) * 1j)
    assert back.power == 0.5


def test_number_formatting():
    assert format_number(0.1) == '0.10000000000000001'
    assert format_number(np.float64(1.0) / 3.0) == '0.33333333333333331'
    assert format_number(None) == ''
    assert format_number(3) == '3'
    assert format_number(True) == 'true'


def test_csv_layout():
    rows = [ResultRecord(id='0', seed=7, status='ok', power=0.5, wall_time=1.0),
            {'id': 'summary', 'status': 'summary', 'n_ok': 1, 'n_failed': 0, 'power': 0.5}]
    text = csv_text(rows)
    lines = text.splitlines()
    assert lines[0] == ','.join(CSV_COLUMNS)
    assert 'wall_time' not in lines[0]
    parsed = read_csv(text)
    assert parsed[0]['power'] == '0.5' and parsed[0]['seed'] == '7' and parsed[0]['n_ok'] is None
    assert parsed[1]['n_ok'] == '1'


def test_csv_header_is_checked():
    with pytest.raises(InstanceParseError):
        read_csv('a,b\n1,2\n')
