"""Instance, solution and result file formats.

All files are JSON objects carrying a ``version`` and a ``kind``. Complex
numbers are written as ``[re, im]`` pairs. Batch results go out as CSV with
a fixed column order and 17 significant digits. SCHEMA.md documents the
formats.
"""

import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, TextIO, Union

import numpy as np

from config import Settings
from model.physical import PhysicalProblem
from model.reduction import LiftData, ReducedProblem
from utils.errors import InstanceParseError

PHYSICAL_FIELDS = ('p1', 'p2', 'sigma_r2', 'sigma1_2', 'sigma2_2', 'gamma1', 'gamma2')
REDUCED_FIELDS = ('r', 'q1', 'q2', 'c1', 'c2', 'd1', 'd2')


# ----------------------------------------------------------------------
# Low-level helpers
# ----------------------------------------------------------------------

def encode_complex(values: np.ndarray) -> list:
    """Nested lists of [re, im] pairs mirroring the array shape."""
    arr = np.asarray(values, dtype=complex)
    if arr.ndim == 0:
        return [float(arr.real), float(arr.imag)]
    return [encode_complex(row) for row in arr]


def decode_complex(data: Any, name: str, ndim: Union[int, tuple] = 1) -> np.ndarray:
    """Inverse of encode_complex.

    An array of the expected rank holding plain numbers is read as real;
    one extra trailing axis of length 2 is read as [re, im] pairs.

    Args:
        data: Parsed JSON value
        name: Field path for error messages
        ndim: Accepted rank(s) of the decoded array

    Raises:
        InstanceParseError: Ragged, non-numeric, non-finite or wrongly shaped data
    """
    ranks = (ndim,) if isinstance(ndim, int) else tuple(ndim)
    if _contains_bool(data):
        raise InstanceParseError("booleans are not numbers", field=name)
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as e:
        raise InstanceParseError("expected a (nested) list of numbers", field=name) from e
    if not np.all(np.isfinite(arr)):
        raise InstanceParseError("values must be finite", field=name)
    if arr.ndim in ranks:
        return arr.astype(complex)
    if arr.ndim - 1 in ranks and arr.shape[-1] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    raise InstanceParseError(f"unexpected array shape {arr.shape}", field=name)


def _contains_bool(data: Any) -> bool:
    if isinstance(data, bool):
        return True
    if isinstance(data, list):
        return any(_contains_bool(item) for item in data)
    return False


def encode_real(values: np.ndarray) -> list:
    return np.asarray(values, dtype=float).tolist()


def _finite(value: Any, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InstanceParseError(f"expected a number, got {type(value).__name__}", field=name)
    value = float(value)
    if not math.isfinite(value):
        raise InstanceParseError("value must be finite", field=name)
    return value


def _require(data: Dict[str, Any], key: str, prefix: str) -> Any:
    if key not in data:
        raise InstanceParseError("missing required field", field=f"{prefix}{key}")
    return data[key]


def _load_json(text: str) -> Dict[str, Any]:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise InstanceParseError(e.msg, line=e.lineno) from e
    if not isinstance(data, dict):
        raise InstanceParseError("top level must be a JSON object")
    version = data.get('version')
    if version is None:
        raise InstanceParseError("missing required field", field='version')
    if version != Settings.SCHEMA_VERSION:
        raise InstanceParseError(
            f"unsupported schema version {version!r} (expected {Settings.SCHEMA_VERSION})",
            field='version',
        )
    return data


def read_text(source: Union[str, Path]) -> str:
    """File contents, or stdin when source is '-'."""
    if str(source) == '-':
        return sys.stdin.read()
    try:
        return Path(source).read_text(encoding='utf-8')
    except OSError as e:
        raise InstanceParseError(f"cannot read {source}: {e.strerror}") from e


def dumps(data: Dict[str, Any]) -> str:
    return json.dumps(data, indent=2, allow_nan=False)


# ----------------------------------------------------------------------
# Instances
# ----------------------------------------------------------------------

@dataclass
class InstanceFile:
    """A physical or reduced instance plus optional solver overrides."""
    problem: Union[PhysicalProblem, ReducedProblem]
    solver: Dict[str, Any] = field(default_factory=dict)
    id: Optional[str] = None
    seed: Optional[int] = None

    @property
    def kind(self) -> str:
        return 'physical' if isinstance(self.problem, PhysicalProblem) else 'reduced'


def instance_to_dict(inst: InstanceFile) -> Dict[str, Any]:
    prob = inst.problem
    if isinstance(prob, PhysicalProblem):
        body: Dict[str, Any] = {'h1': encode_complex(prob.h1), 'h2': encode_complex(prob.h2)}
        body.update({name: getattr(prob, name) for name in PHYSICAL_FIELDS})
    else:
        body = {name: getattr(prob, name) for name in REDUCED_FIELDS}
        body['scale'] = prob.scale
        if prob.lift is not None:
            body['lift'] = {'left': encode_complex(prob.lift.left), 'right': encode_complex(prob.lift.right)}
    data: Dict[str, Any] = {'version': Settings.SCHEMA_VERSION, 'kind': inst.kind, 'problem': body}
    if inst.id is not None:
        data['id'] = inst.id
    if inst.seed is not None:
        data['seed'] = inst.seed
    if inst.solver:
        data['solver'] = dict(inst.solver)
    return data


def dump_instance(inst: InstanceFile) -> str:
    return dumps(instance_to_dict(inst))


def parse_instance(text: str) -> InstanceFile:
    """Parse an instance file.

    Raises:
        InstanceParseError: Malformed JSON, missing/invalid fields or a bad version
    """
    data = _load_json(text)
    kind = data.get('kind')
    body = _require(data, 'problem', '')
    if not isinstance(body, dict):
        raise InstanceParseError("must be an object", field='problem')

    try:
        if kind == 'physical':
            problem = PhysicalProblem(
                h1=decode_complex(_require(body, 'h1', 'problem.'), 'problem.h1'),
                h2=decode_complex(_require(body, 'h2', 'problem.'), 'problem.h2'),
                label=data.get('id'),
                **{name: _finite(body[name], f'problem.{name}') for name in PHYSICAL_FIELDS if name in body},
            )
        elif kind == 'reduced':
            values = {name: _finite(_require(body, name, 'problem.'), f'problem.{name}') for name in REDUCED_FIELDS}
            if 'scale' in body:
                values['scale'] = _finite(body['scale'], 'problem.scale')
            lift = None
            if 'lift' in body:
                lift = LiftData(
                    left=decode_complex(_require(body['lift'], 'left', 'problem.lift.'), 'problem.lift.left', ndim=2),
                    right=decode_complex(_require(body['lift'], 'right', 'problem.lift.'), 'problem.lift.right', ndim=2),
                )
            problem = ReducedProblem(lift=lift, **values)
        else:
            raise InstanceParseError(f"kind must be 'physical' or 'reduced', got {kind!r}", field='kind')
    except ValueError as e:
        raise InstanceParseError(str(e), field='problem') from e

    solver = data.get('solver') or {}
    if not isinstance(solver, dict):
        raise InstanceParseError("must be an object", field='solver')
    return InstanceFile(problem=problem, solver=solver, id=data.get('id'), seed=data.get('seed'))


def read_instance(source: Union[str, Path]) -> InstanceFile:
    return parse_instance(read_text(source))


# ----------------------------------------------------------------------
# Solutions handed to verify
# ----------------------------------------------------------------------

@dataclass
class SolutionFile:
    """Externally supplied beamformer.

    Attributes:
        matrix: 2x2 reduced (real or complex) or M x M physical matrix
        space: 'reduced' or 'physical'
        lambda1, lambda2: Multipliers when known
    """
    matrix: np.ndarray
    space: str
    lambda1: Optional[float] = None
    lambda2: Optional[float] = None

    @property
    def is_complex(self) -> bool:
        return bool(np.any(np.abs(np.imag(self.matrix)) > 0))


def parse_solution(text: str) -> SolutionFile:
    """Parse a solution file, or a result record written by solve.

    Raises:
        InstanceParseError: Malformed file
    """
    data = _load_json(text)
    kind = data.get('kind')
    lambdas = {}
    for name in ('lambda1', 'lambda2'):
        if data.get(name) is not None:
            lambdas[name] = _finite(data[name], name)

    if kind == 'result':
        a = _require(data, 'a', '')
        if a is None:
            raise InstanceParseError("result record carries no solution", field='a')
        matrix = decode_complex(a, 'a').reshape(2, 2)
        return SolutionFile(matrix=_maybe_real(matrix), space='reduced', **lambdas)
    if kind != 'solution':
        raise InstanceParseError(f"kind must be 'solution' or 'result', got {kind!r}", field='kind')

    space = data.get('space', 'reduced')
    if space not in ('reduced', 'physical'):
        raise InstanceParseError(f"space must be 'reduced' or 'physical', got {space!r}", field='space')
    matrix = decode_complex(_require(data, 'matrix', ''), 'matrix', ndim=(1, 2))
    if space == 'reduced' and matrix.size == 4:
        matrix = matrix.reshape(2, 2)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise InstanceParseError(f"matrix must be square, got shape {matrix.shape}", field='matrix')
    if space == 'reduced' and matrix.shape != (2, 2):
        raise InstanceParseError("reduced solutions are 2x2", field='matrix')
    return SolutionFile(matrix=_maybe_real(matrix), space=space, **lambdas)


def _maybe_real(matrix: np.ndarray) -> np.ndarray:
    return matrix.real.copy() if not np.any(matrix.imag) else matrix


def read_solution(source: Union[str, Path]) -> SolutionFile:
    return parse_solution(read_text(source))


def solution_to_dict(sol: SolutionFile) -> Dict[str, Any]:
    data: Dict[str, Any] = {
        'version': Settings.SCHEMA_VERSION,
        'kind': 'solution',
        'space': sol.space,
        'matrix': encode_complex(sol.matrix) if np.iscomplexobj(sol.matrix) else encode_real(sol.matrix),
    }
    for name in ('lambda1', 'lambda2'):
        if getattr(sol, name) is not None:
            data[name] = getattr(sol, name)
    return data


# ----------------------------------------------------------------------
# Result records
# ----------------------------------------------------------------------

@dataclass
class ResultRecord:
    """One solved (or failed) instance."""
    id: Optional[str] = None
    seed: Optional[int] = None
    status: str = 'ok'
    branch: Optional[str] = None
    message: Optional[str] = None
    gamma1: Optional[float] = None
    gamma2: Optional[float] = None
    r: Optional[float] = None
    q1: Optional[float] = None
    q2: Optional[float] = None
    c1: Optional[float] = None
    c2: Optional[float] = None
    d1: Optional[float] = None
    d2: Optional[float] = None
    power: Optional[float] = None
    physical_power: Optional[float] = None
    f1: Optional[float] = None
    f2: Optional[float] = None
    sinr1: Optional[float] = None
    sinr2: Optional[float] = None
    lambda1: Optional[float] = None
    lambda2: Optional[float] = None
    kkt_residual: Optional[float] = None
    oracle_power: Optional[float] = None
    oracle_gap: Optional[float] = None
    wall_time: Optional[float] = None
    a: Optional[List[float]] = None
    beamformer: Optional[np.ndarray] = None
    branches: Optional[List[Dict[str, Any]]] = None

    def to_dict(self, include_timing: bool = True) -> Dict[str, Any]:
        data: Dict[str, Any] = {'version': Settings.SCHEMA_VERSION, 'kind': 'result'}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == 'beamformer':
                value = None if value is None else encode_complex(value)
            elif f.name == 'wall_time' and not include_timing:
                continue
            data[f.name] = value
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ResultRecord':
        known = {f.name for f in fields(cls)}
        values = {k: v for k, v in data.items() if k in known}
        if values.get('beamformer') is not None:
            values['beamformer'] = decode_complex(values['beamformer'], 'beamformer', ndim=2)
        return cls(**values)


# CSV layout; summary rows fill n_ok / n_failed and leave per-instance fields empty
CSV_COLUMNS = (
    'id', 'seed', 'status', 'branch', 'gamma1', 'gamma2',
    'r', 'q1', 'q2', 'c1', 'c2', 'd1', 'd2',
    'power', 'physical_power', 'f1', 'f2', 'sinr1', 'sinr2',
    'lambda1', 'lambda2', 'kkt_residual', 'oracle_power', 'oracle_gap',
    'n_ok', 'n_failed',
)


def format_number(value: Any) -> str:
    """17 significant digits for floats, plain text otherwise, '' for None."""
    if value is None:
        return ''
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def csv_row(values: Dict[str, Any]) -> List[str]:
    return [format_number(values.get(column)) for column in CSV_COLUMNS]


def write_csv(rows: Iterable[Union[ResultRecord, Dict[str, Any]]], stream: TextIO) -> None:
    """Header plus one line per row; ResultRecords and summary dicts both accepted."""
    writer = csv.writer(stream, lineterminator='\n')
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        values = row if isinstance(row, dict) else row.to_dict()
        writer.writerow(csv_row(values))


def csv_text(rows: Iterable[Union[ResultRecord, Dict[str, Any]]]) -> str:
    buffer = io.StringIO()
    write_csv(rows, buffer)
    return buffer.getvalue()


def read_csv(text: str) -> List[Dict[str, Optional[str]]]:
    """Rows of a batch CSV as dicts, empty cells mapped to None."""
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise InstanceParseError("unexpected CSV header", line=1)
    return [{k: (v if v != '' else None) for k, v in row.items()} for row in reader]
