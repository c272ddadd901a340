import json
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, Field, PositiveInt, ValidationError, validator

from .errors import InputError
from .linalg import BipartiteOp

Entry = Union[float, Tuple[float, float]]


def _complex(val: Entry) -> complex:
    if isinstance(val, tuple):
        return complex(val[0], val[1])
    return complex(val)


class OpDense(BaseModel):
    format: str = Field("dense", regex="^dense$")
    dA: PositiveInt
    dB: PositiveInt
    # real numbers or [re, im] pairs
    matrix: List[List[Entry]]

    @validator("matrix")
    def square(cls, v, values):
        if "dA" in values and "dB" in values:
            n = values["dA"] * values["dB"]
            if len(v) != n or any(len(row) != n for row in v):
                raise ValueError(f"expected a {n} x {n} matrix")
        return v

    def to_op(self) -> BipartiteOp:
        mat = [[_complex(x) for x in row] for row in self.matrix]
        return BipartiteOp(mat, self.dA, self.dB)


class PermEntry(BaseModel):
    col: int = Field(..., ge=0)
    row: int = Field(..., ge=0)
    phase: Optional[Tuple[float, float]]


class OpPerm(BaseModel):
    format: str = Field("perm", regex="^perm$")
    dA: PositiveInt
    dB: PositiveInt
    entries: List[PermEntry]

    def to_op(self) -> BipartiteOp:
        triples = [
            (e.col, e.row, 1.0 if e.phase is None else complex(*e.phase)) for e in self.entries
        ]
        return BipartiteOp.from_perm(self.dA, self.dB, triples)


def _locations(err: ValidationError) -> str:
    return "; ".join(f"{'.'.join(str(p) for p in e['loc'])}: {e['msg']}" for e in err.errors())


def parse_operator(text: str, source: str = "<input>") -> BipartiteOp:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise InputError(source, f"line {e.lineno} column {e.colno}: {e.msg}")
    if not isinstance(data, dict):
        raise InputError(source, "expected a JSON object")
    model = OpPerm if data.get("format") == "perm" or "entries" in data else OpDense
    try:
        return model.parse_obj(data).to_op()
    except ValidationError as e:
        raise InputError(source, _locations(e))


def load_operator(path: Union[str, Path]) -> BipartiteOp:
    path = Path(path)
    return parse_operator(path.read_text(), str(path))


def dump_operator(u: BipartiteOp) -> dict:
    rows = [[[float(x.real), float(x.imag)] for x in row] for row in u.matrix]
    return {"format": "dense", "dA": u.dA, "dB": u.dB, "matrix": rows}


class AlternativeOut(BaseModel):
    source: str
    ebits: float
    cbits: float
    protocol: str
    expr: str


class CostReportOut(BaseModel):
    ebits: float
    cbits: float
    source: str
    applicable_protocol: str
    expr: str
    alternatives: List[AlternativeOut]
    notes: List[str] = []


class EventOut(BaseModel):
    kind: str
    party: Optional[str]
    detail: str


class TraceOut(BaseModel):
    protocol: str
    ebits: float
    cbits: float
    branches: int
    mode: str
    events: List[EventOut]
    check: Optional[dict]


class EntPowerOut(BaseModel):
    best_value: float
    restarts: int
    converged: bool
    history: List[float]
    alpha: List[Tuple[float, float]]
    beta: List[Tuple[float, float]]
    ancilla_dims: Tuple[int, int]


class GateOut(BaseModel):
    kind: str
    party: Optional[str]
    bits: Optional[List[int]]
    label: Optional[str]
    control: Optional[Tuple[str, int]]
    target: Optional[Tuple[str, int]]


class SynthesisOut(BaseModel):
    regime: str
    construction: str
    schmidt_rank: int
    bound: int
    nonlocal_count: int
    ancillas: Dict[str, int]
    gates: List[GateOut]


class AnalysisOut(BaseModel):
    dA: int
    dB: int
    schmidt_rank: int
    coefficients: List[float]
    traits: str
    unitary: bool
    nonzero_blocks: Optional[List[List[bool]]]
    controlled_from: List[str] = []
    direct_sum_a: Optional[List[List[int]]]
    direct_sum_b: Optional[List[List[int]]]
    input_types_a: Optional[int]
    relative_output_types_a: Optional[int]
    output_types_b: Optional[int]
    loose_types: Optional[Tuple[int, int]]
    partial_transpose_holds: Optional[bool]
    recommendation: Optional[CostReportOut]
    notes: List[str] = []
