"""ccskit: thin scripting bindings over the ccstools core.

Every function is a pass-through to the core library: no logic lives here.
Sequences cross the boundary as opaque ``BoundSequence`` handles (with
conversions to nested lists and the JSON mirror), point clouds as
contiguous float32 arrays, and core failures surface as ``CcsKitError``
carrying the core error code.  Handles are immutable and safe to share
across threads.
"""

from __future__ import annotations

import functools

import numpy as np

import ccstools
from ccstools import errors as _errors
from ccstools import geometry as _geometry
from ccstools import mesh as _mesh
from ccstools import metrics as _metrics
from ccstools import model as _model

__all__ = [
    "BoundSequence",
    "BoundContinuous",
    "BoundSolid",
    "BoundMesh",
    "CcsKitError",
    "bind_all",
    "chamfer_distance",
    "command_metrics",
    "dequantize",
    "evaluate_solid",
    "extract_mesh",
    "jsd",
    "lcs_ratio",
    "mmd",
    "parse_ccs",
    "sample_point_cloud",
    "serialize_ccs",
    "token_stream",
    "validate",
]


class CcsKitError(Exception):
    """Binding-side exception mirroring a core error.

    ``code`` equals the core error's stable code string.
    """

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message


def _passthrough(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except _errors.CcsError as exc:
            raise CcsKitError(exc.code, exc.message) from None
    return wrapper


class BoundSequence:
    """Opaque handle to a quantized command sequence."""

    __slots__ = ("_seq",)

    def __init__(self, seq: _model.CadSequence):
        self._seq = seq

    def __eq__(self, other) -> bool:
        return isinstance(other, BoundSequence) and self._seq == other._seq

    def __hash__(self) -> int:
        return hash(self._seq.commands)

    def __len__(self) -> int:
        return len(self._seq)

    def unwrap(self) -> _model.CadSequence:
        return self._seq

    def to_lists(self) -> list:
        """Nested native lists: [["SOL"], ["Line", 207, 112], ...]."""
        rows = []
        for cmd in self._seq:
            atoms = _model.command_atoms(cmd)
            rows.append([cmd.ctype.value]
                        + [int(a.split("=", 1)[1]) for a in atoms[1:]])
        return rows

    @classmethod
    @_passthrough
    def from_lists(cls, rows: list) -> "BoundSequence":
        fields = {t: _model._FIELDS[t] for t in
                  (_model.CommandType.LINE, _model.CommandType.ARC,
                   _model.CommandType.CIRCLE, _model.CommandType.EXTRUDE)}
        obj = {"commands": []}
        for row in rows:
            name = row[0]
            entry = {"type": name}
            ctype = _model.CommandType(name)
            if ctype in fields:
                entry.update(dict(zip(fields[ctype], row[1:])))
            obj["commands"].append(entry)
        return cls(_model.from_json_obj(obj))

    def to_json(self) -> dict:
        return _model.to_json_obj(self._seq)

    @classmethod
    @_passthrough
    def from_json(cls, obj: dict) -> "BoundSequence":
        return cls(_model.from_json_obj(obj))


class BoundContinuous:
    """Opaque handle to a dequantized sequence."""

    __slots__ = ("_seq",)

    def __init__(self, seq: _model.ContinuousSequence):
        self._seq = seq

    def unwrap(self) -> _model.ContinuousSequence:
        return self._seq


class BoundSolid:
    """Opaque handle to a voxel solid."""

    __slots__ = ("_solid",)

    def __init__(self, solid: _geometry.VoxelSolid):
        self._solid = solid

    def unwrap(self) -> _geometry.VoxelSolid:
        return self._solid

    @property
    def is_empty(self) -> bool:
        return self._solid.is_empty

    def volume(self) -> float:
        return self._solid.volume()


class BoundMesh:
    """Opaque handle to a triangle mesh."""

    __slots__ = ("_mesh",)

    def __init__(self, mesh: _mesh.TriangleMesh):
        self._mesh = mesh

    def unwrap(self) -> _mesh.TriangleMesh:
        return self._mesh

    @property
    def vertices(self) -> np.ndarray:
        return self._mesh.vertices

    @property
    def triangles(self) -> np.ndarray:
        return self._mesh.triangles


@_passthrough
def parse_ccs(text: str) -> BoundSequence:
    return BoundSequence(_model.parse_ccs(text))


@_passthrough
def serialize_ccs(seq: BoundSequence) -> str:
    return _model.serialize_ccs(seq.unwrap())


@_passthrough
def validate(seq: BoundSequence) -> dict:
    result = _model.validate(seq.unwrap())
    return {"ok": result.ok,
            "issues": [{"position": i.position, "code": i.code.value,
                        "message": i.message} for i in result.issues]}


@_passthrough
def token_stream(seq: BoundSequence, level: str = "param") -> list:
    return _model.token_stream(seq.unwrap(), level=level)


@_passthrough
def dequantize(seq: BoundSequence) -> BoundContinuous:
    return BoundContinuous(_model.dequantize(seq.unwrap()))


@_passthrough
def evaluate_solid(cont: BoundContinuous, resolution: int = 64,
                   bounds=_geometry.DEFAULT_BOUNDS) -> BoundSolid:
    return BoundSolid(_geometry.evaluate_solid(cont.unwrap(), resolution,
                                               bounds))


@_passthrough
def extract_mesh(solid: BoundSolid) -> BoundMesh:
    return BoundMesh(_mesh.extract_mesh(solid.unwrap()))


@_passthrough
def sample_point_cloud(mesh: BoundMesh, n: int, seed: int = 0) -> np.ndarray:
    """Returns a C-contiguous float32 (n, 3) array."""
    cloud = _mesh.sample_point_cloud(mesh.unwrap(), n, seed)
    return np.ascontiguousarray(cloud.points, dtype=np.float32)


def _as_cloud(points) -> _mesh.PointCloud:
    return _mesh.PointCloud(np.asarray(points, dtype=np.float64), 0)


@_passthrough
def lcs_ratio(g: list, r: list) -> dict:
    report = _metrics.lcs_ratio(g, r)
    return {"lcs_length": report.lcs_length,
            "ground_truth_length": report.ground_truth_length,
            "ratio": report.ratio}


@_passthrough
def chamfer_distance(a, b) -> float:
    return _metrics.chamfer_distance(_as_cloud(a), _as_cloud(b))


@_passthrough
def mmd(reference: list, generated: list) -> float:
    return _metrics.mmd([_as_cloud(p) for p in reference],
                        [_as_cloud(p) for p in generated])


@_passthrough
def jsd(set_a: list, set_b: list,
        grid_res: int = _metrics.JSD_DEFAULT_RESOLUTION) -> float:
    return _metrics.jsd([_as_cloud(p) for p in set_a],
                        [_as_cloud(p) for p in set_b], grid_res)


@_passthrough
def command_metrics(records: list) -> dict:
    """records: [{gt_ccs, pred_ccs, confidence: [[s_cmd, s_args], ...]}]."""
    parsed = [_metrics.PredictionRecord(
        ground_truth=_model.parse_ccs(rec["gt_ccs"]),
        predicted=_model.parse_ccs(rec["pred_ccs"]),
        confidence=_metrics.ConfidenceTrack(rec["confidence"]),
        record_id=str(rec.get("id", i)))
        for i, rec in enumerate(records)]
    return _metrics.command_metrics(parsed).to_json_obj()


def bind_all() -> dict:
    """The complete bound API surface, keyed by name."""
    return {name: globals()[name] for name in __all__
            if name not in ("bind_all", "CcsKitError")}


__version__ = ccstools.__version__
