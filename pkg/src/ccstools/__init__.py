"""Toolkit for sketch-extrude CAD command sequences (CCS).

Parsing, validation, geometric evaluation to voxel solids / meshes /
point clouds, sequence and shape metrics, and LLM-in-the-loop quality
control orchestration.
"""

from .errors import (
    AlignmentError,
    CcsError,
    CcsRangeError,
    CcsSyntaxError,
    ClientError,
    DegenerateArc,
    EmptyCloud,
    EmptyGroundTruth,
    EmptyInput,
    EmptyMesh,
    EmptySet,
    EmptySolid,
    GeometryError,
    OpenLoop,
)
from .model import (
    Arc,
    BooleanOp,
    CadSequence,
    Circle,
    Command,
    CommandType,
    ContinuousSequence,
    EOS,
    Eos,
    ExtentType,
    Extrude,
    Issue,
    IssueCode,
    Line,
    RealArc,
    RealCircle,
    RealExtrude,
    RealLine,
    SOL,
    Sol,
    ValidationResult,
    command_atoms,
    dequantize,
    from_json_obj,
    parse_ccs,
    quantize,
    serialize_ccs,
    to_json_obj,
    token_stream,
    validate,
)
from .geometry import (
    ArcGeometry,
    Profile2D,
    SketchFrame,
    VoxelSolid,
    build_profile,
    evaluate_solid,
    solid_cut,
    solid_intersect,
    solid_union,
    solve_arc,
)
from .mesh import (
    PointCloud,
    TriangleMesh,
    euler_characteristic,
    export_stl,
    extract_mesh,
    is_watertight,
    mesh_volume,
    read_stl,
    sample_point_cloud,
)
from .metrics import (
    ConfidenceTrack,
    LcsReport,
    MetricsReport,
    PredictionRecord,
    chamfer_distance,
    command_metrics,
    jsd,
    lcs_ratio,
    mmd,
)
from .clients import EchoClient, GeneratorClient, HttpClient, MockClient, ReplayClient
from .pipeline import (
    BatchConfig,
    BatchReport,
    CorrectionRequest,
    ReflectionOutcome,
    ValidationReport,
    flag_low_confidence,
    reflect_optimize,
    reverse_validate,
    run_batch,
)

__version__ = "0.1.0"
