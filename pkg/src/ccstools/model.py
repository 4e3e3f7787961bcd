"""CCS domain model: commands, text grammar, validation and (de)quantization.

A CAD command sequence (CCS) is an ordered list of sketch and extrusion
commands with integer parameters quantized to [0, 255].  This module owns
the bit-exact text grammar, the JSON mirror, structural validation, the
quantized<->continuous value maps, and the token flattening used by the
LCS metric.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import Iterable, Iterator, Union

from .errors import CcsRangeError, CcsSyntaxError


class CommandType(Enum):
    SOL = "SOL"
    LINE = "Line"
    ARC = "Arc"
    CIRCLE = "Circle"
    EXTRUDE = "Extrude"
    EOS = "EOS"

    @property
    def marker(self) -> str:
        return f"<{self.value}>"


class BooleanOp(IntEnum):
    NEW_BODY = 7
    JOIN = 8
    CUT = 9
    INTERSECT = 10


class ExtentType(IntEnum):
    ONE_SIDE = 1
    SYMMETRIC = 2
    TWO_SIDES = 3


BOOLEAN_OP_NAMES = {
    BooleanOp.NEW_BODY: "NewBodyFeatureOperation",
    BooleanOp.JOIN: "JoinFeatureOperation",
    BooleanOp.CUT: "CutFeatureOperation",
    BooleanOp.INTERSECT: "IntersectFeatureOperation",
}
EXTENT_TYPE_NAMES = {
    ExtentType.ONE_SIDE: "OneSideFeatureExtentType",
    ExtentType.SYMMETRIC: "SymmetricFeatureExtentType",
    ExtentType.TWO_SIDES: "TwoSidesFeatureExtentType",
}
_BOOLEAN_OP_BY_NAME = {v: k for k, v in BOOLEAN_OP_NAMES.items()}
_EXTENT_TYPE_BY_NAME = {v: k for k, v in EXTENT_TYPE_NAMES.items()}


def _check_range(name: str, value: int, lo: int, hi: int) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise CcsRangeError(f"{name} must be an integer, got {value!r}")
    if not lo <= value <= hi:
        raise CcsRangeError(f"{name}={value} outside [{lo}, {hi}]")
    return value


@dataclass(frozen=True)
class Sol:
    ctype = CommandType.SOL


@dataclass(frozen=True)
class Eos:
    ctype = CommandType.EOS


@dataclass(frozen=True)
class Line:
    x: int
    y: int
    ctype = CommandType.LINE

    def __post_init__(self):
        _check_range("x", self.x, 0, 255)
        _check_range("y", self.y, 0, 255)


@dataclass(frozen=True)
class Arc:
    x: int
    y: int
    alpha: int
    f: int
    ctype = CommandType.ARC

    def __post_init__(self):
        _check_range("x", self.x, 0, 255)
        _check_range("y", self.y, 0, 255)
        _check_range("alpha", self.alpha, 0, 255)
        _check_range("f", self.f, 0, 1)


@dataclass(frozen=True)
class Circle:
    x: int
    y: int
    r: int
    ctype = CommandType.CIRCLE

    def __post_init__(self):
        _check_range("x", self.x, 0, 255)
        _check_range("y", self.y, 0, 255)
        _check_range("r", self.r, 0, 255)


@dataclass(frozen=True)
class Extrude:
    theta: int
    phi: int
    gamma: int
    px: int
    py: int
    pz: int
    s: int
    e1: int
    e2: int
    b: BooleanOp
    u: ExtentType
    ctype = CommandType.EXTRUDE

    def __post_init__(self):
        for name in ("theta", "phi", "gamma", "px", "py", "pz", "s", "e1", "e2"):
            _check_range(name, getattr(self, name), 0, 255)
        if self.b not in (7, 8, 9, 10):
            raise CcsRangeError(f"b={self.b} outside {{7..10}}")
        if self.u not in (1, 2, 3):
            raise CcsRangeError(f"u={self.u} outside {{1..3}}")
        object.__setattr__(self, "b", BooleanOp(self.b))
        object.__setattr__(self, "u", ExtentType(self.u))


Command = Union[Sol, Eos, Line, Arc, Circle, Extrude]

SOL = Sol()
EOS = Eos()


@dataclass(frozen=True)
class CadSequence:
    """Ordered, immutable CCS. Structural validity is checked by validate()."""

    commands: tuple

    def __init__(self, commands: Iterable[Command]):
        object.__setattr__(self, "commands", tuple(commands))

    def __iter__(self) -> Iterator[Command]:
        return iter(self.commands)

    def __len__(self) -> int:
        return len(self.commands)

    def __getitem__(self, i):
        return self.commands[i]


# --- continuous (dequantized) twin -----------------------------------------

@dataclass(frozen=True)
class RealLine:
    x: float
    y: float
    ctype = CommandType.LINE


@dataclass(frozen=True)
class RealArc:
    x: float
    y: float
    sweep: float   # radians in [0, 2pi)
    ccw: bool
    ctype = CommandType.ARC


@dataclass(frozen=True)
class RealCircle:
    x: float
    y: float
    r: float
    ctype = CommandType.CIRCLE


@dataclass(frozen=True)
class RealExtrude:
    theta: float   # radians
    phi: float
    gamma: float
    px: float
    py: float
    pz: float
    scale: float
    e1: float      # signed extrusion distances
    e2: float
    b: BooleanOp
    u: ExtentType
    ctype = CommandType.EXTRUDE


RealCommand = Union[Sol, Eos, RealLine, RealArc, RealCircle, RealExtrude]


@dataclass(frozen=True)
class ContinuousSequence:
    """Dequantized CCS: same command structure, real-valued parameters."""

    commands: tuple

    def __init__(self, commands: Iterable[RealCommand]):
        object.__setattr__(self, "commands", tuple(commands))

    def __iter__(self):
        return iter(self.commands)

    def __len__(self) -> int:
        return len(self.commands)

    def __getitem__(self, i):
        return self.commands[i]


# --- validation --------------------------------------------------------------

class IssueCode(str, Enum):
    MISSING_START_SOL = "MissingStartSol"
    MISSING_EOS = "MissingEos"
    MISPLACED_EOS = "MisplacedEos"
    EMPTY_LOOP = "EmptyLoop"
    CIRCLE_NOT_ALONE = "CircleNotAlone"
    UNTERMINATED_SKETCH = "UnterminatedSketch"
    EXTRUDE_WITHOUT_PROFILE = "ExtrudeWithoutProfile"
    DEGENERATE_ARC = "DegenerateArc"
    EMPTY_SEQUENCE = "EmptySequence"


@dataclass(frozen=True)
class Issue:
    position: int
    code: IssueCode
    message: str


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    issues: tuple

    def __bool__(self) -> bool:
        return self.ok


def validate(seq: CadSequence) -> ValidationResult:
    """Check every structural invariant of a CCS.

    Issues are data, not failures: an empty issue list means the sequence is
    structurally sound and will evaluate in the geometry kernel.  Loop closure
    is enforced by the chaining convention itself (a loop is the cyclic chain
    of stored endpoints, starting at the last command's endpoint), so only
    composition rules can be violated.
    """
    issues: list[Issue] = []
    cmds = seq.commands
    if not cmds:
        return ValidationResult(False, (Issue(0, IssueCode.EMPTY_SEQUENCE, "empty sequence"),))

    if not isinstance(cmds[0], Sol):
        issues.append(Issue(0, IssueCode.MISSING_START_SOL,
                            f"sequence must begin with <SOL>, got {cmds[0].ctype.marker}"))
    if not isinstance(cmds[-1], Eos):
        issues.append(Issue(len(cmds) - 1, IssueCode.MISSING_EOS,
                            "sequence must end with <EOS>"))
    for i, c in enumerate(cmds):
        if isinstance(c, Eos) and i != len(cmds) - 1:
            issues.append(Issue(i, IssueCode.MISPLACED_EOS, "<EOS> before end of sequence"))

    # Loop / sketch-group composition.  A sketch group is a maximal run of
    # SOL-led loops; it must be terminated by at least one Extrude.
    loop_start = None          # index of the SOL opening the current loop
    loop_curves: list = []
    group_has_loops = False    # current group gathered >= 1 loop
    group_extruded = False

    def close_loop(end_index: int) -> None:
        nonlocal loop_start, loop_curves
        if loop_start is None:
            return
        if not loop_curves:
            issues.append(Issue(loop_start, IssueCode.EMPTY_LOOP,
                                "<SOL> not followed by any curve command"))
        else:
            circles = [j for j, cur in loop_curves if isinstance(cur, Circle)]
            if circles and len(loop_curves) > 1:
                issues.append(Issue(circles[0], IssueCode.CIRCLE_NOT_ALONE,
                                    "a Circle must be the only member of its loop"))
            elif not circles:
                # The loop chains cyclically from the last command's endpoint;
                # an arc spanning two identical endpoints has no chord.
                prev = (loop_curves[-1][1].x, loop_curves[-1][1].y)
                for j, cur in loop_curves:
                    if isinstance(cur, Arc) and (cur.x, cur.y) == prev:
                        issues.append(Issue(j, IssueCode.DEGENERATE_ARC,
                                            "arc endpoints coincide"))
                    prev = (cur.x, cur.y)
        loop_start, loop_curves = None, []

    for i, c in enumerate(cmds):
        if isinstance(c, Sol):
            close_loop(i)
            if group_extruded:
                group_has_loops = False
                group_extruded = False
            loop_start = i
            group_has_loops = True
        elif isinstance(c, (Line, Arc, Circle)):
            if loop_start is None:
                issues.append(Issue(i, IssueCode.MISSING_START_SOL,
                                    f"{c.ctype.marker} outside any <SOL> loop"))
            else:
                loop_curves.append((i, c))
            if isinstance(c, Arc) and c.alpha == 0:
                issues.append(Issue(i, IssueCode.DEGENERATE_ARC, "arc sweep alpha=0"))
        elif isinstance(c, Extrude):
            close_loop(i)
            if not group_has_loops:
                issues.append(Issue(i, IssueCode.EXTRUDE_WITHOUT_PROFILE,
                                    "<Extrude> with no preceding sketch loops"))
            group_extruded = True
        elif isinstance(c, Eos):
            close_loop(i)

    if group_has_loops and not group_extruded:
        issues.append(Issue(len(cmds) - 1, IssueCode.UNTERMINATED_SKETCH,
                            "sketch group not terminated by an <Extrude>"))

    return ValidationResult(not issues, tuple(issues))


# --- text grammar -------------------------------------------------------------

_PARAM_ALIASES = {
    "x": "x", "y": "y", "r": "r", "f": "f",
    "α": "alpha", "alpha": "alpha", "a": "alpha",
    "θ": "theta", "theta": "theta",
    "φ": "phi", "ϕ": "phi", "phi": "phi", "varphi": "phi",
    "γ": "gamma", "gamma": "gamma",
    "px": "px", "py": "py", "pz": "pz",
    "s": "s", "e1": "e1", "e2": "e2", "b": "b", "u": "u",
}

_FIELDS = {
    CommandType.LINE: ("x", "y"),
    CommandType.ARC: ("x", "y", "alpha", "f"),
    CommandType.CIRCLE: ("x", "y", "r"),
    CommandType.EXTRUDE: ("theta", "phi", "gamma", "px", "py", "pz",
                          "s", "e1", "e2", "b", "u"),
}

_TAG_RE = re.compile(r"^\s*<\s*([A-Za-z]+)\s*>\s*(?::\s*(.*?))?\s*$")
_TAGS = {"SOL": CommandType.SOL, "Line": CommandType.LINE, "Arc": CommandType.ARC,
         "Circle": CommandType.CIRCLE, "Extrude": CommandType.EXTRUDE,
         "EOS": CommandType.EOS}


def _parse_value(field: str, raw: str, lineno: int, col: int):
    raw = raw.strip()
    if field == "b":
        if raw in _BOOLEAN_OP_BY_NAME:
            return int(_BOOLEAN_OP_BY_NAME[raw])
    elif field == "u":
        if raw in _EXTENT_TYPE_BY_NAME:
            return int(_EXTENT_TYPE_BY_NAME[raw])
    try:
        return int(raw, 10)
    except ValueError:
        expected = "an integer"
        if field in ("b", "u"):
            expected = "an integer or a feature-operation name"
        raise CcsSyntaxError(f"bad value {raw!r} for {field}", lineno, col, expected) from None


def _parse_params(ctype: CommandType, body: str, lineno: int, offset: int) -> dict:
    fields = _FIELDS[ctype]
    seen: dict = {}
    col = offset
    for chunk in body.split(","):
        piece = chunk.strip()
        if not piece:
            col += len(chunk) + 1
            continue
        if "=" not in piece:
            raise CcsSyntaxError(f"malformed parameter {piece!r}", lineno,
                                 col + chunk.index(piece[0]) + 1, "name=value")
        name, _, value = piece.partition("=")
        key = _PARAM_ALIASES.get(name.strip())
        if key is None or key not in fields:
            raise CcsSyntaxError(f"unknown parameter {name.strip()!r} for {ctype.marker}",
                                 lineno, col + chunk.index(piece[0]) + 1,
                                 f"one of {', '.join(fields)}")
        if key in seen:
            raise CcsSyntaxError(f"duplicate parameter {key!r}", lineno,
                                 col + chunk.index(piece[0]) + 1, "each parameter once")
        seen[key] = _parse_value(key, value, lineno, col + chunk.index("=") + 2)
        col += len(chunk) + 1
    missing = [f for f in fields if f not in seen]
    if missing:
        raise CcsSyntaxError(f"missing parameter(s) {', '.join(missing)} for {ctype.marker}",
                             lineno, len(body) + offset, ", ".join(fields))
    return seen


def parse_ccs(text: str) -> CadSequence:
    """Parse CCS text into a CadSequence.

    Accepts Greek or ASCII parameter names and symbolic or integer b/u
    encodings; whitespace around separators is ignored.  Structural rules
    are deliberately not enforced here: use validate().

    Raises CcsSyntaxError for malformed tokens, CcsRangeError for
    out-of-range values.
    """
    commands: list[Command] = []
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line:
            continue
        m = _TAG_RE.match(raw_line)
        if m is None or m.group(1) not in _TAGS:
            first = len(raw_line) - len(raw_line.lstrip()) + 1
            raise CcsSyntaxError(f"unrecognized command line {line!r}", lineno, first,
                                 "<SOL>, <Line>, <Arc>, <Circle>, <Extrude> or <EOS>")
        ctype = _TAGS[m.group(1)]
        body = m.group(2) or ""
        if ctype in (CommandType.SOL, CommandType.EOS):
            if body.strip():
                raise CcsSyntaxError(f"{ctype.marker} takes no parameters", lineno,
                                     m.start(2) + 1, "bare marker")
            commands.append(SOL if ctype is CommandType.SOL else EOS)
            continue
        params = _parse_params(ctype, body, lineno, (m.start(2) or 0) + 1)
        try:
            if ctype is CommandType.LINE:
                commands.append(Line(params["x"], params["y"]))
            elif ctype is CommandType.ARC:
                commands.append(Arc(params["x"], params["y"], params["alpha"], params["f"]))
            elif ctype is CommandType.CIRCLE:
                commands.append(Circle(params["x"], params["y"], params["r"]))
            else:
                commands.append(Extrude(params["theta"], params["phi"], params["gamma"],
                                        params["px"], params["py"], params["pz"],
                                        params["s"], params["e1"], params["e2"],
                                        params["b"], params["u"]))
        except CcsRangeError as exc:
            raise CcsRangeError(f"line {lineno}: {exc.message}") from None
    return CadSequence(commands)


_GREEK = {"alpha": "α", "theta": "θ", "phi": "φ", "gamma": "γ"}


def serialize_ccs(seq: CadSequence) -> str:
    """Emit the canonical text form: one command per line, Greek parameter
    names, symbolic boolean-op and extent names."""
    lines = []
    for c in seq:
        if isinstance(c, Sol):
            lines.append("<SOL>")
        elif isinstance(c, Eos):
            lines.append("<EOS>")
        elif isinstance(c, Line):
            lines.append(f"<Line>: x={c.x}, y={c.y}")
        elif isinstance(c, Arc):
            lines.append(f"<Arc>: x={c.x}, y={c.y}, α={c.alpha}, f={c.f}")
        elif isinstance(c, Circle):
            lines.append(f"<Circle>: x={c.x}, y={c.y}, r={c.r}")
        elif isinstance(c, Extrude):
            lines.append(
                f"<Extrude>: θ={c.theta}, φ={c.phi}, γ={c.gamma}, "
                f"px={c.px}, py={c.py}, pz={c.pz}, s={c.s}, e1={c.e1}, e2={c.e2}, "
                f"b={BOOLEAN_OP_NAMES[c.b]}, u={EXTENT_TYPE_NAMES[c.u]}"
            )
        else:
            raise TypeError(f"not a command: {c!r}")
    return "\n".join(lines)


# --- JSON mirror ---------------------------------------------------------------

def to_json_obj(seq: CadSequence) -> dict:
    """JSON mirror: {"commands": [{"type": "Line", "x": ..., ...}, ...]}."""
    out = []
    for c in seq:
        if isinstance(c, (Sol, Eos)):
            out.append({"type": c.ctype.value})
        elif isinstance(c, Extrude):
            d = {"type": "Extrude"}
            for f in _FIELDS[CommandType.EXTRUDE]:
                d[f] = int(getattr(c, f))
            out.append(d)
        else:
            d = {"type": c.ctype.value}
            for f in _FIELDS[c.ctype]:
                d[f] = getattr(c, f)
            out.append(d)
    return {"commands": out}


def from_json_obj(obj: dict) -> CadSequence:
    """Inverse of to_json_obj. Accepts symbolic b/u names as well."""
    commands: list[Command] = []
    for i, d in enumerate(obj.get("commands", [])):
        t = d.get("type")
        if t == "SOL":
            commands.append(SOL)
        elif t == "EOS":
            commands.append(EOS)
        elif t == "Line":
            commands.append(Line(d["x"], d["y"]))
        elif t == "Arc":
            commands.append(Arc(d["x"], d["y"], d["alpha"], d["f"]))
        elif t == "Circle":
            commands.append(Circle(d["x"], d["y"], d["r"]))
        elif t == "Extrude":
            b, u = d["b"], d["u"]
            if isinstance(b, str):
                b = int(_BOOLEAN_OP_BY_NAME[b])
            if isinstance(u, str):
                u = int(_EXTENT_TYPE_BY_NAME[u])
            commands.append(Extrude(d["theta"], d["phi"], d["gamma"], d["px"], d["py"],
                                    d["pz"], d["s"], d["e1"], d["e2"], b, u))
        else:
            raise CcsSyntaxError(f"unknown command type {t!r}", i + 1, 1,
                                 "SOL, Line, Arc, Circle, Extrude or EOS")
    return CadSequence(commands)


# --- quantization ---------------------------------------------------------------
#
# Fixed value maps (quantized integer v in [0, 255] -> real):
#   coordinates / translations    (v - 128) / 128      in [-1, 1)
#   circle radius                 v / 128              in [0, ~2)
#   sketch scale s                v / 128
#   extrusion distances e1, e2    (v - 128) / 128      signed
#   arc sweep alpha               v * 2*pi / 256       in [0, 2*pi)
#   Euler theta                   v * pi / 256         in [0, pi)
#   Euler phi, gamma              (v - 128) * pi / 128 in [-pi, pi)

def _deq_coord(v: int) -> float:
    return (v - 128) / 128.0


def _deq_len(v: int) -> float:
    return v / 128.0


def dequantize(seq: CadSequence) -> ContinuousSequence:
    """Apply the fixed value maps; command structure is preserved."""
    out: list[RealCommand] = []
    for c in seq:
        if isinstance(c, (Sol, Eos)):
            out.append(c)
        elif isinstance(c, Line):
            out.append(RealLine(_deq_coord(c.x), _deq_coord(c.y)))
        elif isinstance(c, Arc):
            out.append(RealArc(_deq_coord(c.x), _deq_coord(c.y),
                               c.alpha * 2.0 * math.pi / 256.0, bool(c.f)))
        elif isinstance(c, Circle):
            out.append(RealCircle(_deq_coord(c.x), _deq_coord(c.y), _deq_len(c.r)))
        elif isinstance(c, Extrude):
            out.append(RealExtrude(
                theta=c.theta * math.pi / 256.0,
                phi=(c.phi - 128) * math.pi / 128.0,
                gamma=(c.gamma - 128) * math.pi / 128.0,
                px=_deq_coord(c.px), py=_deq_coord(c.py), pz=_deq_coord(c.pz),
                scale=_deq_len(c.s),
                e1=_deq_coord(c.e1), e2=_deq_coord(c.e2),
                b=c.b, u=c.u,
            ))
    return ContinuousSequence(out)


def _q(value: float, name: str) -> int:
    v = math.floor(value + 0.5)   # round half up
    if not 0 <= v <= 255:
        raise CcsRangeError(f"{name} quantizes to {v}, outside [0, 255]")
    return v


def quantize(cont: ContinuousSequence) -> CadSequence:
    """Inverse of dequantize with round-half-up rounding.

    Raises CcsRangeError when a value rounds outside [0, 255].
    """
    out: list[Command] = []
    for c in cont:
        if isinstance(c, (Sol, Eos)):
            out.append(c)
        elif isinstance(c, RealLine):
            out.append(Line(_q(c.x * 128 + 128, "x"), _q(c.y * 128 + 128, "y")))
        elif isinstance(c, RealArc):
            out.append(Arc(_q(c.x * 128 + 128, "x"), _q(c.y * 128 + 128, "y"),
                           _q(c.sweep * 256 / (2 * math.pi), "alpha"), int(c.ccw)))
        elif isinstance(c, RealCircle):
            out.append(Circle(_q(c.x * 128 + 128, "x"), _q(c.y * 128 + 128, "y"),
                              _q(c.r * 128, "r")))
        elif isinstance(c, RealExtrude):
            out.append(Extrude(
                _q(c.theta * 256 / math.pi, "theta"),
                _q(c.phi * 128 / math.pi + 128, "phi"),
                _q(c.gamma * 128 / math.pi + 128, "gamma"),
                _q(c.px * 128 + 128, "px"), _q(c.py * 128 + 128, "py"),
                _q(c.pz * 128 + 128, "pz"),
                _q(c.scale * 128, "s"),
                _q(c.e1 * 128 + 128, "e1"), _q(c.e2 * 128 + 128, "e2"),
                int(c.b), int(c.u),
            ))
        else:
            raise TypeError(f"not a continuous command: {c!r}")
    return CadSequence(out)


# --- token flattening ------------------------------------------------------------

SKETCH_END = "SKETCH_END"


def command_atoms(c: Command) -> list:
    """Atoms contributed by one command: its type marker plus one
    "name=value" atom per parameter."""
    if isinstance(c, (Sol, Eos)):
        return [c.ctype.value.upper()]
    if isinstance(c, Line):
        return ["LINE", f"x={c.x}", f"y={c.y}"]
    if isinstance(c, Arc):
        return ["ARC", f"x={c.x}", f"y={c.y}", f"α={c.alpha}", f"f={c.f}"]
    if isinstance(c, Circle):
        return ["CIRCLE", f"x={c.x}", f"y={c.y}", f"r={c.r}"]
    if isinstance(c, Extrude):
        return ["EXTRUDE", f"θ={c.theta}", f"φ={c.phi}", f"γ={c.gamma}",
                f"px={c.px}", f"py={c.py}", f"pz={c.pz}", f"s={c.s}",
                f"e1={c.e1}", f"e2={c.e2}", f"b={int(c.b)}", f"u={int(c.u)}"]
    raise TypeError(f"not a command: {c!r}")


def token_stream(seq: CadSequence, level: str = "param") -> list:
    """Flatten a sequence into comparable atoms for LCS scoring.

    At the default "param" level, each command contributes its type marker
    plus one atom per (parameter-name, value) pair, and a SKETCH_END
    delimiter atom is emitted where the sketch section hands over to each
    extrusion, mirroring the separator tokens of flattened sketch-extrude
    representations.  At the "command" level only type markers are emitted.
    """
    if level == "command":
        return [c.ctype.value.upper() for c in seq]
    if level != "param":
        raise ValueError(f"unknown token level {level!r}")
    atoms: list = []
    for c in seq:
        if isinstance(c, Extrude):
            atoms.append(SKETCH_END)
        atoms.extend(command_atoms(c))
    return atoms
