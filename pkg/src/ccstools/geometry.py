"""Geometric evaluation: sketch profiles, oriented frames and voxel CSG.

A continuous sequence is evaluated one extrusion step at a time.  Each step
places the accumulated sketch loops on an oriented plane, tests voxel
centers for 2D containment (even-odd rule, arcs answered exactly through
angular-interval ray intersection) and an axial extent, then combines the
step's occupancy with the accumulator using the step's boolean operation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateArc, GeometryError, OpenLoop
from .model import (
    BooleanOp,
    ContinuousSequence,
    Eos,
    ExtentType,
    RealArc,
    RealCircle,
    RealExtrude,
    RealLine,
    Sol,
)

_TWO_PI = 2.0 * math.pi

DEFAULT_BOUNDS = ((-1.0, -1.0, -1.0), (1.0, 1.0, 1.0))


@dataclass(frozen=True)
class ArcGeometry:
    """Circular arc between two stored endpoints.

    The sweep runs from start_angle to end_angle, counterclockwise when
    ccw is set; |end_angle - start_angle| equals the commanded sweep.
    """

    center: tuple
    radius: float
    start_angle: float
    end_angle: float
    ccw: bool

    @property
    def sweep(self) -> float:
        return abs(self.end_angle - self.start_angle)

    def point_at(self, angle: float) -> tuple:
        return (self.center[0] + self.radius * math.cos(angle),
                self.center[1] + self.radius * math.sin(angle))

    @property
    def start_point(self) -> tuple:
        return self.point_at(self.start_angle)

    @property
    def end_point(self) -> tuple:
        return self.point_at(self.end_angle)


def solve_arc(start, end, alpha: float, f) -> ArcGeometry:
    """Recover the arc through two endpoints with sweep angle alpha.

    The radius follows from the chord length, |end - start| = 2 R sin(alpha/2);
    the center sits on the perpendicular bisector of the chord, on the side
    dictated by the direction flag (f truthy = counterclockwise sweep from
    start to end).

    Raises DegenerateArc for a (near-)zero or full sweep, or coincident
    endpoints.
    """
    ccw = bool(f)
    sx, sy = float(start[0]), float(start[1])
    ex, ey = float(end[0]), float(end[1])
    if alpha < 1e-9 or alpha > _TWO_PI - 1e-9:
        raise DegenerateArc(f"arc sweep {alpha} outside (0, 2*pi)")
    chord = math.hypot(ex - sx, ey - sy)
    span = max(abs(sx), abs(sy), abs(ex), abs(ey), 1.0)
    if chord < 1e-12 * span:
        raise DegenerateArc("arc endpoints coincide; use a Circle for full loops")

    radius = chord / (2.0 * math.sin(alpha / 2.0))
    mx, my = (sx + ex) / 2.0, (sy + ey) / 2.0
    # Unit chord direction and its ccw normal.
    ux, uy = (ex - sx) / chord, (ey - sy) / chord
    nx, ny = -uy, ux
    h = math.sqrt(max(radius * radius - (chord / 2.0) ** 2, 0.0))
    side = 1.0 if ccw == (alpha <= math.pi) else -1.0
    cx, cy = mx + side * h * nx, my + side * h * ny

    start_angle = math.atan2(sy - cy, sx - cx)
    end_angle = start_angle + alpha if ccw else start_angle - alpha
    return ArcGeometry((cx, cy), radius, start_angle, end_angle, ccw)


@dataclass(frozen=True)
class PathLoop:
    """Closed chain of line segments and arcs."""

    segments: tuple   # ((x0, y0), (x1, y1)) pairs
    arcs: tuple       # ArcGeometry


@dataclass(frozen=True)
class CircleLoop:
    center: tuple
    radius: float


@dataclass(frozen=True)
class Profile2D:
    """Closed loops whose union is interpreted by the even-odd rule."""

    loops: tuple

    def contains(self, xs, ys):
        """Vectorized even-odd containment test for query points."""
        return _contains(self.loops, np.asarray(xs, dtype=float),
                         np.asarray(ys, dtype=float))

    def contains_point(self, x: float, y: float) -> bool:
        return bool(self.contains(np.array([x]), np.array([y]))[0])


def build_profile(loops: Sequence[Sequence]) -> Profile2D:
    """Assemble a profile from groups of dequantized curve commands.

    Each group is one loop: either a lone RealCircle, or a chain of
    RealLine/RealArc commands.  The chain is cyclic: the loop starts at the
    last command's endpoint, and each command's stored (x, y) is where its
    curve ends.
    """
    built = []
    for group in loops:
        cmds = list(group)
        if not cmds:
            raise OpenLoop("empty loop group")
        if any(isinstance(c, RealCircle) for c in cmds):
            if len(cmds) != 1:
                raise OpenLoop("a Circle must be the only member of its loop")
            c = cmds[0]
            built.append(CircleLoop((c.x, c.y), c.r))
            continue
        segments = []
        arcs = []
        prev = (cmds[-1].x, cmds[-1].y)
        for c in cmds:
            cur = (c.x, c.y)
            if isinstance(c, RealLine):
                segments.append((prev, cur))
            elif isinstance(c, RealArc):
                arcs.append(solve_arc(prev, cur, c.sweep, c.ccw))
            else:
                raise OpenLoop(f"unexpected command in loop: {c!r}")
            prev = cur
        first = (cmds[-1].x, cmds[-1].y)
        if math.hypot(prev[0] - first[0], prev[1] - first[1]) > 1e-6:
            raise OpenLoop("loop endpoint chain does not close")
        built.append(PathLoop(tuple(segments), tuple(arcs)))
    return Profile2D(tuple(built))


def _contains(loops, xs, ys):
    crossings = np.zeros(xs.shape, dtype=np.int64)
    for loop in loops:
        if isinstance(loop, CircleLoop):
            cx, cy = loop.center
            dy = ys - cy
            h2 = loop.radius * loop.radius - dy * dy
            row = h2 > 0.0          # tangent rows (h2 == 0) cross nowhere
            if not row.any():
                continue
            xoff = np.sqrt(np.where(row, h2, 0.0))
            crossings += np.where(row & (cx + xoff > xs), 1, 0)
            crossings += np.where(row & (cx - xoff > xs), 1, 0)
            continue
        for (ax, ay), (bx, by) in loop.segments:
            straddles = (ay > ys) != (by > ys)
            if not straddles.any():
                continue
            with np.errstate(divide="ignore", invalid="ignore"):
                xint = ax + (ys - ay) * (bx - ax) / (by - ay)
            crossings += np.where(straddles & (xint > xs), 1, 0)
        for arc in loop.arcs:
            crossings += _arc_crossings(arc, xs, ys)
    return (crossings % 2) == 1


def _arc_crossings(arc: ArcGeometry, xs, ys):
    cx, cy = arc.center
    dy = ys - cy
    h2 = arc.radius * arc.radius - dy * dy
    row = h2 > 0.0
    out = np.zeros(xs.shape, dtype=np.int64)
    if not row.any():
        return out
    xoff = np.sqrt(np.where(row, h2, 0.0))
    if arc.ccw:
        a0, sweep = arc.start_angle, arc.end_angle - arc.start_angle
    else:
        a0, sweep = arc.end_angle, arc.start_angle - arc.end_angle
    for sign in (1.0, -1.0):
        px = cx + sign * xoff
        t = np.arctan2(dy, sign * xoff)
        # Half-open angular interval [a0, a0 + sweep): joints between
        # consecutive pieces are counted exactly once.
        d = np.mod(t - a0, _TWO_PI)
        on_arc = row & (d < sweep) & (px > xs)
        out += np.where(on_arc, 1, 0)
    return out


@dataclass(frozen=True)
class SketchFrame:
    """Oriented sketch plane: rotation (orthonormal), origin and scale."""

    rotation: np.ndarray   # 3x3
    origin: np.ndarray     # 3
    scale: float

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=float)
        if r.shape != (3, 3) or not np.allclose(r.T @ r, np.eye(3), atol=1e-9):
            raise GeometryError("rotation must be a 3x3 orthonormal matrix")
        if self.scale <= 0.0:
            raise GeometryError(f"scale must be positive, got {self.scale}")

    @classmethod
    def from_extrude(cls, e: RealExtrude) -> "SketchFrame":
        return cls(euler_rotation(e.theta, e.phi, e.gamma),
                   np.array([e.px, e.py, e.pz], dtype=float), e.scale)

    def to_local(self, points: np.ndarray) -> np.ndarray:
        """World -> sketch-local: l = R^T (w - origin)."""
        return (np.asarray(points, dtype=float) - self.origin) @ self.rotation


def euler_rotation(theta: float, phi: float, gamma: float) -> np.ndarray:
    """Intrinsic Z(gamma) . Y(phi) . X(theta) rotation matrix."""
    ct, st = math.cos(theta), math.sin(theta)
    cp, sp = math.cos(phi), math.sin(phi)
    cg, sg = math.cos(gamma), math.sin(gamma)
    rx = np.array([[1, 0, 0], [0, ct, -st], [0, st, ct]], dtype=float)
    ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]], dtype=float)
    rz = np.array([[cg, -sg, 0], [sg, cg, 0], [0, 0, 1]], dtype=float)
    return rz @ ry @ rx


@dataclass(frozen=True)
class VoxelSolid:
    """Dense boolean occupancy over a regular grid on an axis-aligned box."""

    resolution: int
    bounds: tuple              # ((xmin, ymin, zmin), (xmax, ymax, zmax))
    occupancy: np.ndarray      # bool, shape (n, n, n)

    def __post_init__(self):
        n = self.resolution
        if self.occupancy.shape != (n, n, n):
            raise GeometryError(f"occupancy shape {self.occupancy.shape} != ({n},{n},{n})")

    @property
    def is_empty(self) -> bool:
        return not bool(self.occupancy.any())

    @property
    def voxel_pitch(self) -> np.ndarray:
        lo, hi = np.asarray(self.bounds[0]), np.asarray(self.bounds[1])
        return (hi - lo) / self.resolution

    @property
    def voxel_volume(self) -> float:
        return float(np.prod(self.voxel_pitch))

    def volume(self) -> float:
        """Occupied volume estimate: voxel count times voxel volume."""
        return float(np.count_nonzero(self.occupancy)) * self.voxel_volume


def _check_same_grid(a: VoxelSolid, b: VoxelSolid) -> None:
    if a.resolution != b.resolution or a.bounds != b.bounds:
        raise GeometryError("solids live on different grids")


def solid_union(a: VoxelSolid, b: VoxelSolid) -> VoxelSolid:
    _check_same_grid(a, b)
    return VoxelSolid(a.resolution, a.bounds, a.occupancy | b.occupancy)


def solid_intersect(a: VoxelSolid, b: VoxelSolid) -> VoxelSolid:
    _check_same_grid(a, b)
    return VoxelSolid(a.resolution, a.bounds, a.occupancy & b.occupancy)


def solid_cut(a: VoxelSolid, b: VoxelSolid) -> VoxelSolid:
    _check_same_grid(a, b)
    return VoxelSolid(a.resolution, a.bounds, a.occupancy & ~b.occupancy)


def _voxel_centers(resolution: int, bounds) -> np.ndarray:
    lo = np.asarray(bounds[0], dtype=float)
    hi = np.asarray(bounds[1], dtype=float)
    axes = [lo[k] + (hi[k] - lo[k]) * (np.arange(resolution) + 0.5) / resolution
            for k in range(3)]
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    return np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)


def _extent_interval(e: RealExtrude) -> tuple:
    if e.u is ExtentType.ONE_SIDE:
        lo, hi = 0.0, e.e1
    elif e.u is ExtentType.SYMMETRIC:
        lo, hi = -e.e1 / 2.0, e.e1 / 2.0
    else:
        lo, hi = -e.e2, e.e1
    return (lo, hi) if lo <= hi else (hi, lo)


def extrusion_steps(seq: ContinuousSequence):
    """Group a continuous sequence into (loops, extrude) evaluation steps.

    Loops of a sketch group stay live for every Extrude that follows them;
    a SOL after an Extrude starts a new group.
    """
    steps = []
    group: list = []
    current: list = []
    extruded = False
    for c in seq:
        if isinstance(c, Sol):
            if extruded:
                group, extruded = [], False
            current = []
            group.append(current)
        elif isinstance(c, (RealLine, RealArc, RealCircle)):
            current.append(c)
        elif isinstance(c, RealExtrude):
            steps.append(([list(loop) for loop in group if loop], c))
            extruded = True
        elif isinstance(c, Eos):
            break
    return steps


def evaluate_solid(seq: ContinuousSequence, resolution: int = 64,
                   bounds=DEFAULT_BOUNDS) -> VoxelSolid:
    """Evaluate a continuous sequence into a voxel solid.

    Per step: voxel centers are transformed into the sketch-local frame,
    tested for 2D containment in the (1/s)-scaled plane coordinates and for
    the axial extent, then merged into the accumulator according to the
    boolean operation (NewBody/Join = union, Cut = difference, Intersect =
    intersection).  The result can be empty; that is a signal, not an error.
    """
    if resolution < 8:
        raise GeometryError(f"resolution {resolution} < 8")
    centers = _voxel_centers(resolution, bounds)
    acc = np.zeros(len(centers), dtype=bool)
    for loops, ext in extrusion_steps(seq):
        if ext.scale <= 0.0:
            # a zero-scale profile occupies nothing
            mask = np.zeros(len(centers), dtype=bool)
        else:
            profile = build_profile(loops)
            frame = SketchFrame.from_extrude(ext)
            local = frame.to_local(centers)
            u = local[:, 0] / frame.scale
            v = local[:, 1] / frame.scale
            w = local[:, 2]
            lo, hi = _extent_interval(ext)
            mask = profile.contains(u, v) & (w >= lo) & (w <= hi)
        if ext.b is BooleanOp.CUT:
            acc &= ~mask
        elif ext.b is BooleanOp.INTERSECT:
            acc &= mask
        else:
            acc |= mask
    n = resolution
    return VoxelSolid(n, (tuple(bounds[0]), tuple(bounds[1])),
                      acc.reshape(n, n, n))
