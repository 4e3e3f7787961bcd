"""Surface extraction, binary STL export and surface point sampling."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import BinaryIO

import numpy as np

from .errors import EmptyCloud, EmptyMesh, EmptySolid
from .geometry import VoxelSolid


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray   # (V, 3) float64
    triangles: np.ndarray  # (T, 3) int64, indices into vertices

    def __post_init__(self):
        if len(self.triangles) and (self.triangles.min() < 0
                                    or self.triangles.max() >= len(self.vertices)):
            raise ValueError("triangle index out of range")

    @property
    def triangle_points(self) -> np.ndarray:
        """(T, 3, 3) corner coordinates."""
        return self.vertices[self.triangles]

    def areas(self) -> np.ndarray:
        pts = self.triangle_points
        cross = np.cross(pts[:, 1] - pts[:, 0], pts[:, 2] - pts[:, 0])
        return 0.5 * np.linalg.norm(cross, axis=1)


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray   # (N, 3)
    seed: int

    def __len__(self) -> int:
        return len(self.points)


# Face templates: for a boundary between an occupied cell and its empty
# neighbour along +axis/-axis, the quad lies on the shared cell face with
# outward winding.  Corners are given as offsets from the occupied cell's
# (i, j, k) corner index.
_FACES = {
    (0, +1): [(1, 0, 0), (1, 1, 0), (1, 1, 1), (1, 0, 1)],
    (0, -1): [(0, 0, 0), (0, 0, 1), (0, 1, 1), (0, 1, 0)],
    (1, +1): [(0, 1, 0), (0, 1, 1), (1, 1, 1), (1, 1, 0)],
    (1, -1): [(0, 0, 0), (1, 0, 0), (1, 0, 1), (0, 0, 1)],
    (2, +1): [(0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)],
    (2, -1): [(0, 0, 0), (0, 1, 0), (1, 1, 0), (1, 0, 0)],
}


def _corner_component_lut() -> np.ndarray:
    """For every 2x2x2 cell occupancy pattern (8-bit), the 6-connected
    component label of each cell (label = smallest member bit, -1 empty).

    Cells are indexed by bit k = dx*4 + dy*2 + dz; two cells are adjacent
    when their bit coordinates differ along exactly one axis.
    """
    neighbours = [[] for _ in range(8)]
    for a in range(8):
        for axis_bit in (4, 2, 1):
            neighbours[a].append(a ^ axis_bit)
    lut = np.full((256, 8), -1, dtype=np.int8)
    for pattern in range(256):
        for start in range(8):
            if not pattern >> start & 1 or lut[pattern, start] >= 0:
                continue
            stack, members = [start], []
            seen = {start}
            while stack:
                cell = stack.pop()
                members.append(cell)
                for nb in neighbours[cell]:
                    if pattern >> nb & 1 and nb not in seen:
                        seen.add(nb)
                        stack.append(nb)
            label = min(members)
            for cell in members:
                lut[pattern, cell] = label
    return lut


_CORNER_LUT = _corner_component_lut()


def extract_mesh(solid: VoxelSolid) -> TriangleMesh:
    """Extract the watertight boundary surface of the occupancy field.

    Every face separating an occupied cell from an empty (or outside) cell
    becomes two triangles with outward winding, and vertices land on exact
    cell corners.  At each corner, faces share a vertex only when their
    owning cells are 6-connected within the corner's 2x2x2 cell block, so
    diagonal pinch contacts split into separate manifold sheets instead of
    producing edges with four incident triangles.  Deterministic for
    identical input.

    Raises EmptySolid for an all-empty grid.
    """
    occ = solid.occupancy
    if not occ.any():
        raise EmptySolid("cannot extract a mesh from an empty solid")
    n = solid.resolution
    padded = np.pad(occ, 1, mode="constant", constant_values=False)

    # patterns[g] = 8-bit occupancy of the cell block around corner g.
    patterns = np.zeros((n + 1, n + 1, n + 1), dtype=np.int64)
    for dx in (0, 1):
        for dy in (0, 1):
            for dz in (0, 1):
                bit = dx * 4 + dy * 2 + dz
                patterns += (padded[dx:dx + n + 1, dy:dy + n + 1, dz:dz + n + 1]
                             .astype(np.int64) << bit)

    corner_pts = []   # (Q, 4, 3) lattice corners per quad
    owner_bits = []   # (Q, 4) owning cell's bit position in each corner block
    for axis in range(3):
        for direction in (+1, -1):
            there = np.roll(padded, -direction, axis=axis)
            cells = np.argwhere(padded & ~there) - 1   # un-pad
            if len(cells) == 0:
                continue
            offsets = np.array(_FACES[(axis, direction)], dtype=np.int64)
            pts = cells[:, None, :] + offsets[None, :, :]
            rel = cells[:, None, :] - pts + 1           # owning cell in block
            corner_pts.append(pts)
            owner_bits.append(rel[..., 0] * 4 + rel[..., 1] * 2 + rel[..., 2])
    pts = np.concatenate(corner_pts, axis=0).reshape(-1, 3)
    bits = np.concatenate(owner_bits, axis=0).reshape(-1)

    comp = _CORNER_LUT[patterns[pts[:, 0], pts[:, 1], pts[:, 2]], bits]
    keyed = np.concatenate([pts, comp[:, None].astype(np.int64)], axis=1)
    uniq, inverse = np.unique(keyed, axis=0, return_inverse=True)
    quad_idx = inverse.reshape(-1, 4)
    tris = np.concatenate([quad_idx[:, [0, 1, 2]], quad_idx[:, [0, 2, 3]]], axis=0)

    lo = np.asarray(solid.bounds[0], dtype=float)
    vertices = lo + uniq[:, :3] * solid.voxel_pitch
    return TriangleMesh(vertices, tris.astype(np.int64))


def mesh_volume(mesh: TriangleMesh) -> float:
    """Enclosed volume by the divergence theorem (outward winding assumed)."""
    pts = mesh.triangle_points
    return float(np.einsum("ij,ij->i", pts[:, 0],
                           np.cross(pts[:, 1], pts[:, 2])).sum() / 6.0)


def edge_degrees(mesh: TriangleMesh) -> dict:
    """Histogram {incident triangle count: number of undirected edges}."""
    t = mesh.triangles
    edges = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]], axis=0)
    edges = np.sort(edges, axis=1)
    _, counts = np.unique(edges, axis=0, return_counts=True)
    vals, freq = np.unique(counts, return_counts=True)
    return {int(v): int(f) for v, f in zip(vals, freq)}


def is_watertight(mesh: TriangleMesh) -> bool:
    """True when every undirected edge is shared by exactly two triangles."""
    degrees = edge_degrees(mesh)
    return set(degrees) == {2} if degrees else False


def euler_characteristic(mesh: TriangleMesh) -> int:
    """V - E + F over the mesh's unique vertices and undirected edges."""
    t = mesh.triangles
    used = np.unique(t)
    edges = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]], axis=0)
    edges = np.unique(np.sort(edges, axis=1), axis=0)
    return int(len(used) - len(edges) + len(t))


# --- binary STL -----------------------------------------------------------------

_STL_TRI = struct.Struct("<12fH")


def export_stl(mesh: TriangleMesh, sink: BinaryIO) -> int:
    """Write binary STL (80-byte header, uint32 count, 50 bytes/triangle).

    Normals are unit facet normals; the attribute byte count is zero.
    Returns the number of bytes written.
    """
    if len(mesh.triangles) == 0:
        raise EmptyMesh("cannot export an empty mesh")
    header = b"ccstools binary stl".ljust(80, b"\0")
    written = sink.write(header)
    written += sink.write(struct.pack("<I", len(mesh.triangles)))
    pts = mesh.triangle_points.astype(np.float64)
    normals = np.cross(pts[:, 1] - pts[:, 0], pts[:, 2] - pts[:, 0])
    lengths = np.linalg.norm(normals, axis=1, keepdims=True)
    normals = np.divide(normals, lengths, out=np.zeros_like(normals),
                        where=lengths > 0)
    for n, tri in zip(normals.astype(np.float32), pts.astype(np.float32)):
        written += sink.write(_STL_TRI.pack(*n, *tri[0], *tri[1], *tri[2], 0))
    return written


def read_stl(source: BinaryIO) -> TriangleMesh:
    """Read a binary STL into a mesh, merging byte-identical vertices."""
    header = source.read(80)
    if len(header) < 80:
        raise EmptyMesh("truncated STL header")
    (count,) = struct.unpack("<I", source.read(4))
    raw = source.read(50 * count)
    if len(raw) != 50 * count:
        raise EmptyMesh("truncated STL body")
    data = np.frombuffer(raw, dtype=np.dtype([("n", "<f4", 3), ("v", "<f4", (3, 3)),
                                              ("attr", "<u2")]))
    flat = data["v"].reshape(-1, 3).astype(np.float64)
    uniq, inverse = np.unique(flat, axis=0, return_inverse=True)
    return TriangleMesh(uniq, inverse.reshape(-1, 3).astype(np.int64))


# --- surface sampling --------------------------------------------------------------

def sample_point_cloud(mesh: TriangleMesh, n: int, seed: int = 0) -> PointCloud:
    """Sample n surface points: area-weighted triangle selection, then
    uniform barycentric placement.  Deterministic for a fixed seed."""
    if n < 1:
        raise EmptyCloud(f"requested {n} points")
    areas = mesh.areas()
    total = areas.sum()
    if len(mesh.triangles) == 0 or total <= 0.0:
        raise EmptyMesh("mesh has no positive-area triangles")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(areas), size=n, p=areas / total)
    u = rng.random(n)
    v = rng.random(n)
    flip = u + v > 1.0
    u[flip] = 1.0 - u[flip]
    v[flip] = 1.0 - v[flip]
    pts = mesh.triangle_points[chosen]
    samples = pts[:, 0] + u[:, None] * (pts[:, 1] - pts[:, 0]) \
        + v[:, None] * (pts[:, 2] - pts[:, 0])
    return PointCloud(samples, seed)


# --- point cloud files ---------------------------------------------------------------

def write_xyz(cloud: PointCloud, sink) -> None:
    """One "x y z" line per point, 9 significant digits."""
    for x, y, z in cloud.points:
        sink.write(f"{x:.9g} {y:.9g} {z:.9g}\n")


def read_xyz(source) -> np.ndarray:
    rows = [[float(t) for t in line.split()] for line in source if line.strip()]
    return np.asarray(rows, dtype=float).reshape(-1, 3)


def write_point_cloud_bin(cloud: PointCloud, sink: BinaryIO) -> int:
    """Little-endian float32 triples behind an 8-byte uint64 count header."""
    written = sink.write(struct.pack("<Q", len(cloud.points)))
    written += sink.write(np.ascontiguousarray(cloud.points, dtype="<f4").tobytes())
    return written


def read_point_cloud_bin(source: BinaryIO) -> np.ndarray:
    (count,) = struct.unpack("<Q", source.read(8))
    data = np.frombuffer(source.read(12 * count), dtype="<f4").astype(np.float64)
    return data.reshape(count, 3)
