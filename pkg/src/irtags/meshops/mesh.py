"""Indexed triangle meshes, STL I/O and topology checks."""

from __future__ import annotations

import logging
import re
import struct
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.spatial import cKDTree

from ..errors import MalformedStl

log = logging.getLogger(__name__)

WELD_TOL = 1e-6
DEGENERATE_AREA = 1e-12


class Material(str, Enum):
    IR_PLA = "ir_pla"
    REGULAR_PLA = "regular_pla"
    AIR = "air"


MATERIAL_INDEX = {Material.IR_PLA: 0, Material.REGULAR_PLA: 1, Material.AIR: 2}
MATERIALS = tuple(MATERIAL_INDEX)


class Orientation(str, Enum):
    SOLID = "solid"
    CAVITY = "cavity"


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Immutable triangle mesh.

    ``cavity`` flags triangles that belong to inverted (inward-facing) shells
    and ``shell`` holds a per-triangle shell id, so a joined object keeps track
    of which closed surface every triangle came from.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    material: Material = Material.IR_PLA
    cavity: np.ndarray | None = None
    shell: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if not np.all(np.isfinite(v)):
            raise ValueError("mesh has non-finite vertex coordinates")
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise ValueError("triangle index out of range")
        cav = np.zeros(len(t), bool) if self.cavity is None else np.asarray(self.cavity, bool).copy()
        sh = np.zeros(len(t), np.int64) if self.shell is None else np.asarray(self.shell, np.int64).copy()
        if cav.shape != (len(t),) or sh.shape != (len(t),):
            raise ValueError("per-triangle arrays do not match triangle count")
        for name, arr in (("vertices", v), ("triangles", t), ("cavity", cav), ("shell", sh)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def orientation(self) -> Orientation:
        if len(self.cavity) and self.cavity.all():
            return Orientation.CAVITY
        return Orientation.SOLID

    @property
    def corners(self) -> np.ndarray:
        """(T, 3, 3) triangle vertex coordinates."""
        if "corners" not in self._cache:
            self._cache["corners"] = self.vertices[self.triangles]
        return self._cache["corners"]

    def __len__(self):
        return len(self.triangles)

    def with_material(self, material: Material) -> TriangleMesh:
        return TriangleMesh(self.vertices, self.triangles, material, self.cavity, self.shell)

    def flipped(self) -> TriangleMesh:
        """Reverse the winding and toggle the cavity flag of every triangle."""
        return TriangleMesh(self.vertices, self.triangles[:, ::-1], self.material, ~self.cavity, self.shell)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def triangle_set(self, decimals: int = 6) -> set:
        """Orientation-preserving, vertex-order-independent triangle set for comparisons."""
        out = set()
        for tri in np.round(self.corners, decimals):
            pts = [tuple(p) for p in tri]
            k = pts.index(min(pts))
            out.add(tuple(pts[k:] + pts[:k]))
        return out


def face_normals(mesh: TriangleMesh, unit: bool = True) -> np.ndarray:
    c = mesh.corners
    n = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
    if unit:
        n = n / np.maximum(np.linalg.norm(n, axis=1, keepdims=True), 1e-300)
    return n


def triangle_areas(mesh: TriangleMesh) -> np.ndarray:
    return 0.5 * np.linalg.norm(face_normals(mesh, unit=False), axis=1)


def signed_volume(mesh: TriangleMesh) -> float:
    c = mesh.corners
    return float(np.einsum("ij,ij->i", c[:, 0], np.cross(c[:, 1], c[:, 2])).sum() / 6.0)


def concat(meshes: list[TriangleMesh], material: Material | None = None) -> TriangleMesh:
    """Concatenate meshes, renumbering shells so each input keeps distinct ids."""
    if not meshes:
        return TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), np.int64), material or Material.IR_PLA)
    verts, tris, cav, sh = [], [], [], []
    offset = 0
    next_shell = 0
    for m in meshes:
        verts.append(m.vertices)
        tris.append(m.triangles + offset)
        cav.append(m.cavity)
        if len(m.shell):
            remap = np.unique(m.shell, return_inverse=True)[1]
            sh.append(remap + next_shell)
            next_shell += int(remap.max()) + 1
        else:
            sh.append(m.shell)
        offset += len(m.vertices)
    return TriangleMesh(
        np.concatenate(verts),
        np.concatenate(tris),
        material or meshes[0].material,
        np.concatenate(cav),
        np.concatenate(sh),
    )


def _edge_counts(tris: np.ndarray):
    directed = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    return directed


def is_edge_manifold(mesh: TriangleMesh, per_shell: bool = True) -> bool:
    """Every edge of every shell is used by exactly two triangles with opposite
    directions (closed, consistently oriented 2-manifold)."""
    if len(mesh) == 0:
        return True
    groups = np.unique(mesh.shell) if per_shell else [None]
    for g in groups:
        tris = mesh.triangles if g is None else mesh.triangles[mesh.shell == g]
        directed = _edge_counts(tris)
        if len(np.unique(directed, axis=0)) != len(directed):
            return False
        undirected = np.sort(directed, axis=1)
        _, counts = np.unique(undirected, axis=0, return_counts=True)
        if np.any(counts != 2):
            return False
    return True


def is_closed(mesh: TriangleMesh) -> bool:
    """Directed edge (a, b) occurs exactly as often as (b, a): closed surface,
    possibly made of several shells touching along edges."""
    directed = _edge_counts(mesh.triangles)
    fwd, cf = np.unique(directed, axis=0, return_counts=True)
    rev, cr = np.unique(directed[:, ::-1], axis=0, return_counts=True)
    return len(fwd) == len(rev) and bool(np.array_equal(fwd, rev) and np.array_equal(cf, cr))


def weld(points: np.ndarray, tol: float = WELD_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Merge points closer than ``tol``. Returns (unique points, index map)."""
    n = len(points)
    parent = np.arange(n)
    if n:
        pairs = cKDTree(points).query_pairs(tol, output_type="ndarray")

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for a, b in pairs:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
        for i in range(n):
            parent[i] = find(i)
    roots, inverse = np.unique(parent, return_inverse=True)
    return points[roots], inverse


def mesh_from_soup(corners: np.ndarray, material: Material = Material.IR_PLA) -> TriangleMesh:
    corners = np.asarray(corners, dtype=np.float64).reshape(-1, 3, 3)
    if not np.all(np.isfinite(corners)):
        raise MalformedStl("non-finite coordinate in STL")
    verts, idx = weld(corners.reshape(-1, 3))
    tris = idx.reshape(-1, 3)
    mesh = TriangleMesh(verts, tris, material)
    areas = triangle_areas(mesh)
    keep = (areas >= DEGENERATE_AREA) & (tris[:, 0] != tris[:, 1]) & (tris[:, 1] != tris[:, 2]) & (tris[:, 0] != tris[:, 2])
    dropped = int((~keep).sum())
    if dropped:
        log.warning("dropped %d degenerate triangles", dropped)
        mesh = TriangleMesh(verts, tris[keep], material)
    mesh._cache["dropped_degenerate"] = dropped
    return mesh


_FLOAT = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|[-+]?(?:nan|inf)"


def _parse_ascii(text: str) -> np.ndarray:
    verts = re.findall(r"vertex\s+(" + _FLOAT + r")\s+(" + _FLOAT + r")\s+(" + _FLOAT + r")", text, re.I)
    n_facets = len(re.findall(r"\bendfacet\b", text))
    if n_facets == 0 or len(verts) != 3 * n_facets:
        raise MalformedStl("ASCII STL facets do not each hold three vertices")
    return np.array(verts, dtype=np.float64).reshape(-1, 3, 3)


def load_stl(data: bytes, material: Material = Material.IR_PLA) -> TriangleMesh:
    """Parse binary or ASCII STL bytes; vertices are welded within 1e-6 mm."""
    if len(data) >= 84:
        (count,) = struct.unpack_from("<I", data, 80)
        if len(data) == 84 + 50 * count:
            rec = np.dtype([("n", "<f4", 3), ("v", "<f4", (3, 3)), ("attr", "<u2")])
            arr = np.frombuffer(data, dtype=rec, count=count, offset=84)
            return mesh_from_soup(arr["v"].astype(np.float64), material)
    head = data[:256].lstrip()
    if head[:5].lower() == b"solid":
        try:
            text = data.decode("ascii")
        except UnicodeDecodeError as exc:
            raise MalformedStl("STL starts with 'solid' but is not ASCII") from exc
        if "facet" in text:
            return mesh_from_soup(_parse_ascii(text), material)
    if len(data) < 84:
        raise MalformedStl(f"binary STL header truncated ({len(data)} bytes)")
    (count,) = struct.unpack_from("<I", data, 80)
    raise MalformedStl(f"binary STL declares {count} triangles but holds {(len(data) - 84) / 50:.2f}")


def save_stl(mesh: TriangleMesh, ascii: bool = False, name: str = "irtags") -> bytes:
    normals = face_normals(mesh)
    corners = mesh.corners
    if ascii:
        lines = [f"solid {name}"]
        for n, tri in zip(normals, corners):
            lines.append(f"  facet normal {n[0]:.9e} {n[1]:.9e} {n[2]:.9e}")
            lines.append("    outer loop")
            for p in tri:
                lines.append(f"      vertex {p[0]:.9e} {p[1]:.9e} {p[2]:.9e}")
            lines.append("    endloop")
            lines.append("  endfacet")
        lines.append(f"endsolid {name}")
        return ("\n".join(lines) + "\n").encode("ascii")
    rec = np.dtype([("n", "<f4", 3), ("v", "<f4", (3, 3)), ("attr", "<u2")])
    arr = np.zeros(len(mesh), dtype=rec)
    arr["n"] = normals
    arr["v"] = corners
    header = f"binary STL written by {name}".encode("ascii")[:80].ljust(80, b" ")
    return header + struct.pack("<I", len(mesh)) + arr.tobytes()
