"""Surface queries and the cavity-embedding primitives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyMesh, PrismProtrudes, SurfaceTooCurved, TagLargerThanFace
from ..tagcodes.bitmatrix import BitMatrix
from .mesh import Material, TriangleMesh, concat, face_normals, triangle_areas
from .raycast import RayScene, points_inside

# minimum distance between a cavity and the outer surface (the face the tag
# sits under is exempt)
CLEARANCE_MM = 0.2
MAX_FOOTPRINT_DEVIATION_DEG = 10.0

# outward-wound unit cube faces as quads of corner indices (bit 0 = x, 1 = y, 2 = z)
_BOX_QUADS = [(0, 2, 3, 1), (4, 5, 7, 6), (0, 1, 5, 4), (2, 6, 7, 3), (0, 4, 6, 2), (1, 3, 7, 5)]


@dataclass(frozen=True)
class Placement:
    anchor: tuple[float, float, float]
    tag_width: float
    up_hint: tuple[float, float, float] = (0.0, 1.0, 0.0)

    def __post_init__(self):
        if not self.tag_width > 0:
            raise ValueError("tag_width must be positive")
        object.__setattr__(self, "anchor", tuple(float(x) for x in self.anchor))
        object.__setattr__(self, "up_hint", tuple(float(x) for x in self.up_hint))


@dataclass(frozen=True)
class Frame:
    """Tangent frame at the tag anchor: ``right`` x ``up`` = ``normal``."""

    origin: np.ndarray
    right: np.ndarray
    up: np.ndarray
    normal: np.ndarray

    def to_world(self, u, v, depth):
        """Tag-plane coordinates (mm) to world; ``depth`` is measured inward."""
        u, v, depth = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float), np.asarray(depth, float))
        return (self.origin + u[..., None] * self.right + v[..., None] * self.up - depth[..., None] * self.normal)


def oriented_box(frame_origin, right, up, normal, u0, u1, v0, v1, d0, d1, material=Material.IR_PLA) -> TriangleMesh:
    """Closed box spanning [u0,u1] x [v0,v1] in the tag plane and depth [d0,d1] inward."""
    right, up, normal = (np.asarray(a, float) for a in (right, up, normal))
    corners = []
    for k in range(8):
        u = u1 if k & 1 else u0
        v = v1 if k & 2 else v0
        # z bit set means closer to the surface (smaller depth)
        d = d0 if k & 4 else d1
        corners.append(np.asarray(frame_origin, float) + u * right + v * up - d * normal)
    tris = []
    for a, b, c, d in _BOX_QUADS:
        tris.append((a, b, c))
        tris.append((a, c, d))
    return TriangleMesh(np.array(corners), np.array(tris), material)


def box(lo, hi, material=Material.IR_PLA) -> TriangleMesh:
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    return oriented_box(np.zeros(3), np.eye(3)[0], np.eye(3)[1], np.eye(3)[2], lo[0], hi[0], lo[1], hi[1], -hi[2], -lo[2], material)


def closest_points_on_triangles(p: np.ndarray, corners: np.ndarray) -> np.ndarray:
    """Closest point on each triangle to ``p`` (vectorized region test)."""
    a, b, c = corners[:, 0], corners[:, 1], corners[:, 2]
    ab, ac, ap = b - a, c - a, p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = 1.0 / (va + vb + vc)
        v = vb * denom
        w = vc * denom
        out = a + ab * v[:, None] + ac * w[:, None]
        # edge regions
        t_ab = d1 / (d1 - d3)
        t_ac = d2 / (d2 - d6)
        t_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
    conds = [
        (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0), b + (c - b) * t_bc[:, None],
        (vb <= 0) & (d2 >= 0) & (d6 <= 0), a + ac * t_ac[:, None],
        (d6 >= 0) & (d5 <= d6), c,
        (vc <= 0) & (d1 >= 0) & (d3 <= 0), a + ab * t_ab[:, None],
        (d3 >= 0) & (d4 <= d3), b,
        (d1 <= 0) & (d2 <= 0), a,
    ]
    # later entries take priority: vertex regions override edges, edges override face
    for mask, value in zip(conds[0::2], conds[1::2]):
        out = np.where(mask[:, None], value, out)
    return out


def surface_distance(mesh: TriangleMesh, points: np.ndarray, triangle_mask: np.ndarray | None = None) -> np.ndarray:
    corners = mesh.corners if triangle_mask is None else mesh.corners[triangle_mask]
    pts = np.asarray(points, float).reshape(-1, 3)
    if len(corners) == 0:
        return np.full(len(pts), np.inf)
    out = np.empty(len(pts))
    for i, p in enumerate(pts):
        q = closest_points_on_triangles(p, corners)
        out[i] = np.sqrt(((q - p) ** 2).sum(axis=1)).min()
    return out


def closest_normal(mesh: TriangleMesh, point) -> tuple[np.ndarray, np.ndarray]:
    """Nearest surface point and the unit normal of its supporting triangle(s).

    When several non-coplanar triangles are equally close (edges, corners),
    the lowest-index triangle decides the normal; coplanar ties are
    area-weighted.
    """
    if len(mesh) == 0:
        raise EmptyMesh("closest_normal on an empty mesh")
    p = np.asarray(point, float)
    q = closest_points_on_triangles(p, mesh.corners)
    dist = np.sqrt(((q - p) ** 2).sum(axis=1))
    dmin = dist.min()
    tied = np.flatnonzero(dist <= dmin + 1e-9 * max(1.0, dmin))
    normals = face_normals(mesh)
    first = tied[0]
    coplanar = tied[normals[tied] @ normals[first] > 1 - 1e-9]
    weighted = (normals[coplanar] * triangle_areas(mesh)[coplanar, None]).sum(axis=0)
    return q[first], weighted / np.linalg.norm(weighted)


def frame_at(mesh: TriangleMesh, placement: Placement) -> Frame:
    origin, normal = closest_normal(mesh, placement.anchor)
    up = np.asarray(placement.up_hint, float)
    up = up - (up @ normal) * normal
    if np.linalg.norm(up) < 1e-6:
        raise ValueError("up_hint is parallel to the surface normal at the anchor")
    up /= np.linalg.norm(up)
    right = np.cross(up, normal)
    return Frame(origin, right, up, normal)


def check_footprint(mesh: TriangleMesh, frame: Frame, width: float, scene: RayScene | None = None) -> None:
    """Reject tags whose flat footprint leaves the face or spans a curved region."""
    h = width / 2
    scene = scene or RayScene([mesh])
    for u, v in ((-h, -h), (h, -h), (h, h), (-h, h), (0, 0)):
        p = frame.to_world(u, v, 0.0)
        probe = p + frame.normal * max(width, 1.0)
        lengths, status = scene.trace(probe[None], -frame.normal[None])
        if lengths[0].sum() <= 0:
            raise TagLargerThanFace(f"tag footprint corner ({u:+.2f}, {v:+.2f}) mm lies off the surface")
        q, n = closest_normal(mesh, p)
        deviation = np.degrees(np.arccos(np.clip(n @ frame.normal, -1, 1)))
        lateral = (q - p) - ((q - p) @ frame.normal) * frame.normal
        if np.linalg.norm(lateral) > 1e-6 * max(1.0, width):
            raise TagLargerThanFace(f"tag footprint corner ({u:+.2f}, {v:+.2f}) mm exits the face")
        if deviation > MAX_FOOTPRINT_DEVIATION_DEG:
            raise SurfaceTooCurved(f"surface normal deviates {deviation:.1f} deg under the tag footprint")


def cell_box(frame: Frame, size: int, width: float, row: int, col: int, t_shell: float, t_code: float) -> TriangleMesh:
    s = width / size
    u0 = -width / 2 + col * s
    v1 = width / 2 - row * s
    return oriented_box(frame.origin, frame.right, frame.up, frame.normal, u0, u0 + s, v1 - s, v1, t_shell, t_shell + t_code)


def cell_centers(frame: Frame, size: int, width: float, depth: float = 0.0) -> np.ndarray:
    """(size, size, 3) world positions of module centers at ``depth``."""
    s = width / size
    idx = np.arange(size)
    u = -width / 2 + (idx + 0.5) * s
    v = width / 2 - (idx + 0.5) * s
    uu, vv = np.meshgrid(u, v)
    return frame.to_world(uu, vv, depth)


def bit_prisms(
    bitmatrix: BitMatrix,
    placement: Placement,
    frame: Frame,
    t_shell: float,
    t_code: float,
    which: str = "dark",
    obj: TriangleMesh | None = None,
) -> list[TriangleMesh]:
    """One closed prism per selected module, buried ``t_shell`` below the surface.

    With ``obj`` given, every prism must fit inside it with the clearance
    margin, otherwise TagLargerThanFace is raised.
    """
    if which not in ("dark", "light"):
        raise ValueError("which must be 'dark' or 'light'")
    if t_shell < 0 or not t_code > 0:
        raise ValueError("thicknesses must be positive")
    select = bitmatrix.bits if which == "dark" else ~bitmatrix.bits
    n = bitmatrix.size
    prisms = [
        cell_box(frame, n, placement.tag_width, r, c, t_shell, t_code)
        for r, c in zip(*np.nonzero(select))
    ]
    if obj is not None and prisms:
        try:
            validate_inside(obj, prisms, exempt_normal=frame.normal)
        except PrismProtrudes as exc:
            raise TagLargerThanFace(str(exc)) from exc
    return prisms


def validate_inside(obj: TriangleMesh, prisms: list[TriangleMesh], exempt_normal=None, scene: RayScene | None = None) -> None:
    pts = np.unique(np.concatenate([p.vertices for p in prisms]).round(9), axis=0)
    inside = points_inside(obj, pts, scene)
    if not inside.all():
        bad = pts[~inside][0]
        raise PrismProtrudes(f"cavity vertex {bad.round(4).tolist()} lies outside the object")
    mask = None
    if exempt_normal is not None:
        mask = face_normals(obj) @ np.asarray(exempt_normal, float) < np.cos(np.radians(MAX_FOOTPRINT_DEVIATION_DEG))
    dist = surface_distance(obj, pts, mask)
    if dist.min() < CLEARANCE_MM - 1e-9:
        bad = pts[np.argmin(dist)]
        raise PrismProtrudes(f"cavity vertex {bad.round(4).tolist()} is {dist.min():.3f} mm from the surface (< {CLEARANCE_MM} mm)")


def join_cavities(obj: TriangleMesh, prisms: list[TriangleMesh], check: bool = True, exempt_normal=None) -> TriangleMesh:
    """Append every prism with inverted winding, turning it into an air cavity."""
    if not prisms:
        return obj
    if check:
        validate_inside(obj, prisms, exempt_normal)
    return concat([obj] + [p.flipped() for p in prisms], material=obj.material)
