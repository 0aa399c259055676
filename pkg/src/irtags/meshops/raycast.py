"""Ray queries against triangle scenes.

A scene is flattened into one triangle array with a bounding volume
hierarchy built once; the hierarchy and arrays are read-only afterwards, so
a :class:`RayScene` can be queried from several threads.

Ray/triangle tests use the watertight shear formulation. A ray that passes
exactly through an edge shared by two consistently wound triangles is
counted once: zero edge functions are resolved by an antisymmetric
ownership rule applied to the edge as seen from the triangle's facing side.

Material occupancy along a ray comes from signed crossings: entering a
surface against its normal adds one to the winding of that surface's mesh,
leaving subtracts one. Inverted cavity shells therefore cancel the
enclosing solid inside the cavity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

# OpenMP is the thread-safe layer when several Python threads trace at once
if numba.config.THREADING_LAYER == "default":
    numba.config.THREADING_LAYER = "omp"

from ..errors import CameraInsideObject, NonWatertight
from .mesh import MATERIAL_INDEX, MATERIALS, Material, TriangleMesh

LEAF_SIZE = 4
MAX_HITS = 512
# the last mesh listed wins if two solids overlap
STATUS_OK, STATUS_ORIGIN_INSIDE, STATUS_UNBALANCED, STATUS_OVERFLOW = 0, 1, 2, 3
COINCIDENT_MM = 1e-9
# rays per work item of the parallel loops
_CHUNK = 256


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=np.float64).reshape(3)
        d = np.asarray(self.direction, dtype=np.float64).reshape(3)
        norm = np.linalg.norm(d)
        if not norm > 0:
            raise ValueError("ray direction must be non-zero")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d / norm)


def _build_bvh(corners: np.ndarray):
    n = len(corners)
    if n == 0:
        return (np.zeros((1, 3)), np.zeros((1, 3)) - 1.0, np.zeros(1, np.int64), np.zeros(1, np.int64), np.zeros(0, np.int64))
    lo = corners.min(axis=1)
    hi = corners.max(axis=1)
    cent = 0.5 * (lo + hi)
    order = np.arange(n)
    node_lo, node_hi, node_a, node_b = [], [], [], []  # a: left child or leaf start; b: -1 or leaf count

    def build(idx):
        me = len(node_lo)
        node_lo.append(lo[idx].min(axis=0))
        node_hi.append(hi[idx].max(axis=0))
        node_a.append(0)
        node_b.append(0)
        if len(idx) <= LEAF_SIZE:
            return me, [idx]
        c = cent[idx]
        axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
        if c[:, axis].max() - c[:, axis].min() <= 0:
            return me, [idx]
        srt = idx[np.argsort(c[:, axis], kind="stable")]
        half = len(srt) // 2
        return me, (srt[:half], srt[half:])

    # iterative build, leaves numbered into a permutation
    perm = []
    stack = [(order, -1, 0)]
    while stack:
        idx, parent, side = stack.pop()
        me, parts = build(idx)
        if parent >= 0:
            if side == 0:
                node_a[parent] = me
            else:
                node_b[parent] = -me - 1  # encoded right child
        if len(parts) == 1:
            node_a[me] = len(perm)
            node_b[me] = len(parts[0])
            perm.extend(parts[0].tolist())
        else:
            node_b[me] = -1
            stack.append((parts[1], me, 1))
            stack.append((parts[0], me, 0))
    return (
        np.array(node_lo),
        np.array(node_hi),
        np.array(node_a, dtype=np.int64),
        np.array(node_b, dtype=np.int64),
        np.array(perm, dtype=np.int64),
    )


@numba.njit(cache=True, inline="always")
def _owned(px, py, qx, qy):
    dy = qy - py
    return dy > 0.0 or (dy == 0.0 and qx - px < 0.0)


@numba.njit(cache=True)
def _intersect(o, kx, ky, kz, sx, sy, sz, v0, v1, v2):
    """Return (t, facing) with facing +1 for a hit on the side the normal
    points to, -1 for the back side, 0 for no hit."""
    ax = (v0[kx] - o[kx]) - sx * (v0[kz] - o[kz])
    ay = (v0[ky] - o[ky]) - sy * (v0[kz] - o[kz])
    bx = (v1[kx] - o[kx]) - sx * (v1[kz] - o[kz])
    by = (v1[ky] - o[ky]) - sy * (v1[kz] - o[kz])
    cx = (v2[kx] - o[kx]) - sx * (v2[kz] - o[kz])
    cy = (v2[ky] - o[ky]) - sy * (v2[kz] - o[kz])
    u = cx * by - cy * bx  # edge b -> c
    v = ax * cy - ay * cx  # edge c -> a
    w = bx * ay - by * ax  # edge a -> b
    det = u + v + w
    if det == 0.0:
        return 0.0, 0
    pos = det > 0.0
    # every non-zero edge function must share the sign of det
    if pos:
        if u < 0.0 or v < 0.0 or w < 0.0:
            return 0.0, 0
    else:
        if u > 0.0 or v > 0.0 or w > 0.0:
            return 0.0, 0
    if u == 0.0:
        if pos and not _owned(bx, by, cx, cy):
            return 0.0, 0
        if not pos and not _owned(cx, cy, bx, by):
            return 0.0, 0
    if v == 0.0:
        if pos and not _owned(cx, cy, ax, ay):
            return 0.0, 0
        if not pos and not _owned(ax, ay, cx, cy):
            return 0.0, 0
    if w == 0.0:
        if pos and not _owned(ax, ay, bx, by):
            return 0.0, 0
        if not pos and not _owned(bx, by, ax, ay):
            return 0.0, 0
    az = sz * (v0[kz] - o[kz])
    bz = sz * (v1[kz] - o[kz])
    cz = sz * (v2[kz] - o[kz])
    t = (u * az + v * bz + w * cz) / det
    # pos means the triangle winds counter-clockwise seen from the ray,
    # i.e. the ray meets the face against its normal
    return t, (-1 if pos else 1)


@numba.njit(cache=True)
def _collect(o, d, tmin, lo, hi, na, nb, perm, corners, hit_t, hit_tri, hit_face):
    kz = 0
    if abs(d[1]) > abs(d[kz]):
        kz = 1
    if abs(d[2]) > abs(d[kz]):
        kz = 2
    kx = (kz + 1) % 3
    ky = (kx + 1) % 3
    if d[kz] < 0.0:
        kx, ky = ky, kx
    sx = d[kx] / d[kz]
    sy = d[ky] / d[kz]
    sz = 1.0 / d[kz]
    inv = np.empty(3)
    for k in range(3):
        inv[k] = 1.0 / d[k] if d[k] != 0.0 else np.inf
    stack = np.empty(128, np.int64)
    sp = 0
    stack[sp] = 0
    sp += 1
    count = 0
    while sp > 0:
        sp -= 1
        node = stack[sp]
        t0 = -np.inf
        t1 = np.inf
        miss = False
        for k in range(3):
            if d[k] == 0.0:
                if o[k] < lo[node, k] or o[k] > hi[node, k]:
                    miss = True
                    break
            else:
                a = (lo[node, k] - o[k]) * inv[k]
                b = (hi[node, k] - o[k]) * inv[k]
                if a > b:
                    a, b = b, a
                if a > t0:
                    t0 = a
                if b < t1:
                    t1 = b
        if miss or t1 < t0 - 1e-9 or t1 < tmin - 1e-9:
            continue
        if nb[node] >= 0:
            start = na[node]
            for j in range(start, start + nb[node]):
                tri = perm[j]
                t, face = _intersect(o, kx, ky, kz, sx, sy, sz, corners[tri, 0], corners[tri, 1], corners[tri, 2])
                if face != 0 and t > tmin:
                    if count >= hit_t.shape[0]:
                        return -1
                    hit_t[count] = t
                    hit_tri[count] = tri
                    hit_face[count] = face
                    count += 1
        else:
            stack[sp] = na[node]
            sp += 1
            stack[sp] = -nb[node] - 1
            sp += 1
    return count


@numba.njit(cache=True)
def _sort_hits(n, hit_t, hit_tri, hit_face):
    for i in range(1, n):
        t = hit_t[i]
        tr = hit_tri[i]
        f = hit_face[i]
        j = i - 1
        while j >= 0 and hit_t[j] > t:
            hit_t[j + 1] = hit_t[j]
            hit_tri[j + 1] = hit_tri[j]
            hit_face[j + 1] = hit_face[j]
            j -= 1
        hit_t[j + 1] = t
        hit_tri[j + 1] = tr
        hit_face[j + 1] = f


@numba.njit(cache=True)
def _trace_one(o, d, lo, hi, na, nb, perm, corners, tri_mesh, tri_cavity, mesh_material, n_mesh, out, hit_t, hit_tri, hit_face, solid_w, cav_w):
    n = _collect(o, d, 0.0, lo, hi, na, nb, perm, corners, hit_t, hit_tri, hit_face)
    for k in range(3):
        out[k] = 0.0
    if n < 0:
        return STATUS_OVERFLOW
    _sort_hits(n, hit_t, hit_tri, hit_face)
    for m in range(n_mesh):
        solid_w[m] = 0
        cav_w[m] = 0
    status = STATUS_OK
    for i in range(n):
        tri = hit_tri[i]
        m = tri_mesh[tri]
        step = -hit_face[i]  # back side (facing -1) means entering
        if tri_cavity[tri]:
            cav_w[m] += step
        else:
            solid_w[m] += step
        if i + 1 < n:
            seg = hit_t[i + 1] - hit_t[i]
            # hits closer than COINCIDENT_MM belong to coincident faces; only
            # classify once the whole group is applied
            if seg <= COINCIDENT_MM:
                continue
            mat = -1
            air = False
            for mm in range(n_mesh):
                total = solid_w[mm] + cav_w[mm]
                if total < 0 or solid_w[mm] < 0:
                    status = STATUS_ORIGIN_INSIDE
                if total > 0:
                    mat = mesh_material[mm]
                elif solid_w[mm] > 0:
                    air = True
            if mat >= 0:
                out[mat] += seg
            elif air:
                out[2] += seg
    for mm in range(n_mesh):
        # a net exit means the ray started inside this solid
        if solid_w[mm] < 0 or solid_w[mm] + cav_w[mm] < 0:
            status = STATUS_ORIGIN_INSIDE
    if status == STATUS_ORIGIN_INSIDE:
        return status
    for mm in range(n_mesh):
        if solid_w[mm] != 0 or cav_w[mm] != 0:
            return STATUS_UNBALANCED
    return status


@numba.njit(cache=True, parallel=True)
def _trace_many(origins, dirs, lo, hi, na, nb, perm, corners, tri_mesh, tri_cavity, mesh_material, n_mesh, out, status):
    n_rays = origins.shape[0]
    n_chunks = (n_rays + _CHUNK - 1) // _CHUNK
    for c in numba.prange(n_chunks):
        hit_t = np.empty(MAX_HITS)
        hit_tri = np.empty(MAX_HITS, np.int64)
        hit_face = np.empty(MAX_HITS, np.int64)
        solid_w = np.empty(max(n_mesh, 1), np.int64)
        cav_w = np.empty(max(n_mesh, 1), np.int64)
        for r in range(c * _CHUNK, min(n_rays, (c + 1) * _CHUNK)):
            status[r] = _trace_one(
                origins[r], dirs[r], lo, hi, na, nb, perm, corners, tri_mesh, tri_cavity, mesh_material, n_mesh,
                out[r], hit_t, hit_tri, hit_face, solid_w, cav_w,
            )


@numba.njit(cache=True, parallel=True)
def _winding_many(points, d, lo, hi, na, nb, perm, corners, out):
    for r in numba.prange(points.shape[0]):
        hit_t = np.empty(MAX_HITS)
        hit_tri = np.empty(MAX_HITS, np.int64)
        hit_face = np.empty(MAX_HITS, np.int64)
        n = _collect(points[r], d, 0.0, lo, hi, na, nb, perm, corners, hit_t, hit_tri, hit_face)
        w = 0
        for i in range(max(n, 0)):
            w += hit_face[i]  # leaving (+1 facing) counts one enclosure
        out[r] = w if n >= 0 else -999


class RayScene:
    """A list of meshes flattened into a shared BVH for ray queries."""

    def __init__(self, meshes: list[TriangleMesh] | list[tuple]):
        items = []
        for entry in meshes:
            if isinstance(entry, TriangleMesh):
                items.append(entry)
            else:
                mesh, material = entry[0], entry[1]
                items.append(mesh if material is None else mesh.with_material(Material(material)))
        self.meshes = items
        corners = [m.corners for m in items] or [np.zeros((0, 3, 3))]
        self.corners = np.ascontiguousarray(np.concatenate(corners), dtype=np.float64)
        self.tri_mesh = np.concatenate([np.full(len(m), i, np.int64) for i, m in enumerate(items)] or [np.zeros(0, np.int64)])
        self.tri_cavity = np.concatenate([m.cavity for m in items] or [np.zeros(0, bool)])
        self.mesh_material = np.array([MATERIAL_INDEX[m.material] for m in items] or [0], dtype=np.int64)
        self.bvh = _build_bvh(self.corners)
        for arr in (self.corners, self.tri_mesh, self.tri_cavity, self.mesh_material, *self.bvh):
            arr.flags.writeable = False

    @property
    def bounds(self):
        return self.bvh[0][0], self.bvh[1][0]

    def trace(self, origins: np.ndarray, directions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Per-ray material path lengths (R, 3) ordered as MATERIALS, and status codes."""
        origins = np.ascontiguousarray(np.broadcast_to(origins, np.shape(directions)), dtype=np.float64).reshape(-1, 3)
        dirs = np.ascontiguousarray(directions, dtype=np.float64).reshape(-1, 3)
        dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
        out = np.zeros((len(dirs), 3))
        status = np.zeros(len(dirs), np.int64)
        if len(self.corners):
            lo, hi, na, nb, perm = self.bvh
            _trace_many(origins, dirs, lo, hi, na, nb, perm, self.corners, self.tri_mesh, self.tri_cavity,
                        self.mesh_material, len(self.meshes), out, status)
            # coincident faces (a prism resting on a pocket floor) leave round-off slivers
            out[out < 1e-9] = 0.0
        return out, status

    def winding(self, points: np.ndarray, direction=(0.5773502691896258, 0.5773502691896257, 0.5773502691896259)) -> np.ndarray:
        pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
        d = np.asarray(direction, dtype=np.float64)
        d = d / np.linalg.norm(d)
        out = np.zeros(len(pts), np.int64)
        if len(self.corners):
            _winding_many(pts, d, *self.bvh, self.corners, out)
        return out


# skewed direction so parity rays avoid axis-aligned edges
_PARITY_DIR = np.array([0.2718281828, 0.3141592654, 0.9092974268])


def points_inside(mesh: TriangleMesh, points: np.ndarray, scene: RayScene | None = None) -> np.ndarray:
    """Winding-number insideness test (robust parity ray test)."""
    scene = scene or RayScene([mesh])
    w1 = scene.winding(points, _PARITY_DIR)
    w2 = scene.winding(points, -_PARITY_DIR[[1, 2, 0]])
    return (w1 > 0) & (w2 > 0)


def ray_thickness(scene_meshes, ray: Ray) -> dict[Material, float]:
    """Path length per material along ``ray``.

    ``scene_meshes`` is a list of meshes or ``(mesh, material[, orientation])``
    tuples, or a prebuilt :class:`RayScene`.
    """
    scene = scene_meshes if isinstance(scene_meshes, RayScene) else RayScene(scene_meshes)
    out, status = scene.trace(ray.origin[None], ray.direction[None])
    code = int(status[0])
    if code == STATUS_ORIGIN_INSIDE:
        raise CameraInsideObject("ray origin lies inside a solid")
    if code in (STATUS_UNBALANCED, STATUS_OVERFLOW):
        raise NonWatertight("ray crossings do not balance; geometry is not watertight")
    return {mat: float(out[0, i]) for i, mat in enumerate(MATERIALS) if out[0, i] > 0}
