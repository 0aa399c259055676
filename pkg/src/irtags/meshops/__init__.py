"""Mesh types, STL I/O, surface queries and cavity embedding primitives."""

from .geometry import (
    CLEARANCE_MM,
    Frame,
    Placement,
    bit_prisms,
    box,
    cell_centers,
    closest_normal,
    frame_at,
    join_cavities,
    oriented_box,
)
from .mesh import (
    Material,
    Orientation,
    TriangleMesh,
    concat,
    is_closed,
    is_edge_manifold,
    load_stl,
    save_stl,
    signed_volume,
)
from .raycast import Ray, RayScene, points_inside, ray_thickness

__all__ = [
    "CLEARANCE_MM",
    "Frame",
    "Material",
    "Orientation",
    "Placement",
    "Ray",
    "RayScene",
    "TriangleMesh",
    "bit_prisms",
    "box",
    "cell_centers",
    "closest_normal",
    "concat",
    "frame_at",
    "is_closed",
    "is_edge_manifold",
    "join_cavities",
    "load_stl",
    "oriented_box",
    "points_inside",
    "ray_thickness",
    "save_stl",
    "signed_volume",
]
