"""Ready-made scenes: a tag embedded in a thin plate, seen head-on."""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from ..embedder import EmbedParams, Mode, embed, footprint
from ..meshops import Placement, TriangleMesh, box, cell_centers, frame_at
from ..meshops.raycast import RayScene
from ..tagcodes import BitMatrix, TagSpec
from .camera import CameraModel
from .optics import Band, IlluminationModel

# solid material left under the code layer
BACKING_MM = 0.5
# share of the image height the tag and its quiet zone span at the reference distance
FILL = 0.35


def plate_for(width: float, depth: float, margin: float | None = None) -> TriangleMesh:
    """Square plate with its top face at z = 0 and normal +z."""
    margin = 0.25 * width + 1.0 if margin is None else margin
    h = width / 2 + margin
    return box((-h, -h, -depth), (h, h, 0.0))


@lru_cache(maxsize=64)
def _embedded(bits_key: bytes, size: int, mode: str, color, width: float, t_shell: float, t_code: float, quiet: int, margin):
    bits = BitMatrix(np.frombuffer(bits_key, bool).reshape(size, size))
    params = EmbedParams(mode, Placement((0.0, 0.0, 0.0), width), color, t_shell, t_code, quiet_zone=quiet,
                         allow_out_of_window=True)
    _, full = footprint(bits, params)
    plate = plate_for(full, params.t_shell + params.t_code + BACKING_MM, margin)
    meshes = embed(plate, bits, params, check=False)
    frame = frame_at(plate, params.placement)
    return RayScene(meshes), frame, params


@dataclass(frozen=True)
class SceneTemplate:
    """A tag embedded in a plate plus the camera and light that look at it.

    ``distance`` is measured from the plate surface; ``None`` places the
    camera so the tag and its quiet zone fill ``FILL`` of the frame height.
    """

    tag: TagSpec | None = None
    bits: BitMatrix | None = None
    mode: str = "single"
    code_color: str | None = None
    marker_width: float = 12.0
    distance: float | None = None
    intensity: float = 4.0
    ambient: float = 4.0
    band: Band = Band.NIR
    t_shell: float | None = None
    t_code: float | None = None
    quiet_zone: int = 1
    focal_px: float = 400.0
    tilt_deg: float = 0.0
    roll_deg: float = 0.0
    psf_sigma: float = 0.8
    noise_sigma: float = 2.0
    seed: int = 0
    plate_margin: float | None = None

    def replace(self, **kw) -> SceneTemplate:
        return replace(self, **kw)

    @property
    def matrix(self) -> BitMatrix:
        if self.bits is not None:
            return self.bits
        if self.tag is None:
            raise ValueError("template needs a tag or a bit matrix")
        return self.tag.encode()

    def geometry(self):
        bits = self.matrix
        color = self.code_color if Mode(self.mode) is Mode.MULTI else None
        if Mode(self.mode) is Mode.MULTI and color is None:
            color = "white"
        return _embedded(bits.bits.tobytes(), bits.size, self.mode, color, float(self.marker_width),
                         self.t_shell, self.t_code, self.quiet_zone, self.plate_margin)

    @property
    def full_width(self) -> float:
        n = self.matrix.size
        return self.marker_width * (n + 2 * self.quiet_zone) / n

    def camera_distance(self) -> float:
        if self.distance is not None:
            return float(self.distance)
        return self.focal_px * self.full_width / (FILL * 288)

    def camera(self) -> CameraModel:
        _, frame, _ = self.geometry()
        return CameraModel.facing(frame.origin, frame.normal, frame.up, self.camera_distance(),
                                  self.tilt_deg, self.roll_deg, focal_px=self.focal_px,
                                  psf_sigma=self.psf_sigma, noise_sigma=self.noise_sigma)

    def illumination(self) -> IlluminationModel:
        return IlluminationModel(self.band, self.intensity, self.ambient)

    def code_depth(self) -> float:
        """Depth of the middle of the code layer below the surface."""
        params = self.geometry()[2]
        return params.t_shell + params.t_code / 2

    def module_centers_px(self, depth: float | None = None) -> np.ndarray:
        """(n, n, 2) pixel positions of the module centers, seen at the code layer by default."""
        _, frame, _ = self.geometry()
        n = self.matrix.size
        depth = self.code_depth() if depth is None else depth
        return self.camera().project(cell_centers(frame, n, self.marker_width, depth))

    def corners_px(self, depth: float | None = None) -> np.ndarray:
        """Tag corners (TL, TR, BR, BL) in the image."""
        _, frame, _ = self.geometry()
        h = self.marker_width / 2
        depth = self.code_depth() if depth is None else depth
        pts = frame.to_world(np.array([-h, h, h, -h]), np.array([h, h, -h, -h]), depth)
        return self.camera().project(pts)
