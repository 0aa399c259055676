"""Pinhole camera with pose, optical blur and sensor noise settings."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_WIDTH = 512
DEFAULT_HEIGHT = 288


def _rotate(v: np.ndarray, axis: np.ndarray, deg: float) -> np.ndarray:
    a = np.radians(deg)
    axis = axis / np.linalg.norm(axis)
    return v * np.cos(a) + np.cross(axis, v) * np.sin(a) + axis * (axis @ v) * (1 - np.cos(a))


@dataclass(frozen=True)
class CameraModel:
    """``rotation`` rows are the camera x (image right), y (image down) and
    viewing axes in world coordinates."""

    width: int = DEFAULT_WIDTH
    height: int = DEFAULT_HEIGHT
    focal_px: float = 400.0
    position: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 100.0]))
    rotation: np.ndarray = field(default_factory=lambda: np.diag([1.0, -1.0, -1.0]))
    psf_sigma: float = 0.8
    noise_sigma: float = 2.0
    bit_depth: int = 8

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("resolution must be positive")
        if not self.focal_px > 0:
            raise ValueError("focal_px must be positive")
        if self.psf_sigma < 0 or self.noise_sigma < 0:
            raise ValueError("psf_sigma and noise_sigma must be >= 0")
        if self.bit_depth != 8:
            raise ValueError("only 8-bit sensors are modeled")
        r = np.asarray(self.rotation, float).reshape(3, 3)
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-9) or np.linalg.det(r) < 0:
            raise ValueError("rotation must be a proper rotation matrix")
        object.__setattr__(self, "position", np.asarray(self.position, float).reshape(3))
        object.__setattr__(self, "rotation", r)

    @property
    def principal_point(self) -> tuple[float, float]:
        return (self.width - 1) / 2, (self.height - 1) / 2

    def pixel_rays(self) -> tuple[np.ndarray, np.ndarray]:
        """Ray origin and (H, W, 3) unit directions through every pixel center."""
        cx, cy = self.principal_point
        xs = (np.arange(self.width) - cx) / self.focal_px
        ys = (np.arange(self.height) - cy) / self.focal_px
        xx, yy = np.meshgrid(xs, ys)
        local = np.stack([xx, yy, np.ones_like(xx)], axis=-1)
        dirs = local @ self.rotation
        dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
        return self.position, dirs

    def project(self, points: np.ndarray) -> np.ndarray:
        """World points to (x, y) pixel coordinates."""
        p = (np.asarray(points, float) - self.position) @ self.rotation.T
        cx, cy = self.principal_point
        return np.stack([cx + self.focal_px * p[..., 0] / p[..., 2], cy + self.focal_px * p[..., 1] / p[..., 2]], axis=-1)

    @classmethod
    def facing(cls, target, normal, up, distance: float, tilt_deg: float = 0.0, roll_deg: float = 0.0, **kw) -> CameraModel:
        """Camera ``distance`` mm in front of ``target`` looking back along ``-normal``.

        ``tilt_deg`` swings the camera about the ``up`` axis through the target
        (oblique view); ``roll_deg`` turns the image in-plane, clockwise.
        """
        target = np.asarray(target, float)
        n = np.asarray(normal, float) / np.linalg.norm(normal)
        up = np.asarray(up, float)
        up = up - (up @ n) * n
        up /= np.linalg.norm(up)
        offset = _rotate(n * distance, up, tilt_deg)
        forward = -offset / np.linalg.norm(offset)
        down = -(up - (up @ forward) * forward)
        down /= np.linalg.norm(down)
        right = np.cross(down, forward)
        # clockwise image roll = the camera turning counter-clockwise about its view axis
        right, down = _rotate(right, forward, -roll_deg), _rotate(down, forward, -roll_deg)
        return cls(position=target + offset, rotation=np.stack([right, down, forward]), **kw)
