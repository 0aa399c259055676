"""Beer-Lambert transmission renderer."""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

from ..errors import CameraInsideObject, NonWatertight
from ..meshops.mesh import MATERIALS
from ..meshops.raycast import STATUS_ORIGIN_INSIDE, STATUS_UNBALANCED, STATUS_OVERFLOW, RayScene
from .camera import CameraModel
from .optics import IlluminationModel, MaterialOptics


def as_scene(scene) -> RayScene:
    return scene if isinstance(scene, RayScene) else RayScene(scene)


def path_lengths(scene, camera: CameraModel) -> np.ndarray:
    """(H, W, 3) per-material path lengths through every pixel."""
    scene = as_scene(scene)
    origin, dirs = camera.pixel_rays()
    lengths, status = scene.trace(origin, dirs.reshape(-1, 3))
    if np.any(status == STATUS_ORIGIN_INSIDE):
        raise CameraInsideObject(f"camera at {camera.position.round(3).tolist()} is inside a solid")
    if np.any((status == STATUS_UNBALANCED) | (status == STATUS_OVERFLOW)):
        raise NonWatertight("scene is not watertight along some camera rays")
    return lengths.reshape(camera.height, camera.width, 3)


def radiance(lengths: np.ndarray, optics: MaterialOptics, illum: IlluminationModel, psf_sigma: float = 0.0) -> np.ndarray:
    """Noise-free float image: clamp(I0 exp(-sum mu d) + ambient), then the PSF."""
    mu = optics.mu(illum.band)
    depth = lengths @ np.array([mu[m] for m in MATERIALS])
    img = np.clip(illum.i0 * np.exp(-depth) + illum.ambient_floor, 0.0, 255.0)
    if psf_sigma > 0:
        img = gaussian_filter(img, psf_sigma, mode="nearest", truncate=4.0)
    return img


def row_noise(shape: tuple[int, int], sigma: float, seed: int) -> np.ndarray:
    """Gaussian noise with an independent stream per row, so rows can be
    generated in any order or in parallel."""
    h, w = shape
    out = np.empty(shape)
    root = np.random.SeedSequence(seed)
    for y, child in enumerate(root.spawn(h)):
        out[y] = np.random.default_rng(child).normal(0.0, sigma, w)
    return out


def quantize(img: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def render_radiance(scene, optics: MaterialOptics, camera: CameraModel, illum: IlluminationModel) -> np.ndarray:
    return radiance(path_lengths(scene, camera), optics, illum, camera.psf_sigma)


def render(scene, optics: MaterialOptics, camera: CameraModel, illum: IlluminationModel, seed: int = 0,
           lengths: np.ndarray | None = None) -> np.ndarray:
    """8-bit (H, W) image of ``scene`` (meshes, (mesh, material) pairs or a RayScene).

    Pass precomputed ``lengths`` to re-expose the same geometry cheaply.
    """
    if lengths is None:
        lengths = path_lengths(scene, camera)
    img = radiance(lengths, optics, illum, camera.psf_sigma)
    if camera.noise_sigma > 0:
        img = img + row_noise(img.shape, camera.noise_sigma, seed)
    return quantize(img)
