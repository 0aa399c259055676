"""Near-infrared and visible imaging of embedded tags, plus contrast analyses."""

from .analysis import (
    DistanceCorpus,
    SweepRow,
    binarization_accuracy,
    calibrate_mu_vis,
    checker_contrast,
    checkerboard,
    combo_success,
    cumulative_success,
    michelson_contrast,
    sweep,
    sweep_csv,
)
from .camera import CameraModel
from .imageio import ImageDecodeError, MalformedImage, UnsupportedImageFormat, decode_image, encode_pgm, encode_png, read_image, write_image
from .optics import Band, IlluminationModel, MaterialOptics, dump_optics, load_optics, read_optics_file
from .render import path_lengths, radiance, render
from .scenes import SceneTemplate

__all__ = [
    "Band",
    "CameraModel",
    "DistanceCorpus",
    "IlluminationModel",
    "ImageDecodeError",
    "MalformedImage",
    "MaterialOptics",
    "SceneTemplate",
    "SweepRow",
    "UnsupportedImageFormat",
    "binarization_accuracy",
    "calibrate_mu_vis",
    "checker_contrast",
    "checkerboard",
    "combo_success",
    "cumulative_success",
    "decode_image",
    "dump_optics",
    "encode_pgm",
    "encode_png",
    "load_optics",
    "michelson_contrast",
    "path_lengths",
    "radiance",
    "read_image",
    "read_optics_file",
    "render",
    "sweep",
    "sweep_csv",
    "write_image",
]
