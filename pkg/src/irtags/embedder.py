"""Embed a tag under the surface of a printable mesh.

Bit polarity: air shows up bright in the infrared image, so

* single material: air cavities at the light modules, IR PLA at the dark ones;
* multi material: regular-PLA prisms at the dark modules inside a pocket,
  air at the light ones.

The quiet zone around the tag is made of light modules as well (air), which
gives the localizer the bright margin barcodes expect.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from . import __version__
from .errors import InvalidCombination, ThicknessOutOfWindow
from .meshops import Material, Placement, TriangleMesh, concat, frame_at, join_cavities, oriented_box, save_stl
from .meshops.geometry import bit_prisms, check_footprint, validate_inside
from .meshops.raycast import RayScene
from .tagcodes import BitMatrix, TagSpec

log = logging.getLogger(__name__)

T_SHELL_MAX_MM = 3.5
POCKET_CLEARANCE_MM = 0.1
DEFAULT_QUIET_ZONE = 1


class Mode(str, Enum):
    SINGLE = "single"
    MULTI = "multi"


class CodeColor(str, Enum):
    WHITE = "white"
    BLACK = "black"
    BLUE = "blue"


THICKNESS_TABLE = {
    (Mode.SINGLE, None): (1.08, 2.00),
    (Mode.MULTI, CodeColor.WHITE): (1.32, 0.50),
    (Mode.MULTI, CodeColor.BLACK): (1.08, 0.50),
    (Mode.MULTI, CodeColor.BLUE): (1.20, 0.50),
}


def _coerce(mode, code_color):
    mode = Mode(mode)
    code_color = None if code_color is None else CodeColor(code_color)
    return mode, code_color


def thickness_defaults(mode, code_color=None) -> tuple[float, float]:
    """(t_shell, t_code) in mm for a print mode and code filament color."""
    mode, code_color = _coerce(mode, code_color)
    if mode is Mode.SINGLE and code_color is not None:
        raise InvalidCombination("single-material prints have no code color")
    if mode is Mode.MULTI and code_color is None:
        raise InvalidCombination("multi-material prints need a code color")
    return THICKNESS_TABLE[mode, code_color]


@dataclass(frozen=True)
class EmbedParams:
    mode: Mode
    placement: Placement
    code_color: CodeColor | None = None
    t_shell: float | None = None
    t_code: float | None = None
    quiet_zone: int = DEFAULT_QUIET_ZONE
    allow_out_of_window: bool = False
    overrides: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        mode, color = _coerce(self.mode, self.code_color)
        object.__setattr__(self, "mode", mode)
        object.__setattr__(self, "code_color", color)
        shell0, code0 = thickness_defaults(mode, color)
        overrides = dict(self.overrides)
        if self.t_shell is None:
            object.__setattr__(self, "t_shell", shell0)
        elif self.t_shell != shell0:
            overrides["t_shell_mm"] = float(self.t_shell)
        if self.t_code is None:
            object.__setattr__(self, "t_code", code0)
        elif self.t_code != code0:
            overrides["t_code_mm"] = float(self.t_code)
        object.__setattr__(self, "overrides", overrides)
        if not self.t_code > 0 or self.t_shell < 0:
            raise ValueError("thicknesses must be positive")
        if self.quiet_zone < 0:
            raise ValueError("quiet_zone must be >= 0")
        if not shell0 <= self.t_shell <= T_SHELL_MAX_MM:
            msg = f"t_shell {self.t_shell} mm outside the detectable window [{shell0}, {T_SHELL_MAX_MM}] mm"
            if not self.allow_out_of_window:
                raise ThicknessOutOfWindow(msg)
            log.warning(msg)

    @property
    def in_window(self) -> bool:
        return THICKNESS_TABLE[self.mode, self.code_color][0] <= self.t_shell <= T_SHELL_MAX_MM


def footprint(bitmatrix: BitMatrix, params: EmbedParams) -> tuple[BitMatrix, float]:
    """Tag plus quiet zone, and its width in mm."""
    q = params.quiet_zone
    padded = bitmatrix.pad(q, dark=False)
    width = params.placement.tag_width * padded.size / bitmatrix.size
    return padded, width


def _padded_placement(params: EmbedParams, width: float) -> Placement:
    p = params.placement
    return Placement(p.anchor, width, p.up_hint)


def embed_single(obj: TriangleMesh, bitmatrix: BitMatrix, params: EmbedParams, check: bool = True) -> TriangleMesh:
    if params.mode is not Mode.SINGLE:
        raise InvalidCombination("embed_single needs mode=single")
    frame = frame_at(obj, params.placement)
    padded, width = footprint(bitmatrix, params)
    scene = RayScene([obj]) if check else None
    if check:
        check_footprint(obj, frame, width, scene)
    prisms = bit_prisms(padded, _padded_placement(params, width), frame, params.t_shell, params.t_code, "light",
                        obj=obj if check else None)
    return join_cavities(obj, prisms, check=False).with_material(Material.IR_PLA)


def pocket_box(frame, width: float, params: EmbedParams) -> TriangleMesh:
    h = width / 2 + POCKET_CLEARANCE_MM
    return oriented_box(frame.origin, frame.right, frame.up, frame.normal, -h, h, -h, h,
                        params.t_shell, params.t_shell + params.t_code)


def embed_multi(obj: TriangleMesh, bitmatrix: BitMatrix, params: EmbedParams, check: bool = True) -> tuple[TriangleMesh, TriangleMesh]:
    """Return (shell, code): the IR-PLA object with a pocket, and the regular-PLA bits."""
    if params.mode is not Mode.MULTI:
        raise InvalidCombination("embed_multi needs mode=multi")
    frame = frame_at(obj, params.placement)
    padded, width = footprint(bitmatrix, params)
    pocket = pocket_box(frame, width, params)
    if check:
        check_footprint(obj, frame, width + 2 * POCKET_CLEARANCE_MM)
        from .errors import PrismProtrudes, TagLargerThanFace

        try:
            validate_inside(obj, [pocket], exempt_normal=frame.normal)
        except PrismProtrudes as exc:
            raise TagLargerThanFace(str(exc)) from exc
    prisms = bit_prisms(padded, _padded_placement(params, width), frame, params.t_shell, params.t_code, "dark")
    shell = join_cavities(obj, [pocket], check=False).with_material(Material.IR_PLA)
    code = concat(prisms, material=Material.REGULAR_PLA) if prisms else TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), np.int64), Material.REGULAR_PLA)
    return shell, code


def embed(obj: TriangleMesh, bitmatrix: BitMatrix, params: EmbedParams, check: bool = True) -> list[TriangleMesh]:
    """Embed in either mode; returns the printable meshes (one or two)."""
    if params.mode is Mode.SINGLE:
        return [embed_single(obj, bitmatrix, params, check)]
    return list(embed_multi(obj, bitmatrix, params, check))


def manifest(tag: TagSpec, params: EmbedParams) -> dict:
    desc = tag.describe()
    if tag.family.value == "qr":
        desc["sha256"] = hashlib.sha256(tag.payload).hexdigest()
    p = params.placement
    out = {
        "mode": params.mode.value,
        "color": None if params.code_color is None else params.code_color.value,
        "t_shell_mm": params.t_shell,
        "t_code_mm": params.t_code,
        "tag": desc,
        "placement": {"anchor": list(p.anchor), "up": list(p.up_hint), "width_mm": p.tag_width},
        "quiet_zone_modules": params.quiet_zone,
        "overrides": params.overrides,
        "version": __version__,
    }
    return out


def write_outputs(prefix: str | Path, meshes: list[TriangleMesh], tag: TagSpec, params: EmbedParams, ascii: bool = False) -> list[Path]:
    """Write ``{prefix}.stl`` or ``{prefix}_shell.stl`` + ``{prefix}_code.stl`` plus ``{prefix}.json``."""
    prefix = Path(prefix)
    if params.mode is Mode.SINGLE:
        names = [prefix.with_name(prefix.name + ".stl")]
    else:
        names = [prefix.with_name(prefix.name + "_shell.stl"), prefix.with_name(prefix.name + "_code.stl")]
    for path, mesh in zip(names, meshes):
        path.write_bytes(save_stl(mesh, ascii=ascii))
    man = prefix.with_name(prefix.name + ".json")
    man.write_text(json.dumps(manifest(tag, params), indent=2, sort_keys=True) + "\n")
    return names + [man]
