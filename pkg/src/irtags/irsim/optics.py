"""Attenuation coefficients, illumination and their config file."""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources
from pathlib import Path

from ..meshops import Material

# sensor response of the unattenuated beam per lux
GRAY_PER_LUX = 150.0
OPTICS_FORMAT_VERSION = 1


class Band(str, Enum):
    NIR = "nir"
    VIS = "vis"


@dataclass(frozen=True)
class MaterialOptics:
    """Effective attenuation per mm of every material in both bands."""

    mu_nir: dict = field(default_factory=dict)
    mu_vis: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("mu_nir", "mu_vis"):
            table = {Material(k): float(v) for k, v in getattr(self, name).items()}
            table[Material.AIR] = 0.0
            for m in (Material.IR_PLA, Material.REGULAR_PLA):
                if m not in table:
                    raise ValueError(f"{name} lacks {m.value}")
                if table[m] < 0:
                    raise ValueError(f"{name}[{m.value}] must be >= 0")
            object.__setattr__(self, name, table)

    def mu(self, band: Band | str) -> dict:
        return self.mu_nir if Band(band) is Band.NIR else self.mu_vis

    def with_mu_vis(self, material: Material, value: float) -> MaterialOptics:
        table = dict(self.mu_vis)
        table[Material(material)] = value
        return replace(self, mu_vis=table)

    @classmethod
    def default(cls) -> MaterialOptics:
        return load_optics(resources.files("irtags").joinpath("data/optics.ini").read_text())


@dataclass(frozen=True)
class IlluminationModel:
    band: Band = Band.NIR
    intensity: float = 4.0
    ambient_floor: float = 4.0

    def __post_init__(self):
        object.__setattr__(self, "band", Band(self.band))
        if self.intensity < 0:
            raise ValueError("intensity must be >= 0")
        if self.ambient_floor < 0:
            raise ValueError("ambient_floor must be >= 0")

    @property
    def i0(self) -> float:
        return GRAY_PER_LUX * self.intensity


def load_optics(text: str) -> MaterialOptics:
    cp = configparser.ConfigParser()
    cp.read_string(text)
    version = cp.getint("optics", "version", fallback=OPTICS_FORMAT_VERSION)
    if version != OPTICS_FORMAT_VERSION:
        raise ValueError(f"unsupported optics file version {version}")
    nir, vis = {}, {}
    for m in (Material.IR_PLA, Material.REGULAR_PLA):
        nir[m] = cp.getfloat(m.value, "mu_nir")
        vis[m] = cp.getfloat(m.value, "mu_vis")
    return MaterialOptics(nir, vis)


def dump_optics(optics: MaterialOptics, comment: str = "") -> str:
    cp = configparser.ConfigParser()
    cp["optics"] = {"version": str(OPTICS_FORMAT_VERSION)}
    for m in (Material.IR_PLA, Material.REGULAR_PLA):
        cp[m.value] = {"mu_nir": repr(optics.mu_nir[m]), "mu_vis": repr(optics.mu_vis[m])}
    buf = io.StringIO()
    if comment:
        buf.write("".join(f"# {line}\n" for line in comment.splitlines()))
    cp.write(buf)
    return buf.getvalue()


def read_optics_file(path: str | Path | None) -> MaterialOptics:
    if path is None:
        return MaterialOptics.default()
    return load_optics(Path(path).read_text())


IR_PLA_MU_NIR = -math.log(0.45)
