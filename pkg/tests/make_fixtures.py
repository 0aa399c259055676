"""Regenerate the frozen image corpus under fixtures/corpus (python3 tests/make_fixtures.py)."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from irtags.irsim import MaterialOptics, SceneTemplate, render, write_image
from irtags.tagcodes import TagSpec

OUT = Path(__file__).parent / "fixtures" / "corpus"

SCENES = {
    "aruco7_single.png": SceneTemplate(TagSpec.aruco(7)),
    "aruco23_multi_tilt.png": SceneTemplate(TagSpec.aruco(23), mode="multi", code_color="black", tilt_deg=25.0, roll_deg=40.0, seed=3),
    "qr_multi.png": SceneTemplate(TagSpec.qr("irtags"), mode="multi", code_color="white", marker_width=21.0, seed=1),
    "qr_single.pgm": SceneTemplate(TagSpec.qr("HCI_IR_TEST"), marker_width=21.0, seed=2),
}


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    optics = MaterialOptics.default()
    for name, t in SCENES.items():
        write_image(OUT / name, render(t.geometry()[0], optics, t.camera(), t.illumination(), seed=t.seed))
    write_image(OUT / "blank.png", np.full((288, 512), 40, np.uint8))


if __name__ == "__main__":
    main()
