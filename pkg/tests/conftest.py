from __future__ import annotations

import numpy as np
import pytest

from irtags.irsim import MaterialOptics, SceneTemplate, render
from irtags.tagcodes import TagSpec


@pytest.fixture(scope="session")
def optics() -> MaterialOptics:
    return MaterialOptics.default()


def render_template(t: SceneTemplate, optics: MaterialOptics | None = None) -> np.ndarray:
    optics = optics or MaterialOptics.default()
    return render(t.geometry()[0], optics, t.camera(), t.illumination(), seed=t.seed)


@pytest.fixture(scope="session")
def aruco7_template() -> SceneTemplate:
    return SceneTemplate(TagSpec.aruco(7))


@pytest.fixture(scope="session")
def aruco7_image(aruco7_template, optics) -> np.ndarray:
    return render_template(aruco7_template, optics)


@pytest.fixture(scope="session")
def qr_image(optics) -> np.ndarray:
    return render_template(SceneTemplate(TagSpec.qr("irtags"), mode="multi", code_color="white", marker_width=21.0), optics)


# one line per acceptance criterion, echoed at the end of the run
VERDICTS: list[str] = []


def record(number: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    VERDICTS.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance")
        for line in sorted(VERDICTS, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
