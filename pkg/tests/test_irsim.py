from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from irtags.errors import CameraInsideObject, EmptyRoi, NoBracket
from irtags.irsim import (
    Band,
    CameraModel,
    IlluminationModel,
    MalformedImage,
    MaterialOptics,
    SceneTemplate,
    UnsupportedImageFormat,
    checker_contrast,
    checkerboard,
    decode_image,
    encode_pgm,
    encode_png,
    michelson_contrast,
    path_lengths,
    render,
    sweep,
    sweep_csv,
)
from irtags.irsim.analysis import calibrate_mu_vis, module_rois, parse_range
from irtags.irsim.optics import GRAY_PER_LUX, IR_PLA_MU_NIR, dump_optics, load_optics
from irtags.irsim.render import radiance, row_noise
from irtags.meshops import Material, box
from irtags.tagcodes import TagSpec

OPTICS = MaterialOptics.default()


def quiet_camera(**kw):
    base = dict(width=32, height=24, psf_sigma=0.0, noise_sigma=0.0)
    base.update(kw)
    return CameraModel(**base)


def slabs(layers):
    out, z = [], 0.0
    for t, m in layers:
        out.append((box((-500, -500, z - t), (500, 500, z)), m))
        z -= t
    return out


def light(i0, ambient=0.0, band=Band.NIR):
    return IlluminationModel(band, i0 / GRAY_PER_LUX, ambient)


class TestOptics:
    def test_defaults(self):
        assert OPTICS.mu_nir[Material.IR_PLA] == pytest.approx(-math.log(0.45))
        assert OPTICS.mu_nir[Material.AIR] == 0 and OPTICS.mu_vis[Material.AIR] == 0
        assert OPTICS.mu_nir[Material.REGULAR_PLA] >= 6 and OPTICS.mu_vis[Material.REGULAR_PLA] >= 6
        assert IR_PLA_MU_NIR == pytest.approx(0.7985076962177716)

    def test_ini_round_trip(self):
        back = load_optics(dump_optics(OPTICS, "a comment"))
        assert back == OPTICS

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            MaterialOptics({Material.IR_PLA: -1, Material.REGULAR_PLA: 6}, {Material.IR_PLA: 1, Material.REGULAR_PLA: 6})

    def test_illumination_validation(self):
        with pytest.raises(ValueError):
            IlluminationModel(Band.NIR, -1.0)


class TestRender:
    def test_one_mm_ir_slab(self):
        img = render(slabs([(1.0, Material.IR_PLA)]), OPTICS, quiet_camera(), light(200))
        assert (img == 90).all()

    def test_empty_path(self):
        img = render([], OPTICS, quiet_camera(), light(200, ambient=30))
        assert (img == 230).all()
        assert (render([], OPTICS, quiet_camera(), light(300, ambient=30)) == 255).all()

    def test_regular_pla_opaque(self):
        img = render(slabs([(1.0, Material.REGULAR_PLA)]), OPTICS, quiet_camera(), light(200))
        assert img.max() <= 1

    @settings(max_examples=40, deadline=None)
    @given(t1=st.floats(0.05, 3), t2=st.floats(0.05, 3), i0=st.floats(20, 250))
    def test_beer_lambert_composition(self, t1, t2, i0):
        mu_r = OPTICS.mu_nir[Material.REGULAR_PLA]
        mu_i = OPTICS.mu_nir[Material.IR_PLA]
        stacked = render(slabs([(t1, Material.IR_PLA), (t2 * mu_i / mu_r, Material.REGULAR_PLA)]),
                         OPTICS, quiet_camera(), light(i0))
        single = render(slabs([(t1 + t2, Material.IR_PLA)]), OPTICS, quiet_camera(), light(i0))
        assert np.abs(stacked.astype(int) - single.astype(int)).max() <= 1

    def test_deterministic(self):
        t = SceneTemplate(TagSpec.aruco(5))
        a = render(t.geometry()[0], OPTICS, t.camera(), t.illumination(), seed=3)
        b = render(t.geometry()[0], OPTICS, t.camera(), t.illumination(), seed=3)
        c = render(t.geometry()[0], OPTICS, t.camera(), t.illumination(), seed=4)
        assert a.dtype == np.uint8 and a.shape == (288, 512)
        assert np.array_equal(a, b) and not np.array_equal(a, c)

    def test_row_noise_partition(self):
        full = row_noise((6, 9), 2.0, 11)
        assert np.array_equal(full[:3], row_noise((3, 9), 2.0, 11))

    def test_camera_inside(self):
        cam = quiet_camera(position=np.array([0.0, 0.0, -0.5]))
        with pytest.raises(CameraInsideObject):
            render(slabs([(1.0, Material.IR_PLA)]), OPTICS, cam, light(100))

    def test_zero_intensity(self):
        t = SceneTemplate(TagSpec.aruco(7), intensity=0.0, noise_sigma=0.0)
        img = render(t.geometry()[0], OPTICS, t.camera(), t.illumination())
        assert (img == t.ambient).all()
        row = sweep(t, "intensity", [0.0])[0]
        assert not row.detected

    def test_polarity(self):
        t = SceneTemplate(TagSpec.aruco(9), noise_sigma=0.0, psf_sigma=0.0)
        img = render(t.geometry()[0], OPTICS, t.camera(), t.illumination())
        xy = np.rint(t.module_centers_px()).astype(int)
        bright = img[xy[..., 1], xy[..., 0]] > 128
        assert np.array_equal(~bright, t.matrix.bits)


class TestContrast:
    def test_arithmetic(self):
        img = np.zeros((4, 8))
        img[:, :4] = 200
        img[:, 4:] = 100
        assert michelson_contrast(img, [(0, 0, 4, 4)], [(4, 0, 8, 4)]) == pytest.approx(1 / 3)
        assert michelson_contrast(img, [(0, 0, 4, 4)], [(0, 0, 4, 4)]) == 0.0
        mask = img > 150
        assert michelson_contrast(img, mask, ~mask) == pytest.approx(1 / 3)

    def test_empty_roi(self):
        img = np.zeros((4, 4))
        with pytest.raises(EmptyRoi):
            michelson_contrast(img, [(0, 0, 0, 4)], [(0, 0, 2, 2)])
        with pytest.raises(EmptyRoi):
            michelson_contrast(img, [(0, 0, 5, 5)], [(0, 0, 2, 2)])
        with pytest.raises(EmptyRoi):
            michelson_contrast(img, np.zeros((4, 4), bool), [(0, 0, 2, 2)])

    def test_calibrated_contrast(self):
        assert checker_contrast(OPTICS, 1.32) == pytest.approx(0.05, abs=0.005)
        assert checker_contrast(OPTICS, 0.6) > 0.05

    def test_calibration_fixed_point(self):
        mu = calibrate_mu_vis()
        assert mu == pytest.approx(OPTICS.mu_vis[Material.IR_PLA], abs=1e-6)
        assert checker_contrast(OPTICS.with_mu_vis(Material.IR_PLA, mu), 1.32) == pytest.approx(0.05, abs=1e-3)

    def test_calibration_no_bracket(self):
        with pytest.raises(NoBracket):
            calibrate_mu_vis(bracket=(5.0, 20.0))

    def test_multi_beats_single(self):
        tag = TagSpec.aruco(12)
        scores = {}
        for mode, color in (("single", None), ("multi", "black")):
            t = SceneTemplate(tag, mode=mode, code_color=color, t_shell=1.08, t_code=2.0 if mode == "single" else 0.5)
            cam = t.camera()
            img = radiance(path_lengths(t.geometry()[0], cam), OPTICS, t.illumination(), cam.psf_sigma)
            scores[mode] = michelson_contrast(img, *module_rois(t, img.shape))
        assert scores["multi"] > scores["single"]

    def test_checkerboard(self):
        b = checkerboard(4).bits
        assert b.sum() == 8 and not b[0, 0] and b[0, 1]


class TestImageIo:
    @settings(max_examples=20, deadline=None)
    @given(h=st.integers(1, 20), w=st.integers(1, 20), seed=st.integers(0, 1000))
    def test_round_trip(self, h, w, seed):
        img = np.random.default_rng(seed).integers(0, 256, (h, w), dtype=np.uint8)
        assert np.array_equal(decode_image(encode_pgm(img)), img)
        assert np.array_equal(decode_image(encode_png(img)), img)

    def test_errors(self):
        with pytest.raises(MalformedImage):
            decode_image(b"")
        with pytest.raises(MalformedImage):
            decode_image(encode_pgm(np.zeros((4, 4), np.uint8))[:-3])
        with pytest.raises(MalformedImage):
            decode_image(encode_png(np.zeros((8, 8), np.uint8))[:30])
        with pytest.raises(UnsupportedImageFormat):
            decode_image(b"hello world")


class TestSweep:
    def test_csv(self):
        t = SceneTemplate(TagSpec.aruco(7))
        rows = sweep(t, "intensity", [0.0, 4.0])
        text = sweep_csv(rows)
        lines = text.splitlines()
        assert lines[0] == "value,detected,contrast,combo_index"
        assert lines[1].startswith("0,0,") and lines[1].endswith(",-1")
        assert lines[2].startswith("4,1,") and lines[2].endswith(",0")

    def test_width_monotone(self):
        t = SceneTemplate(TagSpec.aruco(7), distance=250.0)
        widths = [4, 6, 8, 10, 12, 14, 16]
        ok = [r.detected for r in sweep(t, "marker_width", widths)]
        assert ok[-1]
        first = ok.index(True)
        # one step of hysteresis is allowed after the first success
        assert sum(1 for v in ok[first:] if not v) <= 1

    def test_unknown_variable(self):
        with pytest.raises(ValueError):
            sweep(SceneTemplate(TagSpec.aruco(1)), "roll", [0])

    def test_parse_range(self):
        assert parse_range("1:2:0.25") == [1.0, 1.25, 1.5, 1.75, 2.0]
        assert parse_range("3,5") == [3.0, 5.0]
        with pytest.raises(ValueError):
            parse_range("1:2:0")
