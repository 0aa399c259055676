from __future__ import annotations

import numpy as np
import pytest
from conftest import render_template
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import blur_ref, clahe_ref, gaussian_mean, global_equalization, random_images, threshold_ref

from irtags.detect import (
    DEFAULT_COMBOS,
    ClaheParams,
    FilterCombo,
    adaptive_threshold,
    binarize,
    clahe,
    combo_grid,
    combos_hash,
    detect_tags,
    find_quads,
    format_combos,
    gaussian_blur,
    load_combos,
    parse_combos,
    sample_grid,
)
from irtags.detect.pipeline import iou, otsu_threshold
from irtags.detect.quads import polygon_area
from irtags.errors import DegenerateQuad, EvenBlockSize, EvenKsize, ImageSmallerThanGrid
from irtags.irsim import SceneTemplate, michelson_contrast
from irtags.irsim.analysis import module_rois
from irtags.tagcodes import BitMatrix, Family, TagSpec, encode_aruco

images = st.integers(0, 2**32 - 1).map(lambda s: random_images(3, s)[s % 3])


def raster(m: BitMatrix, px: int = 10, margin: int = 0) -> np.ndarray:
    img = np.where(np.kron(m.bits, np.ones((px, px), bool)), 0, 255).astype(np.uint8)
    return np.pad(img, margin, constant_values=255)


class TestClahe:
    @settings(max_examples=50, deadline=None)
    @given(img=images)
    def test_matches_oracle(self, img):
        assert np.abs(clahe(img).astype(int) - clahe_ref(img).astype(int)).max() <= 1

    @pytest.mark.parametrize("value", [0, 77, 255])
    def test_constant(self, value):
        img = np.full((40, 56), value, np.uint8)
        assert (clahe(img) == value).all()

    def test_global_equalization(self):
        for img in random_images(6, 5):
            out = clahe(img, ClaheParams(clip_limit=1e6, tiles=(1, 1)))
            assert np.abs(out.astype(int) - global_equalization(img).astype(int)).max() <= 1

    def test_odd_sized_image(self):
        img = random_images(1, 2, (37, 53))[0]
        out = clahe(img)
        assert out.shape == img.shape and out.dtype == np.uint8

    def test_boosts_low_contrast_tag(self, optics):
        t = SceneTemplate(TagSpec.aruco(3), intensity=0.4, noise_sigma=0.5)
        img = render_template(t, optics)
        light, dark = module_rois(t, img.shape)
        assert michelson_contrast(clahe(img), light, dark) > michelson_contrast(img, light, dark)

    def test_errors(self):
        with pytest.raises(ImageSmallerThanGrid):
            clahe(np.zeros((4, 40), np.uint8))
        with pytest.raises(ValueError):
            ClaheParams(clip_limit=0)


class TestBlur:
    @settings(max_examples=50, deadline=None)
    @given(img=images, k=st.sampled_from([1, 3, 5, 7, 9, 15]))
    def test_matches_oracle(self, img, k):
        assert np.abs(gaussian_blur(img, k).astype(int) - blur_ref(img, k).astype(int)).max() <= 1

    def test_identity_and_dc(self):
        img = random_images(1, 9)[0]
        assert np.array_equal(gaussian_blur(img, 1), img)
        assert (gaussian_blur(np.full((20, 20), 93, np.uint8), 7) == 93).all()

    def test_impulse(self):
        img = np.zeros((9, 9), np.uint8)
        img[4, 4] = 255
        out = gaussian_blur(img, 3)
        assert out.sum() == out[3:6, 3:6].sum()
        assert np.abs(out.astype(int) - blur_ref(img, 3).astype(int)).max() <= 1
        # per-pixel rounding of the nine taps adds up: 4 * 15 + 4 * 32 + 69
        assert int(out.sum()) == 257
        assert gaussian_mean(img, 3).sum() == pytest.approx(255.0)

    def test_even(self):
        with pytest.raises(EvenKsize):
            gaussian_blur(np.zeros((5, 5), np.uint8), 4)


class TestThreshold:
    @settings(max_examples=50, deadline=None)
    @given(img=images, block=st.sampled_from([3, 11, 21, 23, 37, 51]))
    def test_matches_oracle(self, img, block):
        ref, margin = threshold_ref(img, block)
        got = adaptive_threshold(img, block)
        # a pixel sitting exactly on its threshold may go either way in floating point
        assert ((got == ref) | (np.abs(margin) < 1e-3)).all()

    def test_constant(self):
        assert (adaptive_threshold(np.full((16, 16), 40, np.uint8), 11) == 255).all()

    def test_step_edge(self):
        img = np.full((20, 40), 200, np.uint8)
        img[:, :20] = 50
        out = adaptive_threshold(img, 7)
        ref, _ = threshold_ref(img, 7)
        assert np.array_equal(out, ref)
        row = out[10]
        assert row[19] == 0 and row[20] == 255

    def test_default_c(self):
        img = np.full((16, 16), 100, np.uint8)
        img[8, 8] = 97
        assert adaptive_threshold(img, 3)[8, 8] == 255
        assert adaptive_threshold(img, 3, c=2)[8, 8] == 0

    def test_block_size(self):
        with pytest.raises(EvenBlockSize):
            adaptive_threshold(np.zeros((5, 5), np.uint8), 4)
        with pytest.raises(EvenBlockSize):
            adaptive_threshold(np.zeros((5, 5), np.uint8), 1)

    def test_binarize_black(self):
        assert (binarize(np.zeros((64, 64), np.uint8), FilterCombo(3, 23)) == 255).all()


class TestQuads:
    def test_square(self):
        img = np.full((120, 120), 255, np.uint8)
        img[30:80, 40:90] = 0
        quads = find_quads(img, polarity="dark")
        assert len(quads) == 1
        truth = np.array([[40, 30], [89, 30], [89, 79], [40, 79]], float)
        assert np.abs(quads[0] - truth).max() <= 1.0

    def test_blank(self):
        assert find_quads(np.full((50, 50), 255, np.uint8), polarity="dark") == []

    def test_two_squares(self):
        img = np.full((100, 200), 255, np.uint8)
        img[20:60, 20:60] = 0
        img[30:80, 120:170] = 0
        assert len(find_quads(img, polarity="dark")) == 2

    def test_small_and_thin_rejected(self):
        img = np.full((100, 200), 255, np.uint8)
        img[10:18, 10:18] = 0  # 64 px area
        img[40:46, 20:180] = 0  # aspect far outside range
        assert find_quads(img, polarity="dark") == []

    @settings(max_examples=30, deadline=None)
    @given(angle=st.floats(0, 89), side=st.integers(30, 60))
    def test_rotated_square_clockwise(self, angle, side):
        yy, xx = np.indices((160, 160))
        a = np.radians(angle)
        u = (xx - 80) * np.cos(a) + (yy - 80) * np.sin(a)
        v = -(xx - 80) * np.sin(a) + (yy - 80) * np.cos(a)
        img = np.where((np.abs(u) <= side / 2) & (np.abs(v) <= side / 2), 0, 255).astype(np.uint8)
        quads = find_quads(img, polarity="dark")
        assert len(quads) == 1
        q = quads[0]
        # clockwise on screen (y down) means positive shoelace area
        assert polygon_area(q) > 0
        assert abs(abs(polygon_area(q)) - side * side) < 0.12 * side * side

    def test_degenerate(self):
        with pytest.raises(DegenerateQuad):
            sample_grid(np.zeros((10, 10), np.uint8), np.array([[0, 0], [5, 5], [9, 9], [0, 9]]), 3)


class TestSampleGrid:
    def test_identity_raster(self):
        m = encode_aruco(21)
        img = raster(m)
        quad = np.array([[0, 0], [60, 0], [60, 60], [0, 60]], float) - 0.5
        assert sample_grid(img, quad, 6) == m

    def test_axis_aligned_render(self, aruco7_template, aruco7_image):
        quad = aruco7_template.corners_px()
        assert sample_grid(aruco7_image, quad, 6) == encode_aruco(7)

    def test_tilted_30(self, optics):
        t = SceneTemplate(TagSpec.aruco(30), tilt_deg=30.0, noise_sigma=0.0)
        img = render_template(t, optics)
        assert sample_grid(img, t.corners_px(), 6) == encode_aruco(30)

    def test_otsu(self):
        vals = np.array([10] * 50 + [200] * 50)
        assert 10 < otsu_threshold(vals) < 200


class TestDetect:
    def test_nominal_aruco(self, aruco7_image):
        res = detect_tags(aruco7_image)
        assert len(res) == 1
        r = res[0]
        assert r.family is Family.ARUCO and r.marker_id == 7
        assert r.combo_used == FilterCombo(3, 23) and not r.inverted
        assert polygon_area(r.corners) > 0

    def test_corners_match_truth(self, aruco7_template, aruco7_image):
        r = detect_tags(aruco7_image)[0]
        assert iou(r.corners, aruco7_template.corners_px()) > 0.8

    def test_qr(self, qr_image):
        res = detect_tags(qr_image)
        assert [r.payload for r in res] == [b"irtags"]

    def test_inversion(self, aruco7_image):
        a = detect_tags(aruco7_image)
        b = detect_tags(255 - aruco7_image)
        assert [r.marker_id for r in a] == [r.marker_id for r in b] == [7]
        assert a[0].inverted != b[0].inverted

    @pytest.mark.parametrize("roll", [0.0, 90.0, 180.0, 270.0])
    def test_rotation(self, optics, roll):
        img = render_template(SceneTemplate(TagSpec.aruco(19), roll_deg=roll), optics)
        assert [r.marker_id for r in detect_tags(img)] == [19]

    def test_numpy_rotation(self, aruco7_image):
        for k in range(4):
            assert [r.marker_id for r in detect_tags(np.rot90(aruco7_image, k))] == [7]

    def test_family_filter(self, aruco7_image):
        assert detect_tags(aruco7_image, families=[Family.QR]) == []

    def test_noise_negative_control(self):
        root = np.random.SeedSequence(1234)
        hits = 0
        for child in root.spawn(100):
            rng = np.random.default_rng(child)
            img = np.clip(rng.normal(128, 40, (288, 512)), 0, 255).astype(np.uint8)
            hits += len(detect_tags(img))
        assert hits == 0

    def test_blank(self):
        assert detect_tags(np.full((288, 512), 30, np.uint8)) == []

    def test_json(self, aruco7_image):
        j = detect_tags(aruco7_image)[0].to_json()
        assert j["family"] == "aruco" and j["id"] == 7
        assert j["combo"] == {"ksize": 3, "blockSize": 23}
        assert len(j["corners"]) == 4

    def test_empty_combos(self, aruco7_image):
        with pytest.raises(ValueError):
            detect_tags(aruco7_image, combos=[])

    def test_more_combos_never_hurt(self, optics):
        """A longer prefix can only add decodes."""
        templates = [SceneTemplate(TagSpec.aruco(k), intensity=0.15 + 0.05 * k, seed=k) for k in range(8)]
        counts = []
        imgs = [render_template(t, optics) for t in templates]
        for n in range(1, 4):
            counts.append(sum(bool(detect_tags(img, DEFAULT_COMBOS[:n])) for img in imgs))
        assert counts == sorted(counts)


class TestCombos:
    def test_parse_format(self):
        text = "# comment\n3,23\n\n1,37  # trailing\n3,21\n"
        combos = parse_combos(text)
        assert combos == list(DEFAULT_COMBOS)
        assert parse_combos(format_combos(combos)) == combos

    def test_shipped_list(self):
        assert load_combos()[:3] == list(DEFAULT_COMBOS)
        assert combos_hash(load_combos()) == combos_hash(list(load_combos()))

    def test_bad_lines(self):
        with pytest.raises(ValueError):
            parse_combos("3;23")
        with pytest.raises(ValueError):
            parse_combos("2,23")
        with pytest.raises(ValueError):
            parse_combos("# nothing")

    def test_grid(self):
        grid = combo_grid()
        assert len(grid) == 5 * 39
        assert all(c in grid for c in DEFAULT_COMBOS)
