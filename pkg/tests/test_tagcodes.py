from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from irtags.errors import BorderViolation, EccFailure, FormatInfoUnreadable, IdOutOfRange, NoMatch, PayloadTooLong, TagCodeError, UnsupportedVersion
from irtags.tagcodes import BitMatrix, TagSpec, byte_capacity, decode_aruco, decode_qr, dict_4x4_50, encode_aruco, encode_qr, format_bits
from irtags.tagcodes.aruco import min_rotated_distance
from irtags.tagcodes.qr import CODEWORDS, _layout, decode_qr_oriented
from irtags.tagcodes.reedsolomon import rs_correct, rs_encode

FIXTURES = Path(__file__).parent / "fixtures"


def bch_format_oracle(level_bits: int, mask: int) -> str:
    """Format word by explicit GF(2) long division, returned as a bit string."""
    gen = [1, 0, 1, 0, 0, 1, 1, 0, 1, 1, 1]
    data = [int(b) for b in format((level_bits << 3) | mask, "05b")]
    rem = data + [0] * 10
    for i in range(5):
        if rem[i]:
            rem[i:i + 11] = [a ^ b for a, b in zip(rem[i:i + 11], gen)]
    word = data + rem[5:]
    mask_bits = [int(b) for b in "101010000010010"]
    return "".join(str(a ^ b) for a, b in zip(word, mask_bits))


def opencv_dictionary() -> list[np.ndarray]:
    """Inner bits (True = dark) from the published byte table."""
    out = []
    for line in (FIXTURES / "dict_4x4_50_bytes.txt").read_text().splitlines():
        _, b0, b1 = line.split()
        value = (int(b0, 16) << 8) | int(b1, 16)
        white = np.array([(value >> (15 - i)) & 1 for i in range(16)], bool).reshape(4, 4)
        out.append(~white)
    return out


payloads = st.binary(min_size=0, max_size=17)


def flip_codewords(m: BitMatrix, version: int, indices, rng) -> BitMatrix:
    order = _layout(version).order
    bits = m.bits.copy()
    for k in indices:
        pattern = int(rng.integers(1, 256))
        for i in range(8):
            if (pattern >> i) & 1:
                bits[order[8 * k + i]] ^= True
    return BitMatrix(bits)


class TestQr:
    def test_hci_payload_round_trip(self):
        m = encode_qr("HCI_IR_TEST", 1, "L")
        assert m.size == 21
        assert decode_qr(m) == b"HCI_IR_TEST"

    def test_format_bits_l_mask0(self):
        assert format(format_bits("L", 0), "015b") == "111011111000100"

    @pytest.mark.parametrize("level,bits", [("L", 0b01), ("M", 0b00)])
    @pytest.mark.parametrize("mask", range(8))
    def test_format_bits_match_oracle(self, level, bits, mask):
        assert format(format_bits(level, mask), "015b") == bch_format_oracle(bits, mask)

    @pytest.mark.parametrize("version,size", [(1, 21), (2, 25), (3, 29)])
    def test_sizes(self, version, size):
        assert encode_qr(b"x", version).size == size

    def test_capacity(self):
        assert byte_capacity(1, "L") == 17
        encode_qr(b"a" * 17, 1, "L")
        with pytest.raises(PayloadTooLong):
            encode_qr(b"a" * 18, 1, "L")

    def test_unsupported_version(self):
        with pytest.raises(UnsupportedVersion):
            encode_qr(b"x", 4)

    def test_all_white_is_unreadable(self):
        with pytest.raises(FormatInfoUnreadable):
            decode_qr(BitMatrix(np.zeros((21, 21), bool)))

    def test_finder_patterns_present(self):
        bits = encode_qr(b"finder").bits
        finder = np.array([[max(abs(r - 3), abs(c - 3)) != 2 for c in range(7)] for r in range(7)])
        for r0, c0 in ((0, 0), (0, 14), (14, 0)):
            assert np.array_equal(bits[r0:r0 + 7, c0:c0 + 7], finder)
        assert bits[13, 8]  # dark module

    @settings(max_examples=200, deadline=None)
    @given(payload=payloads, level=st.sampled_from(["L", "M"]), version=st.sampled_from([1, 2, 3]))
    def test_round_trip(self, payload, level, version):
        if len(payload) > byte_capacity(version, level):
            return
        assert decode_qr(encode_qr(payload, version, level)) == payload

    @settings(max_examples=100, deadline=None)
    @given(payload=payloads, k=st.integers(0, 3))
    def test_rotation_reported(self, payload, k):
        m = encode_qr(payload)
        got, turns = decode_qr_oriented(m.rotate_cw(k))
        assert got == payload
        assert turns == k

    @settings(max_examples=150, deadline=None)
    @given(payload=st.binary(max_size=13), version=st.sampled_from([1, 2, 3]), level=st.sampled_from(["L", "M"]),
           seed=st.integers(0, 2**32 - 1))
    def test_rs_correction_within_capacity(self, payload, version, level, seed):
        total, n_data = CODEWORDS[version, level]
        t = (total - n_data) // 2
        rng = np.random.default_rng(seed)
        idx = rng.choice(total, size=int(rng.integers(0, t + 1)), replace=False)
        m = flip_codewords(encode_qr(payload, version, level), version, idx, rng)
        assert decode_qr(m, rotations=False) == payload

    def test_too_many_errors_rejected(self):
        rng = np.random.default_rng(3)
        m = flip_codewords(encode_qr(b"overload"), 1, range(12), rng)
        with pytest.raises(TagCodeError):
            decode_qr(m)

    def test_mask_choice_is_lowest_penalty(self):
        from irtags.tagcodes.qr import penalty

        best = encode_qr(b"mask test")
        scores = [penalty(encode_qr(b"mask test", mask=k).bits) for k in range(8)]
        assert penalty(best.bits) == min(scores)


class TestReedSolomon:
    @settings(max_examples=100, deadline=None)
    @given(data=st.lists(st.integers(0, 255), min_size=1, max_size=40), n_ecc=st.integers(2, 16),
           seed=st.integers(0, 2**32 - 1))
    def test_corrects_up_to_half(self, data, n_ecc, seed):
        code = list(data) + rs_encode(data, n_ecc)
        rng = np.random.default_rng(seed)
        bad = rng.choice(len(code), size=min(n_ecc // 2, len(code)), replace=False)
        noisy = list(code)
        for i in bad:
            noisy[i] ^= int(rng.integers(1, 256))
        fixed, count = rs_correct(noisy, n_ecc)
        assert list(fixed) == list(data)
        assert count == len(bad)

    def test_clean_codeword_has_no_errors(self):
        data = list(b"hello")
        fixed, count = rs_correct(data + rs_encode(data, 7), 7)
        assert list(fixed) == data and count == 0

    def test_uncorrectable_raises(self):
        data = list(range(10))
        code = data + rs_encode(data, 4)
        for i in range(5):
            code[i] ^= 0x5A
        with pytest.raises(EccFailure):
            rs_correct(code, 4)


class TestAruco:
    def test_dictionary_matches_published_table(self):
        d = dict_4x4_50()
        ref = opencv_dictionary()
        assert len(d) == 50
        for k in range(50):
            assert np.array_equal(d.entries[k], ref[k]), k

    def test_id0_layout(self):
        m = encode_aruco(0)
        assert m.size == 6
        assert m.bits[0].all() and m.bits[-1].all() and m.bits[:, 0].all() and m.bits[:, -1].all()
        assert np.array_equal(m.bits[1:-1, 1:-1], opencv_dictionary()[0])

    def test_distinct_and_distance(self):
        d = dict_4x4_50()
        assert len({encode_aruco(k) for k in range(50)}) == 50
        dmin = min_rotated_distance(opencv_dictionary())
        assert dmin == min_rotated_distance(d.entries)
        assert dmin >= 3
        assert dmin >= 1 + 2 * d.max_correction
        assert d.max_correction == 1

    @pytest.mark.parametrize("k", range(50))
    def test_round_trip_all_ids(self, k):
        assert decode_aruco(encode_aruco(k)) == (k, 0)

    @pytest.mark.parametrize("turns", range(4))
    def test_rotation(self, turns):
        assert decode_aruco(encode_aruco(7).rotate_cw(turns)) == (7, 90 * turns)

    def test_one_flipped_bit(self):
        bits = encode_aruco(3).bits.copy()
        bits[2, 3] ^= True
        assert decode_aruco(BitMatrix(bits)) == (3, 0)

    @settings(max_examples=200, deadline=None)
    @given(k=st.integers(0, 49), r=st.integers(1, 4), c=st.integers(1, 4), turns=st.integers(0, 3))
    def test_single_flip_matches_exhaustive_scan(self, k, r, c, turns):
        bits = encode_aruco(k).rotate_cw(turns).bits.copy()
        bits[r, c] ^= True
        inner = bits[1:-1, 1:-1]
        ref = opencv_dictionary()
        scan = min((int((np.rot90(e, -q) != inner).sum()), i, q) for i, e in enumerate(ref) for q in range(4))
        assert scan[0] <= 1
        assert decode_aruco(BitMatrix(bits)) == (scan[1], 90 * scan[2])

    def test_all_dark(self):
        with pytest.raises((NoMatch, BorderViolation)):
            decode_aruco(BitMatrix(np.ones((6, 6), bool)))

    def test_light_border(self):
        bits = encode_aruco(5).bits.copy()
        bits[0, :] = False
        bits[:, 0] = False
        with pytest.raises(BorderViolation):
            decode_aruco(BitMatrix(bits))

    def test_id_out_of_range(self):
        with pytest.raises(IdOutOfRange):
            encode_aruco(50)
        with pytest.raises(IdOutOfRange):
            encode_aruco(-1)


class TestBitMatrix:
    @settings(max_examples=50, deadline=None)
    @given(n=st.integers(1, 12), seed=st.integers(0, 1000))
    def test_pbm_round_trip(self, n, seed):
        m = BitMatrix(np.random.default_rng(seed).random((n, n)) < 0.5)
        assert BitMatrix.from_pbm(m.to_pbm()) == m

    def test_square_required(self):
        with pytest.raises(ValueError):
            BitMatrix(np.zeros((3, 4), bool))

    def test_tagspec(self):
        assert TagSpec.aruco(3).encode() == encode_aruco(3)
        assert TagSpec.qr("hi").size == 21
        assert TagSpec.qr("hi").describe() == {"family": "qr", "payload": "hi"}
        assert TagSpec.aruco(9).describe() == {"family": "aruco", "id": 9}
