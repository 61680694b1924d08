import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import bgr_frame, gray_frame
from thermotrack.annotations import GroundTruthLabel, NormBBox
from thermotrack.frameio import (
    DatasetItem,
    FrameFormatError,
    ThermalFrame,
    bgr_to_grayscale,
    gray_to_bgr,
    horizontal_flip,
    load_frame,
    pair_frames_with_labels,
    resize,
    save_frame,
)


class TestFrameType:
    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            ThermalFrame(10, 10, 1, np.zeros((5, 10), dtype=np.uint8))

    def test_wrong_dtype_rejected(self):
        with pytest.raises(ValueError):
            ThermalFrame(10, 10, 1, np.zeros((10, 10), dtype=np.float32))

    def test_from_array_infers_channels(self):
        assert ThermalFrame.from_array(np.zeros((4, 6), dtype=np.uint8)).channels == 1
        assert ThermalFrame.from_array(np.zeros((4, 6, 3), dtype=np.uint8)).channels == 3


class TestNetpbm:
    def test_ppm_round_trip_native_resolution(self, tmp_path, rng):
        pixels = rng.integers(0, 256, (120, 160, 3), dtype=np.uint8)
        frame = ThermalFrame.from_array(pixels, source_id="native")
        save_frame(frame, tmp_path / "native.ppm")
        back = load_frame(tmp_path / "native.ppm")
        assert (back.width, back.height, back.channels) == (160, 120, 3)
        assert np.array_equal(back.pixels, pixels)

    def test_pgm_round_trip(self, tmp_path, rng):
        pixels = rng.integers(0, 256, (7, 9), dtype=np.uint8)
        save_frame(ThermalFrame.from_array(pixels), tmp_path / "img.pgm")
        back = load_frame(tmp_path / "img.pgm")
        assert np.array_equal(back.pixels, pixels)
        assert back.source_id == "img"

    def test_zero_byte_file_is_malformed(self, tmp_path):
        empty = tmp_path / "broken.pgm"
        empty.write_bytes(b"")
        with pytest.raises(FrameFormatError):
            load_frame(empty)

    def test_truncated_raster_is_malformed(self, tmp_path):
        path = tmp_path / "short.pgm"
        path.write_bytes(b"P5\n4 4\n255\n" + b"\x00" * 7)
        with pytest.raises(FrameFormatError):
            load_frame(path)

    def test_comment_in_header_is_fine(self, tmp_path):
        path = tmp_path / "c.pgm"
        path.write_bytes(b"P5\n# a comment\n2 2\n255\n\x01\x02\x03\x04")
        frame = load_frame(path)
        assert frame.pixels.tolist() == [[1, 2], [3, 4]]

    def test_wrong_maxval_rejected(self, tmp_path):
        path = tmp_path / "m.pgm"
        path.write_bytes(b"P5\n2 2\n65535\n" + b"\x00" * 8)
        with pytest.raises(FrameFormatError):
            load_frame(path)

    def test_expected_dims_mismatch(self, tmp_path):
        pixels = np.zeros((640, 640), dtype=np.uint8)
        save_frame(ThermalFrame.from_array(pixels), tmp_path / "big.pgm")
        with pytest.raises(ValueError, match="dimensions"):
            load_frame(tmp_path / "big.pgm", expected_dims=(160, 120))

    def test_expected_dims_with_channels(self, tmp_path):
        pixels = np.zeros((120, 160, 3), dtype=np.uint8)
        save_frame(ThermalFrame.from_array(pixels), tmp_path / "c3.ppm")
        frame = load_frame(tmp_path / "c3.ppm", expected_dims=(160, 120, 3))
        assert frame.channels == 3


class TestGrayscale:
    def test_pure_red_pixel(self):
        frame = bgr_frame(1, 1, (0, 0, 255))
        assert bgr_to_grayscale(frame).pixels[0, 0] == 76  # 0.299 * 255 rounded

    def test_gray_input_is_fixed_point(self):
        for value in (0, 1, 77, 128, 254, 255):
            frame = bgr_frame(2, 2, (value, value, value))
            assert int(bgr_to_grayscale(frame).pixels[0, 0]) == value

    def test_white_maps_to_white(self):
        frame = bgr_frame(1, 1, (255, 255, 255))
        assert bgr_to_grayscale(frame).pixels[0, 0] == 255

    def test_double_convert_is_an_error(self):
        with pytest.raises(ValueError):
            bgr_to_grayscale(gray_frame(2, 2))

    def test_replication_round_trip_is_identity(self, rng):
        gray = ThermalFrame.from_array(rng.integers(0, 256, (13, 17), dtype=np.uint8))
        back = bgr_to_grayscale(gray_to_bgr(gray))
        assert np.array_equal(back.pixels, gray.pixels)


class TestResize:
    def test_native_to_training_size(self, rng):
        frame = ThermalFrame.from_array(rng.integers(0, 256, (120, 160, 3), dtype=np.uint8))
        out = resize(frame, 640, 640)
        assert (out.width, out.height, out.channels) == (640, 640, 3)

    def test_identity_resize_is_bit_identical(self, rng):
        pixels = rng.integers(0, 256, (9, 11), dtype=np.uint8)
        frame = ThermalFrame.from_array(pixels)
        out = resize(frame, 11, 9)
        assert np.array_equal(out.pixels, pixels)

    def test_constant_field_stays_constant(self):
        frame = gray_frame(2, 2, value=173)
        for tw, th in ((1, 1), (3, 5), (64, 64), (640, 640)):
            out = resize(frame, tw, th)
            assert np.all(out.pixels == 173)

    def test_values_stay_within_input_range(self, rng):
        pixels = rng.integers(40, 201, (12, 12), dtype=np.uint8)
        out = resize(ThermalFrame.from_array(pixels), 50, 30)
        assert out.pixels.min() >= pixels.min()
        assert out.pixels.max() <= pixels.max()

    def test_bad_target_dims(self):
        with pytest.raises(ValueError):
            resize(gray_frame(4, 4), 0, 10)


class TestHorizontalFlip:
    def test_label_mirrors(self):
        item = DatasetItem(gray_frame(10, 10), [GroundTruthLabel(NormBBox(0, 0.3, 0.4, 0.2, 0.2))])
        flipped = horizontal_flip(item)
        assert flipped.labels[0].bbox == NormBBox(0, 0.7, 0.4, 0.2, 0.2)

    def test_flip_twice_is_identity(self, rng):
        pixels = rng.integers(0, 256, (6, 8), dtype=np.uint8)
        item = DatasetItem(
            ThermalFrame.from_array(pixels),
            [GroundTruthLabel(NormBBox(0, 0.31, 0.42, 0.25, 0.3))],
        )
        twice = horizontal_flip(horizontal_flip(item))
        assert np.array_equal(twice.frame.pixels, pixels)
        assert twice.labels == item.labels

    def test_centered_label_is_fixed(self):
        item = DatasetItem(gray_frame(4, 4), [GroundTruthLabel(NormBBox(0, 0.5, 0.5, 0.2, 0.2))])
        assert horizontal_flip(item).labels[0].bbox.cx == 0.5

    def test_pixels_mirror(self):
        pixels = np.array([[1, 2, 3], [4, 5, 6]], dtype=np.uint8)
        flipped = horizontal_flip(DatasetItem(ThermalFrame.from_array(pixels)))
        assert flipped.frame.pixels.tolist() == [[3, 2, 1], [6, 5, 4]]

    def test_bgr_channels_not_swapped(self):
        frame = bgr_frame(2, 1, (10, 20, 30))
        flipped = horizontal_flip(DatasetItem(frame))
        assert flipped.frame.pixels[0, 0].tolist() == [10, 20, 30]


def _write_dataset(tmp_path, stems_with_labels):
    for stem, label_text in stems_with_labels.items():
        save_frame(gray_frame(8, 6, value=100), tmp_path / f"{stem}.pgm")
        if label_text is not None:
            (tmp_path / f"{stem}.txt").write_text(label_text)


class TestPairing:
    def test_frame_with_two_labels(self, tmp_path):
        _write_dataset(tmp_path, {"img_001": "0 0.5 0.5 0.2 0.2\n0 0.2 0.2 0.1 0.1\n"})
        items = pair_frames_with_labels(tmp_path, tmp_path)
        assert len(items) == 1
        assert len(items[0].labels) == 2

    def test_missing_label_file_is_null_labels(self, tmp_path):
        _write_dataset(tmp_path, {"img_002": None})
        items = pair_frames_with_labels(tmp_path, tmp_path)
        assert len(items) == 1
        assert items[0].labels == []

    def test_empty_label_file_is_null_labels(self, tmp_path):
        _write_dataset(tmp_path, {"img_005": ""})
        items = pair_frames_with_labels(tmp_path, tmp_path)
        assert items[0].labels == []

    def test_orphan_label_errors(self, tmp_path):
        (tmp_path / "img_003.txt").write_text("0 0.5 0.5 0.2 0.2\n")
        with pytest.raises(ValueError, match="orphan"):
            pair_frames_with_labels(tmp_path, tmp_path)

    def test_duplicate_stems_error(self, tmp_path, rng):
        save_frame(gray_frame(4, 4), tmp_path / "dup.pgm")
        save_frame(bgr_frame(4, 4), tmp_path / "dup.ppm")
        with pytest.raises(ValueError, match="duplicate"):
            pair_frames_with_labels(tmp_path, tmp_path)

    def test_items_ordered_by_stem_and_count_matches_frames(self, tmp_path):
        _write_dataset(tmp_path, {"b": None, "a": "0 0.5 0.5 0.2 0.2\n", "c": None})
        items = pair_frames_with_labels(tmp_path, tmp_path)
        assert [item.frame.source_id for item in items] == ["a", "b", "c"]
        assert [item.frame.frame_index for item in items] == [0, 1, 2]
        assert len(items) == 3


@given(
    seed=st.integers(0, 2**32 - 1),
    width=st.integers(1, 24),
    height=st.integers(1, 24),
)
def test_flip_involution_on_random_frames(seed, width, height):
    rng = np.random.default_rng(seed)
    pixels = rng.integers(0, 256, (height, width), dtype=np.uint8)
    w_u = int(rng.integers(2, 400_000))
    h_u = int(rng.integers(2, 400_000))
    cx_u = int(rng.integers(w_u // 2 + 1, 1_000_000 - w_u // 2))
    cy_u = int(rng.integers(h_u // 2 + 1, 1_000_000 - h_u // 2))
    box = NormBBox(0, cx_u / 1e6, cy_u / 1e6, w_u / 1e6, h_u / 1e6)
    item = DatasetItem(ThermalFrame.from_array(pixels), [GroundTruthLabel(box)])
    twice = horizontal_flip(horizontal_flip(item))
    assert np.array_equal(twice.frame.pixels, item.frame.pixels)
    assert twice.labels == item.labels
