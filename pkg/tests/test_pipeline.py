import csv

import numpy as np
import pytest

from _oracles import max_pixel_scan
from conftest import gray_frame
from thermotrack.annotations import PixelBBox
from thermotrack.detectors import BlobDetector, Detection, DetectorConfig
from thermotrack.frameio import ThermalFrame, gray_to_bgr, save_frame
from thermotrack.pipeline import (
    BOX_COLOR,
    GLYPH_H,
    GLYPH_PITCH,
    GLYPHS,
    TEXT_COLOR,
    PipelineConfig,
    StreamSummary,
    TempReading,
    extract_max_pixel,
    filter_min_area,
    format_temperature,
    process_frame,
    render_overlay,
    run_stream,
    scaled_min_area,
)
from thermotrack.synthscene import FaceSpec, SceneSpec, SequenceSpec, generate, generate_sequence
from thermotrack.thermoreg import FittedRegressor

BLOB_CFG = DetectorConfig(
    kind="blob", intensity_threshold=32, min_blob_area=40, confidence_threshold=0.1
)
LAW = FittedRegressor("ridge", {"intercept": 20.0, "slope": 0.1}, {"lambda": 0.0})


def _scene_frame(temp=35.0, seed=2):
    spec = SceneSpec(
        background_level=20,
        noise_amplitude=4,
        faces=[FaceSpec(80, 60, 10, 11, temp)],
        beta0=20.0,
        beta1=0.1,
        seed=seed,
    )
    return generate(spec)


class TestExtractMaxPixel:
    def test_constant_frame(self):
        frame = gray_frame(40, 30, value=200)
        assert extract_max_pixel(frame, PixelBBox(3, 4, 20, 21)) == 200

    def test_single_hot_pixel(self):
        frame = gray_frame(40, 30, value=10)
        frame.pixels[12, 17] = 255
        assert extract_max_pixel(frame, PixelBBox(15, 10, 20, 15)) == 255

    def test_matches_exhaustive_scan(self, rng):
        for _ in range(50):
            pixels = rng.integers(0, 256, (20, 20), dtype=np.uint8)
            frame = ThermalFrame.from_array(pixels)
            x1 = int(rng.integers(0, 19)); x2 = int(rng.integers(x1 + 1, 21))
            y1 = int(rng.integers(0, 19)); y2 = int(rng.integers(y1 + 1, 21))
            assert extract_max_pixel(frame, PixelBBox(x1, y1, x2, y2)) == max_pixel_scan(
                pixels, x1, y1, x2, y2
            )

    def test_roi_out_of_bounds(self):
        with pytest.raises(ValueError):
            extract_max_pixel(gray_frame(10, 10), PixelBBox(5, 5, 12, 9))

    def test_needs_gray_frame(self):
        with pytest.raises(ValueError):
            extract_max_pixel(gray_to_bgr(gray_frame(8, 8)), PixelBBox(0, 0, 4, 4))


class TestAreaFilter:
    def test_small_box_removed(self):
        dets = [Detection(PixelBBox(0, 0, 5, 5), 0.9)]
        assert filter_min_area(dets, 100) == []

    def test_large_box_kept(self):
        dets = [Detection(PixelBBox(0, 0, 20, 20), 0.9)]
        assert filter_min_area(dets, 100) == dets

    def test_min_area_one_is_identity(self):
        dets = [
            Detection(PixelBBox(0, 0, 1, 1), 0.5),
            Detection(PixelBBox(3, 3, 30, 30), 0.4),
        ]
        assert filter_min_area(dets, 1) == dets

    def test_scaling_rule(self):
        assert scaled_min_area(100.0, 160, 120) == 100.0
        assert scaled_min_area(100.0, 640, 640) == pytest.approx(100.0 * 640 * 640 / 19200)


class TestProcessFrame:
    def test_single_face_reading(self):
        frame, _, _ = _scene_frame(temp=35.0)
        annotated, readings = process_frame(frame, PipelineConfig(), BlobDetector(BLOB_CFG), LAW)
        assert len(readings) == 1
        reading = readings[0]
        assert reading.max_pixel == 150
        assert reading.temperature_c == LAW.predict(150)
        assert reading.temperature_c == pytest.approx(35.0, abs=1e-9)
        assert not reading.flagged
        assert annotated.channels == 3

    def test_empty_frame_passes_through(self):
        frame = gray_frame(160, 120, value=15)
        annotated, readings = process_frame(frame, PipelineConfig(), BlobDetector(BLOB_CFG), LAW)
        assert readings == []
        assert np.array_equal(annotated.pixels, gray_to_bgr(frame).pixels)

    def test_fever_flagging(self):
        frame, _, _ = _scene_frame(temp=38.6)
        _, readings = process_frame(frame, PipelineConfig(), BlobDetector(BLOB_CFG), LAW)
        assert readings[0].flagged

    def test_readings_bounded_by_detections(self):
        frame, _, _ = _scene_frame()
        detector = BlobDetector(BLOB_CFG)
        raw = detector.detect(frame)
        cfg = PipelineConfig(min_bbox_area=150.0)
        _, readings = process_frame(frame, cfg, detector, LAW)
        assert len(readings) <= len(raw)

    def test_bgr_input_converted_before_extraction(self):
        frame, _, _ = _scene_frame(temp=35.0)
        bgr = gray_to_bgr(frame)
        _, readings = process_frame(bgr, PipelineConfig(), BlobDetector(BLOB_CFG), LAW)
        assert readings[0].max_pixel == 150

    def test_detector_failure_carries_frame_index(self):
        class Exploding(BlobDetector):
            def _detect_raw(self, frame):
                raise RuntimeError("sensor fire")

        frame = gray_frame(32, 32, frame_index=7)
        from thermotrack.pipeline import PipelineFrameError

        with pytest.raises(PipelineFrameError, match="frame 7"):
            process_frame(frame, PipelineConfig(), Exploding(BLOB_CFG), LAW)


def _expected_overlay(base_pixels, readings, decimals):
    """Independent rasterization: same font table, separate drawing logic."""
    height, width = base_pixels.shape[:2]
    out = base_pixels.copy()
    for reading in readings:
        b = reading.bbox
        for x in range(b.x1, b.x2):
            out[b.y1, x] = BOX_COLOR
            out[b.y2 - 1, x] = BOX_COLOR
        for y in range(b.y1, b.y2):
            out[y, b.x1] = BOX_COLOR
            out[y, b.x2 - 1] = BOX_COLOR
        text = f"{reading.temperature_c:.{decimals}f}°C"
        text_w = len(text) * GLYPH_PITCH - 1
        tx = max(0, min(b.x1, width - text_w))
        ty = b.y1 - GLYPH_H - 1
        if ty < 0:
            ty = b.y2 + 1
        ty = max(0, min(ty, height - GLYPH_H))
        for pos, char in enumerate(text):
            for row, bits in enumerate(GLYPHS[char]):
                for col, bit in enumerate(bits):
                    yy, xx = ty + row, tx + pos * GLYPH_PITCH + col
                    if bit == "X" and 0 <= yy < height and 0 <= xx < width:
                        out[yy, xx] = TEXT_COLOR
    return out


class TestRenderOverlay:
    def test_zero_readings_is_identity(self):
        frame = gray_to_bgr(gray_frame(60, 40, value=77))
        out = render_overlay(frame, [])
        assert np.array_equal(out.pixels, frame.pixels)

    def test_deterministic(self, rng):
        frame = gray_to_bgr(ThermalFrame.from_array(rng.integers(0, 256, (50, 70), dtype=np.uint8)))
        readings = [TempReading(0, PixelBBox(10, 15, 30, 35), 150, 35.0, False)]
        a = render_overlay(frame, readings)
        b = render_overlay(frame, readings)
        assert np.array_equal(a.pixels, b.pixels)

    def test_matches_independent_rasterization(self, rng):
        frame = gray_to_bgr(ThermalFrame.from_array(rng.integers(0, 200, (64, 90), dtype=np.uint8)))
        readings = [
            TempReading(0, PixelBBox(12, 10, 40, 34), 150, 35.0, False),
            TempReading(0, PixelBBox(50, 2, 80, 20), 190, 39.05, True),  # text forced below
        ]
        out = render_overlay(frame, readings, decimals=1)
        expected = _expected_overlay(frame.pixels, readings, 1)
        assert np.array_equal(out.pixels, expected)
        assert np.any(out.pixels != frame.pixels)

    def test_never_writes_outside_frame(self):
        frame = gray_to_bgr(gray_frame(30, 22, value=0))
        readings = [TempReading(0, PixelBBox(0, 0, 30, 22), 150, -5.125, False)]
        out = render_overlay(frame, readings)  # must not raise; clipping everywhere
        assert out.pixels.shape == frame.pixels.shape

    def test_unknown_glyph_raises(self):
        frame = gray_to_bgr(gray_frame(30, 22))
        from thermotrack.pipeline import _draw_text

        with pytest.raises(ValueError):
            _draw_text(frame.pixels, 0, 0, "35K", TEXT_COLOR)

    def test_format_temperature(self):
        assert format_temperature(36.58, 1) == "36.6°C"
        assert format_temperature(36.55, 2) == "36.55°C"
        assert format_temperature(-0.25, 1) == "-0.2°C"


class TestRunStream:
    def _sequence_paths(self, tmp_path, frames=20):
        seq = SequenceSpec(frames=frames, layout="sparse", sparse_count=2, seed=3)
        paths = []
        for frame, _, _ in generate_sequence(seq):
            path = tmp_path / f"frame_{frame.frame_index:06d}.pgm"
            save_frame(frame, path)
            paths.append(path)
        return paths

    def test_twenty_frames_in_order(self, tmp_path):
        paths = self._sequence_paths(tmp_path)
        cfg = PipelineConfig(log_path=tmp_path / "log.csv", output_dir=tmp_path / "out")
        summary = run_stream(paths, BlobDetector(BLOB_CFG), LAW, cfg)
        assert summary.frames == 20
        assert summary.readings == 40
        assert sorted(p.name for p in (tmp_path / "out").glob("*.ppm")) == [
            f"out_{i:06d}.ppm" for i in range(20)
        ]
        with open(tmp_path / "log.csv") as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == ["frame_index", "x1", "y1", "x2", "y2", "max_pixel", "temperature_c", "flagged"]
        indices = [int(r[0]) for r in rows[1:]]
        assert indices == sorted(indices)
        assert len(rows) - 1 == summary.readings

    def test_corrupt_frame_skipped(self, tmp_path):
        paths = self._sequence_paths(tmp_path)
        paths[7].write_bytes(b"this is not a frame")
        cfg = PipelineConfig(log_path=tmp_path / "log.csv")
        summary = run_stream(paths, BlobDetector(BLOB_CFG), LAW, cfg)
        assert summary.frames == 19
        assert summary.errors == 1

    def test_frames_accepted_directly(self):
        seq = SequenceSpec(frames=5, layout="sparse", sparse_count=1, seed=5)
        frames = [frame for frame, _, _ in generate_sequence(seq)]
        summary = run_stream(frames, BlobDetector(BLOB_CFG), LAW, PipelineConfig())
        assert summary.frames == 5
        assert summary.readings == 5
        assert len(summary.latencies_ms) == 5

    def test_flagged_counted(self, tmp_path):
        spec = SceneSpec(
            background_level=20, noise_amplitude=4,
            faces=[FaceSpec(40, 40, 10, 10, 38.7), FaceSpec(110, 70, 10, 10, 36.0)],
            beta0=20.0, beta1=0.1, seed=8,
        )
        frame, _, _ = generate(spec)
        summary = run_stream([frame], BlobDetector(BLOB_CFG), LAW, PipelineConfig())
        assert summary.readings == 2
        assert summary.flagged == 1

    def test_summary_text_keys(self):
        summary = StreamSummary(frames=3, readings=4, flagged=1, latencies_ms=[2.0, 4.0, 6.0])
        text = summary.to_text()
        assert text.splitlines() == [
            "frames=3",
            "readings=4",
            "flagged=1",
            "mean_latency_ms=4.000",
            "max_latency_ms=6.000",
        ]
