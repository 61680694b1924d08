import pytest
from hypothesis import given
from hypothesis import strategies as st

from thermotrack.annotations import (
    DegenerateBoxError,
    LabelFormatError,
    NormBBox,
    PixelBBox,
    denormalize,
    mirrored_horizontal,
    normalize,
    parse_yolo_line,
    parse_yolo_text,
    serialize_yolo,
)

# Boxes on the 1e-6 serialization grid, strictly inside the unit frame.
grid_boxes = st.builds(
    lambda cx_u, cy_u, w_u, h_u: NormBBox(
        0,
        (cx_u := max(w_u // 2 + 1, min(cx_u, 1_000_000 - w_u // 2 - 1))) / 1e6,
        (cy_u := max(h_u // 2 + 1, min(cy_u, 1_000_000 - h_u // 2 - 1))) / 1e6,
        w_u / 1e6,
        h_u / 1e6,
    ),
    cx_u=st.integers(1, 999_999),
    cy_u=st.integers(1, 999_999),
    w_u=st.integers(2, 999_996),
    h_u=st.integers(2, 999_996),
)


class TestParse:
    def test_basic_line(self):
        box = parse_yolo_line("0 0.5 0.5 0.25 0.25")
        assert box == NormBBox(0, 0.5, 0.5, 0.25, 0.25)

    def test_multi_space_separation(self):
        box = parse_yolo_line("1   0.5\t0.5     0.25 0.25")
        assert box.class_id == 1

    def test_field_count_error(self):
        with pytest.raises(LabelFormatError):
            parse_yolo_line("0 0.5 0.5")

    def test_non_numeric_token(self):
        with pytest.raises(LabelFormatError):
            parse_yolo_line("0 0.5 oops 0.25 0.25")

    def test_out_of_range_center(self):
        with pytest.raises(LabelFormatError):
            parse_yolo_line("0 1.2 0.5 0.1 0.1")

    def test_negative_class(self):
        with pytest.raises(LabelFormatError):
            parse_yolo_line("-1 0.5 0.5 0.25 0.25")

    def test_corner_overflow_rejected(self):
        # center 0.9 with width 0.5 pushes the right edge to 1.15
        with pytest.raises(LabelFormatError):
            parse_yolo_line("0 0.9 0.5 0.5 0.1")

    def test_text_skips_blank_lines(self):
        boxes = parse_yolo_text("0 0.5 0.5 0.25 0.25\n\n0 0.2 0.2 0.1 0.1\n")
        assert len(boxes) == 2


class TestSerialize:
    def test_empty_is_null_label_file(self):
        assert serialize_yolo([]) == ""

    def test_single_box_format(self):
        text = serialize_yolo([NormBBox(0, 0.5, 0.5, 0.25, 0.25)])
        assert text == "0 0.500000 0.500000 0.250000 0.250000\n"

    def test_round_trip_hundred_random_boxes(self, rng):
        boxes = []
        for _ in range(100):
            w = rng.integers(1, 500_000) / 1e6
            h = rng.integers(1, 500_000) / 1e6
            cx = rng.uniform(w / 2, 1 - w / 2)
            cy = rng.uniform(h / 2, 1 - h / 2)
            boxes.append(NormBBox(0, float(cx), float(cy), float(w), float(h)))
        parsed = parse_yolo_text(serialize_yolo(boxes))
        for original, back in zip(boxes, parsed):
            assert back.cx == pytest.approx(original.cx, abs=1e-6)
            assert back.cy == pytest.approx(original.cy, abs=1e-6)
            assert back.w == pytest.approx(original.w, abs=1e-6)
            assert back.h == pytest.approx(original.h, abs=1e-6)

    @given(grid_boxes)
    def test_grid_boxes_round_trip_exactly(self, box):
        assert parse_yolo_text(serialize_yolo([box])) == [box]


class TestDenormalize:
    def test_quarter_box_on_640(self):
        assert denormalize(NormBBox(0, 0.5, 0.5, 0.25, 0.25), 640, 640) == PixelBBox(240, 240, 400, 400)

    def test_full_frame_box(self):
        assert denormalize(NormBBox(0, 0.5, 0.5, 1.0, 1.0), 160, 120) == PixelBBox(0, 0, 160, 120)

    def test_collapsing_box_errors(self):
        with pytest.raises(DegenerateBoxError):
            denormalize(NormBBox(0, 0.5, 0.5, 1e-9, 1e-9), 160, 120)

    def test_monotone_in_width(self):
        base = denormalize(NormBBox(0, 0.5, 0.5, 0.2, 0.2), 100, 100)
        wider = denormalize(NormBBox(0, 0.5, 0.5, 0.24, 0.2), 100, 100)
        assert wider.width > base.width
        assert wider.height == base.height


class TestNormalize:
    def test_quarter_box_inverse(self):
        assert normalize(PixelBBox(240, 240, 400, 400), 640, 640) == NormBBox(0, 0.5, 0.5, 0.25, 0.25)

    def test_full_frame(self):
        assert normalize(PixelBBox(0, 0, 160, 120), 160, 120) == NormBBox(0, 0.5, 0.5, 1.0, 1.0)

    def test_outside_frame_errors(self):
        # negative corners are rejected at construction, which is the same contract
        with pytest.raises(ValueError):
            normalize(PixelBBox(-5, 0, 10, 10), 160, 120)
        with pytest.raises(ValueError):
            normalize(PixelBBox(0, 0, 200, 10), 160, 120)

    @given(
        x1=st.integers(0, 98), y1=st.integers(0, 98),
        w=st.integers(1, 30), h=st.integers(1, 30),
    )
    def test_pixel_norm_pixel_is_exact(self, x1, y1, w, h):
        box = PixelBBox(x1, y1, x1 + w, y1 + h)
        assert denormalize(normalize(box, 128, 128), 128, 128) == box

    @given(grid_boxes, st.integers(2, 700), st.integers(2, 700))
    def test_norm_pixel_norm_pixel_within_one(self, box, frame_w, frame_h):
        try:
            first = denormalize(box, frame_w, frame_h)
        except DegenerateBoxError:
            return  # tiny boxes on tiny frames legitimately collapse
        second = denormalize(normalize(first, frame_w, frame_h), frame_w, frame_h)
        assert abs(second.x1 - first.x1) <= 1
        assert abs(second.y1 - first.y1) <= 1
        assert abs(second.x2 - first.x2) <= 1
        assert abs(second.y2 - first.y2) <= 1


class TestPixelBBox:
    def test_zero_area_rejected(self):
        with pytest.raises(ValueError):
            PixelBBox(5, 5, 5, 9)

    def test_area(self):
        assert PixelBBox(0, 0, 10, 10).area() == 100


class TestMirror:
    def test_mirror_moves_center(self):
        box = NormBBox(0, 0.3, 0.4, 0.2, 0.2)
        assert mirrored_horizontal(box) == NormBBox(0, 0.7, 0.4, 0.2, 0.2)

    def test_mirror_twice_is_identity(self):
        box = NormBBox(0, 0.3, 0.4, 0.2, 0.2)
        assert mirrored_horizontal(mirrored_horizontal(box)) == box

    def test_centered_box_is_fixed_point(self):
        box = NormBBox(0, 0.5, 0.25, 0.1, 0.1)
        assert mirrored_horizontal(box) == box
