"""Thermal frame I/O and geometry: binary PGM/PPM codecs, grayscale
conversion, bilinear resize, horizontal-flip augmentation, and pairing of
frame directories with their label files.

Frames are 8-bit, single-channel (gray) or three-channel (BGR byte order).
All operations are pure: they return new frames and never mutate inputs.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .annotations import GroundTruthLabel, mirrored_horizontal, parse_yolo_text

# FLIR Lepton-class native resolution.
NATIVE_WIDTH = 160
NATIVE_HEIGHT = 120

# BT.601 luma weights, (R, G, B) order.
GRAY_WEIGHTS = (0.299, 0.587, 0.114)

FRAME_SUFFIXES = (".pgm", ".ppm")
LABEL_SUFFIX = ".txt"


class FrameFormatError(ValueError):
    """A raster file is unreadable as binary PGM (P5) or PPM (P6)."""


@dataclass(eq=False)
class ThermalFrame:
    """One thermal image: dimensions, an 8-bit pixel buffer, and stream metadata.

    ``pixels`` has shape (height, width) for gray frames and
    (height, width, 3) for BGR frames, dtype uint8, row-major.
    """

    width: int
    height: int
    channels: int
    pixels: np.ndarray
    frame_index: int = 0
    source_id: str = ""

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"dims must be positive, got {self.width}x{self.height}")
        if self.channels not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {self.channels}")
        if self.frame_index < 0:
            raise ValueError(f"frame_index must be non-negative, got {self.frame_index}")
        expected = (self.height, self.width) if self.channels == 1 else (self.height, self.width, 3)
        if not isinstance(self.pixels, np.ndarray) or self.pixels.dtype != np.uint8:
            raise ValueError("pixels must be a uint8 ndarray")
        if self.pixels.shape != expected:
            raise ValueError(f"pixel buffer shape {self.pixels.shape} != {expected}")

    @classmethod
    def from_array(cls, pixels: np.ndarray, frame_index: int = 0, source_id: str = "") -> "ThermalFrame":
        """Wrap an existing (h, w) or (h, w, 3) uint8 array."""
        arr = np.asarray(pixels)
        if arr.ndim == 2:
            channels = 1
        elif arr.ndim == 3 and arr.shape[2] == 3:
            channels = 3
        else:
            raise ValueError(f"expected (h, w) or (h, w, 3) array, got shape {arr.shape}")
        return cls(arr.shape[1], arr.shape[0], channels, arr.astype(np.uint8, copy=False),
                   frame_index, source_id)

    def copy(self) -> "ThermalFrame":
        return replace(self, pixels=self.pixels.copy())


@dataclass
class DatasetItem:
    """A frame with its ground-truth labels; an empty label list is the valid
    null-label state for frames with nobody in view, never an error."""

    frame: ThermalFrame
    labels: list[GroundTruthLabel] = field(default_factory=list)


def _atomic_write_bytes(path: Path, data: bytes) -> None:
    # Temp file in the same directory so os.replace stays atomic.
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write UTF-8 text via temp-file-and-rename so readers never see a
    truncated file."""
    _atomic_write_bytes(Path(path), text.encode("utf-8"))


def _parse_netpbm(data: bytes, path: Path) -> tuple[int, int, int, bytes]:
    if len(data) < 2 or data[:2] not in (b"P5", b"P6"):
        raise FrameFormatError(f"{path}: not a binary PGM/PPM file")
    channels = 1 if data[:2] == b"P5" else 3
    pos = 2
    fields: list[int] = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        token = data[start:pos]
        if not token.isdigit():
            raise FrameFormatError(f"{path}: malformed header token {token!r}")
        fields.append(int(token))
    width, height, maxval = fields
    if maxval != 255:
        raise FrameFormatError(f"{path}: unsupported maxval {maxval}, expected 255")
    if width <= 0 or height <= 0:
        raise FrameFormatError(f"{path}: non-positive dimensions {width}x{height}")
    pos += 1  # exactly one whitespace byte separates header from raster data
    raster = data[pos:]
    if len(raster) != width * height * channels:
        raise FrameFormatError(
            f"{path}: raster holds {len(raster)} bytes, expected {width * height * channels}"
        )
    return width, height, channels, raster


def load_frame(
    path: str | Path,
    expected_dims: tuple[int, ...] | None = None,
    frame_index: int = 0,
) -> ThermalFrame:
    """Load a binary PGM (gray) or PPM (BGR) frame.

    Parameters
    ----------
    path : file path
    expected_dims : optional (width, height) or (width, height, channels);
        a mismatch raises ValueError.
    frame_index : sequence number to stamp on the frame.
    """
    path = Path(path)
    data = path.read_bytes()
    width, height, channels, raster = _parse_netpbm(data, path)
    if expected_dims is not None:
        actual = (width, height, channels)[: len(expected_dims)]
        if tuple(expected_dims) != actual:
            raise ValueError(
                f"{path}: dimensions {actual} do not match expected {tuple(expected_dims)}"
            )
    shape = (height, width) if channels == 1 else (height, width, 3)
    pixels = np.frombuffer(raster, dtype=np.uint8).reshape(shape).copy()
    return ThermalFrame(width, height, channels, pixels, frame_index, path.stem)


def save_frame(frame: ThermalFrame, path: str | Path) -> None:
    """Write a frame as binary PGM (1-channel) or PPM (3-channel), atomically."""
    path = Path(path)
    magic = b"P5" if frame.channels == 1 else b"P6"
    header = magic + f"\n{frame.width} {frame.height}\n255\n".encode("ascii")
    _atomic_write_bytes(path, header + frame.pixels.tobytes())


def bgr_to_grayscale(frame: ThermalFrame) -> ThermalFrame:
    """Convert a BGR frame to gray with BT.601 luma, rounding half-up.

    Callers must not double-convert: a frame that is already single-channel
    raises ValueError.
    """
    if frame.channels != 3:
        raise ValueError("frame is already single-channel")
    px = frame.pixels.astype(np.float64)
    wr, wg, wb = GRAY_WEIGHTS
    gray = wr * px[:, :, 2] + wg * px[:, :, 1] + wb * px[:, :, 0]
    gray = np.clip(np.floor(gray + 0.5), 0, 255).astype(np.uint8)
    return replace(frame, channels=1, pixels=gray)


def gray_to_bgr(frame: ThermalFrame) -> ThermalFrame:
    """Replicate a gray plane into the three BGR channels."""
    if frame.channels != 1:
        raise ValueError("frame is not single-channel")
    return replace(frame, channels=3, pixels=np.repeat(frame.pixels[:, :, None], 3, axis=2))


def resize(frame: ThermalFrame, target_w: int, target_h: int) -> ThermalFrame:
    """Bilinear resize with half-pixel-center sampling and replicated borders.

    Aspect-ratio distortion is accepted by design: low-resolution frames are
    stretched straight to square training sizes. Normalized labels are
    dimension-relative and therefore unaffected by resizing.

    Interpolation is written as ``a + f * (b - a)`` per axis, which keeps
    constant regions exactly constant and every output inside the input
    value range.
    """
    if target_w <= 0 or target_h <= 0:
        raise ValueError(f"target dims must be positive, got {target_w}x{target_h}")
    if (target_w, target_h) == (frame.width, frame.height):
        return frame.copy()

    src = frame.pixels.astype(np.float64)
    xs = (np.arange(target_w) + 0.5) * (frame.width / target_w) - 0.5
    ys = (np.arange(target_h) + 0.5) * (frame.height / target_h) - 0.5
    x0 = np.floor(xs)
    y0 = np.floor(ys)
    fx = xs - x0
    fy = ys - y0
    x0i = np.clip(x0.astype(np.int64), 0, frame.width - 1)
    x1i = np.clip(x0.astype(np.int64) + 1, 0, frame.width - 1)
    y0i = np.clip(y0.astype(np.int64), 0, frame.height - 1)
    y1i = np.clip(y0.astype(np.int64) + 1, 0, frame.height - 1)

    c00 = src[y0i[:, None], x0i[None, :]]
    c01 = src[y0i[:, None], x1i[None, :]]
    c10 = src[y1i[:, None], x0i[None, :]]
    c11 = src[y1i[:, None], x1i[None, :]]
    if frame.channels == 3:
        fxb, fyb = fx[None, :, None], fy[:, None, None]
    else:
        fxb, fyb = fx[None, :], fy[:, None]
    top = c00 + fxb * (c01 - c00)
    bottom = c10 + fxb * (c11 - c10)
    out = top + fyb * (bottom - top)
    pixels = np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)
    return replace(frame, width=target_w, height=target_h, pixels=pixels)


def horizontal_flip(item: DatasetItem) -> DatasetItem:
    """Mirror a frame and its labels across the vertical midline.

    Flipping twice restores the original item bit-for-bit (label centers are
    snapped to the label-file precision grid; see mirrored_horizontal).
    """
    flipped = item.frame.pixels[:, ::-1].copy()
    labels = [GroundTruthLabel(mirrored_horizontal(lab.bbox)) for lab in item.labels]
    return DatasetItem(replace(item.frame, pixels=flipped), labels)


def list_frame_paths(frames_dir: str | Path) -> list[Path]:
    """Frame files in a directory, ordered by filename stem.

    Raises ValueError when two frame files share a stem (e.g. both a .pgm
    and a .ppm): the pairing convention keys on the stem alone.
    """
    frames_dir = Path(frames_dir)
    if not frames_dir.is_dir():
        raise ValueError(f"{frames_dir} is not a directory")
    paths = sorted(
        (p for p in frames_dir.iterdir() if p.suffix.lower() in FRAME_SUFFIXES),
        key=lambda p: p.stem,
    )
    seen: dict[str, Path] = {}
    for p in paths:
        if p.stem in seen:
            raise ValueError(f"duplicate frame stem {p.stem!r}: {seen[p.stem]} and {p}")
        seen[p.stem] = p
    return paths


def pair_frames_with_labels(frames_dir: str | Path, labels_dir: str | Path) -> list[DatasetItem]:
    """Pair every frame file with its same-stem label file.

    A frame whose label file is missing or empty yields an item with an
    empty label list (the null-label state). A label file with no matching
    frame is an orphan and raises.
    """
    labels_dir = Path(labels_dir)
    if not labels_dir.is_dir():
        raise ValueError(f"{labels_dir} is not a directory")
    frame_paths = list_frame_paths(frames_dir)
    frame_stems = {p.stem for p in frame_paths}
    for label_path in labels_dir.glob(f"*{LABEL_SUFFIX}"):
        if label_path.stem not in frame_stems:
            raise ValueError(f"orphan label file {label_path} has no matching frame")
    items = []
    for index, frame_path in enumerate(frame_paths):
        frame = load_frame(frame_path, frame_index=index)
        label_path = labels_dir / f"{frame_path.stem}{LABEL_SUFFIX}"
        labels = []
        if label_path.exists():
            labels = [GroundTruthLabel(b) for b in parse_yolo_text(label_path.read_text())]
        items.append(DatasetItem(frame, labels))
    return items
