"""Face-region detectors behind one contract.

``Detector.detect`` always returns detections sorted by descending
confidence, thresholded, and non-maximum-suppressed. Three implementations:

* ``ReplayDetector`` replays ground-truth labels (the evaluation baseline
  and the fixture for metric self-consistency checks);
* ``BlobDetector`` finds hot connected components in a grayscale frame, so
  the pipeline runs end to end without any trained weights;
* ``ExternalDetector`` hands frames to a neural detector living in another
  process over a line protocol, keeping ML runtimes out of this package.

External adapter line protocol (UTF-8, LF-terminated, over the adapter's
stdin/stdout):

* handshake: adapter emits ``READY 1``
* request: ``FRAME <request-id> <width> <height> <absolute-file-path>``
  (the file is PGM/PPM)
* response: ``OK <n>`` followed by n lines
  ``DET <class> <conf> <cx> <cy> <w> <h>`` in normalized coordinates,
  or ``ERR <message>``
"""

from __future__ import annotations

import math
import os
import queue
import subprocess
import tempfile
import threading
from dataclasses import dataclass
from itertools import count
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy import ndimage

from .annotations import (
    DegenerateBoxError,
    GroundTruthLabel,
    LabelFormatError,
    NormBBox,
    PixelBBox,
    denormalize,
)
from .deteval import iou
from .frameio import DatasetItem, ThermalFrame, save_frame

PROTOCOL_VERSION = 1

# NMS threshold just under 1.0: replay must keep overlapping ground-truth
# boxes; only exact duplicates are suppressed.
REPLAY_NMS_IOU = 1.0 - 1e-9


class AdapterError(RuntimeError):
    """Base class for external-adapter failures."""


class AdapterExitedError(AdapterError):
    """The adapter process is gone (failed to start, crashed, or closed stdout)."""


class AdapterProtocolError(AdapterError):
    """The adapter wrote something the protocol does not allow."""


class AdapterTimeoutError(AdapterError):
    """The adapter did not answer within the per-frame timeout."""


@dataclass(frozen=True)
class Detection:
    """A predicted face region with its confidence."""

    bbox: PixelBBox
    confidence: float
    class_id: int = 0

    def __post_init__(self) -> None:
        if not math.isfinite(self.confidence) or not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence!r} outside [0, 1]")


@dataclass
class DetectorConfig:
    kind: str = "blob"
    confidence_threshold: float = 0.25
    nms_iou_threshold: float = 0.45
    # Blob parameters; min_blob_area is in squared pixels at the frame's own scale.
    intensity_threshold: int = 200
    min_blob_area: int = 64
    max_aspect_ratio: float = 2.5
    # External adapter launch line and per-frame response timeout.
    external_command: tuple[str, ...] | None = None
    response_timeout_s: float = 2.0

    def __post_init__(self) -> None:
        if self.kind not in ("replay", "blob", "external"):
            raise ValueError(f"unknown detector kind {self.kind!r}")
        if not 0.0 <= self.confidence_threshold <= 1.0:
            raise ValueError(f"confidence_threshold {self.confidence_threshold} outside [0, 1]")
        if not 0.0 < self.nms_iou_threshold < 1.0:
            raise ValueError(f"nms_iou_threshold {self.nms_iou_threshold} outside (0, 1)")
        if not 0 <= self.intensity_threshold <= 255:
            raise ValueError(f"intensity_threshold {self.intensity_threshold} outside [0, 255]")
        if self.min_blob_area < 0:
            raise ValueError(f"min_blob_area {self.min_blob_area} must be >= 0")
        if self.max_aspect_ratio < 1.0:
            raise ValueError(f"max_aspect_ratio {self.max_aspect_ratio} must be >= 1")
        if self.response_timeout_s <= 0:
            raise ValueError("response_timeout_s must be positive")


def nms(dets: Sequence[Detection], iou_threshold: float) -> list[Detection]:
    """Greedy non-maximum suppression.

    Walk detections by descending confidence (stable for ties) and keep one
    only if its IoU with every already-kept detection stays below the
    threshold. Output order is descending confidence.
    """
    ordered = sorted(dets, key=lambda d: -d.confidence)
    kept: list[Detection] = []
    for det in ordered:
        if all(iou(det.bbox, k.bbox) < iou_threshold for k in kept):
            kept.append(det)
    return kept


def blob_detect(frame: ThermalFrame, cfg: DetectorConfig) -> list[Detection]:
    """Hot-region proposals from a single-channel frame.

    Pixels at or above ``intensity_threshold`` are foreground; 8-connected
    components become detections unless they are smaller than
    ``min_blob_area`` or more elongated than ``max_aspect_ratio``.
    Confidence is the component's mean intensity over 255, a monotone
    saliency proxy.
    """
    if frame.channels != 1:
        raise ValueError("blob detection needs a single-channel frame")
    mask = frame.pixels >= cfg.intensity_threshold
    labels, n_components = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
    detections: list[Detection] = []
    if n_components == 0:
        return detections
    for comp_id, slices in enumerate(ndimage.find_objects(labels), start=1):
        member = labels[slices] == comp_id
        area = int(member.sum())
        if area < cfg.min_blob_area:
            continue
        height = slices[0].stop - slices[0].start
        width = slices[1].stop - slices[1].start
        if max(width, height) / min(width, height) > cfg.max_aspect_ratio:
            continue
        mean_intensity = float(frame.pixels[slices][member].mean())
        detections.append(
            Detection(
                PixelBBox(slices[1].start, slices[0].start, slices[1].stop, slices[0].stop),
                confidence=mean_intensity / 255.0,
            )
        )
    return detections


class Detector:
    """Contract: detect() -> thresholded, NMS-clean detections, best first."""

    def __init__(self, config: DetectorConfig):
        self.config = config

    def detect(self, frame: ThermalFrame) -> list[Detection]:
        raw = self._detect_raw(frame)
        kept = [d for d in raw if d.confidence >= self.config.confidence_threshold]
        kept.sort(key=lambda d: -d.confidence)
        return nms(kept, self.config.nms_iou_threshold)

    def _detect_raw(self, frame: ThermalFrame) -> list[Detection]:
        raise NotImplementedError


class ReplayDetector(Detector):
    """Replays stored ground-truth labels as confidence-1.0 detections,
    keyed by the frame's source_id."""

    def __init__(
        self,
        labels_by_source: Mapping[str, Sequence[GroundTruthLabel]],
        config: DetectorConfig | None = None,
    ):
        super().__init__(config or DetectorConfig(kind="replay", nms_iou_threshold=REPLAY_NMS_IOU))
        self._labels = {key: list(value) for key, value in labels_by_source.items()}

    @classmethod
    def from_items(cls, items: Sequence[DatasetItem], config: DetectorConfig | None = None) -> "ReplayDetector":
        return cls({item.frame.source_id: item.labels for item in items}, config)

    def _detect_raw(self, frame: ThermalFrame) -> list[Detection]:
        labels = self._labels.get(frame.source_id, [])
        return [
            Detection(denormalize(lab.bbox, frame.width, frame.height), 1.0, lab.bbox.class_id)
            for lab in labels
        ]


class BlobDetector(Detector):
    """In-house thermal blob baseline; stateless and safe to share across streams."""

    def __init__(self, config: DetectorConfig | None = None):
        super().__init__(config or DetectorConfig(kind="blob"))

    def _detect_raw(self, frame: ThermalFrame) -> list[Detection]:
        return blob_detect(frame, self.config)


class ExternalAdapter:
    """Owns one external detector process and speaks the line protocol to it.

    Requests are serialized per process (one in-flight frame); run several
    adapters for parallelism. Use as a context manager or call close().
    """

    def __init__(self, command: Sequence[str], response_timeout_s: float = 2.0):
        self.command = tuple(command)
        self.response_timeout_s = response_timeout_s
        self._request_ids = count(1)
        self._lock = threading.Lock()
        self._scratch_dir = tempfile.mkdtemp(prefix="thermotrack-adapter-")
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise AdapterExitedError(f"could not launch {self.command}: {exc}") from exc
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._reader = threading.Thread(target=self._pump_stdout, daemon=True)
        self._reader.start()
        self._handshake()

    def _pump_stdout(self) -> None:
        assert self._proc.stdout is not None
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)  # EOF sentinel

    def _read_line(self) -> str:
        try:
            item = self._lines.get(timeout=self.response_timeout_s)
        except queue.Empty:
            raise AdapterTimeoutError(
                f"no response within {self.response_timeout_s} s from {self.command}"
            ) from None
        if item is None:
            raise AdapterExitedError(f"adapter {self.command} closed its output")
        return item.rstrip("\n")

    def _handshake(self) -> None:
        line = self._read_line()
        tokens = line.split()
        if len(tokens) != 2 or tokens[0] != "READY":
            raise AdapterProtocolError(f"expected READY handshake, got {line!r}")
        if tokens[1] != str(PROTOCOL_VERSION):
            raise AdapterProtocolError(f"unsupported protocol version {tokens[1]!r}")

    def request(self, frame: ThermalFrame) -> list[tuple[int, float, NormBBox]]:
        """Send one frame, return (class_id, confidence, normalized box) triples."""
        with self._lock:
            if self._proc.poll() is not None:
                raise AdapterExitedError(f"adapter {self.command} has exited")
            request_id = next(self._request_ids)
            frame_path = Path(self._scratch_dir) / f"frame-{request_id}.{'pgm' if frame.channels == 1 else 'ppm'}"
            save_frame(frame, frame_path)
            try:
                assert self._proc.stdin is not None
                self._proc.stdin.write(
                    f"FRAME {request_id} {frame.width} {frame.height} {frame_path}\n"
                )
                self._proc.stdin.flush()
            except (OSError, ValueError) as exc:
                raise AdapterExitedError(f"adapter {self.command} rejected input: {exc}") from exc
            return self._read_response()

    def _read_response(self) -> list[tuple[int, float, NormBBox]]:
        header = self._read_line().split()
        if header and header[0] == "ERR":
            raise AdapterError("adapter reported: " + " ".join(header[1:]))
        if len(header) != 2 or header[0] != "OK" or not header[1].isdigit():
            raise AdapterProtocolError(f"bad response header {' '.join(header)!r}")
        results = []
        for _ in range(int(header[1])):
            tokens = self._read_line().split()
            if len(tokens) != 7 or tokens[0] != "DET":
                raise AdapterProtocolError(f"bad detection line {' '.join(tokens)!r}")
            try:
                class_id = int(tokens[1])
                conf = float(tokens[2])
                box = NormBBox(class_id, *(float(t) for t in tokens[3:]))
            except (ValueError, LabelFormatError) as exc:
                raise AdapterProtocolError(f"bad detection fields: {exc}") from None
            if not math.isfinite(conf) or not 0.0 <= conf <= 1.0:
                raise AdapterProtocolError(f"confidence {tokens[2]!r} outside [0, 1]")
            results.append((class_id, conf, box))
        return results

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                if self._proc.stdin is not None:
                    self._proc.stdin.close()
                self._proc.terminate()
                self._proc.wait(timeout=2)
            except (OSError, subprocess.TimeoutExpired):
                self._proc.kill()
        for leftover in Path(self._scratch_dir).glob("frame-*"):
            try:
                leftover.unlink()
            except OSError:
                pass
        try:
            os.rmdir(self._scratch_dir)
        except OSError:
            pass

    def __enter__(self) -> "ExternalAdapter":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


class ExternalDetector(Detector):
    """Bridges the detector contract onto an ExternalAdapter."""

    def __init__(self, adapter: ExternalAdapter, config: DetectorConfig | None = None):
        super().__init__(config or DetectorConfig(kind="external"))
        self.adapter = adapter

    def _detect_raw(self, frame: ThermalFrame) -> list[Detection]:
        detections = []
        for class_id, conf, box in self.adapter.request(frame):
            try:
                pixel_box = denormalize(box, frame.width, frame.height)
            except DegenerateBoxError as exc:
                raise AdapterProtocolError(f"degenerate detection: {exc}") from None
            detections.append(Detection(pixel_box, conf, class_id))
        return detections
