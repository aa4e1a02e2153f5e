"""Invisible screen-to-camera data embedding by segment intensity modulation.

A frame is cut into a grid of near-equal segments (2 x 4 by default). A data
frame carries one bit per segment: a ``1`` segment has its channel values
nudged by a few intensity steps (mostly in blue, which the eye notices
least), a ``0`` segment is left untouched. The receiver compares the data
frame against the unmodified reference frame shown just before it, so half
of the displayed frames carry no payload.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from signage.errors import DimensionMismatch, InsufficientFrames, InvalidConfig, InvalidGrid, PayloadSizeMismatch


@dataclass(frozen=True, eq=False)
class Frame:
    """An 8-bit RGB image stored as a ``(height, width, 3)`` uint8 array."""

    samples: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.samples)
        if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionMismatch(f"expected a (height, width, 3) array, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if np.issubdtype(arr.dtype, np.integer) and (arr.min() < 0 or arr.max() > 255):
                raise InvalidConfig("channel values must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        object.__setattr__(self, "samples", arr)

    @classmethod
    def uniform(cls, width: int, height: int, value: int | Sequence[int]) -> "Frame":
        arr = np.empty((height, width, 3), dtype=np.uint8)
        arr[...] = value
        return cls(arr)

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Frame):
            return NotImplemented
        return self.samples.shape == other.samples.shape and bool(np.array_equal(self.samples, other.samples))

    def tobytes(self) -> bytes:
        return self.samples.tobytes()


@dataclass(frozen=True)
class SegmentLayout:
    width: int
    height: int
    rows: int
    cols: int
    row_edges: tuple[int, ...]
    col_edges: tuple[int, ...]

    @property
    def count(self) -> int:
        return self.rows * self.cols

    def segments(self) -> list[tuple[slice, slice]]:
        """Row-major list of ``(row_slice, col_slice)`` pairs."""
        return [
            (slice(self.row_edges[i], self.row_edges[i + 1]), slice(self.col_edges[j], self.col_edges[j + 1]))
            for i in range(self.rows)
            for j in range(self.cols)
        ]

    def pixel_counts(self) -> list[int]:
        return [(r.stop - r.start) * (c.stop - c.start) for r, c in self.segments()]


def make_layout(width: int, height: int, rows: int = 2, cols: int = 4) -> SegmentLayout:
    """Grid partition with boundaries at ``floor(i*height/rows)`` and ``floor(j*width/cols)``."""
    if rows < 1 or cols < 1 or rows > height or cols > width:
        raise InvalidGrid(f"a {rows}x{cols} grid does not fit a {width}x{height} frame")
    row_edges = tuple(i * height // rows for i in range(rows + 1))
    col_edges = tuple(j * width // cols for j in range(cols + 1))
    return SegmentLayout(width, height, rows, cols, row_edges, col_edges)


@dataclass(frozen=True)
class ModulationProfile:
    delta_r: int = 2
    delta_g: int = 0
    delta_b: int = 4
    decode_threshold: Optional[float] = None  # defaults to delta_b / 2

    def __post_init__(self):
        deltas = (self.delta_r, self.delta_g, self.delta_b)
        if any(d < 0 or d > 127 or int(d) != d for d in deltas):
            raise InvalidConfig("intensity steps must be integers in [0, 127]")
        if self.delta_b < 1:
            raise InvalidConfig("delta_b must be at least 1")
        if self.delta_b < self.delta_r or self.delta_b < self.delta_g:
            raise InvalidConfig("blue must carry the largest intensity step")
        if self.threshold <= 0:
            raise InvalidConfig("decode threshold must be positive")

    @property
    def deltas(self) -> tuple[int, int, int]:
        return (self.delta_r, self.delta_g, self.delta_b)

    @property
    def threshold(self) -> float:
        if self.decode_threshold is None:
            return self.delta_b / 2
        return float(self.decode_threshold)


def _check_same_size(a: Frame, b: Frame) -> None:
    if a.samples.shape != b.samples.shape:
        raise DimensionMismatch(f"frames differ in size: {a.width}x{a.height} vs {b.width}x{b.height}")


def _check_layout(frame: Frame, layout: SegmentLayout) -> None:
    if (frame.width, frame.height) != (layout.width, layout.height):
        raise DimensionMismatch(
            f"layout is for {layout.width}x{layout.height}, frame is {frame.width}x{frame.height}"
        )


def shift_sign(plane: np.ndarray, delta: int) -> int:
    """Direction (+1 or -1) that moves a segment's values furthest under saturation.

    The achieved mean shift upward is ``mean(min(delta, 255 - v))`` and
    downward ``mean(min(delta, v))``; upward wins ties. In particular a
    segment whose mean exceeds ``255 - delta`` is always shifted down, and
    the chosen direction always achieves at least ``delta / 2``.
    """
    v = plane.astype(np.int32)
    up = np.minimum(delta, 255 - v).sum()
    down = np.minimum(delta, v).sum()
    return -1 if down > up else 1


def embed_bits(reference: Frame, bits: Sequence[int], layout: SegmentLayout, profile: ModulationProfile) -> Frame:
    """Return the data frame carrying ``bits`` (row-major, one per segment)."""
    _check_layout(reference, layout)
    bits = list(bits)
    if len(bits) != layout.count:
        raise PayloadSizeMismatch(f"{len(bits)} bits for {layout.count} segments")
    out = reference.samples.copy()
    for bit, (rs, cs) in zip(bits, layout.segments()):
        if not bit:
            continue
        for ch, delta in enumerate(profile.deltas):
            if delta == 0:
                continue
            plane = reference.samples[rs, cs, ch]
            step = delta * shift_sign(plane, delta)
            out[rs, cs, ch] = np.clip(plane.astype(np.int16) + step, 0, 255).astype(np.uint8)
    return Frame(out)


def segment_means(frame: Frame, layout: SegmentLayout, channel: int = 2) -> np.ndarray:
    plane = frame.samples[:, :, channel]
    return np.array([plane[rs, cs].mean(dtype=np.float64) for rs, cs in layout.segments()])


def extract_bits(reference: Frame, data: Frame, layout: SegmentLayout, profile: ModulationProfile) -> list[int]:
    """Recover one bit per segment from the blue-mean difference of a frame pair."""
    _check_same_size(reference, data)
    _check_layout(reference, layout)
    stat = np.abs(segment_means(data, layout) - segment_means(reference, layout))
    return [int(s >= profile.threshold) for s in stat]


@dataclass(frozen=True)
class ChannelModel:
    """Photometric distortion: gain, constant offset and Gaussian sensor noise."""

    gain: float = 1.0
    offset: int = 0
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.gain > 0:
            raise InvalidConfig("gain must be positive")
        if self.noise_sigma < 0:
            raise InvalidConfig("noise_sigma must be non-negative")


def distort(frame: Frame, model: ChannelModel) -> Frame:
    """Apply ``clamp(round(gain*v + offset + noise))`` to every sample.

    Noise is drawn in row-major sample order from the model's seed. Rounding
    is half away from zero.
    """
    v = frame.samples.astype(np.float64)
    if model.gain != 1:
        v *= model.gain
    if model.noise_sigma > 0:
        noise = np.random.default_rng(model.seed).standard_normal(size=v.shape)
        noise *= model.noise_sigma
        v += noise
    # negative values clamp to 0 under either rounding rule, so floor(v + 0.5) suffices
    v += model.offset + 0.5
    np.floor(v, out=v)
    np.clip(v, 0, 255, out=v)
    return Frame(v.astype(np.uint8))


@dataclass(frozen=True)
class HistogramSet:
    red: np.ndarray
    green: np.ndarray
    blue: np.ndarray

    def channels(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (self.red, self.green, self.blue)


def histogram(frame: Frame) -> HistogramSet:
    counts = [np.bincount(frame.samples[:, :, ch].ravel(), minlength=256) for ch in range(3)]
    return HistogramSet(*counts)


@dataclass(frozen=True)
class InvisibilityReport:
    channel_mean_shift: tuple[float, float, float]
    max_mean_shift: float
    max_abs_change: int
    mse: float
    psnr_db: float
    green_unchanged: bool


def invisibility_report(reference: Frame, data: Frame, profile: Optional[ModulationProfile] = None) -> InvisibilityReport:
    """Compare a data frame to its reference: mean shifts, MSE, PSNR and green identity.

    ``profile`` is accepted for symmetry with the codec calls; the figures do
    not depend on it.
    """
    _check_same_size(reference, data)
    ref = reference.samples.astype(np.int32)
    dat = data.samples.astype(np.int32)
    diff = dat - ref
    shifts = tuple(float(diff[:, :, ch].mean()) for ch in range(3))
    mse = float(np.mean(diff.astype(np.float64) ** 2))
    psnr = math.inf if mse == 0 else 10.0 * math.log10(255.0**2 / mse)
    return InvisibilityReport(
        channel_mean_shift=shifts,
        max_mean_shift=max(abs(s) for s in shifts),
        max_abs_change=int(np.abs(diff).max()),
        mse=mse,
        psnr_db=psnr,
        green_unchanged=bool(np.array_equal(reference.samples[:, :, 1], data.samples[:, :, 1])),
    )


def stream_throughput(fps: float, bits_per_frame: int) -> float:
    """Payload bits per second when every other frame is a reference."""
    if fps < 0:
        raise InvalidConfig("fps must be non-negative")
    return fps / 2 * bits_per_frame


def pad_bits(bits: Sequence[int], block: int) -> list[int]:
    bits = list(bits)
    return bits + [0] * (-len(bits) % block)


def encode_stream(
    reference_frames: Sequence[Frame], payload_bits: Sequence[int], layout: SegmentLayout, profile: ModulationProfile
) -> list[Frame]:
    """Interleave reference frames with their data-carrying partners.

    The payload is zero-padded to a multiple of the segment count; output
    index ``2k`` is reference ``k`` and ``2k + 1`` carries payload block ``k``.
    """
    padded = pad_bits(payload_bits, layout.count)
    needed = len(padded) // layout.count
    if needed > len(reference_frames):
        raise InsufficientFrames(f"payload needs {needed} reference frames, got {len(reference_frames)}")
    out = []
    for k in range(needed):
        ref = reference_frames[k]
        block = padded[k * layout.count : (k + 1) * layout.count]
        out.extend([ref, embed_bits(ref, block, layout, profile)])
    return out


def decode_stream(frames: Sequence[Frame], layout: SegmentLayout, profile: ModulationProfile) -> list[int]:
    """Inverse of :func:`encode_stream` over ``(reference, data)`` pairs."""
    if len(frames) % 2:
        raise InsufficientFrames("frame stream must hold reference/data pairs")
    bits: list[int] = []
    for k in range(0, len(frames), 2):
        bits.extend(extract_bits(frames[k], frames[k + 1], layout, profile))
    return bits
