"""Image representation, PPM / STL-10 ingestion, color conversion, resampling.

Images are thin wrappers around ``(H, W, 3)`` numpy arrays. The byte-exact
interchange format of the whole pipeline is binary PPM (P6, maxval 255);
floating-point image math is float64 throughout, quantized to 8 bits only
at encode boundaries (round half away from zero).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    IndexOutOfRange,
    InvalidParams,
    LabelImageCountMismatch,
    MalformedFile,
    TruncatedData,
    UnsupportedFormat,
)

STL10_RECORD_BYTES = 96 * 96 * 3  # 27648: one channel-planar, column-major record

# Canonical STL-10 category names in label order (binary labels 1..10).
STL10_CATEGORIES = (
    "airplane", "bird", "car", "cat", "deer",
    "dog", "horse", "monkey", "ship", "truck",
)

# sRGB -> XYZ (D65). The white point is taken as the matrix image of
# (1,1,1) so that pure white maps to L=100, a=b=0 exactly and L stays
# inside [0, 100] for every 8-bit input.
_SRGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_WHITE_POINT = _SRGB_TO_XYZ.sum(axis=1)


class RgbImage:
    """Raster of 8-bit RGB pixels, the universal currency of the pipeline.

    ``pixels`` is a read-only ``(height, width, 3)`` uint8 array in row-major
    order with samples (r, g, b).
    """

    __slots__ = ("pixels",)

    def __init__(self, pixels: np.ndarray):
        arr = np.asarray(pixels)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise InvalidParams(f"expected (H, W, 3) pixel array, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidParams("image dimensions must be >= 1")
        if arr.dtype != np.uint8:
            raise InvalidParams(f"expected uint8 pixels, got {arr.dtype}")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    def __setattr__(self, name, value):
        raise AttributeError("RgbImage is immutable")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, RgbImage)
            and self.pixels.shape == other.pixels.shape
            and np.array_equal(self.pixels, other.pixels)
        )

    def __repr__(self) -> str:
        return f"RgbImage({self.width}x{self.height})"


class LabImage:
    """CIE L*a*b* raster (D65), float64, same layout as :class:`RgbImage`."""

    __slots__ = ("pixels",)

    def __init__(self, pixels: np.ndarray):
        arr = np.ascontiguousarray(np.asarray(pixels, dtype=np.float64))
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise InvalidParams(f"expected (H, W, 3) Lab array, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    def __setattr__(self, name, value):
        raise AttributeError("LabImage is immutable")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass
class LabeledDataset:
    """A sequence of images with integer category labels."""

    images: list
    labels: np.ndarray
    category_names: list = field(default_factory=list)
    source: str = ""

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.images) != len(self.labels):
            raise LabelImageCountMismatch(
                f"{len(self.images)} images vs {len(self.labels)} labels"
            )
        if len(self.labels) and self.category_names:
            if self.labels.min() < 0 or self.labels.max() >= len(self.category_names):
                raise MalformedFile("label outside 0..C-1")

    @property
    def class_count(self) -> int:
        return len(self.category_names)

    def __len__(self) -> int:
        return len(self.images)


def round_half_away(values: np.ndarray) -> np.ndarray:
    """Round half away from zero (the quantization rule at encode time)."""
    return np.sign(values) * np.floor(np.abs(values) + 0.5)


def quantize_u8(values: np.ndarray) -> np.ndarray:
    """Quantize float samples to uint8 with round-half-away-from-zero."""
    return np.clip(round_half_away(np.asarray(values, dtype=np.float64)), 0, 255).astype(np.uint8)


def _ppm_tokens(data: bytes, count: int, start: int):
    """Yield ``count`` whitespace-separated header tokens, skipping comments.

    Returns (tokens, offset of the byte right after the last token).
    """
    tokens = []
    i = start
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i : i + 1] == b"#":
            while i < n and data[i] not in (0x0A, 0x0D):
                i += 1
            continue
        j = i
        while j < n and not data[j : j + 1].isspace() and data[j : j + 1] != b"#":
            j += 1
        if j == i:
            raise TruncatedData("unexpected end of PPM header")
        tokens.append(data[i:j])
        i = j
    return tokens, i


def read_ppm(data: bytes) -> RgbImage:
    """Decode a binary P6 PPM (maxval 255) into an :class:`RgbImage`."""
    data = bytes(data)
    if len(data) < 2:
        raise TruncatedData("PPM shorter than its magic number")
    if data[:2] != b"P6":
        raise UnsupportedFormat(f"unsupported PPM magic {data[:2]!r} (need P6)")
    try:
        (width_tok, height_tok, maxval_tok), offset = _ppm_tokens(data, 3, 2)
        width, height, maxval = int(width_tok), int(height_tok), int(maxval_tok)
    except (ValueError, TruncatedData) as exc:
        if isinstance(exc, TruncatedData):
            raise
        raise UnsupportedFormat(f"malformed PPM header: {exc}") from exc
    if maxval != 255:
        raise UnsupportedFormat(f"unsupported PPM maxval {maxval} (need 255)")
    if width < 1 or height < 1:
        raise UnsupportedFormat(f"invalid PPM dimensions {width}x{height}")
    # Exactly one whitespace byte separates the header from the payload.
    payload = data[offset + 1 :]
    expected = width * height * 3
    if len(payload) < expected:
        raise TruncatedData(
            f"PPM payload has {len(payload)} bytes, expected {expected}"
        )
    pixels = np.frombuffer(payload[:expected], dtype=np.uint8).reshape(height, width, 3)
    return RgbImage(pixels)


def write_ppm(image: RgbImage) -> bytes:
    """Encode an image as binary P6; ``read_ppm`` inverts it bit-exactly."""
    header = f"P6\n{image.width} {image.height}\n255\n".encode("ascii")
    return header + image.pixels.tobytes()


def stl10_record_count(data: bytes) -> int:
    """Number of 96x96x3 records in an STL-10 image binary."""
    if len(data) % STL10_RECORD_BYTES != 0:
        raise MalformedFile(
            f"STL-10 binary length {len(data)} is not a multiple of {STL10_RECORD_BYTES}"
        )
    return len(data) // STL10_RECORD_BYTES


def read_stl10_record(data: bytes, index: int) -> RgbImage:
    """Decode record ``index`` of an STL-10 image binary.

    Records are channel-planar (R, G, B) and column-major within each
    channel: pixel (row y, col x) of channel c sits at byte
    ``index*27648 + c*9216 + x*96 + y``.
    """
    count = stl10_record_count(data)
    if index < 0 or index >= count:
        raise IndexOutOfRange(f"record {index} out of range (count {count})")
    start = index * STL10_RECORD_BYTES
    planes = np.frombuffer(
        data, dtype=np.uint8, count=STL10_RECORD_BYTES, offset=start
    ).reshape(3, 96, 96)
    # planes[c, x, y] -> pixels[y, x, c]
    return RgbImage(np.ascontiguousarray(planes.transpose(2, 1, 0)))


def write_stl10_record(image: RgbImage) -> bytes:
    """Inverse of :func:`read_stl10_record` for one 96x96 image."""
    if image.width != 96 or image.height != 96:
        raise InvalidParams("STL-10 records are exactly 96x96")
    return np.ascontiguousarray(image.pixels.transpose(2, 1, 0)).tobytes()


def srgb_to_linear(channel: np.ndarray) -> np.ndarray:
    """Standard sRGB decoding gamma, on samples already scaled to [0, 1]."""
    channel = np.asarray(channel, dtype=np.float64)
    return np.where(
        channel <= 0.04045,
        channel / 12.92,
        ((channel + 0.055) / 1.055) ** 2.4,
    )


def rgb_to_lab(image: RgbImage) -> LabImage:
    """Convert to CIE L*a*b* via sRGB linearization and the D65 white point."""
    rgb = image.pixels.astype(np.float64) / 255.0
    linear = srgb_to_linear(rgb)
    xyz = linear @ _SRGB_TO_XYZ.T
    ratio = xyz / _WHITE_POINT
    eps = (6.0 / 29.0) ** 3
    f = np.where(
        ratio > eps,
        np.cbrt(ratio),
        ratio / (3.0 * (6.0 / 29.0) ** 2) + 4.0 / 29.0,
    )
    lab = np.empty_like(f)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return LabImage(lab)


def resize_bilinear_float(array: np.ndarray, new_width: int, new_height: int) -> np.ndarray:
    """Bilinear resampling of a float ``(H, W[, C])`` array with edge clamping.

    Sample positions use the half-pixel-center convention, so resizing to
    the source size reproduces it exactly.
    """
    if new_width < 1 or new_height < 1:
        raise InvalidParams("target dimensions must be >= 1")
    arr = np.asarray(array, dtype=np.float64)
    src_h, src_w = arr.shape[0], arr.shape[1]

    def _axis_coords(src: int, dst: int):
        pos = (np.arange(dst, dtype=np.float64) + 0.5) * (src / dst) - 0.5
        pos = np.clip(pos, 0.0, src - 1.0)
        lo = np.floor(pos).astype(np.int64)
        hi = np.minimum(lo + 1, src - 1)
        frac = pos - lo
        return lo, hi, frac

    x0, x1, fx = _axis_coords(src_w, new_width)
    y0, y1, fy = _axis_coords(src_h, new_height)

    if arr.ndim == 3:
        fx_row, fy_col = fx[None, :, None], fy[:, None, None]
    else:
        fx_row, fy_col = fx[None, :], fy[:, None]
    top = arr[y0][:, x0] * (1.0 - fx_row) + arr[y0][:, x1] * fx_row
    bottom = arr[y1][:, x0] * (1.0 - fx_row) + arr[y1][:, x1] * fx_row
    return top * (1.0 - fy_col) + bottom * fy_col


def resize_bilinear_float_batch(stack: np.ndarray, new_width: int, new_height: int) -> np.ndarray:
    """Batched :func:`resize_bilinear_float` over a ``(S, H, W, C)`` stack.

    Gathers only the four neighbor samples per output pixel (in the input
    dtype) and performs the same per-element arithmetic as the single-image
    path, so results are bitwise identical to resizing each slice separately.
    """
    if new_width < 1 or new_height < 1:
        raise InvalidParams("target dimensions must be >= 1")
    arr = np.asarray(stack)
    src_h, src_w = arr.shape[1], arr.shape[2]

    def _axis_coords(src: int, dst: int):
        pos = (np.arange(dst, dtype=np.float64) + 0.5) * (src / dst) - 0.5
        pos = np.clip(pos, 0.0, src - 1.0)
        lo = np.floor(pos).astype(np.int64)
        hi = np.minimum(lo + 1, src - 1)
        return lo, hi, pos - lo

    x0, x1, fx = _axis_coords(src_w, new_width)
    y0, y1, fy = _axis_coords(src_h, new_height)
    yy0, yy1 = y0[:, None], y1[:, None]
    xx0, xx1 = x0[None, :], x1[None, :]
    a = arr[:, yy0, xx0].astype(np.float64)
    b = arr[:, yy0, xx1].astype(np.float64)
    c = arr[:, yy1, xx0].astype(np.float64)
    d = arr[:, yy1, xx1].astype(np.float64)
    fx_row, fy_col = fx[None, None, :, None], fy[None, :, None, None]
    top = a * (1.0 - fx_row) + b * fx_row
    bottom = c * (1.0 - fx_row) + d * fx_row
    return top * (1.0 - fy_col) + bottom * fy_col


def resize_bilinear(image: RgbImage, new_width: int, new_height: int) -> RgbImage:
    """Bilinear resize with edge clamping; same-size resize is the identity."""
    resized = resize_bilinear_float(image.pixels.astype(np.float64), new_width, new_height)
    return RgbImage(quantize_u8(resized))


def luma(image: RgbImage) -> np.ndarray:
    """Rec. 601 luma in [0, 255] as a float64 ``(H, W)`` array."""
    px = image.pixels.astype(np.float64)
    return 0.299 * px[..., 0] + 0.587 * px[..., 1] + 0.114 * px[..., 2]
