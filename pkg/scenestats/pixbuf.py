"""
Raster substrate for the statistics: netpbm decoding and encoding, grayscale
conversion, bilinear resizing and cropping.

Frames are immutable. Every operation returns a new frame and never touches
its input, so frames can be shared freely between worker processes.
"""
import logging
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from scenestats.exceptions import (
    ExportError,
    InvalidSample,
    MalformedHeader,
    MaxvalTooLarge,
    NetpbmError,
    OutOfBounds,
    TruncatedPayload,
    UnsupportedFormat,
)

logger = logging.getLogger(__name__)

# ITU-R BT.601 luma weights, in thousandths
LUMA_WEIGHTS = np.array([299, 587, 114], dtype=np.int64)

_WHITESPACE = frozenset(b' \t\n\r\x0b\x0c')
_GRAY_MAGICS = {b'P2', b'P5'}
_RGB_MAGICS = {b'P3', b'P6'}
_ASCII_MAGICS = {b'P2', b'P3'}
_COMMENT = re.compile(rb'#[^\n\r]*')


def _readonly(array):
    if array.flags.writeable:
        array = array.copy()
        array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class GrayFrame:
    """
    A normalized single-channel raster.

    Attributes:
        pixels (np.ndarray): Read-only float64 array of shape
                             (height, width) with values in [0.0, 1.0].
    """
    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=np.float64)
        if pixels.ndim != 2 or pixels.size == 0:
            raise ValueError(
                f"GrayFrame needs a non-empty 2-D array, got shape {pixels.shape}")  # noqa
        if not np.all(np.isfinite(pixels)):
            raise ValueError("GrayFrame pixels must be finite")
        if pixels.min() < 0.0 or pixels.max() > 1.0:
            raise ValueError("GrayFrame pixels must lie in [0.0, 1.0]")
        object.__setattr__(self, 'pixels', _readonly(pixels))

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def height(self):
        return self.pixels.shape[0]

    def __eq__(self, other):
        if not isinstance(other, GrayFrame):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class RgbFrame:
    """
    An 8-bit colour raster.

    Attributes:
        pixels (np.ndarray): Read-only uint8 array of shape
                             (height, width, 3).
    """
    pixels: np.ndarray

    def __post_init__(self):
        raw = np.asarray(self.pixels)
        if raw.ndim != 3 or raw.shape[2] != 3 or raw.shape[0] * raw.shape[1] == 0:  # noqa
            raise ValueError(
                f"RgbFrame needs a (height, width, 3) array, got shape {raw.shape}")  # noqa
        if raw.dtype != np.uint8:
            if raw.min() < 0 or raw.max() > 255:
                raise ValueError("RgbFrame channels must lie in [0, 255]")
            raw = raw.astype(np.uint8)
        object.__setattr__(self, 'pixels', _readonly(raw))

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def height(self):
        return self.pixels.shape[0]

    def __eq__(self, other):
        if not isinstance(other, RgbFrame):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    __hash__ = None


@dataclass(frozen=True)
class CropRect:
    """A rectangular region given by its top-left corner and size."""
    left: int
    top: int
    width: int
    height: int

    def __post_init__(self):
        if self.left < 0 or self.top < 0:
            raise ValueError("Crop offsets must be non-negative")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("Crop size must be positive")

    @classmethod
    def parse(cls, text):
        """
        Parse a crop given as ``L,T,W,H``.

        Raises:
            ValueError: If the text is not four integers or the rectangle
                        is not valid.
        """
        parts = [part.strip() for part in str(text).split(',')]
        if len(parts) != 4:
            raise ValueError(f"Crop must be 'L,T,W,H', got {text!r}")
        return cls(*(int(part) for part in parts))

    @classmethod
    def bottom_half(cls, width, height):
        """The rectangle that removes the top half of a frame."""
        top = height // 2
        return cls(0, top, width, height - top)

    def fits(self, width, height):
        return (self.left + self.width <= width
                and self.top + self.height <= height)

    def __str__(self):
        return f"{self.left},{self.top},{self.width},{self.height}"


def _skip_blanks(data, pos):
    while pos < len(data):
        if data[pos] in _WHITESPACE:
            pos += 1
        elif data[pos] == ord('#'):
            while pos < len(data) and data[pos] not in (0x0A, 0x0D):
                pos += 1
        else:
            break
    return pos


def _header_int(data, pos, name):
    pos = _skip_blanks(data, pos)
    start = pos
    while pos < len(data) and data[pos] not in _WHITESPACE \
            and data[pos] != ord('#'):
        pos += 1
    token = data[start:pos]
    if not token:
        raise MalformedHeader(f"Header ended before {name}")
    if not token.isdigit():
        raise MalformedHeader(f"Invalid {name} {token!r} in header")
    return int(token), pos


def parse_netpbm(payload):
    """
    Decode a P2, P3, P5 or P6 netpbm image.

    Args:
        payload (bytes): The complete file contents.

    Returns:
        GrayFrame | RgbFrame: Grayscale formats give a GrayFrame holding
        value / maxval; colour formats give an RgbFrame whose channels are
        rescaled to 0..255 when maxval is below 255.

    Raises:
        UnsupportedFormat: The magic number is not P2, P3, P5 or P6.
        MaxvalTooLarge: maxval exceeds 255.
        MalformedHeader: The header is incomplete or not numeric.
        TruncatedPayload: Fewer samples than the header announces.
        InvalidSample: A sample is negative, exceeds maxval or is not
                       numeric.
    """
    data = bytes(payload)
    magic = data[:2]
    if magic not in _GRAY_MAGICS | _RGB_MAGICS:
        raise UnsupportedFormat(f"Unsupported netpbm magic {magic!r}")

    width, pos = _header_int(data, 2, 'width')
    height, pos = _header_int(data, pos, 'height')
    maxval, pos = _header_int(data, pos, 'maxval')
    if width <= 0 or height <= 0:
        raise MalformedHeader(f"Invalid dimensions {width}x{height}")
    if maxval <= 0:
        raise MalformedHeader(f"Invalid maxval {maxval}")
    if maxval > 255:
        raise MaxvalTooLarge(f"maxval {maxval} exceeds 255")

    channels = 1 if magic in _GRAY_MAGICS else 3
    count = width * height * channels

    if magic in _ASCII_MAGICS:
        tokens = _COMMENT.sub(b' ', data[pos:]).split()
        if len(tokens) < count:
            raise TruncatedPayload(
                f"Expected {count} samples, found {len(tokens)}")
        try:
            samples = np.array([int(t) for t in tokens[:count]],
                               dtype=np.int64)
        except ValueError:
            raise InvalidSample("Non-numeric sample in ASCII payload")
    else:
        # exactly one whitespace byte separates the header from the raster
        if pos >= len(data) or data[pos] not in _WHITESPACE:
            raise TruncatedPayload("Missing raster after header")
        pos += 1
        if len(data) - pos < count:
            raise TruncatedPayload(
                f"Expected {count} bytes, found {len(data) - pos}")
        samples = np.frombuffer(
            data, dtype=np.uint8, count=count, offset=pos).astype(np.int64)

    if samples.size and samples.max() > maxval:
        raise InvalidSample(f"Sample {samples.max()} exceeds maxval {maxval}")
    if samples.size and samples.min() < 0:
        raise InvalidSample(f"Negative sample {samples.min()}")

    if channels == 1:
        return GrayFrame(samples.reshape(height, width) / maxval)

    rgb = samples.reshape(height, width, 3)
    if maxval != 255:
        rgb = np.floor(rgb * 255.0 / maxval + 0.5)
    return RgbFrame(rgb.astype(np.uint8))


def quantize(frame):
    """Quantize a GrayFrame to 8-bit levels with round-half-up."""
    return np.floor(frame.pixels * 255.0 + 0.5).astype(np.uint8)


def encode_netpbm(frame):
    """Encode a GrayFrame as a binary P5 image with maxval 255."""
    header = f"P5\n{frame.width} {frame.height}\n255\n".encode('ascii')
    return header + quantize(frame).tobytes()


def to_gray(frame):
    """Convert an RgbFrame to intensity with BT.601 luma weights."""
    # integer weighted sum keeps white at exactly 1.0
    luma = (frame.pixels.astype(np.int64) @ LUMA_WEIGHTS) / 255000.0
    return GrayFrame(np.clip(luma, 0.0, 1.0))


def _axis_samples(source_size, output_size):
    coords = (np.arange(output_size) + 0.5) * (source_size / output_size) - 0.5  # noqa
    coords = np.clip(coords, 0.0, source_size - 1)
    lower = np.floor(coords).astype(np.intp)
    upper = np.minimum(lower + 1, source_size - 1)
    return lower, upper, coords - lower


def resize_bilinear(frame, out_width, out_height):
    """
    Resize with pixel-centre aligned bilinear interpolation.

    The source coordinate of output pixel (x, y) is
    ((x + 0.5) * sw / ow - 0.5, (y + 0.5) * sh / oh - 0.5), clamped to the
    source rectangle.
    """
    if out_width <= 0 or out_height <= 0:
        raise ValueError("Output dimensions must be positive")
    if (out_width, out_height) == (frame.width, frame.height):
        return frame

    src = frame.pixels
    y0, y1, fy = _axis_samples(frame.height, out_height)
    x0, x1, fx = _axis_samples(frame.width, out_width)

    rows = src[y0] + (src[y1] - src[y0]) * fy[:, None]
    out = rows[:, x0] + (rows[:, x1] - rows[:, x0]) * fx[None, :]
    return GrayFrame(np.clip(out, src.min(), src.max()))


def crop(frame, rect):
    """
    Cut the sub-image described by rect.

    Raises:
        OutOfBounds: If rect extends past the frame.
    """
    if not rect.fits(frame.width, frame.height):
        raise OutOfBounds(
            f"Crop {rect} exceeds {frame.width}x{frame.height} frame")
    return GrayFrame(frame.pixels[
        rect.top:rect.top + rect.height,
        rect.left:rect.left + rect.width,
    ])


def load_frame(path):
    """Read and decode a netpbm file, adding the path to any error."""
    path = Path(path)
    try:
        payload = path.read_bytes()
    except OSError as e:
        raise ExportError(f"{path}: {e.strerror or e}") from e
    try:
        return parse_netpbm(payload)
    except NetpbmError as e:
        raise type(e)(f"{path}: {e}") from e


def save_frame(path, frame):
    """Write a GrayFrame as a P5 file."""
    path = Path(path)
    try:
        path.write_bytes(encode_netpbm(frame))
    except OSError as e:
        raise ExportError(f"{path}: {e.strerror or e}") from e
    logger.debug("Wrote %s", path)
