"""
Dataset manifests and the preprocessed frame stream they describe.

A manifest is a flat text document with one ``key = value`` per line and
``#`` comments::

    name = demo
    frames_dir = frames/
    native_fps = 30
    # optional: target_fps (10), skip_frames (30), frame_pattern, crop, notes
    crop = bottom-half

Frames are sampled by skipping ``skip_frames`` raw frames and then taking
every ``round(native_fps / target_fps)``-th frame.
"""
import logging
import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from scenestats.exceptions import ExportError, InvalidValue, ManifestError, MissingKey  # noqa
from scenestats.pixbuf import CropRect, GrayFrame, RgbFrame, crop, load_frame, to_gray  # noqa
from scenestats.serializers import BOTTOM_HALF, DatasetManifestSerializer
from scenestats.utils import raise_for_errors

logger = logging.getLogger(__name__)

MANIFEST_KEYS = (
    'name', 'frames_dir', 'frame_pattern', 'native_fps', 'target_fps',
    'skip_frames', 'crop', 'notes',
)


@dataclass(frozen=True)
class DatasetManifest:
    """
    Declarative description of one sequence and its preprocessing.

    `frames_dir` is already resolved against the manifest's own directory
    when the manifest was loaded from a file.
    """
    name: str
    frames_dir: Path
    native_fps: float
    target_fps: float = 10.0
    skip_frames: int = 30
    frame_pattern: str = '*.p[gp]m'
    crop: Optional[Union[CropRect, str]] = None
    notes: str = ''

    def __post_init__(self):
        object.__setattr__(self, 'frames_dir', Path(self.frames_dir))
        if self.native_fps <= 0 or self.target_fps <= 0:
            raise InvalidValue("Frame rates must be positive")
        if self.target_fps > self.native_fps:
            raise InvalidValue("target_fps cannot exceed native_fps")
        if self.skip_frames < 0:
            raise InvalidValue("skip_frames cannot be negative")
        if self.crop is not None and self.crop != BOTTOM_HALF \
                and not isinstance(self.crop, CropRect):
            raise InvalidValue(f"Invalid crop {self.crop!r}")

    @property
    def stride(self):
        """Source frames per sampled frame, rounded half-up, at least 1."""
        return max(1, math.floor(self.native_fps / self.target_fps + 0.5))

    def resolve_crop(self, width, height):
        """The crop rectangle for a frame of the given size, or None."""
        if self.crop == BOTTOM_HALF:
            return CropRect.bottom_half(width, height)
        return self.crop

    def frame_paths(self):
        """
        Frame files matching `frame_pattern`, in lexicographic name order.

        Raises:
            ExportError: If the frames directory does not exist.
        """
        if not self.frames_dir.is_dir():
            raise ExportError(
                f"{self.frames_dir}: frames directory not found")
        return sorted(
            (path for path in self.frames_dir.glob(self.frame_pattern)
             if path.is_file()),
            key=lambda path: path.name,
        )

    def to_text(self, frames_dir=None):
        """Render the manifest as a key-value document."""
        values = {
            'name': self.name,
            'frames_dir': frames_dir if frames_dir is not None else self.frames_dir,  # noqa
            'frame_pattern': self.frame_pattern,
            'native_fps': f'{self.native_fps:g}',
            'target_fps': f'{self.target_fps:g}',
            'skip_frames': self.skip_frames,
            'crop': self.crop if self.crop is not None else 'none',
        }
        lines = [f'{key} = {value}' for key, value in values.items()]
        if self.notes:
            lines.append(f'notes = {self.notes}')
        return '\n'.join(lines) + '\n'


@dataclass(frozen=True)
class SampledFrame:
    index_in_source: int
    timestamp: float
    frame: GrayFrame = field(compare=False)


def parse_manifest_text(text):
    """
    Split a key-value document into a dict of raw string values.

    Raises:
        InvalidValue: On a line without '=' or a repeated key.
    """
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition('=')
        key = key.strip()
        if not sep or not key:
            raise InvalidValue(f"line {lineno}: expected 'key = value'")
        if key in values:
            raise InvalidValue(f"line {lineno}: duplicate key '{key}'")
        values[key] = value.strip()
    return values


def load_manifest(document, base_dir=None):
    """
    Build a DatasetManifest from a key-value document.

    Args:
        document (str | Mapping): Manifest text, or already-split values.
        base_dir (Path | None): Directory relative `frames_dir` values are
                                resolved against.

    Raises:
        MissingKey: If name, frames_dir or native_fps is absent.
        InvalidValue: On unknown keys, non-positive rates or a bad crop.
    """
    values = dict(document) if isinstance(document, Mapping) \
        else parse_manifest_text(document)
    serializer = DatasetManifestSerializer(data=values)
    if not serializer.is_valid():
        raise_for_errors(serializer.errors, InvalidValue, MissingKey)

    data = dict(serializer.validated_data)
    frames_dir = Path(data.pop('frames_dir')).expanduser()
    if base_dir is not None and not frames_dir.is_absolute():
        frames_dir = Path(base_dir) / frames_dir
    return DatasetManifest(frames_dir=frames_dir, **data)


def load_manifest_file(path):
    """
    Read a manifest file; relative `frames_dir` is taken from its directory.

    Raises:
        ExportError: If the file cannot be read.
        ManifestError: With the manifest path prepended to the message.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except FileNotFoundError as e:
        raise ExportError(f"{path}: manifest not found") from e
    except OSError as e:
        raise ExportError(f"{path}: {e.strerror or e}") from e
    try:
        return load_manifest(text, base_dir=path.parent)
    except ManifestError as e:
        raise type(e)(f"{path}: {e}") from e


def sample_indices(manifest, total_frames):
    """Source indices kept after skipping warm-up frames and striding."""
    if total_frames < 0:
        raise ValueError("total_frames cannot be negative")
    return list(range(manifest.skip_frames, total_frames, manifest.stride))


def stretch(frame):
    """Min-max stretch a frame to the full [0, 1] range."""
    low, high = frame.pixels.min(), frame.pixels.max()
    if high <= low:
        return frame
    return GrayFrame(np.clip((frame.pixels - low) / (high - low), 0.0, 1.0))


def preprocess_frame(raw, manifest, normalize_mode='global'):
    """
    Convert a decoded frame to the normalized, cropped GrayFrame analysed.

    Gray input is already value / maxval and RGB input is converted with
    luma weights, which is the global normalization. The 'per-frame' mode
    additionally stretches each frame to [0, 1] before cropping.

    Raises:
        OutOfBounds: If the manifest's crop does not fit the frame.
    """
    frame = to_gray(raw) if isinstance(raw, RgbFrame) else raw
    if normalize_mode == 'per-frame':
        frame = stretch(frame)
    elif normalize_mode != 'global':
        raise InvalidValue(f"Unknown normalize mode {normalize_mode!r}")
    rect = manifest.resolve_crop(frame.width, frame.height)
    if rect is not None:
        frame = crop(frame, rect)
    return frame


def load_sampled_frame(path, index, manifest, normalize_mode='global'):
    """Load, preprocess and timestamp one source frame."""
    frame = preprocess_frame(load_frame(path), manifest, normalize_mode)
    return SampledFrame(
        index_in_source=index,
        timestamp=index / manifest.native_fps,
        frame=frame,
    )


def sampled_paths(manifest):
    """(source index, path) pairs of the frames the manifest samples."""
    paths = manifest.frame_paths()
    indices = sample_indices(manifest, len(paths))
    logger.info("%s: sampling %d of %d frames (stride %d, skip %d)",
                manifest.name, len(indices), len(paths), manifest.stride,
                manifest.skip_frames)
    return [(index, paths[index]) for index in indices]


def iter_sampled_frames(manifest, normalize_mode='global'):
    """Yield the manifest's SampledFrames in source order."""
    for index, path in sampled_paths(manifest):
        yield load_sampled_frame(path, index, manifest, normalize_mode)
