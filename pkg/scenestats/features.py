"""
Oriented multi-scale binary features and ratio-tested matching.

Keypoints are FAST-9 corners found on a four-level image pyramid, ranked by
their Harris response, refined to sub-pixel positions from the surrounding
image gradients, oriented by the intensity centroid of a radius-15
patch and described by 256 rotated pairwise intensity comparisons taken from
a versioned pattern table shipped in ``data/``.
"""
import logging
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from django.core.exceptions import ImproperlyConfigured
from scipy import ndimage

from scenestats.exceptions import FrameTooSmall
from scenestats.pixbuf import resize_bilinear

logger = logging.getLogger(__name__)

PYRAMID_LEVELS = 4
SCALE_FACTOR = 1.2
MIN_FRAME_SIZE = 32
# Widest reach of a rotated pattern offset is round(13 * sqrt(2)) = 18 px.
EDGE = 19
ORIENTATION_RADIUS = 15
HARRIS_K = 0.04
HARRIS_BLOCK = 7
REFINE_RADIUS = 4
# smallest det / trace^2 of the gradient structure tensor a refinement accepts
REFINE_CONDITION = 1e-3
DESCRIPTOR_SIGMA = 2.0
DESCRIPTOR_BITS = 256
DESCRIPTOR_BYTES = DESCRIPTOR_BITS // 8
PATTERN_VERSION = 1
PATTERN_FILE = Path(__file__).resolve().parent / 'data' / \
    f'descriptor_pattern_v{PATTERN_VERSION}.txt'

FAST_ARC = 9
# Bresenham circle of radius 3, clockwise from twelve o'clock, as (dx, dy).
FAST_CIRCLE = (
    (0, -3), (1, -3), (2, -2), (3, -1), (3, 0), (3, 1), (2, 2), (1, 3),
    (0, 3), (-1, 3), (-2, 2), (-3, 1), (-3, 0), (-3, -1), (-2, -2), (-1, -3),
)

_POPCOUNT = np.unpackbits(
    np.arange(256, dtype=np.uint8)[:, None], axis=1).sum(axis=1)


def _disk_offsets(radius):
    """Row and column offsets of the pixels within `radius` of a centre."""
    dy, dx = np.mgrid[-radius:radius + 1, -radius:radius + 1]
    inside = dx ** 2 + dy ** 2 <= radius ** 2
    return dy[inside], dx[inside]


_DISK_DY, _DISK_DX = _disk_offsets(ORIENTATION_RADIUS)
_WINDOW_DY, _WINDOW_DX = (
    offsets.ravel() for offsets in np.mgrid[
        -REFINE_RADIUS:REFINE_RADIUS + 1, -REFINE_RADIUS:REFINE_RADIUS + 1])


@dataclass(frozen=True)
class Keypoint:
    """
    A detected corner.

    `x` and `y` are sub-pixel level-0 (source frame) coordinates; `level` is
    the pyramid level it was found on; `orientation` lies in [0, 2*pi).
    """
    x: float
    y: float
    level: int
    response: float
    orientation: float


@dataclass(frozen=True, eq=False)
class FeatureSet:
    """
    Keypoints of one frame, sorted by descending response, with a parallel
    (n, 32) uint8 array of MSB-first packed 256-bit descriptors.
    """
    keypoints: tuple
    descriptors: np.ndarray

    def __post_init__(self):
        keypoints = tuple(self.keypoints)
        descriptors = np.asarray(self.descriptors, dtype=np.uint8)
        if descriptors.size == 0:
            descriptors = descriptors.reshape(0, DESCRIPTOR_BYTES)
        if descriptors.ndim != 2 or descriptors.shape != (len(keypoints), DESCRIPTOR_BYTES):  # noqa
            raise ValueError(
                f"Expected {len(keypoints)} descriptors of {DESCRIPTOR_BYTES} bytes, "  # noqa
                f"got shape {descriptors.shape}")
        object.__setattr__(self, 'keypoints', keypoints)
        object.__setattr__(self, 'descriptors', descriptors)

    @classmethod
    def empty(cls):
        return cls((), np.zeros((0, DESCRIPTOR_BYTES), dtype=np.uint8))

    def __len__(self):
        return len(self.keypoints)

    def __eq__(self, other):
        if not isinstance(other, FeatureSet):
            return NotImplemented
        return (self.keypoints == other.keypoints
                and np.array_equal(self.descriptors, other.descriptors))

    __hash__ = None

    def bits(self, index):
        """The descriptor of keypoint `index` as a 256-element bool vector."""
        return np.unpackbits(self.descriptors[index]).astype(bool)

    def points(self):
        """Keypoint coordinates as an (n, 2) array of (x, y)."""
        return np.array([(kp.x, kp.y) for kp in self.keypoints],
                        dtype=np.float64).reshape(-1, 2)


@dataclass(frozen=True)
class MatchPair:
    """An accepted match from feature `index_a` of one set to `index_b`."""
    index_a: int
    index_b: int
    distance: int
    ratio: float


@lru_cache(maxsize=None)
def load_pattern(path=PATTERN_FILE):
    """
    Load the descriptor comparison pattern: 256 rows of (x1, y1, x2, y2).

    Raises:
        ImproperlyConfigured: If the table is missing or malformed.
    """
    try:
        pattern = np.loadtxt(path, dtype=np.int64, comments='#', ndmin=2)
    except (OSError, ValueError) as e:
        raise ImproperlyConfigured(
            f"Cannot read descriptor pattern {path}: {e}")
    if pattern.shape != (DESCRIPTOR_BITS, 4) or np.abs(pattern).max() > 13:
        raise ImproperlyConfigured(
            f"Descriptor pattern {path} must hold {DESCRIPTOR_BITS} rows of "
            "four offsets in [-13, 13]")
    pattern.setflags(write=False)
    return pattern


def build_pyramid(frame):
    """
    Yield (level, frame) pairs, each level 1.2 times smaller than the last.

    Levels too small to hold a keypoint away from the border are skipped.
    """
    for level in range(PYRAMID_LEVELS):
        scale = SCALE_FACTOR ** level
        width = int(frame.width / scale + 0.5)
        height = int(frame.height / scale + 0.5)
        if min(width, height) < 2 * EDGE + 1:
            break
        yield level, resize_bilinear(frame, width, height)


def _has_arc(flags):
    """True where FAST_ARC consecutive circle flags are set."""
    run = np.zeros(flags[0].shape, dtype=np.int8)
    found = np.zeros(flags[0].shape, dtype=bool)
    # wrap around so arcs crossing twelve o'clock are counted
    for flag in flags + flags[:FAST_ARC - 1]:
        run = np.where(flag, run + 1, 0).astype(np.int8)
        found |= run >= FAST_ARC
    return found


def fast_corners(image, threshold, border=EDGE):
    """
    FAST-9 segment test.

    A pixel is a corner when at least 9 contiguous pixels of the radius-3
    circle are all brighter than it by more than `threshold`, or all darker.

    Returns:
        np.ndarray: Boolean mask of image shape; `border` pixels are False.
    """
    height, width = image.shape
    mask = np.zeros(image.shape, dtype=bool)
    if height <= 2 * border or width <= 2 * border:
        return mask
    center = image[border:height - border, border:width - border]
    brighter, darker = [], []
    for dx, dy in FAST_CIRCLE:
        ring = image[border + dy:height - border + dy,
                     border + dx:width - border + dx]
        brighter.append(ring > center + threshold)
        darker.append(ring < center - threshold)
    mask[border:height - border, border:width - border] = \
        _has_arc(brighter) | _has_arc(darker)
    return mask


def _gradients(image):
    # Sobel taps sum to 8, so this is intensity change per pixel
    ix = ndimage.sobel(image, axis=1, mode='mirror') / 8.0
    iy = ndimage.sobel(image, axis=0, mode='mirror') / 8.0
    return ix, iy


def harris_response(image):
    """Harris corner measure det(M) - k * trace(M)^2 over a 7x7 window."""
    ix, iy = _gradients(image)
    sxx = ndimage.uniform_filter(ix * ix, HARRIS_BLOCK, mode='mirror')
    syy = ndimage.uniform_filter(iy * iy, HARRIS_BLOCK, mode='mirror')
    sxy = ndimage.uniform_filter(ix * iy, HARRIS_BLOCK, mode='mirror')
    return sxx * syy - sxy * sxy - HARRIS_K * (sxx + syy) ** 2


def refine_corners(image, xs, ys):
    """
    Sub-pixel corner positions from the gradients around integer points.

    Each point moves to the location q that best satisfies g . (q - p) = 0
    for the image gradient g at every pixel p of the 9x9 window around it,
    the point where the edges through the window meet. Points whose window
    holds a single edge direction, or whose solution leaves the window,
    keep their integer position. Points must lie at least 4 px inside the
    image.

    Returns:
        tuple[np.ndarray, np.ndarray]: Refined float x and y coordinates.
    """
    fx, fy = xs.astype(np.float64), ys.astype(np.float64)
    if xs.size == 0:
        return fx, fy
    ix, iy = _gradients(image)
    rows = ys[:, None] + _WINDOW_DY[None, :]
    cols = xs[:, None] + _WINDOW_DX[None, :]
    gx, gy = ix[rows, cols], iy[rows, cols]
    # window offsets keep the normal equations well scaled
    px, py = _WINDOW_DX[None, :], _WINDOW_DY[None, :]
    a11 = (gx * gx).sum(axis=1)
    a12 = (gx * gy).sum(axis=1)
    a22 = (gy * gy).sum(axis=1)
    b1 = (gx * gx * px + gx * gy * py).sum(axis=1)
    b2 = (gx * gy * px + gy * gy * py).sum(axis=1)
    det = a11 * a22 - a12 * a12
    usable = det > REFINE_CONDITION * (a11 + a22) ** 2
    safe = np.where(usable, det, 1.0)
    ox = (a22 * b1 - a12 * b2) / safe
    oy = (a11 * b2 - a12 * b1) / safe
    usable &= (np.abs(ox) <= REFINE_RADIUS) & (np.abs(oy) <= REFINE_RADIUS)
    return np.where(usable, fx + ox, fx), np.where(usable, fy + oy, fy)


def _level_candidates(image, fast_threshold):
    """
    FAST corners of one pyramid level that are Harris maxima in their 3x3
    neighbourhood, as integer x, y and their Harris responses.
    """
    empty = np.empty(0, np.intp), np.empty(0, np.intp), np.empty(0)
    corners = fast_corners(image, fast_threshold)
    if not corners.any():
        return empty
    response = harris_response(image)
    # FAST also fires along straight edges, where Harris is not positive
    corners &= response > 0
    if not corners.any():
        return empty
    scored = np.where(corners, response, -np.inf)
    peaks = corners & (scored == ndimage.maximum_filter(
        scored, size=3, mode='constant', cval=-np.inf))
    ys, xs = np.nonzero(peaks)
    return xs, ys, response[ys, xs]


def intensity_centroid_angle(image, xs, ys):
    """Orientation of the vector from each point to its patch centroid."""
    patches = image[ys[:, None] + _DISK_DY[None, :],
                    xs[:, None] + _DISK_DX[None, :]]
    m10 = patches @ _DISK_DX.astype(np.float64)
    m01 = patches @ _DISK_DY.astype(np.float64)
    angles = np.mod(np.arctan2(m01, m10), 2 * np.pi)
    angles[angles >= 2 * np.pi] = 0.0
    return angles


def describe(smoothed, xs, ys, angles, pattern=None):
    """
    Compute packed 256-bit descriptors at integer points of one level.

    Bit i is set when the smoothed intensity at the first rotated offset of
    pattern row i is lower than at the second.
    """
    pattern = load_pattern() if pattern is None else pattern
    cos = np.cos(angles)[:, None]
    sin = np.sin(angles)[:, None]

    def sample(px, py):
        rx = np.rint(cos * px - sin * py).astype(np.intp)
        ry = np.rint(sin * px + cos * py).astype(np.intp)
        return smoothed[ys[:, None] + ry, xs[:, None] + rx]

    bits = sample(pattern[:, 0], pattern[:, 1]) < \
        sample(pattern[:, 2], pattern[:, 3])
    return np.packbits(bits, axis=1)


def extract_features(frame, budget=100, fast_threshold=0.08):
    """
    Extract up to `budget` oriented binary features from a GrayFrame.

    Frames with a side below 39 px have no pixel far enough from the
    border to describe; they yield an empty FeatureSet and a warning.

    Args:
        frame (GrayFrame): The frame, at least 32x32.
        budget (int): Maximum number of keypoints kept.
        fast_threshold (float): FAST intensity threshold in [0, 1] units.

    Returns:
        FeatureSet: Keypoints sorted by descending Harris response.

    Raises:
        FrameTooSmall: If either side of the frame is below 32 px.
    """
    if frame.width < MIN_FRAME_SIZE or frame.height < MIN_FRAME_SIZE:
        raise FrameTooSmall(
            f"Feature extraction needs at least {MIN_FRAME_SIZE}x{MIN_FRAME_SIZE} px, "  # noqa
            f"got {frame.width}x{frame.height}")
    if budget < 1:
        raise ValueError("Feature budget must be at least 1")
    if min(frame.width, frame.height) < 2 * EDGE + 1:
        logger.warning(
            "No features in %dx%d frame: sides below %d px leave no room "
            "for descriptors", frame.width, frame.height, 2 * EDGE + 1)
        return FeatureSet.empty()

    levels = {}
    found = []
    for level, scaled in build_pyramid(frame):
        xs, ys, responses = _level_candidates(scaled.pixels, fast_threshold)
        levels[level] = scaled
        found.append((np.full(xs.size, level), xs, ys, responses))
    if not found or sum(xs.size for _, xs, _, _ in found) == 0:
        return FeatureSet.empty()

    # strongest first; position breaks ties so the order is total
    level_ids, xs, ys, responses = (np.concatenate(part) for part in zip(*found))  # noqa
    order = np.lexsort((xs, ys, level_ids, -responses))[:budget]

    keypoints = [None] * order.size
    descriptors = np.zeros((order.size, DESCRIPTOR_BYTES), dtype=np.uint8)
    for level, scaled in levels.items():
        slots = np.flatnonzero(level_ids[order] == level)
        if slots.size == 0:
            continue
        picked = order[slots]
        lx, ly = xs[picked], ys[picked]
        angles = intensity_centroid_angle(scaled.pixels, lx, ly)
        smoothed = ndimage.gaussian_filter(
            scaled.pixels, DESCRIPTOR_SIGMA, mode='mirror')
        descriptors[slots] = describe(smoothed, lx, ly, angles)

        # level pixel centres map onto level-0 pixel centres
        rx, ry = refine_corners(scaled.pixels, lx, ly)
        sx = frame.width / scaled.width
        sy = frame.height / scaled.height
        for slot, x, y, response, angle in zip(
                slots, rx, ry, responses[picked], angles):
            keypoints[slot] = Keypoint(
                x=float((x + 0.5) * sx - 0.5),
                y=float((y + 0.5) * sy - 0.5),
                level=level,
                response=float(response),
                orientation=float(angle),
            )

    logger.debug("Extracted %d keypoints from %dx%d frame",
                 len(keypoints), frame.width, frame.height)
    return FeatureSet(tuple(keypoints), descriptors)


def hamming_distances(a, b):
    """Pairwise Hamming distances between packed descriptor arrays."""
    return _POPCOUNT[a[:, None, :] ^ b[None, :, :]].sum(axis=2, dtype=np.int64)  # noqa


def match_features(a, b, ratio_threshold=0.75):
    """
    Brute-force Hamming matching from `a` to `b` with a ratio test.

    A feature of `a` is matched to its nearest neighbour in `b` (lowest index
    on ties) when best / second-best distance is below `ratio_threshold`.
    When the second-best distance is zero the match is ambiguous and
    rejected; with fewer than two features in `b` nothing is accepted.

    Returns:
        list[MatchPair]: Accepted matches in order of `index_a`.
    """
    if len(a) == 0 or len(b) < 2:
        return []
    distances = hamming_distances(a.descriptors, b.descriptors)
    rows = np.arange(len(a))
    best = np.argmin(distances, axis=1)
    d1 = distances[rows, best]
    runner_up = distances.copy()
    runner_up[rows, best] = DESCRIPTOR_BITS + 1
    d2 = runner_up.min(axis=1)
    ratios = np.where(d2 > 0, d1 / np.maximum(d2, 1), 1.0)

    return [
        MatchPair(int(i), int(best[i]), int(d1[i]), float(ratios[i]))
        for i in np.flatnonzero(ratios < ratio_threshold)
    ]


def match_count_stat(prev, curr, budget=100, ratio_threshold=0.75,
                     fast_threshold=0.08):
    """Number of ratio-tested matches from `prev` to `curr`, in [0, budget]."""
    return len(match_features(
        extract_features(prev, budget, fast_threshold),
        extract_features(curr, budget, fast_threshold),
        ratio_threshold,
    ))
