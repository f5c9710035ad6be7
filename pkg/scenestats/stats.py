"""
Lighting, entropy and edge statistics of frames and adjacent frame pairs.

Variances and standard deviations are population quantities throughout,
and changes between frames are absolute differences.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage
from scipy.special import rel_entr

from scenestats.exceptions import NotNormalized
from scenestats.pixbuf import resize_bilinear

HISTOGRAM_BINS = 256
KL_EPSILON = 1e-10
MEAN_FLOOR = 1e-9
LAPLACIAN_KERNEL = np.array([[0, 1, 0],
                             [1, -4, 1],
                             [0, 1, 0]], dtype=np.float64)


@dataclass(frozen=True, eq=False)
class Histogram256:
    bins: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        bins = np.asarray(self.bins, dtype=np.float64)
        if bins.shape != (HISTOGRAM_BINS,):
            raise ValueError(f"Histogram needs {HISTOGRAM_BINS} bins")
        if np.any(bins < 0):
            raise ValueError("Histogram bins must be non-negative")
        bins = bins.copy()
        bins.setflags(write=False)
        object.__setattr__(self, 'bins', bins)

    def __eq__(self, other):
        if not isinstance(other, Histogram256):
            return NotImplemented
        return (self.normalized == other.normalized
                and np.array_equal(self.bins, other.bins))

    __hash__ = None


@dataclass(frozen=True)
class FrameStats:
    luminance: float
    rms_contrast: Optional[float]
    laplacian_variance: float


@dataclass(frozen=True)
class PairStats:
    d_luminance: float
    d_contrast: Optional[float]
    kl_divergence: float
    match_count: int
    reproj_mse: Optional[float]


def luminance(frame):
    """Mean intensity of a frame."""
    return float(frame.pixels.mean())


def rms_contrast(frame):
    """
    Standard deviation of intensity divided by its mean.

    Returns None for (near) black frames whose mean is below 1e-9, and
    exactly 0.0 for any other constant frame.
    """
    mean = frame.pixels.mean()
    if mean < MEAN_FLOOR:
        return None
    if np.ptp(frame.pixels) == 0:
        return 0.0
    return float(frame.pixels.std() / mean)


def intensity_histogram(frame):
    """Normalized 256-bin histogram with bin index min(floor(v * 256), 255)."""
    index = np.minimum(np.floor(frame.pixels * HISTOGRAM_BINS), HISTOGRAM_BINS - 1)  # noqa
    counts = np.bincount(index.astype(np.intp).ravel(), minlength=HISTOGRAM_BINS)  # noqa
    return Histogram256(counts / frame.pixels.size, normalized=True)


def _smoothed(hist, name):
    if not hist.normalized or abs(hist.bins.sum() - 1.0) > 1e-9:
        raise NotNormalized(f"Histogram {name} is not normalized")
    bins = hist.bins + KL_EPSILON
    return bins / bins.sum()


def kl_divergence(p, q):
    """
    Kullback-Leibler divergence D(p || q) in nats.

    Every bin of both histograms is raised by 1e-10 and the histograms are
    renormalized, so empty bins are well defined.

    Raises:
        NotNormalized: If either histogram does not sum to 1.
    """
    ps = _smoothed(p, 'p')
    qs = _smoothed(q, 'q')
    return max(float(rel_entr(ps, qs).sum()), 0.0)


def laplacian_variance(frame):
    """
    Population variance of the 4-neighbour Laplacian response.

    Borders mirror without repeating the edge pixel. Callers resize the
    frame to the common analysis size first.
    """
    response = ndimage.convolve(frame.pixels, LAPLACIAN_KERNEL, mode='mirror')
    return float(np.var(response))


def pair_deltas(prev, curr):
    """Absolute luminance and contrast change between two FrameStats."""
    d_luminance = abs(curr.luminance - prev.luminance)
    if prev.rms_contrast is None or curr.rms_contrast is None:
        return d_luminance, None
    return d_luminance, abs(curr.rms_contrast - prev.rms_contrast)


def frame_stats(frame, laplacian_size=(320, 240)):
    """FrameStats of a preprocessed frame; Laplacian on a resized copy."""
    width, height = laplacian_size
    return FrameStats(
        luminance=luminance(frame),
        rms_contrast=rms_contrast(frame),
        laplacian_variance=laplacian_variance(
            resize_bilinear(frame, width, height)),
    )
