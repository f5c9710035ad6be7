"""
Frame-to-frame homography estimation and the reprojected similarity
statistic: the mean squared error between a frame and its successor warped
into the same frame of reference.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from scenestats.exceptions import (
    DegenerateConfiguration,
    InsufficientMatches,
    NonInvertible,
)
from scenestats.pixbuf import GrayFrame

logger = logging.getLogger(__name__)

MIN_CORRESPONDENCES = 4
DET_FLOOR = 1e-12
RANK_TOLERANCE = 1e-10
COLLINEAR_AREA = 1e-8
VALID_TOLERANCE = 1e-6
MIN_VALID_FRACTION = 0.25


@dataclass(frozen=True, eq=False)
class Homography:
    """
    A 3x3 projective transform.

    Stored normalized: the bottom-right entry is 1 when it is nonzero,
    otherwise the matrix has unit Frobenius norm.
    """
    m: np.ndarray

    def __post_init__(self):
        m = np.array(self.m, dtype=np.float64)
        if m.shape != (3, 3) or not np.all(np.isfinite(m)):
            raise NonInvertible("Homography needs a finite 3x3 matrix")
        if abs(m[2, 2]) > DET_FLOOR:
            m = m / m[2, 2]
        else:
            norm = np.linalg.norm(m)
            if norm == 0:
                raise NonInvertible("Homography matrix is zero")
            m = m / norm
        if abs(np.linalg.det(m)) <= DET_FLOOR:
            raise NonInvertible(
                f"Homography determinant {np.linalg.det(m):.3g} is singular")
        m.setflags(write=False)
        object.__setattr__(self, 'm', m)

    @classmethod
    def identity(cls):
        return cls(np.eye(3))

    @classmethod
    def from_translation(cls, dx, dy):
        return cls(np.array([[1.0, 0.0, dx], [0.0, 1.0, dy], [0.0, 0.0, 1.0]]))

    @property
    def translation(self):
        """The (tx, ty) entries of the normalized matrix."""
        return float(self.m[0, 2]), float(self.m[1, 2])

    def inverse(self):
        return Homography(np.linalg.inv(self.m))

    def apply(self, points):
        """
        Map an (n, 2) array of points. Points sent to infinity become nan.
        """
        points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        projected = np.c_[points, np.ones(len(points))] @ self.m.T
        w = projected[:, 2:3]
        with np.errstate(divide='ignore', invalid='ignore'):
            mapped = projected[:, :2] / w
        mapped[np.abs(w[:, 0]) < DET_FLOOR] = np.nan
        return mapped

    def allclose(self, other, atol=1e-6):
        return np.allclose(self.m, other.m, atol=atol, rtol=0.0)

    def __eq__(self, other):
        if not isinstance(other, Homography):
            return NotImplemented
        return np.array_equal(self.m, other.m)

    __hash__ = None


@dataclass(frozen=True)
class Correspondence:
    """A point in frame a and the point it corresponds to in frame b."""
    x_a: float
    y_a: float
    x_b: float
    y_b: float


def _as_arrays(correspondences):
    """Split correspondences into (n, 2) arrays of a and b points."""
    pts = np.array(
        [(c.x_a, c.y_a, c.x_b, c.y_b) for c in correspondences],
        dtype=np.float64).reshape(-1, 4)
    if not np.all(np.isfinite(pts)):
        raise ValueError("Correspondence coordinates must be finite")
    return pts[:, :2], pts[:, 2:]


def normalize_points(pts):
    """
    Similarity transform moving the centroid to the origin and the mean
    distance from it to sqrt(2).

    Returns:
        tuple: The transformed (n, 2) points and the 3x3 transform.
    """
    centroid = pts.mean(axis=0)
    mean_dist = np.sqrt(((pts - centroid) ** 2).sum(axis=1)).mean()
    if mean_dist <= DET_FLOOR:
        raise DegenerateConfiguration("All correspondence points coincide")
    s = np.sqrt(2) / mean_dist
    transform = np.array([[s, 0.0, -s * centroid[0]],
                          [0.0, s, -s * centroid[1]],
                          [0.0, 0.0, 1.0]])
    return (pts - centroid) * s, transform


def _dlt(src, dst):
    # two rows of the linear system per correspondence; h is its null vector
    x, y = src[:, 0], src[:, 1]
    u, v = dst[:, 0], dst[:, 1]
    zeros, ones = np.zeros(len(src)), np.ones(len(src))
    a = np.empty((2 * len(src), 9))
    a[0::2] = np.c_[x, y, ones, zeros, zeros, zeros, -u * x, -u * y, -u]
    a[1::2] = np.c_[zeros, zeros, zeros, x, y, ones, -v * x, -v * y, -v]
    _, sv, vt = np.linalg.svd(a)
    # a homography is only determined when the system has rank 8
    if sv[7] <= RANK_TOLERANCE * sv[0]:
        return None
    return vt[-1].reshape(3, 3)


def fit_homography(src, dst, t_src, t_dst):
    """
    Normalized DLT from points already transformed by t_src / t_dst.

    Returns:
        np.ndarray | None: The denormalized matrix, or None when the points
        do not determine an invertible homography.
    """
    hn = _dlt(src, dst)
    if hn is None:
        return None
    m = np.linalg.inv(t_dst) @ hn @ t_src
    scale = m[2, 2] if abs(m[2, 2]) > DET_FLOOR else np.linalg.norm(m)
    m = m / scale
    if abs(np.linalg.det(m)) <= DET_FLOOR:
        return None
    return m


def _project(m, pts):
    # points mapped to infinity get an infinite error downstream
    projected = np.c_[pts, np.ones(len(pts))] @ m.T
    w = projected[:, 2]
    with np.errstate(divide='ignore', invalid='ignore'):
        mapped = projected[:, :2] / w[:, None]
    mapped[np.abs(w) < DET_FLOOR] = np.inf
    return mapped


def transfer_errors(m, pts_a, pts_b):
    """Symmetric transfer error of every correspondence under `m`."""
    forward = ((_project(m, pts_a) - pts_b) ** 2).sum(axis=1)
    backward = ((_project(np.linalg.inv(m), pts_b) - pts_a) ** 2).sum(axis=1)
    errors = np.sqrt(forward + backward)
    return np.where(np.isfinite(errors), errors, np.inf)


def _collinear(sample):
    """True when any three of four normalized points span no area."""
    a, b, c, d = sample
    for p, q, r in ((a, b, c), (a, b, d), (a, c, d), (b, c, d)):
        area = 0.5 * abs((q[0] - p[0]) * (r[1] - p[1])
                         - (q[1] - p[1]) * (r[0] - p[0]))
        if area <= COLLINEAR_AREA:
            return True
    return False


def _refit(pts_a, pts_b):
    """Least-squares DLT over all inliers, None when it is degenerate."""
    if len(pts_a) < MIN_CORRESPONDENCES:
        return None
    try:
        norm_a, t_a = normalize_points(pts_a)
        norm_b, t_b = normalize_points(pts_b)
    except DegenerateConfiguration:
        return None
    return fit_homography(norm_a, norm_b, t_a, t_b)


def _translation_candidate(pts_a, pts_b, inliers):
    # componentwise median shift of the inliers, as a 3x3 matrix
    dx, dy = np.median(pts_b[inliers] - pts_a[inliers], axis=0)
    return np.array([[1.0, 0.0, dx], [0.0, 1.0, dy], [0.0, 0.0, 1.0]])


def _required_iterations(inlier_ratio, confidence):
    """Samples needed to draw one all-inlier sample with `confidence`."""
    if inlier_ratio >= 1.0:
        return 0
    miss = 1.0 - inlier_ratio ** MIN_CORRESPONDENCES
    if miss >= 1.0:
        return np.inf
    return np.log(1.0 - confidence) / np.log(miss)


def estimate_homography(correspondences, ransac_iters=1000,
                        inlier_threshold=3.0, seed=0, stream=0,
                        confidence=0.999):
    """
    Robustly estimate the homography mapping points of frame a onto b.

    Minimal 4-point samples are drawn from ``default_rng([seed, stream])``
    and fitted by normalized DLT; a correspondence is an inlier when its
    symmetric transfer error is below `inlier_threshold` px. The model with
    most inliers (ties: lower total error) is refitted on all its inliers.
    Sampling stops early once `confidence` is reached.

    A pure translation by the median inlier displacement replaces the
    homography when it keeps at least as many inliers with a median error
    no larger.

    Args:
        correspondences (list[Correspondence]): Point pairs a -> b.
        ransac_iters (int): Maximum number of samples drawn.
        inlier_threshold (float): Inlier error bound in pixels.
        seed (int): Run seed.
        stream (int): Independent stream index, the pair index in analyses.
        confidence (float): Early-termination confidence in (0, 1).

    Returns:
        tuple[Homography, np.ndarray]: The model and boolean inlier flags.

    Raises:
        InsufficientMatches: Fewer than 4 correspondences.
        DegenerateConfiguration: No sample yields a valid model.
    """
    if len(correspondences) < MIN_CORRESPONDENCES:
        raise InsufficientMatches(
            f"Need at least {MIN_CORRESPONDENCES} correspondences, "
            f"got {len(correspondences)}")
    pts_a, pts_b = _as_arrays(correspondences)
    norm_a, t_a = normalize_points(pts_a)
    norm_b, t_b = normalize_points(pts_b)
    n = len(pts_a)
    rng = np.random.default_rng([seed, stream])

    best, best_count, best_error = None, 0, np.inf
    needed = ransac_iters
    iteration = 0
    while iteration < min(ransac_iters, needed):
        iteration += 1
        sample = rng.choice(n, size=MIN_CORRESPONDENCES, replace=False)
        if _collinear(norm_a[sample]) or _collinear(norm_b[sample]):
            continue
        m = fit_homography(norm_a[sample], norm_b[sample], t_a, t_b)
        if m is None:
            continue
        errors = transfer_errors(m, pts_a, pts_b)
        inliers = errors < inlier_threshold
        count = int(inliers.sum())
        total = float(errors[inliers].sum())
        if count > best_count or (count == best_count and count and total < best_error):  # noqa
            best, best_count, best_error = m, count, total
            needed = _required_iterations(count / n, confidence)

    if best is None or best_count < MIN_CORRESPONDENCES:
        raise DegenerateConfiguration(
            f"No non-degenerate model found in {iteration} samples")

    inliers = transfer_errors(best, pts_a, pts_b) < inlier_threshold
    refit = _refit(pts_a[inliers], pts_b[inliers])
    if refit is not None:
        refit_inliers = transfer_errors(refit, pts_a, pts_b) < inlier_threshold
        if refit_inliers.sum() >= inliers.sum():
            best, inliers = refit, refit_inliers

    shift = _translation_candidate(pts_a, pts_b, inliers)
    shift_errors = transfer_errors(shift, pts_a, pts_b)
    shift_inliers = shift_errors < inlier_threshold
    if shift_inliers.sum() >= inliers.sum():
        errors = transfer_errors(best, pts_a, pts_b)
        if np.median(shift_errors[shift_inliers]) <= np.median(errors[inliers]):  # noqa
            best, inliers = shift, shift_inliers

    logger.debug("RANSAC kept %d/%d inliers after %d samples",
                 int(inliers.sum()), n, iteration)
    return Homography(best), inliers


def warp_bilinear(frame, h, out_width, out_height):
    """
    Warp `frame` by `h` onto an out_width x out_height raster.

    Each output pixel samples the source at h^-1 (x, y) bilinearly. The
    mask marks output pixels whose source lies inside the source frame;
    elsewhere the output is 0.

    Raises:
        NonInvertible: If `h` cannot be inverted.
    """
    inverse = h.inverse()
    ys, xs = np.mgrid[0:out_height, 0:out_width]
    src = inverse.apply(np.c_[xs.ravel(), ys.ravel()])
    sx = src[:, 0].reshape(out_height, out_width)
    sy = src[:, 1].reshape(out_height, out_width)
    with np.errstate(invalid='ignore'):
        valid = ((sx >= -VALID_TOLERANCE) & (sx <= frame.width - 1 + VALID_TOLERANCE)  # noqa
                 & (sy >= -VALID_TOLERANCE) & (sy <= frame.height - 1 + VALID_TOLERANCE))  # noqa
    coords = np.stack([
        np.clip(np.where(valid, sy, 0.0), 0.0, frame.height - 1),
        np.clip(np.where(valid, sx, 0.0), 0.0, frame.width - 1),
    ])
    sampled = ndimage.map_coordinates(
        frame.pixels, coords, order=1, mode='nearest')
    warped = np.where(valid, np.clip(sampled, 0.0, 1.0), 0.0)
    return GrayFrame(warped), valid


def correspondences_from_matches(matches, features_a, features_b):
    """
    Correspondences from feature `index_b` to feature `index_a`.

    Matches found from a to b become point pairs b -> a, the direction
    needed to warp b into a's frame.
    """
    return [
        Correspondence(
            x_a=features_b.keypoints[match.index_b].x,
            y_a=features_b.keypoints[match.index_b].y,
            x_b=features_a.keypoints[match.index_a].x,
            y_b=features_a.keypoints[match.index_a].y,
        )
        for match in matches
    ]


def reprojected_mse(prev, curr, config=None, pair_index=0, extractor=None,
                    features=None, matches=None):
    """
    Mean squared error of `prev` and `curr` warped into prev's frame.

    Args:
        prev (GrayFrame): The earlier frame.
        curr (GrayFrame): The later frame.
        config (RunConfig | None): Feature and RANSAC parameters; the
                                   configured defaults when None.
        pair_index (int): Selects the RANSAC stream for this pair.
        extractor (BaseFeatureExtractor | None): Overrides the configured
                                                 extractor.
        features (tuple | None): Precomputed (prev, curr) FeatureSets.
        matches (list | None): Precomputed prev -> curr matches.

    Returns:
        float | None: The MSE over valid pixels; None when fewer than 4
        matches exist, estimation fails, or under a quarter of the frame
        overlaps.
    """
    from scenestats.config import RunConfig
    from scenestats.utils import get_feature_extractor

    config = config if config is not None else RunConfig.from_settings()
    if features is None:
        extractor = extractor or get_feature_extractor(config)
        features = (extractor.extract(prev), extractor.extract(curr))
    if matches is None:
        extractor = extractor or get_feature_extractor(config)
        matches = extractor.match(
            features[0], features[1], config.ratio_threshold)
    if len(matches) < MIN_CORRESPONDENCES:
        return None

    try:
        h, _ = estimate_homography(
            correspondences_from_matches(matches, *features),
            ransac_iters=config.ransac_iters,
            inlier_threshold=config.ransac_threshold_px,
            seed=config.seed,
            stream=pair_index,
        )
        warped, valid = warp_bilinear(curr, h, prev.width, prev.height)
    except (InsufficientMatches, DegenerateConfiguration, NonInvertible) as e:
        logger.debug("Pair %d: no reprojection (%s)", pair_index, e)
        return None

    if valid.mean() < MIN_VALID_FRACTION:
        logger.debug("Pair %d: only %.1f%% of the frame overlaps",
                     pair_index, 100 * valid.mean())
        return None
    residual = warped.pixels[valid] - prev.pixels[valid]
    return float(np.mean(residual ** 2))
