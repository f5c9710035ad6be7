import numpy as np
from django.test import SimpleTestCase
from scipy import ndimage

from scenestats.config import RunConfig
from scenestats.exceptions import (
    DegenerateConfiguration,
    InsufficientMatches,
    NonInvertible,
)
from scenestats.pixbuf import GrayFrame
from scenestats.reproject import (
    Correspondence,
    Homography,
    estimate_homography,
    normalize_points,
    reprojected_mse,
    transfer_errors,
    warp_bilinear,
)
from tests.fake_extractor import GridExtractor
from tests.helpers import constant_frame, textured_frame


def grid_points(step=40, width=320, height=240):
    ys, xs = np.mgrid[20:height:step, 20:width:step]
    return np.c_[xs.ravel(), ys.ravel()].astype(float)


def correspondences(points_a, points_b):
    return [Correspondence(xa, ya, xb, yb)
            for (xa, ya), (xb, yb) in zip(points_a, points_b)]


class TestHomography(SimpleTestCase):

    def test_normalized_storage(self):
        """Scaled matrices are stored with a unit corner entry."""
        h = Homography(2 * np.eye(3))
        self.assertEqual(h, Homography.identity())

    def test_singular(self):
        """Zero, rank-deficient and non-finite matrices are rejected."""
        with self.assertRaises(NonInvertible):
            Homography(np.zeros((3, 3)))
        with self.assertRaises(NonInvertible):
            Homography(np.array([[1, 2, 0], [2, 4, 0], [0, 0, 1]]))
        with self.assertRaises(NonInvertible):
            Homography(np.full((3, 3), np.nan))

    def test_translation(self):
        """A translation maps points and inverts to the opposite shift."""
        h = Homography.from_translation(3.0, -2.0)
        self.assertEqual(h.translation, (3.0, -2.0))
        np.testing.assert_allclose(h.apply([[1.0, 1.0]]), [[4.0, -1.0]])
        self.assertTrue(h.inverse().allclose(
            Homography.from_translation(-3.0, 2.0)))

    def test_point_at_infinity(self):
        """Points sent to the line at infinity become nan."""
        h = Homography(np.array([[1.0, 0, 0], [0, 1.0, 0], [1.0, 0, 1.0]]))
        self.assertTrue(np.all(np.isnan(h.apply([[-1.0, 5.0]]))))


class TestNormalizePoints(SimpleTestCase):

    def test_centroid_and_scale(self):
        """Normalized points are centred with mean distance sqrt(2)."""
        pts = np.random.default_rng(0).random((30, 2)) * 100
        normalized, transform = normalize_points(pts)
        np.testing.assert_allclose(normalized.mean(axis=0), 0.0, atol=1e-12)
        self.assertAlmostEqual(
            np.hypot(*normalized.T).mean(), np.sqrt(2), places=12)
        self.assertEqual(transform.shape, (3, 3))

    def test_coincident_points(self):
        """Points that all coincide cannot be normalized."""
        with self.assertRaises(DegenerateConfiguration):
            normalize_points(np.ones((5, 2)))


class TestEstimateHomography(SimpleTestCase):
    """
    Test suite for the robust 4-point homography estimator.
    """

    def test_pure_translation(self):
        """An exact translation is recovered with every point an inlier."""
        points = grid_points()
        truth = Homography.from_translation(7.0, -4.0)
        h, inliers = estimate_homography(
            correspondences(points, truth.apply(points)))
        self.assertTrue(h.allclose(truth, atol=1e-6))
        self.assertTrue(inliers.all())

    def test_identity(self):
        """Unmoved points give the identity."""
        points = grid_points()
        h, _ = estimate_homography(correspondences(points, points))
        self.assertTrue(h.allclose(Homography.identity(), atol=1e-6))

    def test_perspective_transform(self):
        """A full projective transform is not mistaken for a shift."""
        truth = Homography(np.array([
            [1.02, 0.01, 3.0], [-0.02, 0.98, 1.5], [1e-5, -2e-5, 1.0]]))
        points = grid_points(step=30)
        h, _ = estimate_homography(
            correspondences(points, truth.apply(points)))
        self.assertTrue(h.allclose(truth, atol=1e-6))

    def test_three_points(self):
        """Fewer than four correspondences are refused."""
        points = grid_points()[:3]
        with self.assertRaises(InsufficientMatches):
            estimate_homography(correspondences(points, points))

    def test_collinear_points(self):
        """Points on one line determine no homography."""
        points = np.c_[np.arange(10.0), 2 * np.arange(10.0)]
        with self.assertRaises(DegenerateConfiguration):
            estimate_homography(correspondences(points, points + 1))

    def test_outliers_are_rejected(self):
        """Random outliers are flagged and do not disturb the model."""
        rng = np.random.default_rng(1)
        points = rng.uniform(0, 300, size=(100, 2))
        truth = Homography.from_translation(5.0, 2.0)
        targets = truth.apply(points)
        outliers = rng.choice(100, size=30, replace=False)
        targets[outliers] = rng.uniform(0, 300, size=(30, 2))
        h, inliers = estimate_homography(correspondences(points, targets))
        self.assertTrue(h.allclose(truth, atol=1e-6))
        clean = np.ones(100, dtype=bool)
        clean[outliers] = False
        self.assertTrue(inliers[clean].all())
        accidental = transfer_errors(
            truth.m, points[outliers], targets[outliers]) < 3.0
        np.testing.assert_array_equal(inliers[outliers], accidental)

    def test_deterministic_per_stream(self):
        """The same seed and stream give the same model."""
        rng = np.random.default_rng(2)
        points = rng.uniform(0, 300, size=(40, 2))
        targets = points + rng.normal(0, 0.5, size=points.shape)
        targets[:12] = rng.uniform(0, 300, size=(12, 2))
        pairs = correspondences(points, targets)
        first, _ = estimate_homography(pairs, seed=3, stream=5)
        second, _ = estimate_homography(pairs, seed=3, stream=5)
        self.assertEqual(first, second)

    def test_two_hundred_points_with_thirty_percent_outliers(self):
        """At least 95% of uniform outliers among 200 points are excluded."""
        rng = np.random.default_rng(12)
        points = np.c_[rng.uniform(0, 320, 200), rng.uniform(0, 240, 200)]
        truth = Homography.from_translation(4.0, -3.0)
        targets = truth.apply(points)
        outliers = rng.choice(200, size=60, replace=False)
        targets[outliers] = np.c_[rng.uniform(0, 320, 60),
                                  rng.uniform(0, 240, 60)]
        h, inliers = estimate_homography(correspondences(points, targets))
        self.assertTrue(h.allclose(truth, atol=1e-6))
        clean = np.ones(200, dtype=bool)
        clean[outliers] = False
        self.assertTrue(inliers[clean].all())
        self.assertLessEqual(inliers[outliers].sum(), 0.05 * 60)

    def test_coarse_keypoint_noise_keeps_a_pure_shift(self):
        """Jittered minority points do not tilt a translational fit."""
        rng = np.random.default_rng(13)
        points = grid_points(step=20)
        targets = points + (-3.0, 2.0)
        jittered = rng.choice(len(points), size=len(points) // 4,
                              replace=False)
        targets[jittered] += rng.uniform(-0.8, 0.8, size=(jittered.size, 2))
        h, inliers = estimate_homography(correspondences(points, targets))
        self.assertTrue(inliers.all())
        self.assertEqual(h.translation, (-3.0, 2.0))
        np.testing.assert_array_equal(h.m[2], [0.0, 0.0, 1.0])
        np.testing.assert_array_equal(h.m[:2, :2], np.eye(2))


class TestWarpBilinear(SimpleTestCase):

    def test_identity(self):
        """The identity warp reproduces the frame everywhere."""
        frame = textured_frame(seed=1, width=64, height=48)
        warped, valid = warp_bilinear(frame, Homography.identity(), 64, 48)
        np.testing.assert_allclose(warped.pixels, frame.pixels, atol=1e-12)
        self.assertTrue(valid.all())

    def test_integer_shift(self):
        """A one-pixel shift moves columns and invalidates the first."""
        frame = textured_frame(seed=2, width=64, height=48)
        warped, valid = warp_bilinear(
            frame, Homography.from_translation(1.0, 0.0), 64, 48)
        self.assertFalse(valid[:, 0].any())
        self.assertTrue(valid[:, 1:].all())
        np.testing.assert_allclose(
            warped.pixels[:, 1:], frame.pixels[:, :-1], atol=1e-12)
        self.assertTrue(np.all(warped.pixels[:, 0] == 0.0))

    def test_frame_moved_out_of_view(self):
        """A frame moved out of view leaves no valid pixel."""
        frame = textured_frame(seed=3, width=64, height=48)
        warped, valid = warp_bilinear(
            frame, Homography.from_translation(500.0, 0.0), 64, 48)
        self.assertFalse(valid.any())
        self.assertTrue(np.all(warped.pixels == 0.0))

    def test_forward_and_inverse_warp(self):
        """Warping by H and back stays within two resampling errors."""
        smooth = ndimage.gaussian_filter(
            textured_frame(seed=8, width=96, height=72).pixels, 2.0,
            mode='mirror')
        frame = GrayFrame(smooth)
        h = Homography.from_translation(0.2, -0.2)
        forward, _ = warp_bilinear(frame, h, 96, 72)
        back, valid = warp_bilinear(forward, h.inverse(), 96, 72)
        # one bilinear resample errs by at most max(|f_xx| + |f_yy|) / 8
        centre = smooth[1:-1, 1:-1]
        curvature = (
            np.abs(smooth[1:-1, 2:] - 2 * centre + smooth[1:-1, :-2])
            + np.abs(smooth[2:, 1:-1] - 2 * centre + smooth[:-2, 1:-1]))
        residual = curvature.max() / 8
        interior = (slice(2, -2), slice(2, -2))
        self.assertTrue(valid[interior].all())
        error = np.abs(back.pixels - smooth)[interior].max()
        self.assertLessEqual(error, 2 * residual)
        self.assertLess(error, 1e-2)


class TestReprojectedMse(SimpleTestCase):

    def test_identical_frames(self):
        """A frame reprojects onto itself without error."""
        frame = textured_frame(seed=4)
        self.assertAlmostEqual(reprojected_mse(frame, frame), 0.0, delta=1e-12)

    def test_translated_frame(self):
        """A shifted frame is warped back almost exactly."""
        frame = textured_frame(seed=5)
        moved = textured_frame(seed=5, shift=(3.0, 0.0))
        self.assertLess(reprojected_mse(frame, moved), 1e-3)

    def test_constant_frames(self):
        """Featureless frames have no reprojection."""
        frame = constant_frame(0.5, 320, 240)
        self.assertIsNone(reprojected_mse(frame, frame))

    def test_explicit_extractor(self):
        """A caller-supplied extractor is used."""
        frame = textured_frame(seed=6)
        config = RunConfig(feature_budget=50)
        mse = reprojected_mse(frame, frame, config=config,
                              extractor=GridExtractor(budget=50))
        self.assertAlmostEqual(mse, 0.0, delta=1e-12)

    def test_deterministic(self):
        """The same seed and pair index give the same MSE."""
        frame = textured_frame(seed=7)
        moved = textured_frame(seed=7, shift=(2.0, 1.0))
        config = RunConfig(seed=11)
        self.assertEqual(
            reprojected_mse(frame, moved, config=config, pair_index=4),
            reprojected_mse(frame, moved, config=config, pair_index=4))
