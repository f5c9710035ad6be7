import math
import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from scenestats.exceptions import (
    ExportError,
    InvalidValue,
    MissingKey,
    OutOfBounds,
)
from scenestats.pixbuf import CropRect, GrayFrame, RgbFrame, save_frame
from scenestats.sequence import (
    DatasetManifest,
    iter_sampled_frames,
    load_manifest,
    load_manifest_file,
    preprocess_frame,
    sample_indices,
)
from scenestats.serializers import BOTTOM_HALF


class TestLoadManifest(SimpleTestCase):
    """
    Test suite for parsing and validating dataset manifests.
    """

    def test_defaults(self):
        """A 30 fps manifest targets 10 fps and skips one second."""
        manifest = load_manifest(
            {'name': 'demo', 'frames_dir': 'd/', 'native_fps': 30})
        self.assertEqual(manifest.target_fps, 10)
        self.assertEqual(manifest.skip_frames, 30)
        self.assertIsNone(manifest.crop)
        self.assertEqual(manifest.stride, 3)

    def test_equal_rates_give_stride_one(self):
        """Equal rates keep every frame."""
        manifest = load_manifest({
            'name': 'demo', 'frames_dir': 'd/', 'native_fps': 30,
            'target_fps': 30})
        self.assertEqual(manifest.stride, 1)

    def test_text_document(self):
        """Text manifests allow comments and relative paths."""
        manifest = load_manifest(
            "# sky removed\n"
            "name = forest\n"
            "frames_dir = frames  # relative\n"
            "native_fps = 15\n"
            "crop = bottom-half\n"
            "notes = canopy walk\n",
            base_dir='/data/forest',
        )
        self.assertEqual(manifest.name, 'forest')
        self.assertEqual(manifest.frames_dir, Path('/data/forest/frames'))
        self.assertEqual(manifest.crop, BOTTOM_HALF)
        self.assertEqual(manifest.notes, 'canopy walk')
        self.assertEqual(manifest.stride, 2)

    def test_crop_rectangle(self):
        """Crops parse from L,T,W,H."""
        manifest = load_manifest({
            'name': 'demo', 'frames_dir': 'd', 'native_fps': 10,
            'crop': '0,10,20,30'})
        self.assertEqual(manifest.crop, CropRect(0, 10, 20, 30))

    def test_zero_fps(self):
        """Frame rates must be positive."""
        with self.assertRaises(InvalidValue):
            load_manifest({'name': 'demo', 'frames_dir': 'd/', 'native_fps': 0})  # noqa

    def test_target_above_native(self):
        """The target rate cannot exceed the native one."""
        with self.assertRaises(InvalidValue):
            load_manifest({'name': 'demo', 'frames_dir': 'd/',
                           'native_fps': 10, 'target_fps': 30})

    def test_missing_key(self):
        """Required keys are reported by name."""
        with self.assertRaisesMessage(MissingKey, 'native_fps'):
            load_manifest({'name': 'demo', 'frames_dir': 'd/'})

    def test_unknown_key(self):
        """Unknown keys are refused."""
        with self.assertRaisesMessage(InvalidValue, 'fps'):
            load_manifest({'name': 'demo', 'frames_dir': 'd/',
                           'native_fps': 10, 'fps': 10})

    def test_malformed_crop(self):
        """Unparseable crops are refused."""
        with self.assertRaises(InvalidValue):
            load_manifest({'name': 'demo', 'frames_dir': 'd/',
                           'native_fps': 10, 'crop': 'top-half'})

    def test_malformed_line(self):
        """A line without '=' names its line number."""
        with self.assertRaisesMessage(InvalidValue, 'line 2'):
            load_manifest("name = demo\nframes_dir\n")

    def test_duplicate_key(self):
        """A key given twice is refused."""
        with self.assertRaisesMessage(InvalidValue, 'duplicate'):
            load_manifest("name = a\nname = b\n")

    def test_missing_file(self):
        """A missing manifest is an export error."""
        with self.assertRaisesMessage(ExportError, 'manifest not found'):
            load_manifest_file('/nonexistent/demo.manifest')

    def test_text_round_trip(self):
        """A rendered manifest loads back unchanged."""
        manifest = DatasetManifest(
            name='demo', frames_dir=Path('/x'), native_fps=30.0,
            skip_frames=3, crop=CropRect(0, 1, 2, 3), notes='n')
        self.assertEqual(load_manifest(manifest.to_text()), manifest)


class TestSampleIndices(SimpleTestCase):

    def manifest(self, native, target=10, skip=30):
        return DatasetManifest(name='m', frames_dir='.', native_fps=native,
                               target_fps=target, skip_frames=skip)

    def test_skip_then_stride(self):
        """Warm-up frames are skipped before striding."""
        indices = sample_indices(self.manifest(30), 120)
        self.assertEqual(indices, list(range(30, 120, 3)))
        self.assertEqual(len(indices), 30)
        self.assertEqual(indices[-1], 117)

    def test_stride_one(self):
        """Stride one keeps every frame."""
        self.assertEqual(
            sample_indices(self.manifest(10, skip=0), 5), [0, 1, 2, 3, 4])

    def test_fifteen_fps_rounds_half_up(self):
        """A stride of 1.5 rounds up to 2."""
        self.assertEqual(self.manifest(15).stride, 2)

    def test_too_few_frames(self):
        """Sequences shorter than the warm-up sample nothing."""
        self.assertEqual(sample_indices(self.manifest(30), 30), [])
        self.assertEqual(sample_indices(self.manifest(30), 0), [])

    def test_count_and_order(self):
        """Sampled indices are increasing and complete."""
        for native, skip, total in [(30, 30, 121), (25, 7, 64), (10, 0, 1)]:
            manifest = self.manifest(native, skip=skip)
            indices = sample_indices(manifest, total)
            expected = max(0, math.ceil((total - skip) / manifest.stride))
            self.assertEqual(len(indices), expected)
            self.assertTrue(all(i >= skip for i in indices))
            self.assertEqual(indices, sorted(set(indices)))


class TestPreprocessFrame(SimpleTestCase):

    def setUp(self):
        self.manifest = DatasetManifest(
            name='m', frames_dir='.', native_fps=10)

    def test_rgb_grey_level(self):
        """RGB input is converted with luma weights."""
        raw = RgbFrame(np.full((4, 4, 3), 128, dtype=np.uint8))
        frame = preprocess_frame(raw, self.manifest)
        np.testing.assert_allclose(frame.pixels, 128 / 255)

    def test_gray_is_unchanged(self):
        """Gray input passes through, and preprocessing is idempotent."""
        gray = GrayFrame(np.random.default_rng(1).random((4, 6)))
        self.assertEqual(preprocess_frame(gray, self.manifest), gray)
        twice = preprocess_frame(preprocess_frame(gray, self.manifest),
                                 self.manifest)
        self.assertEqual(twice, gray)

    def test_bottom_half_crop(self):
        """The bottom-half crop keeps the lower rows."""
        pixels = np.zeros((1080, 1920))
        pixels[540:] = 1.0
        manifest = replace(self.manifest, crop=BOTTOM_HALF)
        frame = preprocess_frame(GrayFrame(pixels), manifest)
        self.assertEqual((frame.width, frame.height), (1920, 540))
        self.assertTrue(np.all(frame.pixels == 1.0))

    def test_crop_out_of_bounds(self):
        """A crop larger than the frame is refused."""
        manifest = replace(self.manifest, crop=CropRect(0, 0, 10, 10))
        with self.assertRaises(OutOfBounds):
            preprocess_frame(GrayFrame(np.zeros((4, 4))), manifest)

    def test_per_frame_stretch(self):
        """Per-frame mode stretches to the full range."""
        gray = GrayFrame(np.array([[0.2, 0.4], [0.3, 0.6]]))
        frame = preprocess_frame(gray, self.manifest, 'per-frame')
        self.assertEqual(frame.pixels.min(), 0.0)
        self.assertEqual(frame.pixels.max(), 1.0)
        np.testing.assert_allclose(frame.pixels[0, 1], 0.5)


class TestSampledStream(SimpleTestCase):

    def test_names_do_not_change_the_stream(self):
        """The dataset name does not change which frames are sampled."""
        with tempfile.TemporaryDirectory() as tmp:
            for i in range(12):
                save_frame(Path(tmp) / f'img_{i:03d}.pgm',
                           GrayFrame(np.full((4, 4), i / 20)))
            (Path(tmp) / 'notes.txt').write_text('not a frame')
            a = DatasetManifest(name='a', frames_dir=tmp, native_fps=20,
                                skip_frames=2)
            b = replace(a, name='b')
            frames_a = list(iter_sampled_frames(a))
            frames_b = list(iter_sampled_frames(b))

        self.assertEqual([f.index_in_source for f in frames_a], [2, 4, 6, 8, 10])  # noqa
        self.assertEqual(frames_a, frames_b)
        for fa, fb in zip(frames_a, frames_b):
            self.assertEqual(fa.frame, fb.frame)
        timestamps = [f.timestamp for f in frames_a]
        self.assertEqual(timestamps, sorted(timestamps))
        self.assertAlmostEqual(timestamps[0], 0.1)

    def test_missing_directory(self):
        """A missing frames directory is an export error."""
        manifest = DatasetManifest(name='a', frames_dir='/nonexistent',
                                   native_fps=10)
        with self.assertRaises(ExportError):
            list(iter_sampled_frames(manifest))
