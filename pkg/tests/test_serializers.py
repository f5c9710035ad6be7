from django.test import SimpleTestCase

from scenestats.pixbuf import CropRect
from scenestats.report import summarize
from scenestats.serializers import (
    BOTTOM_HALF,
    CropField,
    DatasetManifestSerializer,
    DistributionSummarySerializer,
    MissingSummarySerializer,
    SynthScriptSerializer,
    parse_crop,
)


class TestDatasetManifestSerializer(SimpleTestCase):
    """
    Test suite for the DatasetManifestSerializer class.
    """

    def test_defaults(self):
        """
        Test that optional keys take the default sampling values.
        """
        serializer = DatasetManifestSerializer(
            data={'name': 'a', 'frames_dir': 'd', 'native_fps': 30})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        data = serializer.validated_data
        self.assertEqual(data['target_fps'], 10.0)
        self.assertEqual(data['skip_frames'], 30)
        self.assertEqual(data['frame_pattern'], '*.p[gp]m')
        self.assertIsNone(data['crop'])

    def test_unknown_key(self):
        """
        Test that undeclared keys are reported with the 'unknown' code.
        """
        serializer = DatasetManifestSerializer(data={
            'name': 'a', 'frames_dir': 'd', 'native_fps': 30, 'fsp': 3})
        self.assertFalse(serializer.is_valid())
        self.assertIn('fsp', serializer.errors)

    def test_missing_key(self):
        """Missing required keys carry the 'required' code."""
        serializer = DatasetManifestSerializer(data={'name': 'a'})
        self.assertFalse(serializer.is_valid())
        self.assertEqual(serializer.errors['native_fps'][0].code, 'required')

    def test_target_above_native(self):
        """The target rate cannot exceed the native one."""
        serializer = DatasetManifestSerializer(data={
            'name': 'a', 'frames_dir': 'd', 'native_fps': 5,
            'target_fps': 10})
        self.assertFalse(serializer.is_valid())
        self.assertIn('target_fps', serializer.errors)


class TestCrop(SimpleTestCase):

    def test_parse_crop(self):
        """Crops parse from none, bottom-half or L,T,W,H."""
        self.assertIsNone(parse_crop('none'))
        self.assertIsNone(parse_crop(''))
        self.assertEqual(parse_crop('Bottom-Half'), BOTTOM_HALF)
        self.assertEqual(parse_crop('1,2,3,4'), CropRect(1, 2, 3, 4))

    def test_field_representation(self):
        """Crops render back to L,T,W,H."""
        field = CropField()
        self.assertEqual(field.to_representation(CropRect(1, 2, 3, 4)),
                         '1,2,3,4')
        self.assertIsNone(field.to_representation(None))


class TestSynthScriptSerializer(SimpleTestCase):

    def script(self, **changes):
        data = {
            'kind': 'flicker', 'n_frames': 10, 'width': 64, 'height': 48,
            'texture_seed': 0, 'luminance_amplitude': 0.2,
            'motion_px_per_frame': [0.0, 0.0], 'local_motion_fraction': 0.0,
            'noise_sigma': 0.0, 'blur_sigma': 0.0,
        }
        data.update(changes)
        return SynthScriptSerializer(data=data)

    def test_valid(self):
        """A complete script validates."""
        self.assertTrue(self.script().is_valid())

    def test_amplitude_bound(self):
        """Amplitudes must stay below one."""
        serializer = self.script(luminance_amplitude=1.0)
        self.assertFalse(serializer.is_valid())
        self.assertIn('luminance_amplitude', serializer.errors)

    def test_motion_needs_two_components(self):
        """Motion needs dx and dy."""
        self.assertFalse(self.script(motion_px_per_frame=[1.0]).is_valid())


class TestSummarySerializers(SimpleTestCase):

    def test_summary_round_trip(self):
        """A summary validates back to itself."""
        summary = summarize([1, 2, 3, 4, 5])
        serializer = DistributionSummarySerializer(data=summary.to_dict())
        self.assertTrue(serializer.is_valid(), serializer.errors)
        self.assertEqual(dict(serializer.validated_data), summary.to_dict())

    def test_quantiles_out_of_order(self):
        """Unordered quantiles are refused."""
        data = summarize([1, 2, 3, 4, 5]).to_dict()
        data['q1'] = 4.5
        self.assertFalse(DistributionSummarySerializer(data=data).is_valid())

    def test_missing_summary(self):
        """Only AllMissing entries describe a missing summary."""
        self.assertTrue(MissingSummarySerializer(
            data={'error': 'AllMissing', 'n_missing': 3}).is_valid())
        self.assertFalse(MissingSummarySerializer(
            data={'error': 'Other', 'n_missing': 3}).is_valid())
