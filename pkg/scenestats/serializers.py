from rest_framework import serializers
from rest_framework.exceptions import ValidationError

from scenestats.pixbuf import CropRect

BOTTOM_HALF = 'bottom-half'
NORMALIZE_MODES = ('global', 'per-frame')
SYNTH_KINDS = ('static', 'flicker', 'translate', 'mixed')


class StrictSerializer(serializers.Serializer):
    """
    A plain serializer that rejects keys it does not declare.
    """

    def to_internal_value(self, data):
        unknown = sorted(set(data) - set(self.fields))
        if unknown:
            raise ValidationError(
                {key: ["Unknown key."] for key in unknown}, code='unknown')
        return super().to_internal_value(data)


def parse_crop(value):
    """
    Turn a crop setting into a CropRect, the 'bottom-half' keyword or None.

    Raises:
        ValueError: If the value is neither a keyword nor 'L,T,W,H'.
    """
    if value is None or isinstance(value, CropRect):
        return value
    text = str(value).strip()
    if text.lower() in ('', 'none'):
        return None
    if text.lower() == BOTTOM_HALF:
        return BOTTOM_HALF
    return CropRect.parse(text)


class CropField(serializers.Field):
    """Crop given as 'bottom-half', 'none' or 'L,T,W,H'."""

    def to_internal_value(self, data):
        try:
            return parse_crop(data)
        except (TypeError, ValueError) as e:
            raise ValidationError(str(e), code='invalid')

    def to_representation(self, value):
        return None if value is None else str(value)


class DatasetManifestSerializer(StrictSerializer):
    """
    Validates the key-value document describing one dataset.

    Only `name`, `frames_dir` and `native_fps` are required; the rest
    default to the sampling rules used for every dataset.
    """
    name = serializers.CharField()
    frames_dir = serializers.CharField()
    frame_pattern = serializers.CharField(default='*.p[gp]m')
    native_fps = serializers.FloatField()
    target_fps = serializers.FloatField(default=10.0)
    skip_frames = serializers.IntegerField(min_value=0, default=30)
    crop = CropField(required=False, allow_null=True, default=None)
    notes = serializers.CharField(allow_blank=True, default='')

    def validate_native_fps(self, value):
        if value <= 0:
            raise ValidationError("Frame rate must be positive.")
        return value

    def validate_target_fps(self, value):
        if value <= 0:
            raise ValidationError("Frame rate must be positive.")
        return value

    def validate(self, attrs):
        if attrs['target_fps'] > attrs['native_fps']:
            raise ValidationError(
                {'target_fps': ["target_fps cannot exceed native_fps."]})
        return attrs


class RunConfigSerializer(StrictSerializer):
    """Validates analysis parameters merged from settings and CLI flags."""
    feature_budget = serializers.IntegerField(min_value=1)
    ratio_threshold = serializers.FloatField()
    fast_threshold = serializers.FloatField(min_value=0.0, max_value=1.0)
    ransac_iters = serializers.IntegerField(min_value=1)
    ransac_threshold_px = serializers.FloatField()
    seed = serializers.IntegerField(min_value=0)
    jobs = serializers.IntegerField(min_value=1)
    normalize_mode = serializers.ChoiceField(choices=NORMALIZE_MODES)
    laplacian_size = serializers.ListField(
        child=serializers.IntegerField(min_value=1),
        min_length=2, max_length=2)

    def validate_ratio_threshold(self, value):
        if not 0.0 < value < 1.0:
            raise ValidationError("Ratio threshold must lie in (0, 1).")
        return value

    def validate_ransac_threshold_px(self, value):
        if value <= 0:
            raise ValidationError("Inlier threshold must be positive.")
        return value


class SynthScriptSerializer(StrictSerializer):
    """Validates a synthetic sequence script."""
    kind = serializers.ChoiceField(choices=SYNTH_KINDS)
    n_frames = serializers.IntegerField(min_value=2)
    width = serializers.IntegerField(min_value=8)
    height = serializers.IntegerField(min_value=8)
    texture_seed = serializers.IntegerField(min_value=0)
    luminance_amplitude = serializers.FloatField(min_value=0.0)
    motion_px_per_frame = serializers.ListField(
        child=serializers.FloatField(), min_length=2, max_length=2)
    local_motion_fraction = serializers.FloatField(
        min_value=0.0, max_value=1.0)
    noise_sigma = serializers.FloatField(min_value=0.0)
    blur_sigma = serializers.FloatField(min_value=0.0)

    def validate_luminance_amplitude(self, value):
        # (1 - a) must stay positive or the dark half-wave clamps to black
        if value >= 1.0:
            raise ValidationError(
                "Amplitude must lie in [0, 1) to keep intensities clampable.")  # noqa
        return value


class DistributionSummarySerializer(StrictSerializer):
    """Serializes a box-plot summary and validates it on the way back in."""
    n = serializers.IntegerField(min_value=1)
    min = serializers.FloatField()
    q1 = serializers.FloatField()
    median = serializers.FloatField()
    q3 = serializers.FloatField()
    max = serializers.FloatField()
    lower_whisker = serializers.FloatField()
    upper_whisker = serializers.FloatField()
    n_missing = serializers.IntegerField(min_value=0)

    def validate(self, attrs):
        order = [attrs[key] for key in ('min', 'q1', 'median', 'q3', 'max')]
        if order != sorted(order):
            raise ValidationError("Summary quantiles are out of order.")
        for key in ('lower_whisker', 'upper_whisker'):
            if not attrs['min'] <= attrs[key] <= attrs['max']:
                raise ValidationError(
                    {key: ["Whisker lies outside [min, max]."]})
        return attrs


class MissingSummarySerializer(StrictSerializer):
    """The JSON entry for a statistic with no present values."""
    error = serializers.ChoiceField(choices=['AllMissing'])
    n_missing = serializers.IntegerField(min_value=0)
