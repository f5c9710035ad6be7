from django.apps import AppConfig
from django.core.exceptions import ImproperlyConfigured


class ScenestatsConfig(AppConfig):
    """
    The Django AppConfig for the scenestats package.

    Validates the ``SCENESTATS_*`` settings, the configured feature
    extractor and the shipped descriptor pattern once the app registry is
    ready.
    """
    name = 'scenestats'
    verbose_name = 'Scene statistics'

    def ready(self):
        from scenestats.config import RunConfig
        from scenestats.exceptions import InvalidValue
        from scenestats.extractors import BaseFeatureExtractor
        from scenestats.features import load_pattern
        from scenestats.utils import get_feature_extractor

        try:
            config = RunConfig.from_settings()
        except InvalidValue as e:
            raise ImproperlyConfigured(f"Invalid SCENESTATS setting: {e}")

        try:
            extractor = get_feature_extractor(config)
        except (ImportError, AttributeError, ValueError) as e:
            raise ImproperlyConfigured(
                f"Cannot load SCENESTATS_FEATURE_EXTRACTOR: {e}")
        if not isinstance(extractor, BaseFeatureExtractor):
            raise ImproperlyConfigured(
                "SCENESTATS_FEATURE_EXTRACTOR must name a "
                "BaseFeatureExtractor subclass")

        load_pattern()
