from importlib import import_module

from django.conf import settings

DEFAULT_FEATURE_EXTRACTOR = 'scenestats.extractors.OrientedBinaryExtractor'


def get_setting(name, default):
    """
    Read a ``SCENESTATS_<name>`` setting, falling back to `default`.
    """
    return getattr(settings, f'SCENESTATS_{name}', default)


def get_feature_extractor(config):
    """
    Dynamically import and instantiate the feature extractor class named by
    the ``SCENESTATS_FEATURE_EXTRACTOR`` setting.

    The setting is a fully qualified 'module.ClassName' path. The class is
    instantiated with the feature budget and FAST threshold of `config`.

    Args:
        config (RunConfig): The analysis configuration.

    Returns:
        BaseFeatureExtractor: The configured extractor.

    Raises:
        ImportError: If the module cannot be imported.
        AttributeError: If the class is not found within the module.
    """
    module_path, class_name = get_setting(
        'FEATURE_EXTRACTOR', DEFAULT_FEATURE_EXTRACTOR).rsplit('.', 1)
    module = import_module(module_path)
    extractor_class = getattr(module, class_name)
    return extractor_class(
        budget=config.feature_budget,
        fast_threshold=config.fast_threshold,
    )


def raise_for_errors(errors, invalid_class, missing_class=None):
    """
    Re-raise the first DRF validation error as a domain error.

    A ``required`` error becomes `missing_class` (when given); every other
    error becomes `invalid_class`. Messages name the offending key.
    """
    for key, details in errors.items():
        if isinstance(details, dict):
            raise_for_errors(details, invalid_class, missing_class)
        detail = details[0] if isinstance(details, list) else details
        if missing_class is not None and getattr(detail, 'code', None) == 'required':  # noqa
            raise missing_class(f"Missing required key '{key}'")
        if key == 'non_field_errors':
            raise invalid_class(str(detail))
        raise invalid_class(f"{key}: {detail}")
