import os

__version__ = '0.1.0'

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'plain': {'format': '%(levelname)s %(name)s: %(message)s'},
    },
    'handlers': {
        'stderr': {
            'class': 'logging.StreamHandler',
            'stream': 'ext://sys.stderr',
            'formatter': 'plain',
        },
    },
    'loggers': {
        'scenestats': {
            'handlers': ['stderr'],
            'level': 'WARNING',
            'propagate': False,
        },
    },
}


def setup(**overrides):
    """
    Configure Django for standalone use of scenestats.

    Inside a project (``DJANGO_SETTINGS_MODULE`` set, or settings already
    configured) the project's settings are used as they are. Otherwise a
    minimal configuration with the app installed and logging routed to
    standard error is created; `overrides` become extra settings, for
    example ``SCENESTATS_JOBS=1``.
    """
    import django
    from django.conf import settings

    if not settings.configured and not os.environ.get('DJANGO_SETTINGS_MODULE'):  # noqa
        settings.configure(
            INSTALLED_APPS=['scenestats'],
            LOGGING=LOGGING,
            **overrides,
        )
    django.setup()
