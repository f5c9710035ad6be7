import logging
import sys

from django.core.management.base import BaseCommand, CommandError

from scenestats.exceptions import ScenestatsError

logger = logging.getLogger('scenestats')

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

VERBOSITY_LEVELS = {0: logging.WARNING, 1: logging.INFO}


class ScenestatsCommand(BaseCommand):
    """
    Base class of the scenestats commands.

    Maps failures to fixed exit codes: 1 for usage errors, 2 for data
    errors (any ScenestatsError) and 3 for anything else. Diagnostics and
    progress go to standard error; standard output only carries data.
    """

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        # argparse would exit with status 2; report usage errors as 1
        parser.called_from_command_line = False
        return parser

    def run_from_argv(self, argv):
        try:
            super().run_from_argv(argv)
        except CommandError as e:
            self.stderr.write(f"{e.__class__.__name__}: {e}")
            sys.exit(e.returncode)

    def execute(self, *args, **options):
        level = VERBOSITY_LEVELS.get(options.get('verbosity', 1), logging.DEBUG)  # noqa
        logger.setLevel(level)
        try:
            return super().execute(*args, **options)
        except CommandError:
            raise
        except ScenestatsError as e:
            raise CommandError(str(e), returncode=EXIT_DATA) from e
        except Exception as e:
            logger.debug("Internal error", exc_info=True)
            raise CommandError(
                f"internal error: {e.__class__.__name__}: {e}",
                returncode=EXIT_INTERNAL) from e
