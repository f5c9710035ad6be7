import sys

from django.core.management import load_command_class

from scenestats import setup
from scenestats.management.base import EXIT_USAGE

COMMANDS = ('analyze', 'synth', 'report')

USAGE = """\
usage: scenestats <command> [options]

commands:
  analyze   compute scene statistics of a dataset manifest (CSV)
  synth     generate a synthetic sequence or corpus preset
  report    summarize analysis CSVs (JSON, SVG box plots)

Run 'scenestats <command> --help' for the options of a command.
"""


def main(argv=None):
    argv = list(sys.argv if argv is None else argv)
    if len(argv) < 2:
        sys.stderr.write(USAGE)
        return EXIT_USAGE
    name = argv[1]
    if name in ('-h', '--help'):
        sys.stdout.write(USAGE)
        return 0
    if name not in COMMANDS:
        sys.stderr.write(f"Unknown command '{name}'\n\n{USAGE}")
        return EXIT_USAGE

    setup()
    command = load_command_class('scenestats', name)
    command.run_from_argv(['scenestats'] + argv[1:])
    return 0


if __name__ == '__main__':
    sys.exit(main())
