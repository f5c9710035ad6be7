from pathlib import Path

import scenestats
from scenestats.exceptions import InvalidValue
from scenestats.management.base import ScenestatsCommand
from scenestats.report import (
    SUMMARY_STATISTICS,
    read_csv,
    render_json,
    summarize_records,
    write_json,
    write_svg,
)


class Command(ScenestatsCommand):
    help = ("Summarize analysis CSVs into per-dataset box-plot statistics, "
            "written as JSON and optionally as SVG box plots.")

    def add_arguments(self, parser):
        parser.add_argument('csv', nargs='+',
                            help="Analysis CSV files, one or more datasets.")
        parser.add_argument(
            '--json', dest='json_path',
            help="Summary JSON destination; standard output when neither "
                 "--json nor --svg is given.")
        parser.add_argument('--svg', dest='svg_path',
                            help="Box plot SVG destination.")
        parser.add_argument(
            '--crop-ablation', metavar='NOTE',
            help="Note recorded in the JSON metadata, e.g. which crop the "
                 "inputs were analysed with.")

    def handle(self, *args, **options):
        records = []
        for path in options['csv']:
            records.extend(read_csv(path))
        if not records:
            raise InvalidValue("The input CSVs contain no records")

        summaries = summarize_records(records)
        metadata = {
            'generator': 'scenestats',
            'version': scenestats.__version__,
            'inputs': [Path(path).name for path in options['csv']],
            'statistics': list(SUMMARY_STATISTICS),
            'crop_ablation': options['crop_ablation'],
        }

        if options['json_path']:
            write_json(summaries, options['json_path'], metadata)
        if options['svg_path']:
            write_svg(summaries, options['svg_path'])
        if not options['json_path'] and not options['svg_path']:
            self.stdout.write(render_json(summaries, metadata), ending='')
