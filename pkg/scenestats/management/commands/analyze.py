import logging
from dataclasses import replace

from scenestats.config import RunConfig
from scenestats.exceptions import InvalidValue
from scenestats.management.base import ScenestatsCommand
from scenestats.report import analyze_sequence, render_csv, write_csv
from scenestats.sequence import load_manifest_file
from scenestats.serializers import NORMALIZE_MODES, parse_crop

logger = logging.getLogger(__name__)


class Command(ScenestatsCommand):
    help = ("Compute the scene statistics of the dataset described by a "
            "manifest and write one CSV row per sampled frame.")

    def add_arguments(self, parser):
        parser.add_argument('manifest', help="Path of the dataset manifest.")
        parser.add_argument(
            '-o', '--output', default='-',
            help="CSV destination; '-' (default) writes to standard output.")
        parser.add_argument(
            '--budget', dest='feature_budget', type=int,
            help="Features extracted per frame (default 100).")
        parser.add_argument(
            '--ratio-threshold', type=float,
            help="Match ratio-test threshold in (0, 1) (default 0.75).")
        parser.add_argument(
            '--fast-threshold', type=float,
            help="FAST corner threshold in intensity units (default 0.08).")
        parser.add_argument(
            '--ransac-iters', type=int,
            help="Maximum RANSAC samples per pair (default 1000).")
        parser.add_argument(
            '--ransac-threshold', dest='ransac_threshold_px', type=float,
            help="RANSAC inlier threshold in pixels (default 3.0).")
        parser.add_argument('--seed', type=int, help="RANSAC seed.")
        parser.add_argument(
            '--jobs', type=int,
            help="Worker processes (default: available CPUs).")
        parser.add_argument(
            '--normalize', dest='normalize_mode', choices=NORMALIZE_MODES,
            help="Intensity normalization (default global).")
        parser.add_argument(
            '--crop', help="Override the manifest crop: 'bottom-half', "
                           "'none' or 'L,T,W,H'.")
        parser.add_argument(
            '--target-fps', type=float,
            help="Override the manifest's target frame rate.")
        parser.add_argument(
            '--skip-frames', type=int,
            help="Override the manifest's warm-up frame count.")

    def handle(self, *args, **options):
        config = RunConfig.from_settings(**{
            name: options[name] for name in (
                'feature_budget', 'ratio_threshold', 'fast_threshold',
                'ransac_iters', 'ransac_threshold_px', 'seed', 'jobs',
                'normalize_mode',
            )
        })
        manifest = load_manifest_file(options['manifest'])

        changes = {}
        if options['crop'] is not None:
            try:
                changes['crop'] = parse_crop(options['crop'])
            except ValueError as e:
                raise InvalidValue(f"--crop: {e}")
        if options['target_fps'] is not None:
            changes['target_fps'] = options['target_fps']
        if options['skip_frames'] is not None:
            changes['skip_frames'] = options['skip_frames']
        if changes:
            manifest = replace(manifest, **changes)

        records = analyze_sequence(manifest, config)
        if options['output'] == '-':
            self.stdout.write(render_csv(records), ending='')
        else:
            write_csv(records, options['output'])
        logger.info("%s: wrote %d records to %s", manifest.name,
                    len(records), options['output'])
