from scenestats.management.base import ScenestatsCommand
from scenestats.serializers import SYNTH_KINDS
from scenestats.synth import FLICKER_KINDS, PRESETS, SynthScript, corpus, generate  # noqa


class Command(ScenestatsCommand):
    help = ("Generate a synthetic sequence (a script kind or a corpus "
            "preset) with its manifest and ground-truth log.")

    def add_arguments(self, parser):
        parser.add_argument(
            'kind', choices=SYNTH_KINDS + tuple(PRESETS),
            help="Script kind, or a corpus preset.")
        parser.add_argument(
            '-o', '--output',
            help="Directory the frames, manifest and log are written to "
                 "(default ./<kind>).")
        parser.add_argument('--seed', type=int, default=0,
                            help="Texture and noise seed.")
        parser.add_argument('-n', '--frames', dest='n_frames', type=int,
                            help="Number of frames (default 100).")
        parser.add_argument('--width', type=int, help="Frame width.")
        parser.add_argument('--height', type=int, help="Frame height.")
        parser.add_argument(
            '--amplitude', dest='luminance_amplitude', type=float,
            help="Flicker amplitude in [0, 1) (default 0.2 when flickering).")  # noqa
        parser.add_argument('--dx', type=float,
                            help="Horizontal motion per frame in pixels.")
        parser.add_argument('--dy', type=float,
                            help="Vertical motion per frame in pixels.")
        parser.add_argument(
            '--local-motion', dest='local_motion_fraction', type=float,
            help="Fraction of 8x8 blocks replaced per frame (mixed).")
        parser.add_argument('--noise', dest='noise_sigma', type=float,
                            help="Gaussian sensor noise sigma.")
        parser.add_argument('--blur', dest='blur_sigma', type=float,
                            help="Gaussian camera blur sigma in pixels.")
        parser.add_argument(
            '--drift', dest='drift_px', type=float,
            help="Horizontal drift of a preset in pixels per frame.")
        parser.add_argument(
            '--native-fps', type=float, default=10.0,
            help="Frame rate recorded in the manifest (default 10).")
        parser.add_argument(
            '--skip-frames', type=int, default=0,
            help="Warm-up frames recorded in the manifest (default 0).")

    def handle(self, *args, **options):
        params = {
            name: options[name] for name in (
                'n_frames', 'width', 'height', 'luminance_amplitude',
                'local_motion_fraction', 'noise_sigma', 'blur_sigma',
            )
            if options[name] is not None
        }
        if options['dx'] is not None or options['dy'] is not None:
            params['motion_px_per_frame'] = (
                options['dx'] or 0.0, options['dy'] or 0.0)

        kind = options['kind']
        if kind in PRESETS:
            sequence = corpus(
                kind, seed=options['seed'], drift_px=options['drift_px'],
                **params)
        else:
            if kind in FLICKER_KINDS:
                params.setdefault('luminance_amplitude', 0.2)
            sequence = generate(SynthScript(
                kind=kind, texture_seed=options['seed'], **params))

        manifest_path = sequence.write(
            options['output'] or kind,
            native_fps=options['native_fps'],
            skip_frames=options['skip_frames'],
        )
        self.stdout.write(str(manifest_path))
