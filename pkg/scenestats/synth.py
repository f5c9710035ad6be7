"""
Synthetic image sequences with scripted illumination changes, in-scene
motion and known camera motion.

Every frame is rendered from a seeded value-noise texture. Depending on the
script kind the texture is modulated by a square-wave gain (flicker),
shifted by a constant per-frame offset (translate), or both (mixed). Mixed
scripts also replace some 8x8 blocks by other parts of the texture and add
a random ambient light level to each frame, so their contrast changes from
frame to frame while pure flicker leaves it untouched. Frames are quantized
to 8-bit levels as they are rendered and the ground-truth log records what
changed between each adjacent pair of those quantized frames.
"""
import csv
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from scenestats.exceptions import ExportError, InvalidScript
from scenestats.pixbuf import GrayFrame, quantize, save_frame
from scenestats.reproject import Homography
from scenestats.sequence import DatasetManifest
from scenestats.serializers import SynthScriptSerializer
from scenestats.utils import raise_for_errors

logger = logging.getLogger(__name__)

OCTAVE_SPACINGS = (16, 8, 4, 2)
TEXTURE_RANGE = (0.15, 0.8)
FLICKER_PERIOD = 10
BLOCK_SIZE = 8
# ambient offset range of mixed scripts, as a fraction of the flicker amplitude
AMBIENT_SWING = 0.25
FRAME_NAME = 'frame_{:06d}.pgm'
FRAME_GLOB = 'frame_*.pgm'
GROUND_TRUTH_FILE = 'ground_truth.csv'
GROUND_TRUTH_COLUMNS = (
    ('pair_index', 'true_dL')
    + tuple(f'h{row}{col}' for row in range(3) for col in range(3))
    + ('n_perturbed', 'perturbed_blocks')
)

FLICKER_KINDS = ('flicker', 'mixed')
MOTION_KINDS = ('translate', 'mixed')


@dataclass(frozen=True)
class SynthScript:
    """
    What to render.

    `luminance_amplitude` applies to flicker and mixed scripts,
    `motion_px_per_frame` to translate and mixed, `local_motion_fraction`
    to mixed only. Mixed scripts add a per-frame ambient offset drawn
    uniformly from +-AMBIENT_SWING * `luminance_amplitude`. Sensor noise and
    blur apply to every kind.
    """
    kind: str
    n_frames: int = 100
    width: int = 320
    height: int = 240
    texture_seed: int = 0
    luminance_amplitude: float = 0.0
    motion_px_per_frame: tuple = (0.0, 0.0)
    local_motion_fraction: float = 0.0
    noise_sigma: float = 0.0
    blur_sigma: float = 0.0

    def __post_init__(self):
        data = asdict(self)
        data['motion_px_per_frame'] = list(self.motion_px_per_frame)
        serializer = SynthScriptSerializer(data=data)
        if not serializer.is_valid():
            raise_for_errors(serializer.errors, InvalidScript)
        object.__setattr__(
            self, 'motion_px_per_frame',
            tuple(float(v) for v in self.motion_px_per_frame))

    def gain(self, t):
        """Illumination gain of frame t: 1 + a * s_t for flickering kinds."""
        if self.kind not in FLICKER_KINDS:
            return 1.0
        wave = 1.0 if t % FLICKER_PERIOD < FLICKER_PERIOD // 2 else -1.0
        return 1.0 + self.luminance_amplitude * wave

    def shift(self, t):
        """Texture offset of frame t in pixels."""
        if self.kind not in MOTION_KINDS:
            return 0.0, 0.0
        dx, dy = self.motion_px_per_frame
        return t * dx, t * dy


class ValueNoiseTexture:
    """
    Multi-octave value noise defined at every real coordinate.

    Each octave is a periodic lattice of uniform random values at spacing
    16, 8, 4 or 2 px, interpolated bilinearly; octaves have equal weight.
    """

    def __init__(self, rng, width, height, reach=(0.0, 0.0)):
        coarsest = OCTAVE_SPACINGS[0]
        self.period_x = coarsest * math.ceil(
            (width + abs(reach[0]) + coarsest) / coarsest)
        self.period_y = coarsest * math.ceil(
            (height + abs(reach[1]) + coarsest) / coarsest)
        self.lattices = [
            rng.random((self.period_y // spacing, self.period_x // spacing))
            for spacing in OCTAVE_SPACINGS
        ]

    def sample(self, xs, ys):
        total = np.zeros(np.broadcast(xs, ys).shape)
        for spacing, lattice in zip(OCTAVE_SPACINGS, self.lattices):
            gx, gy = xs / spacing, ys / spacing
            x0, y0 = np.floor(gx), np.floor(gy)
            fx, fy = gx - x0, gy - y0
            rows, cols = lattice.shape
            i0 = np.mod(y0, rows).astype(np.intp)
            j0 = np.mod(x0, cols).astype(np.intp)
            i1, j1 = (i0 + 1) % rows, (j0 + 1) % cols
            top = lattice[i0, j0] + (lattice[i0, j1] - lattice[i0, j0]) * fx
            bottom = lattice[i1, j0] + (lattice[i1, j1] - lattice[i1, j0]) * fx  # noqa
            total += top + (bottom - top) * fy
        return total / len(OCTAVE_SPACINGS)

    def render(self, width, height, shift=(0.0, 0.0)):
        ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
        return self.sample(xs - shift[0], ys - shift[1])


@dataclass(frozen=True)
class GroundTruthRecord:
    """
    What changed from frame pair_index - 1 to frame pair_index.

    `homography` maps points of the earlier frame onto the later one;
    `perturbed_blocks` lists (column, row) indices of replaced 8x8 blocks.
    """
    pair_index: int
    true_d_luminance: float
    homography: Homography = field(compare=False)
    perturbed_blocks: tuple = ()

    def as_row(self):
        blocks = ';'.join(f'{bx}:{by}' for bx, by in self.perturbed_blocks)
        return (
            [self.pair_index, f'{self.true_d_luminance:.9g}']
            + [f'{value:.9g}' for value in self.homography.m.ravel()]
            + [len(self.perturbed_blocks), blocks]
        )


@dataclass(frozen=True)
class GroundTruthLog:
    records: tuple

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def write(self, path):
        path = Path(path)
        try:
            with path.open('w', newline='', encoding='utf-8') as f:
                writer = csv.writer(f, lineterminator='\n')
                writer.writerow(GROUND_TRUTH_COLUMNS)
                writer.writerows(record.as_row() for record in self.records)
        except OSError as e:
            raise ExportError(f"{path}: {e.strerror or e}") from e


@dataclass(frozen=True)
class SynthSequence:
    """Rendered frames of a script and their ground truth."""
    name: str
    script: SynthScript
    frames: tuple = field(repr=False)
    log: GroundTruthLog = field(repr=False)

    def manifest(self, out_dir, native_fps=10.0, skip_frames=0):
        return DatasetManifest(
            name=self.name,
            frames_dir=Path(out_dir),
            native_fps=native_fps,
            target_fps=min(10.0, native_fps),
            skip_frames=skip_frames,
            frame_pattern=FRAME_GLOB,
            notes=f'synthetic {self.script.kind} sequence, '
                  f'seed {self.script.texture_seed}',
        )

    def write(self, out_dir, native_fps=10.0, skip_frames=0):
        """
        Write P5 frames, the ground-truth table and a manifest to out_dir.

        Frame files left in out_dir by an earlier, longer sequence are
        removed first.

        Returns:
            Path: The manifest file.

        Raises:
            ExportError: If out_dir cannot be written.
        """
        out_dir = Path(out_dir)
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ExportError(f"{out_dir}: {e.strerror or e}") from e
        stale = sorted(out_dir.glob(FRAME_GLOB))
        try:
            for path in stale:
                path.unlink()
        except OSError as e:
            raise ExportError(f"{e.filename}: {e.strerror or e}") from e
        if stale:
            logger.debug("Removed %d old frames from %s", len(stale), out_dir)
        for t, frame in enumerate(self.frames):
            save_frame(out_dir / FRAME_NAME.format(t), frame)
        self.log.write(out_dir / GROUND_TRUTH_FILE)

        manifest_path = out_dir / f'{self.name}.manifest'
        text = self.manifest(out_dir, native_fps, skip_frames).to_text(frames_dir='.')  # noqa
        try:
            manifest_path.write_text(text, encoding='utf-8')
        except OSError as e:
            raise ExportError(f"{manifest_path}: {e.strerror or e}") from e
        logger.info("Wrote %d frames of '%s' to %s",
                    len(self.frames), self.name, out_dir)
        return manifest_path


def _perturb_blocks(scene, base, fraction, rng):
    height, width = scene.shape
    cols, rows = width // BLOCK_SIZE, height // BLOCK_SIZE
    count = int(math.floor(fraction * cols * rows + 0.5))
    if count == 0:
        return scene, ()
    targets = np.sort(rng.choice(cols * rows, size=count, replace=False))
    sources_x = rng.integers(0, width - BLOCK_SIZE + 1, size=count)
    sources_y = rng.integers(0, height - BLOCK_SIZE + 1, size=count)
    scene = scene.copy()
    for target, sx, sy in zip(targets, sources_x, sources_y):
        by, bx = divmod(int(target), cols)
        scene[by * BLOCK_SIZE:(by + 1) * BLOCK_SIZE,
              bx * BLOCK_SIZE:(bx + 1) * BLOCK_SIZE] = \
            base[sy:sy + BLOCK_SIZE, sx:sx + BLOCK_SIZE]
    return scene, tuple(
        (int(t) % cols, int(t) // cols) for t in targets)


def generate(script, name=None):
    """
    Render a script.

    Args:
        script (SynthScript): The script; generation is a pure function of
                              it.
        name (str | None): Dataset name; defaults to the script kind.

    Returns:
        SynthSequence: Frames on the 8-bit grid, so writing and reloading
        them is lossless, and the ground-truth log with one record per
        adjacent pair.
    """
    texture_rng, noise_rng, motion_rng, ambient_rng = (
        np.random.default_rng(s)
        for s in np.random.SeedSequence(script.texture_seed).spawn(4))
    swing = AMBIENT_SWING * script.luminance_amplitude \
        if script.kind == 'mixed' else 0.0
    dx, dy = script.motion_px_per_frame if script.kind in MOTION_KINDS else (0.0, 0.0)  # noqa
    reach = (dx * (script.n_frames - 1), dy * (script.n_frames - 1))
    texture = ValueNoiseTexture(texture_rng, script.width, script.height, reach)  # noqa

    origin = texture.render(script.width, script.height)
    low, high = origin.min(), origin.max()
    scale = (TEXTURE_RANGE[1] - TEXTURE_RANGE[0]) / max(high - low, 1e-12)

    def shaded(raw):
        return np.clip(TEXTURE_RANGE[0] + (raw - low) * scale, 0.0, 1.0)

    motion = Homography.from_translation(dx, dy) \
        if (dx, dy) != (0.0, 0.0) else Homography.identity()
    frames, records = [], []
    previous_mean = None
    for t in range(script.n_frames):
        base = shaded(texture.render(script.width, script.height, script.shift(t)))  # noqa
        scene, blocks = base, ()
        if script.kind == 'mixed':
            scene, blocks = _perturb_blocks(
                base, base, script.local_motion_fraction, motion_rng)
        image = script.gain(t) * scene
        if swing > 0:
            image = image + ambient_rng.uniform(-swing, swing)
        if script.blur_sigma > 0:
            image = ndimage.gaussian_filter(
                image, script.blur_sigma, mode='mirror')
        if script.noise_sigma > 0:
            image = image + noise_rng.normal(0.0, script.noise_sigma, image.shape)  # noqa
        clamped = GrayFrame(np.clip(image, 0.0, 1.0))
        frame = GrayFrame(quantize(clamped) / 255.0)
        frames.append(frame)
        mean = float(frame.pixels.mean())

        if previous_mean is not None:
            records.append(GroundTruthRecord(
                pair_index=t,
                true_d_luminance=abs(mean - previous_mean),
                homography=motion,
                perturbed_blocks=blocks,
            ))
        previous_mean = mean

    logger.debug("Rendered %d %s frames at %dx%d", script.n_frames,
                 script.kind, script.width, script.height)
    return SynthSequence(
        name=name or script.kind,
        script=script,
        frames=tuple(frames),
        log=GroundTruthLog(tuple(records)),
    )


PRESETS = {
    'forestlike': dict(kind='mixed', luminance_amplitude=0.2,
                       local_motion_fraction=0.15, noise_sigma=0.01),
    'officelike': dict(kind='translate', motion_px_per_frame=(0.2, 0.0),
                       noise_sigma=0.01),
    'simlike': dict(kind='mixed', luminance_amplitude=0.2,
                    local_motion_fraction=0.15, noise_sigma=0.0,
                    blur_sigma=1.5),
}


def corpus(preset, seed=0, drift_px=None, **overrides):
    """
    Render one of the reference corpora, 100 frames at 320x240.

    `forestlike` flickers and has moving foliage-like blocks, `officelike`
    is a static scene under a slow 0.2 px/frame drift and `simlike` is
    forestlike seen through a noise-free, blurring camera.

    Args:
        preset (str): forestlike, officelike or simlike.
        seed (int): Texture seed.
        drift_px (float | None): Horizontal drift replacing the preset's.
        **overrides: Any other SynthScript field.

    Raises:
        InvalidScript: On an unknown preset or invalid override.
    """
    try:
        params = dict(PRESETS[preset])
    except KeyError:
        raise InvalidScript(
            f"Unknown preset '{preset}'; choose from {', '.join(PRESETS)}")
    params.update(texture_seed=seed)
    params.update(
        {key: value for key, value in overrides.items() if value is not None})
    if drift_px is not None:
        params['motion_px_per_frame'] = (drift_px, 0.0)
    try:
        script = SynthScript(**params)
    except TypeError as e:
        raise InvalidScript(str(e))
    return generate(script, name=preset)
