import numpy as np

from scenestats.pixbuf import GrayFrame
from scenestats.synth import ValueNoiseTexture


def textured_frame(seed=0, width=320, height=240, shift=(0.0, 0.0)):
    """A value-noise frame; `shift` moves the content by (dx, dy) px."""
    rng = np.random.default_rng(seed)
    texture = ValueNoiseTexture(rng, width, height, reach=(32.0, 32.0))
    origin = texture.render(width, height)
    low, high = origin.min(), origin.max()
    raw = texture.render(width, height, shift)
    return GrayFrame(np.clip(0.1 + 0.8 * (raw - low) / (high - low), 0, 1))


def constant_frame(value, width=64, height=48):
    return GrayFrame(np.full((height, width), value))


def half_frame(width=64, height=48):
    """Left half 0.0, right half 1.0."""
    pixels = np.zeros((height, width))
    pixels[:, width // 2:] = 1.0
    return GrayFrame(pixels)
