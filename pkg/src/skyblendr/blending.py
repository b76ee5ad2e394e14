"""Foreground harmonization and sky compositing.

The matte drives a pixel-wise linear blend of the foreground frame with the
rendered sky.  Before blending, the foreground is recolored toward the sky's
regional color tone and relit so its brightness range follows the original
frame.  Optional rain and haze layers are screen-blended on top.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .imaging import (
    _as_image,
    discover_image_sequence,
    load_frame,
    resize_bilinear,
)


@dataclass(frozen=True)
class HarmonizationParams:
    alpha: float = 0.5
    beta: float = 1.0
    sky_region_threshold: float = 0.5

    def __post_init__(self):
        if self.alpha < 0.0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.beta <= 0.0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if not 0.0 < self.sky_region_threshold < 1.0:
            raise ValueError(
                f"sky_region_threshold must be in (0, 1), "
                f"got {self.sky_region_threshold}"
            )


@dataclass(frozen=True)
class WeatherLayer:
    kind: str
    frames: tuple
    opacity: float

    def __post_init__(self):
        if self.kind not in ("rain", "haze"):
            raise ValueError(f"kind must be 'rain' or 'haze', got {self.kind!r}")
        if not 0.0 <= self.opacity <= 1.0:
            raise ValueError(f"opacity must be in [0, 1], got {self.opacity}")
        frames = tuple(_as_image(f, "layer frame") for f in self.frames)
        if not frames:
            raise ValueError("weather layer needs at least one frame")
        for f in frames:
            if f.ndim != 3 or f.shape[2] != 3:
                raise ValueError(
                    f"layer frames must be RGB, got shape {f.shape}"
                )
        object.__setattr__(self, "frames", frames)

    @classmethod
    def haze(cls, opacity, gray=0.8):
        """Uniform light-gray veil; a tiny constant frame that stretches to
        any output size."""
        return cls(kind="haze", frames=(np.full((2, 2, 3), gray),),
                   opacity=opacity)

    @classmethod
    def rain_from_dir(cls, directory, opacity):
        """Rain streak animation from a numbered image sequence, cycled by
        frame index."""
        entries = discover_image_sequence(directory)
        if not entries:
            raise ValueError(f"no numbered images found in {directory}")
        return cls(kind="rain",
                   frames=tuple(load_frame(p) for _, p in entries),
                   opacity=opacity)


def _channel_means(frame):
    """Per-channel mean over all pixels.  Shared by region statistics and
    relighting so identical inputs give bit-identical means."""
    return _kernels.channel_sums(frame) / (frame.shape[0] * frame.shape[1])


def region_means(frame, background, matte, threshold):
    """Per-channel means of the foreground region of the frame (matte below
    threshold), the sky region of the background (matte at or above it), and
    the whole frame.  An empty region falls back to the global mean of its
    image."""
    frame = _as_image(frame, "frame")
    background = _as_image(background, "background")
    matte = _as_image(matte, "matte")
    if frame.shape != background.shape or frame.shape[:2] != matte.shape:
        raise ValueError(
            f"dimension mismatch: frame {frame.shape}, background "
            f"{background.shape}, matte {matte.shape}"
        )
    fg_sums, sky_sums, tot_sums, n_sky = _kernels.region_sums(
        frame, background, matte, threshold)
    total = matte.size
    mu_frame = tot_sums / total
    if n_sky == 0 or n_sky == total:
        mu_fg = mu_frame
        mu_sky = _channel_means(background)
    else:
        mu_fg = fg_sums / (total - n_sky)
        mu_sky = sky_sums / n_sky
    return mu_fg, mu_sky, mu_frame


def recolor(frame, means, alpha):
    """Shift the frame toward the sky color tone: add alpha times the gap
    between the sky-region and foreground-region means.  Unclamped; clamping
    waits until after relighting."""
    mu_fg, mu_sky, _ = means
    offsets = alpha * (np.asarray(mu_sky, dtype=np.float64)
                       - np.asarray(mu_fg, dtype=np.float64))
    return _kernels.add_channel_offsets(_as_image(frame, "frame"),
                                        np.ascontiguousarray(offsets))


def relight(frame, mu_target, beta):
    """Scale the frame by beta after restoring its mean to ``mu_target``,
    then clamp to [0, 1]."""
    frame = _as_image(frame, "frame")
    shift = np.asarray(mu_target, dtype=np.float64) - _channel_means(frame)
    return _kernels.shift_scale_clip(frame, np.ascontiguousarray(shift), beta)


def alpha_blend(frame, background, matte):
    """Pixel-wise convex blend: matte 0 keeps the frame, matte 1 takes the
    background."""
    frame = _as_image(frame, "frame")
    background = _as_image(background, "background")
    matte = _as_image(matte, "matte")
    if frame.shape != background.shape or frame.shape[:2] != matte.shape:
        raise ValueError(
            f"dimension mismatch: frame {frame.shape}, background "
            f"{background.shape}, matte {matte.shape}"
        )
    return _kernels.composite_over(frame, background, matte)


def screen_blend(base, layer, frame_index):
    """Screen-blend one weather layer frame (cycled by index, resized to the
    base dimensions) over the base image."""
    base = _as_image(base, "base")
    overlay = layer.frames[frame_index % len(layer.frames)]
    h, w = base.shape[:2]
    if overlay.shape[:2] != (h, w):
        overlay = resize_bilinear(overlay, w, h)
    return 1.0 - (1.0 - base) * (1.0 - layer.opacity * overlay)


def harmonize_and_compose(frame, background, matte, params, layers=(),
                          frame_index=0):
    """Full per-frame composite: region statistics, recolor, relight, alpha
    blend, then each weather layer in order, with a final clamp."""
    means = region_means(frame, background, matte, params.sky_region_threshold)
    adjusted = recolor(frame, means, params.alpha)
    adjusted = relight(adjusted, means[2], params.beta)
    out = alpha_blend(adjusted, background, matte)
    for layer in layers:
        out = screen_blend(out, layer, frame_index)
    return np.clip(out, 0.0, 1.0, out=out)
