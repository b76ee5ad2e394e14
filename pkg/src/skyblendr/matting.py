"""Soft sky matte production.

A low-resolution coarse matte comes from a pluggable source: either the
built-in color/texture/height heuristic or a directory of matte files
produced by an external model.  The coarse matte is then upsampled and
refined with a guided filter whose guidance image is the frame's blue
channel, and clamped to [0, 1].
"""

import os
from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy import ndimage

from . import imaging
from .imaging import blue_channel, box_filter, resize_bilinear, to_gray


@dataclass(frozen=True)
class GuidedFilterParams:
    radius: int = 20
    epsilon: float = 0.01

    def __post_init__(self):
        if self.radius < 1:
            raise ValueError(f"radius must be >= 1, got {self.radius}")
        if self.epsilon <= 0.0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")


@dataclass(frozen=True)
class CoarseMatteWeights:
    """Logistic-score weights for the heuristic coarse matte."""

    blueness: float = 4.0
    smoothness: float = 2.0
    height: float = 2.0
    bias: float = -1.5


@dataclass(frozen=True)
class MatteSource:
    """Where coarse mattes come from: ``heuristic`` or ``file-sequence``."""

    kind: str = "heuristic"
    directory: str = ""
    pattern: str = "matte_%06d.png"

    def __post_init__(self):
        if self.kind not in ("heuristic", "file-sequence"):
            raise ValueError(f"unknown matte source kind: {self.kind!r}")
        if self.kind == "file-sequence" and not self.directory:
            raise ValueError("file-sequence matte source needs a directory")


def estimate_coarse_matte(frame_low, weights=CoarseMatteWeights()):
    """Heuristic sky score per pixel, squashed through a logistic.

    Score combines blueness (B - max(R, G)), local smoothness (1 minus the
    Sobel gradient magnitude of luminance, normalized to [0, 1]), and image
    height (1 - y/H, skies sit high), with fixed weights and bias.
    """
    frame = imaging._as_image(frame_low, "frame_low")
    h = frame.shape[0]
    blueness = frame[:, :, 2] - np.maximum(frame[:, :, 0], frame[:, :, 1])
    lum = to_gray(frame)
    # Sobel normalized so a unit step edge maps to gradient 1.
    gx = ndimage.sobel(lum, axis=1, mode="nearest") / 4.0
    gy = ndimage.sobel(lum, axis=0, mode="nearest") / 4.0
    grad = np.minimum(np.hypot(gx, gy), 1.0)
    y_term = 1.0 - np.arange(h, dtype=np.float64)[:, None] / h
    score = (
        weights.blueness * blueness
        + weights.smoothness * (1.0 - grad)
        + weights.height * y_term
        + weights.bias
    )
    return 1.0 / (1.0 + np.exp(-score))


_GRAY_SCALES = {"L": 255.0, "I": 65535.0, "I;16": 65535.0}


def load_matte(source, frame_index, expected_w, expected_h):
    """Load the matte for one frame from a file-sequence source.

    Accepts 8-bit or 16-bit single-channel images, scales them to [0, 1],
    and resizes bilinearly when the file size differs from the frame size.
    """
    name = source.pattern % frame_index
    path = os.path.join(source.directory, name)
    if not os.path.isfile(path):
        raise FileNotFoundError(
            f"matte for frame {frame_index} not found: {path}"
        )
    with Image.open(path) as img:
        bands = img.getbands()
        if len(bands) != 1:
            raise ValueError(
                f"matte file must be single-channel, got {len(bands)} "
                f"channels ({img.mode}) in {path}"
            )
        if img.mode not in _GRAY_SCALES:
            raise ValueError(
                f"unsupported matte image mode {img.mode!r} in {path}"
            )
        data = np.asarray(img, dtype=np.float64) / _GRAY_SCALES[img.mode]
    if data.shape != (expected_h, expected_w):
        data = resize_bilinear(data, expected_w, expected_h)
    return np.clip(data, 0.0, 1.0)


def guided_filter(guide, src, params):
    """Edge-preserving local-linear filter of ``src`` guided by ``guide``.

    Output is intentionally not clamped; the caller decides.
    """
    guide = imaging._as_image(guide, "guide")
    src = imaging._as_image(src, "src")
    if guide.shape != src.shape:
        raise ValueError(
            f"guide and src dimensions differ: {guide.shape} vs {src.shape}"
        )
    r = params.radius
    mean_i = box_filter(guide, r)
    mean_p = box_filter(src, r)
    corr_ii = box_filter(guide * guide, r)
    corr_ip = box_filter(guide * src, r)
    var_i = corr_ii - mean_i * mean_i
    cov_ip = corr_ip - mean_i * mean_p
    a = cov_ip / (var_i + params.epsilon)
    b = mean_p - a * mean_i
    mean_a = box_filter(a, r)
    mean_b = box_filter(b, r)
    return mean_a * guide + mean_b


def refine_matte(coarse, frame_full, params):
    """Upsample the coarse matte to frame resolution and refine it with a
    guided filter on the frame's blue channel; clamp to [0, 1]."""
    frame = imaging._as_image(frame_full, "frame_full")
    h, w = frame.shape[:2]
    upsampled = resize_bilinear(coarse, w, h)
    refined = guided_filter(blue_channel(frame), upsampled, params)
    return np.clip(refined, 0.0, 1.0)
