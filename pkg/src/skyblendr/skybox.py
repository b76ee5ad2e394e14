"""Sky template handling and background rendering.

The template is a flat, edge-tileable sky image.  A virtual camera sees a
centered crop of it (``crop_factor`` of the template size), mapped onto the
output frame by a similarity transform; per-frame motion shifts that view,
and out-of-bounds taps wrap around so the sky tiles seamlessly.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .imaging import _as_image, warp_similarity
from .transforms import SimilarityTransform


def mirror_tile(frame):
    """Return a 2x2 mirrored tiling of the frame.  The result is seamlessly
    periodic, which makes arbitrary images safe to wrap."""
    frame = _as_image(frame)
    top = np.concatenate([frame, frame[:, ::-1]], axis=1)
    return np.ascontiguousarray(np.concatenate([top, top[::-1, :]], axis=0))


@dataclass(frozen=True)
class SkyBoxTemplate:
    image: np.ndarray
    crop_factor: float = 0.5

    def __post_init__(self):
        img = _as_image(self.image)
        if img.ndim != 3 or img.shape[2] != 3:
            raise ValueError(f"template must be an RGB image, got shape {img.shape}")
        object.__setattr__(self, "image", img)
        if not 0.0 < self.crop_factor <= 1.0:
            raise ValueError(
                f"crop_factor must be in (0, 1], got {self.crop_factor}"
            )

    @classmethod
    def load(cls, path, crop_factor=0.5, mirror_pad=False):
        with Image.open(path) as src:
            arr = np.asarray(src)
            if arr.ndim != 3 or arr.dtype not in (np.uint8, np.uint16):
                arr = np.asarray(src.convert("RGB"))
        if arr.shape[2] == 4:
            arr = arr[:, :, :3]
        scale = 65535.0 if arr.dtype == np.uint16 else 255.0
        image = np.ascontiguousarray(arr, dtype=np.float64) / scale
        if mirror_pad:
            image = mirror_tile(image)
        return cls(image=image, crop_factor=crop_factor)


@dataclass(frozen=True)
class ViewportSpec:
    out_w: int
    out_h: int

    def __post_init__(self):
        if self.out_w <= 0 or self.out_h <= 0:
            raise ValueError(
                f"viewport dims must be positive, got {self.out_w}x{self.out_h}"
            )


def center_crop_transform(template, view):
    """Similarity mapping template coordinates to frame coordinates so the
    centered crop_factor-sized region fills the viewport.

    Scale is uniform and set by width (s = out_w / (crop_factor * W_B));
    the template center maps to the viewport center.
    """
    h, w = template.image.shape[:2]
    if w < 2 * view.out_w or h < 2 * view.out_h:
        warnings.warn(
            f"sky template {w}x{h} is smaller than twice the {view.out_w}x"
            f"{view.out_h} output; expect visible resampling blur",
            stacklevel=2,
        )
    s = view.out_w / (template.crop_factor * w)
    return SimilarityTransform(np.array([
        [s, 0.0, view.out_w / 2.0 - s * (w / 2.0)],
        [0.0, s, view.out_h / 2.0 - s * (h / 2.0)],
        [0.0, 0.0, 1.0],
    ]))


def render_background(template, m_tilde, view):
    """Warp the template through the accumulated motion transform onto the
    viewport, wrapping at the borders so the sky tiles."""
    return warp_similarity(
        template.image, m_tilde, view.out_w, view.out_h, wrap=True
    )
