"""Image containers, resampling, pyramids, and box filtering.

Images are plain NumPy float64 arrays with values in [0, 1]:

* Frame: shape (H, W, 3), channel-interleaved RGB.
* GrayImage / Matte: shape (H, W).

8-bit interchange is ``v / 255`` on the way in and ``round(v * 255)``
clamped on the way out.  Resampling uses the align-corners convention
(pixel centers at integer coordinates; output index ``i`` samples
``i * (in - 1) / (out - 1)``, a singleton axis samples the input center),
which makes same-size resizing exact.
"""

import re
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.ndimage import correlate1d

from . import _kernels
from .transforms import SimilarityTransform

MIN_PYRAMID_DIM = 16
PYRAMID_KERNEL = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff", ".webp"}

_TRAILING_INT = re.compile(r"(\d+)$")


def _as_image(arr, name="image"):
    out = np.ascontiguousarray(arr, dtype=np.float64)
    if out.ndim not in (2, 3):
        raise ValueError(f"{name} must be 2-D or 3-D, got shape {out.shape}")
    if out.shape[0] < 1 or out.shape[1] < 1:
        raise ValueError(f"{name} must be at least 1x1, got shape {out.shape}")
    return out


def frame_from_uint8(data):
    """Convert an (H, W, 3) uint8 array to a [0, 1] float frame."""
    return np.asarray(data, dtype=np.float64) / 255.0


def frame_to_uint8(frame):
    """Convert a [0, 1] float image back to uint8, rounding and clamping."""
    return np.clip(np.rint(np.asarray(frame) * 255.0), 0.0, 255.0).astype(np.uint8)


def load_frame(path):
    """Load a raster image file as an RGB [0, 1] frame."""
    with Image.open(path) as src:
        rgb = src.convert("RGB")
        return frame_from_uint8(np.asarray(rgb))


def discover_image_sequence(directory):
    """Numbered image files in a directory as (index, path) pairs, sorted by
    the trailing integer of the file stem.  Other files are ignored."""
    entries = []
    for path in Path(directory).iterdir():
        if not path.is_file() or path.suffix.lower() not in IMAGE_EXTENSIONS:
            continue
        match = _TRAILING_INT.search(path.stem)
        if match is None:
            continue
        entries.append((int(match.group(1)), path))
    entries.sort(key=lambda e: (e[0], e[1].name))
    return entries


def to_gray(frame):
    """Rec.601 luminance: 0.299 R + 0.587 G + 0.114 B."""
    f = _as_image(frame, "frame")
    if f.ndim != 3 or f.shape[2] != 3:
        raise ValueError(f"frame must be RGB, got shape {f.shape}")
    return _kernels.rec601_gray(f)


def blue_channel(frame):
    """Blue channel of a frame (the matte-refinement guidance image)."""
    return np.ascontiguousarray(_as_image(frame, "frame")[:, :, 2])


def resize_bilinear(src, out_w, out_h):
    """Bilinear resize to ``out_w`` x ``out_h`` (align-corners sampling)."""
    if out_w < 1 or out_h < 1:
        raise ValueError(f"target size must be positive, got {out_w}x{out_h}")
    return _kernels.resize_bilinear(_as_image(src, "src"), out_h, out_w)


def box_filter(src, radius):
    """Border-aware windowed mean: the window shrinks at image edges."""
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    img = _as_image(src, "src")
    if img.ndim != 2:
        raise ValueError("box_filter expects a single-channel image")
    return _kernels.box_filter(img, int(radius))


def build_pyramid(src, max_levels):
    """Gaussian pyramid: level k+1 is the binomial-smoothed level k decimated
    to floor-halved dimensions.  Stops before any level drops below 16x16."""
    if max_levels < 1:
        raise ValueError(f"max_levels must be >= 1, got {max_levels}")
    level = _as_image(src, "src")
    if level.ndim != 2:
        raise ValueError("pyramids are built from single-channel images")
    levels = [level]
    while len(levels) < max_levels:
        h, w = levels[-1].shape
        nh, nw = h // 2, w // 2
        if nh < MIN_PYRAMID_DIM or nw < MIN_PYRAMID_DIM:
            break
        smoothed = correlate1d(levels[-1], PYRAMID_KERNEL, axis=0, mode="reflect")
        # Rows can be decimated before the horizontal pass (rows smooth
        # independently), halving its work without changing any kept value.
        smoothed = correlate1d(smoothed[: 2 * nh : 2], PYRAMID_KERNEL,
                               axis=1, mode="reflect")
        levels.append(np.ascontiguousarray(smoothed[:, : 2 * nw : 2]))
    return levels


def warp_similarity(src, transform, out_w, out_h, wrap=False):
    """Inverse-mapping warp of ``src`` through a similarity transform.

    Each output pixel p samples the source at ``transform^-1 @ p`` with
    bilinear interpolation.  With ``wrap`` the source tiles modulo its size
    (each interpolation tap wraps independently, so the seam blends);
    otherwise out-of-bounds samples clamp to the edge.
    """
    if out_w < 1 or out_h < 1:
        raise ValueError(f"target size must be positive, got {out_w}x{out_h}")
    if isinstance(transform, SimilarityTransform):
        inv = transform.inverse().matrix
    else:
        m = np.asarray(transform, dtype=np.float64)
        if m.shape != (3, 3):
            raise ValueError(f"transform must be 3x3, got {m.shape}")
        if abs(np.linalg.det(m[:2, :2])) <= 1e-18:
            raise ValueError("transform is not invertible")
        inv = np.linalg.inv(m)
    return _kernels.warp_affine(_as_image(src, "src"), inv, out_h, out_w, bool(wrap))
