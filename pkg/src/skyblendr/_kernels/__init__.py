"""Hot-kernel backend selection.

Prefers the compiled Cython extension and silently falls back to the pure
NumPy implementations when the extension is missing (e.g. a source checkout
without a compiler).  Set ``SKYBLENDR_BACKEND=numpy`` to force the fallback,
which is what the backend benchmark and parity tests use.
"""

import os

from . import numpy_backend

_FORCED = os.environ.get("SKYBLENDR_BACKEND", "").lower()
if _FORCED not in ("", "compiled", "numpy"):
    raise ValueError(
        f"SKYBLENDR_BACKEND must be 'compiled' or 'numpy', got {_FORCED!r}"
    )

if _FORCED in ("", "compiled"):
    try:
        from . import _core as _impl
        BACKEND = "compiled"
    except ImportError:
        if _FORCED == "compiled":
            raise
        _impl = numpy_backend
        BACKEND = "numpy"
else:
    _impl = numpy_backend
    BACKEND = "numpy"

box_filter = _impl.box_filter
resize_bilinear = _impl.resize_bilinear
warp_affine = _impl.warp_affine
shi_tomasi_response = _impl.shi_tomasi_response
lk_pyramid = _impl.lk_pyramid
composite_over = _impl.composite_over
sky_candidates = _impl.sky_candidates
channel_sums = _impl.channel_sums
add_channel_offsets = _impl.add_channel_offsets
shift_scale_clip = _impl.shift_scale_clip
rec601_gray = _impl.rec601_gray
region_sums = _impl.region_sums


def compiled_backend():
    """Return the compiled module, or None when only the fallback exists."""
    try:
        from . import _core
        return _core
    except ImportError:
        return None
