"""Pure-NumPy implementations of the hot kernels.

This module is the reference backend: the compiled extension in ``_core.pyx``
implements the same operations with the same conventions and must agree with
these functions to floating-point noise.  All images are C-contiguous float64
arrays, 2-D single channel or 3-D channel-interleaved.

Conventions shared by both backends:

* ``resize_bilinear`` uses align-corners sampling: pixel centers sit at
  integer coordinates, output index ``i`` samples the source at
  ``i * (in_dim - 1) / (out_dim - 1)``; a singleton output dimension samples
  the source center ``(in_dim - 1) / 2``.
* ``warp_affine`` is an inverse-mapping warp: output pixel ``(x, y)`` samples
  the source at ``inv @ (x, y, 1)`` with bilinear interpolation.  ``wrap``
  tiles the source modulo its size (each of the four taps wraps
  independently); otherwise sampling clamps to the edge.
* ``box_filter`` is a border-aware windowed mean: the window shrinks at the
  image boundary instead of padding.
"""

import numpy as np


def box_filter(src, radius):
    """Mean of ``src`` over (2r+1)^2 windows clipped to the image bounds."""
    if radius == 0:
        return src.copy()
    h, w = src.shape
    # Zero-padded integral image: window sums via four-corner differences.
    integral = np.zeros((h + 1, w + 1), dtype=np.float64)
    np.cumsum(src, axis=0, out=integral[1:, 1:])
    np.cumsum(integral[1:, 1:], axis=1, out=integral[1:, 1:])

    y0 = np.clip(np.arange(h) - radius, 0, h)
    y1 = np.clip(np.arange(h) + radius + 1, 0, h)
    x0 = np.clip(np.arange(w) - radius, 0, w)
    x1 = np.clip(np.arange(w) + radius + 1, 0, w)

    sums = (
        integral[y1[:, None], x1[None, :]]
        - integral[y0[:, None], x1[None, :]]
        - integral[y1[:, None], x0[None, :]]
        + integral[y0[:, None], x0[None, :]]
    )
    counts = (y1 - y0)[:, None] * (x1 - x0)[None, :]
    return sums / counts


def _axis_positions(in_dim, out_dim):
    if out_dim == 1:
        return np.full(1, (in_dim - 1) / 2.0)
    return np.arange(out_dim) * ((in_dim - 1) / (out_dim - 1))


def resize_bilinear(src, out_h, out_w):
    """Align-corners bilinear resize of a 2-D or 3-D image."""
    in_h, in_w = src.shape[:2]
    if out_h == in_h and out_w == in_w:
        return src.copy()
    ys = _axis_positions(in_h, out_h)
    xs = _axis_positions(in_w, out_w)
    y0 = np.minimum(ys.astype(np.int64), in_h - 1)
    x0 = np.minimum(xs.astype(np.int64), in_w - 1)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    if src.ndim == 3:
        wy = wy[:, :, None]
        wx = wx[:, :, None]
    top = src[y0][:, x0] * (1.0 - wx) + src[y0][:, x1] * wx
    bot = src[y1][:, x0] * (1.0 - wx) + src[y1][:, x1] * wx
    return top * (1.0 - wy) + bot * wy


def warp_affine(src, inv, out_h, out_w, wrap):
    """Inverse-mapping bilinear warp; tiles or clamps out-of-bounds samples."""
    h, w = src.shape[:2]
    xs_out, ys_out = np.meshgrid(
        np.arange(out_w, dtype=np.float64),
        np.arange(out_h, dtype=np.float64),
    )
    xs = inv[0, 0] * xs_out + inv[0, 1] * ys_out + inv[0, 2]
    ys = inv[1, 0] * xs_out + inv[1, 1] * ys_out + inv[1, 2]

    if wrap:
        x0 = np.floor(xs).astype(np.int64)
        y0 = np.floor(ys).astype(np.int64)
        wx = xs - x0
        wy = ys - y0
        x0m = x0 % w
        x1m = (x0 + 1) % w
        y0m = y0 % h
        y1m = (y0 + 1) % h
    else:
        xs = np.clip(xs, 0.0, w - 1.0)
        ys = np.clip(ys, 0.0, h - 1.0)
        x0 = np.floor(xs).astype(np.int64)
        y0 = np.floor(ys).astype(np.int64)
        wx = xs - x0
        wy = ys - y0
        x0m = x0
        y0m = y0
        x1m = np.minimum(x0 + 1, w - 1)
        y1m = np.minimum(y0 + 1, h - 1)

    def sample(channel):
        v00 = channel[y0m, x0m]
        v01 = channel[y0m, x1m]
        v10 = channel[y1m, x0m]
        v11 = channel[y1m, x1m]
        return (1.0 - wy) * ((1.0 - wx) * v00 + wx * v01) + wy * (
            (1.0 - wx) * v10 + wx * v11
        )

    if src.ndim == 2:
        return sample(src)
    out = np.empty((out_h, out_w, src.shape[2]), dtype=np.float64)
    for c in range(src.shape[2]):
        out[:, :, c] = sample(src[:, :, c])
    return out


def shi_tomasi_response(gray):
    """Minimum-eigenvalue corner response (Sobel/8 gradients, 3x3 sums)."""
    h, w = gray.shape
    padded = np.pad(gray, 1, mode="edge")
    # Sobel derivative estimates, normalized to unit pixel step.
    gx = (
        (padded[:-2, 2:] + 2.0 * padded[1:-1, 2:] + padded[2:, 2:])
        - (padded[:-2, :-2] + 2.0 * padded[1:-1, :-2] + padded[2:, :-2])
    ) / 8.0
    gy = (
        (padded[2:, :-2] + 2.0 * padded[2:, 1:-1] + padded[2:, 2:])
        - (padded[:-2, :-2] + 2.0 * padded[:-2, 1:-1] + padded[:-2, 2:])
    ) / 8.0

    def sum3(img):
        p = np.pad(img, 1, mode="edge")
        return (
            p[:-2, :-2] + p[:-2, 1:-1] + p[:-2, 2:]
            + p[1:-1, :-2] + p[1:-1, 1:-1] + p[1:-1, 2:]
            + p[2:, :-2] + p[2:, 1:-1] + p[2:, 2:]
        )

    sxx = sum3(gx * gx)
    syy = sum3(gy * gy)
    sxy = sum3(gx * gy)
    half_trace = 0.5 * (sxx + syy)
    disc = np.sqrt(np.maximum(0.25 * (sxx - syy) ** 2 + sxy * sxy, 0.0))
    return half_trace - disc


def _sample_windows(img, cx, cy, offs_x, offs_y):
    """Bilinear samples of clamp-padded ``img`` at per-point window grids."""
    h, w = img.shape
    xs = np.clip(cx[:, None] + offs_x[None, :], 0.0, w - 1.0)
    ys = np.clip(cy[:, None] + offs_y[None, :], 0.0, h - 1.0)
    x0 = xs.astype(np.int64)
    y0 = ys.astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    wx = xs - x0
    wy = ys - y0
    v00 = img[y0, x0]
    v01 = img[y0, x1]
    v10 = img[y1, x0]
    v11 = img[y1, x1]
    return (1.0 - wy) * ((1.0 - wx) * v00 + wx * v01) + wy * (
        (1.0 - wx) * v10 + wx * v11
    )


def lk_pyramid(prev_levels, curr_levels, pts, window, max_iters, eps, min_eig):
    """Coarse-to-fine iterative Lucas-Kanade flow for sparse points.

    Returns ``(flow, ok)`` where ``flow[i]`` is the level-0 displacement of
    ``pts[i]`` and ``ok[i]`` is 0 for points dropped because their normal
    matrix was near-singular at some level or their final window left the
    image.
    """
    n = len(pts)
    flow = np.zeros((n, 2), dtype=np.float64)
    ok = np.ones(n, dtype=np.uint8)
    if n == 0:
        return flow, ok

    half = window // 2
    offs = np.arange(-half, half + 1, dtype=np.float64)
    offs_x = np.tile(offs, window)
    offs_y = np.repeat(offs, window)
    # One extended (window+2)^2 patch per point yields the tracking window
    # and, by central differences inside it, both spatial gradients.
    ew = window + 2
    offs_e = np.arange(-half - 1, half + 2, dtype=np.float64)
    eoffs_x = np.tile(offs_e, ew)
    eoffs_y = np.repeat(offs_e, ew)
    guess = np.zeros((n, 2), dtype=np.float64)

    n_levels = len(prev_levels)
    for level in range(n_levels - 1, -1, -1):
        prev = prev_levels[level]
        curr = curr_levels[level]
        scale = 1.0 / (1 << level)
        px = pts[:, 0] * scale
        py = pts[:, 1] * scale

        ext = _sample_windows(prev, px, py, eoffs_x, eoffs_y).reshape(n, ew, ew)
        patch = ext[:, 1:-1, 1:-1].reshape(n, -1)
        ix = (0.5 * (ext[:, 1:-1, 2:] - ext[:, 1:-1, :-2])).reshape(n, -1)
        iy = (0.5 * (ext[:, 2:, 1:-1] - ext[:, :-2, 1:-1])).reshape(n, -1)
        gxx = np.sum(ix * ix, axis=1)
        gxy = np.sum(ix * iy, axis=1)
        gyy = np.sum(iy * iy, axis=1)
        half_trace = 0.5 * (gxx + gyy)
        disc = np.sqrt(np.maximum(0.25 * (gxx - gyy) ** 2 + gxy * gxy, 0.0))
        ok[(half_trace - disc) < min_eig] = 0
        det = gxx * gyy - gxy * gxy
        det[det == 0.0] = 1.0  # masked by ok anyway

        nu = np.zeros((n, 2), dtype=np.float64)
        active = ok.astype(bool).copy()
        for _ in range(max_iters):
            if not active.any():
                break
            idx = np.nonzero(active)[0]
            moved = _sample_windows(
                curr,
                px[idx] + guess[idx, 0] + nu[idx, 0],
                py[idx] + guess[idx, 1] + nu[idx, 1],
                offs_x,
                offs_y,
            )
            diff = patch[idx] - moved
            bx = np.sum(diff * ix[idx], axis=1)
            by = np.sum(diff * iy[idx], axis=1)
            inv_det = 1.0 / det[idx]
            step_x = (gyy[idx] * bx - gxy[idx] * by) * inv_det
            step_y = (gxx[idx] * by - gxy[idx] * bx) * inv_det
            nu[idx, 0] += step_x
            nu[idx, 1] += step_y
            active[idx] = np.hypot(step_x, step_y) >= eps

        guess = 2.0 * (guess + nu) if level > 0 else guess + nu

    flow[:] = guess
    h0, w0 = prev_levels[0].shape
    fx = pts[:, 0] + flow[:, 0]
    fy = pts[:, 1] + flow[:, 1]
    outside = (
        (fx - half < 0.0)
        | (fy - half < 0.0)
        | (fx + half > w0 - 1.0)
        | (fy + half > h0 - 1.0)
    )
    ok[outside] = 0
    return flow, ok


def composite_over(fg, bg, alpha):
    """Per-pixel convex blend ``(1 - alpha) * fg + alpha * bg``."""
    a = alpha[:, :, None]
    return (1.0 - a) * fg + a * bg


def _neighborhood_max(values):
    """Sliding 3x3 maximum with edge replication, as two separable passes."""
    hmax = values.copy()
    np.maximum(hmax[:, 1:], values[:, :-1], out=hmax[:, 1:])
    np.maximum(hmax[:, :-1], values[:, 1:], out=hmax[:, :-1])
    out = hmax.copy()
    np.maximum(out[1:], hmax[:-1], out=out[1:])
    np.maximum(out[:-1], hmax[1:], out=out[:-1])
    return out


def sky_candidates(response, matte):
    """Row-major coordinates and scores of sky pixels (matte > 0.9) whose
    response is positive and a maximum of its 3x3 neighbourhood
    (edge-replicated)."""
    candidate = (matte > 0.9) & (response > 0.0) \
        & (response >= _neighborhood_max(response))
    ys, xs = np.nonzero(candidate)
    return ys, xs, response[ys, xs]


def channel_sums(img):
    """Per-channel sums accumulated in row-major pixel order."""
    return np.add.reduce(img.reshape(-1, img.shape[2]), axis=0)


def add_channel_offsets(img, offsets):
    """Add one offset per channel to every pixel."""
    return img + offsets


def shift_scale_clip(img, offsets, scale):
    """Per-pixel (value + channel offset) * scale, clamped to [0, 1]."""
    out = img + offsets
    out *= scale
    return np.clip(out, 0.0, 1.0, out=out)


def rec601_gray(img):
    """Rec.601 luminance: 0.299 R + 0.587 G + 0.114 B."""
    return 0.299 * img[:, :, 0] + 0.587 * img[:, :, 1] + 0.114 * img[:, :, 2]


def region_sums(frame, bg, matte, threshold):
    """One-pass regional sums in row-major order: frame sums where the matte
    is below threshold, background sums where it is not, whole-frame sums,
    and the sky-region pixel count."""
    mask = matte.ravel() >= threshold
    frame_flat = frame.reshape(-1, frame.shape[2])
    bg_flat = bg.reshape(-1, bg.shape[2])
    fg = np.add.reduce(frame_flat[~mask], axis=0)
    sky = np.add.reduce(bg_flat[mask], axis=0)
    tot = np.add.reduce(frame_flat, axis=0)
    return fg, sky, tot, int(np.count_nonzero(mask))
