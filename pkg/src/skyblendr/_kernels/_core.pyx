# cython: language_level=3
"""Compiled implementations of the hot kernels.

Mirrors ``numpy_backend`` operation for operation; see that module for the
shared sampling and border conventions.  Kept single-threaded so results are
independent of scheduling.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport floor, sqrt

cnp.import_array()


cdef inline double _bilin_clamp(const double[:, ::1] img, double x, double y,
                                Py_ssize_t w, Py_ssize_t h) noexcept nogil:
    cdef double fx = x
    cdef double fy = y
    if fx < 0.0:
        fx = 0.0
    elif fx > w - 1.0:
        fx = w - 1.0
    if fy < 0.0:
        fy = 0.0
    elif fy > h - 1.0:
        fy = h - 1.0
    cdef Py_ssize_t x0 = <Py_ssize_t>fx
    cdef Py_ssize_t y0 = <Py_ssize_t>fy
    cdef Py_ssize_t x1 = x0 + 1 if x0 + 1 < w else w - 1
    cdef Py_ssize_t y1 = y0 + 1 if y0 + 1 < h else h - 1
    cdef double wx = fx - x0
    cdef double wy = fy - y0
    return (1.0 - wy) * ((1.0 - wx) * img[y0, x0] + wx * img[y0, x1]) \
        + wy * ((1.0 - wx) * img[y1, x0] + wx * img[y1, x1])


def box_filter(const double[:, ::1] src, Py_ssize_t radius):
    cdef Py_ssize_t h = src.shape[0]
    cdef Py_ssize_t w = src.shape[1]
    out_arr = np.empty((h, w), dtype=np.float64)
    hsum_arr = np.empty((h, w), dtype=np.float64)
    colsum_arr = np.zeros(w, dtype=np.float64)
    cxcnt_arr = np.empty(w, dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[:, ::1] hsum = hsum_arr
    cdef double[::1] colsum = colsum_arr
    cdef double[::1] cxcnt = cxcnt_arr
    cdef Py_ssize_t x, y, lo, hi, add, sub
    cdef double s, cy
    if radius == 0:
        out_arr[...] = np.asarray(src)
        return out_arr
    with nogil:
        for y in range(h):
            hi = radius if radius < w - 1 else w - 1
            s = 0.0
            for x in range(hi + 1):
                s += src[y, x]
            hsum[y, 0] = s
            for x in range(1, w):
                if x + radius < w:
                    s += src[y, x + radius]
                if x - radius - 1 >= 0:
                    s -= src[y, x - radius - 1]
                hsum[y, x] = s
        # Window counts factor into per-row and per-column widths, and the
        # vertical pass keeps a sliding per-column sum vector so every loop
        # stays row-major.
        for x in range(w):
            lo = x - radius if x - radius > 0 else 0
            hi = x + radius if x + radius < w - 1 else w - 1
            cxcnt[x] = <double>(hi - lo + 1)
        hi = radius if radius < h - 1 else h - 1
        for y in range(hi + 1):
            for x in range(w):
                colsum[x] += hsum[y, x]
        cy = <double>(hi + 1)
        for x in range(w):
            out[0, x] = colsum[x] * (1.0 / (cy * cxcnt[x]))
        for y in range(1, h):
            add = y + radius
            sub = y - radius - 1
            if add < h and sub >= 0:
                for x in range(w):
                    colsum[x] += hsum[add, x]
                    colsum[x] -= hsum[sub, x]
            elif add < h:
                for x in range(w):
                    colsum[x] += hsum[add, x]
            elif sub >= 0:
                for x in range(w):
                    colsum[x] -= hsum[sub, x]
            lo = y - radius if y - radius > 0 else 0
            hi = y + radius if y + radius < h - 1 else h - 1
            cy = <double>(hi - lo + 1)
            for x in range(w):
                out[y, x] = colsum[x] * (1.0 / (cy * cxcnt[x]))
    return out_arr


cdef void _resize_plane(const double[:, ::1] src, double[:, ::1] out,
                        const double[::1] xs, const double[::1] ys) noexcept nogil:
    cdef Py_ssize_t in_h = src.shape[0]
    cdef Py_ssize_t in_w = src.shape[1]
    cdef Py_ssize_t out_h = out.shape[0]
    cdef Py_ssize_t out_w = out.shape[1]
    cdef Py_ssize_t i, j, x0, y0, x1, y1
    cdef double wx, wy, top, bot
    for j in range(out_h):
        y0 = <Py_ssize_t>ys[j]
        if y0 > in_h - 1:
            y0 = in_h - 1
        y1 = y0 + 1 if y0 + 1 < in_h else in_h - 1
        wy = ys[j] - y0
        for i in range(out_w):
            x0 = <Py_ssize_t>xs[i]
            if x0 > in_w - 1:
                x0 = in_w - 1
            x1 = x0 + 1 if x0 + 1 < in_w else in_w - 1
            wx = xs[i] - x0
            top = src[y0, x0] * (1.0 - wx) + src[y0, x1] * wx
            bot = src[y1, x0] * (1.0 - wx) + src[y1, x1] * wx
            out[j, i] = top * (1.0 - wy) + bot * wy


cdef void _resize_rgb(const double[:, :, ::1] src, double[:, :, ::1] out,
                      const double[::1] xs, const double[::1] ys) noexcept nogil:
    cdef Py_ssize_t in_h = src.shape[0]
    cdef Py_ssize_t in_w = src.shape[1]
    cdef Py_ssize_t nc = src.shape[2]
    cdef Py_ssize_t out_h = out.shape[0]
    cdef Py_ssize_t out_w = out.shape[1]
    cdef Py_ssize_t i, j, c, x0, y0, x1, y1
    cdef double wx, wy, top, bot
    for j in range(out_h):
        y0 = <Py_ssize_t>ys[j]
        if y0 > in_h - 1:
            y0 = in_h - 1
        y1 = y0 + 1 if y0 + 1 < in_h else in_h - 1
        wy = ys[j] - y0
        for i in range(out_w):
            x0 = <Py_ssize_t>xs[i]
            if x0 > in_w - 1:
                x0 = in_w - 1
            x1 = x0 + 1 if x0 + 1 < in_w else in_w - 1
            wx = xs[i] - x0
            for c in range(nc):
                top = src[y0, x0, c] * (1.0 - wx) + src[y0, x1, c] * wx
                bot = src[y1, x0, c] * (1.0 - wx) + src[y1, x1, c] * wx
                out[j, i, c] = top * (1.0 - wy) + bot * wy


def resize_bilinear(src, Py_ssize_t out_h, Py_ssize_t out_w):
    cdef Py_ssize_t in_h = src.shape[0]
    cdef Py_ssize_t in_w = src.shape[1]
    src = np.ascontiguousarray(src, dtype=np.float64)
    if out_h == in_h and out_w == in_w:
        return src.copy()
    if out_h == 1:
        ys = np.full(1, (in_h - 1) / 2.0)
    else:
        ys = np.arange(out_h) * ((in_h - 1) / (out_h - 1.0))
    if out_w == 1:
        xs = np.full(1, (in_w - 1) / 2.0)
    else:
        xs = np.arange(out_w) * ((in_w - 1) / (out_w - 1.0))
    cdef const double[::1] xs_v = xs
    cdef const double[::1] ys_v = ys
    if src.ndim == 2:
        out2 = np.empty((out_h, out_w), dtype=np.float64)
        _resize_plane(src, out2, xs_v, ys_v)
        return out2
    out3 = np.empty((out_h, out_w, src.shape[2]), dtype=np.float64)
    _resize_rgb(src, out3, xs_v, ys_v)
    return out3


cdef void _warp_plane(const double[:, ::1] src, double[:, ::1] out,
                      double i00, double i01, double i02,
                      double i10, double i11, double i12,
                      bint wrap) noexcept nogil:
    cdef Py_ssize_t h = src.shape[0]
    cdef Py_ssize_t w = src.shape[1]
    cdef Py_ssize_t out_h = out.shape[0]
    cdef Py_ssize_t out_w = out.shape[1]
    cdef Py_ssize_t x, y, x0, y0, x0m, x1m, y0m, y1m
    cdef double sx, sy, wx, wy
    cdef double ex0, ex1, ey0, ey1, lox, hix, loy, hiy
    for y in range(out_h):
        # Rows whose mapped span stays safely inside the source skip the
        # per-tap wrap/clamp logic; the span ends lie at the row's first and
        # last output columns because the mapping is affine.
        ex0 = i01 * y + i02
        ex1 = i00 * (out_w - 1) + i01 * y + i02
        ey0 = i11 * y + i12
        ey1 = i10 * (out_w - 1) + i11 * y + i12
        lox = ex0 if ex0 < ex1 else ex1
        hix = ex0 if ex0 > ex1 else ex1
        loy = ey0 if ey0 < ey1 else ey1
        hiy = ey0 if ey0 > ey1 else ey1
        if (lox >= 1e-6 and hix <= w - 1.0 - 1e-6
                and loy >= 1e-6 and hiy <= h - 1.0 - 1e-6):
            for x in range(out_w):
                sx = i00 * x + i01 * y + i02
                sy = i10 * x + i11 * y + i12
                x0 = <Py_ssize_t>sx
                y0 = <Py_ssize_t>sy
                wx = sx - x0
                wy = sy - y0
                out[y, x] = (1.0 - wy) * ((1.0 - wx) * src[y0, x0]
                                          + wx * src[y0, x0 + 1]) \
                    + wy * ((1.0 - wx) * src[y0 + 1, x0]
                            + wx * src[y0 + 1, x0 + 1])
            continue
        for x in range(out_w):
            sx = i00 * x + i01 * y + i02
            sy = i10 * x + i11 * y + i12
            if wrap:
                x0 = <Py_ssize_t>floor(sx)
                y0 = <Py_ssize_t>floor(sy)
                wx = sx - x0
                wy = sy - y0
                x0m = x0 % w
                if x0m < 0:
                    x0m += w
                y0m = y0 % h
                if y0m < 0:
                    y0m += h
                x1m = x0m + 1 if x0m + 1 < w else 0
                y1m = y0m + 1 if y0m + 1 < h else 0
            else:
                if sx < 0.0:
                    sx = 0.0
                elif sx > w - 1.0:
                    sx = w - 1.0
                if sy < 0.0:
                    sy = 0.0
                elif sy > h - 1.0:
                    sy = h - 1.0
                x0 = <Py_ssize_t>sx
                y0 = <Py_ssize_t>sy
                wx = sx - x0
                wy = sy - y0
                x0m = x0
                y0m = y0
                x1m = x0 + 1 if x0 + 1 < w else w - 1
                y1m = y0 + 1 if y0 + 1 < h else h - 1
            out[y, x] = (1.0 - wy) * ((1.0 - wx) * src[y0m, x0m]
                                      + wx * src[y0m, x1m]) \
                + wy * ((1.0 - wx) * src[y1m, x0m] + wx * src[y1m, x1m])


cdef void _warp_rgb(const double[:, :, ::1] src, double[:, :, ::1] out,
                    double i00, double i01, double i02,
                    double i10, double i11, double i12,
                    bint wrap) noexcept nogil:
    cdef Py_ssize_t h = src.shape[0]
    cdef Py_ssize_t w = src.shape[1]
    cdef Py_ssize_t nc = src.shape[2]
    cdef Py_ssize_t out_h = out.shape[0]
    cdef Py_ssize_t out_w = out.shape[1]
    cdef Py_ssize_t x, y, c, x0, y0, x0m, x1m, y0m, y1m
    cdef double sx, sy, wx, wy
    cdef double ex0, ex1, ey0, ey1, lox, hix, loy, hiy
    for y in range(out_h):
        ex0 = i01 * y + i02
        ex1 = i00 * (out_w - 1) + i01 * y + i02
        ey0 = i11 * y + i12
        ey1 = i10 * (out_w - 1) + i11 * y + i12
        lox = ex0 if ex0 < ex1 else ex1
        hix = ex0 if ex0 > ex1 else ex1
        loy = ey0 if ey0 < ey1 else ey1
        hiy = ey0 if ey0 > ey1 else ey1
        if (lox >= 1e-6 and hix <= w - 1.0 - 1e-6
                and loy >= 1e-6 and hiy <= h - 1.0 - 1e-6):
            for x in range(out_w):
                sx = i00 * x + i01 * y + i02
                sy = i10 * x + i11 * y + i12
                x0 = <Py_ssize_t>sx
                y0 = <Py_ssize_t>sy
                wx = sx - x0
                wy = sy - y0
                for c in range(nc):
                    out[y, x, c] = (1.0 - wy) * ((1.0 - wx) * src[y0, x0, c]
                                                 + wx * src[y0, x0 + 1, c]) \
                        + wy * ((1.0 - wx) * src[y0 + 1, x0, c]
                                + wx * src[y0 + 1, x0 + 1, c])
            continue
        for x in range(out_w):
            sx = i00 * x + i01 * y + i02
            sy = i10 * x + i11 * y + i12
            if wrap:
                x0 = <Py_ssize_t>floor(sx)
                y0 = <Py_ssize_t>floor(sy)
                wx = sx - x0
                wy = sy - y0
                x0m = x0 % w
                if x0m < 0:
                    x0m += w
                y0m = y0 % h
                if y0m < 0:
                    y0m += h
                x1m = x0m + 1 if x0m + 1 < w else 0
                y1m = y0m + 1 if y0m + 1 < h else 0
            else:
                if sx < 0.0:
                    sx = 0.0
                elif sx > w - 1.0:
                    sx = w - 1.0
                if sy < 0.0:
                    sy = 0.0
                elif sy > h - 1.0:
                    sy = h - 1.0
                x0 = <Py_ssize_t>sx
                y0 = <Py_ssize_t>sy
                wx = sx - x0
                wy = sy - y0
                x0m = x0
                y0m = y0
                x1m = x0 + 1 if x0 + 1 < w else w - 1
                y1m = y0 + 1 if y0 + 1 < h else h - 1
            for c in range(nc):
                out[y, x, c] = (1.0 - wy) * ((1.0 - wx) * src[y0m, x0m, c]
                                             + wx * src[y0m, x1m, c]) \
                    + wy * ((1.0 - wx) * src[y1m, x0m, c]
                            + wx * src[y1m, x1m, c])


def warp_affine(src, const double[:, :] inv, Py_ssize_t out_h, Py_ssize_t out_w,
                bint wrap):
    cdef double i00 = inv[0, 0]
    cdef double i01 = inv[0, 1]
    cdef double i02 = inv[0, 2]
    cdef double i10 = inv[1, 0]
    cdef double i11 = inv[1, 1]
    cdef double i12 = inv[1, 2]
    src = np.ascontiguousarray(src, dtype=np.float64)
    if src.ndim == 2:
        out2 = np.empty((out_h, out_w), dtype=np.float64)
        _warp_plane(src, out2, i00, i01, i02, i10, i11, i12, wrap)
        return out2
    out3 = np.empty((out_h, out_w, src.shape[2]), dtype=np.float64)
    _warp_rgb(src, out3, i00, i01, i02, i10, i11, i12, wrap)
    return out3


cdef void _sobel8_row(const double[:, ::1] gray, double[:, ::1] gx,
                      double[:, ::1] gy, Py_ssize_t y, Py_ssize_t h,
                      Py_ssize_t w) noexcept nogil:
    cdef Py_ssize_t x, xm, xp, ym, yp
    ym = y - 1 if y > 0 else 0
    yp = y + 1 if y + 1 < h else h - 1
    for x in range(w):
        xm = x - 1 if x > 0 else 0
        xp = x + 1 if x + 1 < w else w - 1
        gx[y, x] = ((gray[ym, xp] + 2.0 * gray[y, xp] + gray[yp, xp])
                    - (gray[ym, xm] + 2.0 * gray[y, xm] + gray[yp, xm])) / 8.0
        gy[y, x] = ((gray[yp, xm] + 2.0 * gray[yp, x] + gray[yp, xp])
                    - (gray[ym, xm] + 2.0 * gray[ym, x] + gray[ym, xp])) / 8.0


def shi_tomasi_response(const double[:, ::1] gray):
    cdef Py_ssize_t h = gray.shape[0]
    cdef Py_ssize_t w = gray.shape[1]
    gx_arr = np.empty((h, w), dtype=np.float64)
    gy_arr = np.empty((h, w), dtype=np.float64)
    out_arr = np.empty((h, w), dtype=np.float64)
    cdef double[:, ::1] gx = gx_arr
    cdef double[:, ::1] gy = gy_arr
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t x, y, j, i, jj, ii
    cdef double sxx, syy, sxy, gxv, gyv, half_trace, disc
    with nogil:
        # Gradient rows are produced one row ahead of the response sweep so
        # the 3x3 sums read them while they are still cache-resident.
        _sobel8_row(gray, gx, gy, 0, h, w)
        if h > 1:
            _sobel8_row(gray, gx, gy, 1, h, w)
        for y in range(h):
            if 2 <= y + 1 < h:
                _sobel8_row(gray, gx, gy, y + 1, h, w)
            for x in range(w):
                sxx = 0.0
                syy = 0.0
                sxy = 0.0
                if 0 < y < h - 1 and 0 < x < w - 1:
                    # Interior pixels skip the edge clamping.
                    for jj in range(y - 1, y + 2):
                        for ii in range(x - 1, x + 2):
                            gxv = gx[jj, ii]
                            gyv = gy[jj, ii]
                            sxx += gxv * gxv
                            syy += gyv * gyv
                            sxy += gxv * gyv
                else:
                    for j in range(y - 1, y + 2):
                        jj = j
                        if jj < 0:
                            jj = 0
                        elif jj > h - 1:
                            jj = h - 1
                        for i in range(x - 1, x + 2):
                            ii = i
                            if ii < 0:
                                ii = 0
                            elif ii > w - 1:
                                ii = w - 1
                            gxv = gx[jj, ii]
                            gyv = gy[jj, ii]
                            sxx += gxv * gxv
                            syy += gyv * gyv
                            sxy += gxv * gyv
                half_trace = 0.5 * (sxx + syy)
                disc = 0.25 * (sxx - syy) * (sxx - syy) + sxy * sxy
                if disc < 0.0:
                    disc = 0.0
                out[y, x] = half_trace - sqrt(disc)
    return out_arr


def lk_pyramid(list prev_levels, list curr_levels, const double[:, ::1] pts,
               Py_ssize_t window, Py_ssize_t max_iters, double eps,
               double min_eig):
    cdef Py_ssize_t n = pts.shape[0]
    flow_arr = np.zeros((n, 2), dtype=np.float64)
    ok_arr = np.ones(n, dtype=np.uint8)
    cdef double[:, ::1] flow = flow_arr
    cdef cnp.uint8_t[::1] ok = ok_arr
    if n == 0:
        return flow_arr, ok_arr

    cdef Py_ssize_t n_levels = len(prev_levels)
    cdef Py_ssize_t half = window // 2
    cdef Py_ssize_t ehalf = half + 1
    cdef Py_ssize_t ew = window + 2
    cdef Py_ssize_t wsize = window * window

    # One extended (window+2)^2 sampling of the previous frame supplies the
    # tracking window and, by central differences inside it, both spatial
    # gradients; windows fully inside the image share one set of bilinear
    # weights per point instead of re-deriving them per tap.
    epatch_arr = np.empty(ew * ew, dtype=np.float64)
    ix_arr = np.empty(wsize, dtype=np.float64)
    iy_arr = np.empty(wsize, dtype=np.float64)
    cdef double[::1] epatch = epatch_arr
    cdef double[::1] ix = ix_arr
    cdef double[::1] iy = iy_arr

    guess_arr = np.zeros((n, 2), dtype=np.float64)
    cdef double[:, ::1] guess = guess_arr

    cdef const double[:, ::1] prev
    cdef const double[:, ::1] curr
    cdef Py_ssize_t level, p, j, i, k, it, lw, lh
    cdef Py_ssize_t bxi, byi, r0, r1, c0, ko
    cdef double scale, px, py, gxx, gxy, gyy, det
    cdef double half_trace, disc, nux, nuy, bx, by, diff
    cdef double step_x, step_y, inv_det, fx, fy, w0, h0
    cdef double bxf, byf, wx, wy, qx, qy, hv0, hv1, ixv, iyv
    cdef double cwx, cwy, v00, v01, v10, v11

    for level in range(n_levels - 1, -1, -1):
        prev = prev_levels[level]
        curr = curr_levels[level]
        lh = prev.shape[0]
        lw = prev.shape[1]
        scale = 1.0 / <double>(1 << level)
        with nogil:
            for p in range(n):
                if ok[p] == 0:
                    continue
                px = pts[p, 0] * scale
                py = pts[p, 1] * scale

                bxf = floor(px)
                byf = floor(py)
                bxi = <Py_ssize_t>bxf
                byi = <Py_ssize_t>byf
                wx = px - bxf
                wy = py - byf
                if (bxi - ehalf >= 0 and bxi + ehalf + 1 <= lw - 1
                        and byi - ehalf >= 0 and byi + ehalf + 1 <= lh - 1):
                    cwx = 1.0 - wx
                    cwy = 1.0 - wy
                    k = 0
                    for j in range(-ehalf, ehalf + 1):
                        r0 = byi + j
                        r1 = r0 + 1
                        c0 = bxi - ehalf
                        v00 = prev[r0, c0]
                        v10 = prev[r1, c0]
                        for i in range(-ehalf, ehalf + 1):
                            c0 = bxi + i + 1
                            v01 = prev[r0, c0]
                            v11 = prev[r1, c0]
                            hv0 = cwx * v00 + wx * v01
                            hv1 = cwx * v10 + wx * v11
                            epatch[k] = cwy * hv0 + wy * hv1
                            v00 = v01
                            v10 = v11
                            k += 1
                else:
                    k = 0
                    for j in range(-ehalf, ehalf + 1):
                        for i in range(-ehalf, ehalf + 1):
                            epatch[k] = _bilin_clamp(prev, px + i, py + j,
                                                     lw, lh)
                            k += 1

                gxx = 0.0
                gxy = 0.0
                gyy = 0.0
                k = 0
                for j in range(window):
                    ko = (j + 1) * ew + 1
                    for i in range(window):
                        ixv = 0.5 * (epatch[ko + i + 1] - epatch[ko + i - 1])
                        iyv = 0.5 * (epatch[ko + ew + i] - epatch[ko - ew + i])
                        ix[k] = ixv
                        iy[k] = iyv
                        gxx += ixv * ixv
                        gxy += ixv * iyv
                        gyy += iyv * iyv
                        k += 1
                half_trace = 0.5 * (gxx + gyy)
                disc = 0.25 * (gxx - gyy) * (gxx - gyy) + gxy * gxy
                if disc < 0.0:
                    disc = 0.0
                if half_trace - sqrt(disc) < min_eig:
                    ok[p] = 0
                    continue
                det = gxx * gyy - gxy * gxy
                inv_det = 1.0 / det
                nux = 0.0
                nuy = 0.0
                for it in range(max_iters):
                    qx = px + guess[p, 0] + nux
                    qy = py + guess[p, 1] + nuy
                    bx = 0.0
                    by = 0.0
                    bxf = floor(qx)
                    byf = floor(qy)
                    bxi = <Py_ssize_t>bxf
                    byi = <Py_ssize_t>byf
                    wx = qx - bxf
                    wy = qy - byf
                    if (bxi - half >= 0 and bxi + half + 1 <= lw - 1
                            and byi - half >= 0 and byi + half + 1 <= lh - 1):
                        cwx = 1.0 - wx
                        cwy = 1.0 - wy
                        k = 0
                        for j in range(-half, half + 1):
                            r0 = byi + j
                            r1 = r0 + 1
                            ko = (j + half + 1) * ew + half + 1
                            c0 = bxi - half
                            v00 = curr[r0, c0]
                            v10 = curr[r1, c0]
                            for i in range(-half, half + 1):
                                c0 = bxi + i + 1
                                v01 = curr[r0, c0]
                                v11 = curr[r1, c0]
                                hv0 = cwx * v00 + wx * v01
                                hv1 = cwx * v10 + wx * v11
                                diff = epatch[ko + i] \
                                    - (cwy * hv0 + wy * hv1)
                                bx += diff * ix[k]
                                by += diff * iy[k]
                                v00 = v01
                                v10 = v11
                                k += 1
                    else:
                        k = 0
                        for j in range(-half, half + 1):
                            ko = (j + half + 1) * ew + half + 1
                            for i in range(-half, half + 1):
                                diff = epatch[ko + i] - _bilin_clamp(
                                    curr, qx + i, qy + j, lw, lh)
                                bx += diff * ix[k]
                                by += diff * iy[k]
                                k += 1
                    step_x = (gyy * bx - gxy * by) * inv_det
                    step_y = (gxx * by - gxy * bx) * inv_det
                    nux += step_x
                    nuy += step_y
                    if sqrt(step_x * step_x + step_y * step_y) < eps:
                        break
                if level > 0:
                    guess[p, 0] = 2.0 * (guess[p, 0] + nux)
                    guess[p, 1] = 2.0 * (guess[p, 1] + nuy)
                else:
                    guess[p, 0] = guess[p, 0] + nux
                    guess[p, 1] = guess[p, 1] + nuy

    prev = prev_levels[0]
    h0 = <double>prev.shape[0]
    w0 = <double>prev.shape[1]
    for p in range(n):
        flow[p, 0] = guess[p, 0]
        flow[p, 1] = guess[p, 1]
        fx = pts[p, 0] + guess[p, 0]
        fy = pts[p, 1] + guess[p, 1]
        if (fx - half < 0.0 or fy - half < 0.0
                or fx + half > w0 - 1.0 or fy + half > h0 - 1.0):
            ok[p] = 0
    return flow_arr, ok_arr


def composite_over(const double[:, :, ::1] fg, const double[:, :, ::1] bg,
                   const double[:, ::1] alpha):
    cdef Py_ssize_t h = fg.shape[0]
    cdef Py_ssize_t w = fg.shape[1]
    cdef Py_ssize_t nc = fg.shape[2]
    out_arr = np.empty((h, w, nc), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t x, y, c
    cdef double a
    with nogil:
        for y in range(h):
            for x in range(w):
                a = alpha[y, x]
                for c in range(nc):
                    out[y, x, c] = (1.0 - a) * fg[y, x, c] + a * bg[y, x, c]
    return out_arr


def sky_candidates(const double[:, ::1] response, const double[:, ::1] matte):
    """Row-major coordinates and scores of sky pixels (matte > 0.9) whose
    response is positive and a maximum of its 3x3 neighbourhood
    (edge-replicated)."""
    cdef Py_ssize_t h = response.shape[0]
    cdef Py_ssize_t w = response.shape[1]
    mask_arr = np.zeros((h, w), dtype=np.uint8)
    cdef unsigned char[:, ::1] mask = mask_arr
    cdef Py_ssize_t x, y, ny, nx, y0, y1, x0, x1, count = 0, k
    cdef double v
    cdef bint is_max
    with nogil:
        for y in range(h):
            y0 = y - 1 if y > 0 else 0
            y1 = y + 1 if y < h - 1 else h - 1
            for x in range(w):
                if matte[y, x] <= 0.9:
                    continue
                v = response[y, x]
                if v <= 0.0:
                    continue
                x0 = x - 1 if x > 0 else 0
                x1 = x + 1 if x < w - 1 else w - 1
                is_max = True
                for ny in range(y0, y1 + 1):
                    for nx in range(x0, x1 + 1):
                        if response[ny, nx] > v:
                            is_max = False
                            break
                    if not is_max:
                        break
                if is_max:
                    mask[y, x] = 1
                    count += 1
    ys_arr = np.empty(count, dtype=np.intp)
    xs_arr = np.empty(count, dtype=np.intp)
    scores_arr = np.empty(count, dtype=np.float64)
    cdef Py_ssize_t[::1] ys = ys_arr
    cdef Py_ssize_t[::1] xs = xs_arr
    cdef double[::1] scores = scores_arr
    k = 0
    with nogil:
        for y in range(h):
            for x in range(w):
                if mask[y, x]:
                    ys[k] = y
                    xs[k] = x
                    scores[k] = response[y, x]
                    k += 1
    return ys_arr, xs_arr, scores_arr


def channel_sums(const double[:, :, ::1] img):
    """Per-channel sums accumulated in row-major pixel order."""
    cdef Py_ssize_t h = img.shape[0]
    cdef Py_ssize_t w = img.shape[1]
    cdef Py_ssize_t nc = img.shape[2]
    sums_arr = np.zeros(nc, dtype=np.float64)
    cdef double[::1] sums = sums_arr
    cdef Py_ssize_t x, y, c
    with nogil:
        for y in range(h):
            for x in range(w):
                for c in range(nc):
                    sums[c] += img[y, x, c]
    return sums_arr


def add_channel_offsets(const double[:, :, ::1] img, const double[::1] offsets):
    """Add one offset per channel to every pixel."""
    cdef Py_ssize_t h = img.shape[0]
    cdef Py_ssize_t w = img.shape[1]
    cdef Py_ssize_t nc = img.shape[2]
    out_arr = np.empty((h, w, nc), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t x, y, c
    with nogil:
        for y in range(h):
            for x in range(w):
                for c in range(nc):
                    out[y, x, c] = img[y, x, c] + offsets[c]
    return out_arr


def shift_scale_clip(const double[:, :, ::1] img, const double[::1] offsets,
                     double scale):
    """Per-pixel (value + channel offset) * scale, clamped to [0, 1]."""
    cdef Py_ssize_t h = img.shape[0]
    cdef Py_ssize_t w = img.shape[1]
    cdef Py_ssize_t nc = img.shape[2]
    out_arr = np.empty((h, w, nc), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t x, y, c
    cdef double v
    with nogil:
        for y in range(h):
            for x in range(w):
                for c in range(nc):
                    v = (img[y, x, c] + offsets[c]) * scale
                    if v < 0.0:
                        v = 0.0
                    elif v > 1.0:
                        v = 1.0
                    out[y, x, c] = v
    return out_arr


def rec601_gray(const double[:, :, ::1] img):
    """Rec.601 luminance: 0.299 R + 0.587 G + 0.114 B."""
    cdef Py_ssize_t h = img.shape[0]
    cdef Py_ssize_t w = img.shape[1]
    out_arr = np.empty((h, w), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t x, y
    with nogil:
        for y in range(h):
            for x in range(w):
                out[y, x] = 0.299 * img[y, x, 0] + 0.587 * img[y, x, 1] \
                    + 0.114 * img[y, x, 2]
    return out_arr


def region_sums(const double[:, :, ::1] frame, const double[:, :, ::1] bg,
                const double[:, ::1] matte, double threshold):
    """One-pass regional sums in row-major order: frame sums where the matte
    is below threshold, background sums where it is not, whole-frame sums,
    and the sky-region pixel count."""
    cdef Py_ssize_t h = frame.shape[0]
    cdef Py_ssize_t w = frame.shape[1]
    cdef Py_ssize_t nc = frame.shape[2]
    fg_arr = np.zeros(nc, dtype=np.float64)
    sky_arr = np.zeros(nc, dtype=np.float64)
    tot_arr = np.zeros(nc, dtype=np.float64)
    cdef double[::1] fg = fg_arr
    cdef double[::1] sky = sky_arr
    cdef double[::1] tot = tot_arr
    cdef Py_ssize_t x, y, c, n_sky = 0
    with nogil:
        for y in range(h):
            for x in range(w):
                if matte[y, x] >= threshold:
                    n_sky += 1
                    for c in range(nc):
                        sky[c] += bg[y, x, c]
                        tot[c] += frame[y, x, c]
                else:
                    for c in range(nc):
                        fg[c] += frame[y, x, c]
                        tot[c] += frame[y, x, c]
    return fg_arr, sky_arr, tot_arr, n_sky
