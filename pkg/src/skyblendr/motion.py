"""Sky background motion estimation.

Per adjacent frame pair: Shi-Tomasi corners restricted to the sky matte,
pyramidal Lucas-Kanade tracking, a Gaussian-KDE filter on match distances
that discards improbable displacements, and a RANSAC fit of a 4-DoF
similarity transform.  Per-frame transforms accumulate against the skybox
center-crop transform into the template-to-frame warp.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .transforms import SimilarityTransform

FEATURE_MIN_SPACING = 8.0
LK_MIN_EIGENVALUE = 1e-4


@dataclass(frozen=True)
class MotionParams:
    max_features: int = 200
    pyramid_levels: int = 3
    lk_window: int = 21
    lk_iterations: int = 30
    lk_epsilon: float = 0.01
    kde_bandwidth: float = 0.5
    eta: float = 0.1
    ransac_iterations: int = 500
    ransac_tolerance: float = 2.0
    min_matches: int = 8
    rng_seed: int = 0

    def __post_init__(self):
        positive = (
            "max_features", "pyramid_levels", "lk_window", "lk_iterations",
            "lk_epsilon", "kde_bandwidth", "ransac_iterations",
            "ransac_tolerance", "min_matches",
        )
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.eta < 1.0:
            raise ValueError(f"eta must be in (0, 1), got {self.eta}")


@dataclass(frozen=True)
class FeaturePoint:
    x: float
    y: float
    score: float


@dataclass(frozen=True)
class PointMatch:
    prev: tuple
    curr: tuple
    distance: float = field(init=False)

    def __post_init__(self):
        # Never trust a caller-supplied distance.
        d = float(np.hypot(self.curr[0] - self.prev[0], self.curr[1] - self.prev[1]))
        object.__setattr__(self, "distance", d)


def detect_sky_features(gray, matte, params):
    """Strongest Shi-Tomasi corners inside the sky region (matte > 0.9),
    greedily thinned to a minimum spacing of 8 px."""
    gray = np.ascontiguousarray(gray, dtype=np.float64)
    matte = np.ascontiguousarray(matte, dtype=np.float64)
    if gray.shape != matte.shape:
        raise ValueError(
            f"gray and matte dimensions differ: {gray.shape} vs {matte.shape}"
        )
    response = _kernels.shi_tomasi_response(gray)
    ys, xs, scores = _kernels.sky_candidates(response, matte)
    if len(ys) == 0:
        return []

    cap = params.max_features * 20
    if len(scores) > cap:
        keep = np.argpartition(-scores, cap)[:cap]
        ys, xs, scores = ys[keep], xs[keep], scores[keep]
    order = np.lexsort((xs, ys, -scores))
    ys, xs, scores = ys[order], xs[order], scores[order]

    cell = int(FEATURE_MIN_SPACING)
    occupied = {}
    features = []
    for x, y, score in zip(xs, ys, scores):
        cx, cy = int(x) // cell, int(y) // cell
        clear = True
        for ny in (cy - 1, cy, cy + 1):
            for nx in (cx - 1, cx, cx + 1):
                for ox, oy in occupied.get((nx, ny), ()):
                    if (x - ox) ** 2 + (y - oy) ** 2 < FEATURE_MIN_SPACING ** 2:
                        clear = False
                        break
                if not clear:
                    break
            if not clear:
                break
        if clear:
            occupied.setdefault((cx, cy), []).append((int(x), int(y)))
            features.append(FeaturePoint(float(x), float(y), float(score)))
            if len(features) >= params.max_features:
                break
    return features


def track_lk(prev_pyr, curr_pyr, points, params):
    """Track points from the previous frame into the current one with
    coarse-to-fine iterative Lucas-Kanade; untrackable points are dropped."""
    if len(prev_pyr) != len(curr_pyr) or prev_pyr[0].shape != curr_pyr[0].shape:
        raise ValueError("pyramids must be built from same-size frames")
    if not points:
        return []
    pts = np.array([[p.x, p.y] for p in points], dtype=np.float64)
    flow, ok = _kernels.lk_pyramid(
        list(prev_pyr), list(curr_pyr), pts,
        params.lk_window, params.lk_iterations, params.lk_epsilon,
        LK_MIN_EIGENVALUE,
    )
    matches = []
    for i in range(len(points)):
        if ok[i]:
            matches.append(PointMatch(
                prev=(pts[i, 0], pts[i, 1]),
                curr=(pts[i, 0] + flow[i, 0], pts[i, 1] + flow[i, 1]),
            ))
    return matches


def filter_matches_kde(matches, params):
    """Drop matches whose displacement is improbable under a Gaussian KDE of
    all match distances (density normalized by its maximum, threshold eta)."""
    if len(matches) < 2:
        return list(matches)
    d = np.array([m.distance for m in matches], dtype=np.float64)
    h2 = 2.0 * params.kde_bandwidth ** 2
    density = np.exp(-((d[:, None] - d[None, :]) ** 2) / h2).sum(axis=1)
    prob = density / density.max()
    return [m for m, p in zip(matches, prob) if p >= params.eta]


def _as_complex(matches):
    p = np.array([complex(*m.prev) for m in matches])
    q = np.array([complex(*m.curr) for m in matches])
    return p, q


def _similarity_from_complex(lam, t):
    return SimilarityTransform(np.array([
        [lam.real, -lam.imag, t.real],
        [lam.imag, lam.real, t.imag],
        [0.0, 0.0, 1.0],
    ]))


def fit_similarity(pairs):
    """Least-squares similarity (uniform scale) mapping prev points onto
    curr points, via the complex closed form: minimize |lam*p + t - q|^2."""
    if len(pairs) < 2:
        raise ValueError(f"need at least 2 point pairs, got {len(pairs)}")
    p, q = _as_complex(pairs)
    p_mean = p.mean()
    q_mean = q.mean()
    pc = p - p_mean
    qc = q - q_mean
    denom = np.vdot(pc, pc).real
    if denom <= 0.0:
        raise ValueError("all previous points coincide; similarity is undefined")
    lam = np.vdot(pc, qc) / denom
    if abs(lam) <= 1e-12:
        raise ValueError("degenerate pairs: fitted scale collapses to zero")
    t = q_mean - lam * p_mean
    return _similarity_from_complex(lam, t)


def estimate_motion_ransac(matches, params):
    """RANSAC similarity estimate from point matches.

    Returns ``(transform, inlier_count)``; when fewer than ``min_matches``
    matches are supplied or no valid model exists, returns the identity with
    an inlier count of 0 so the caller can apply its fallback policy.
    Deterministic for a fixed ``rng_seed`` and input order.
    """
    n = len(matches)
    if n < params.min_matches:
        return SimilarityTransform.identity(), 0
    p, q = _as_complex(matches)
    rng = np.random.default_rng(params.rng_seed)
    idx = rng.integers(0, n, size=(params.ransac_iterations, 2))
    p1, p2 = p[idx[:, 0]], p[idx[:, 1]]
    q1, q2 = q[idx[:, 0]], q[idx[:, 1]]
    dp = p2 - p1
    dq = q2 - q1
    valid = (idx[:, 0] != idx[:, 1]) & (dp != 0) & (dq != 0)
    dp_safe = np.where(dp == 0, 1.0, dp)
    lam = dq / dp_safe
    t = q1 - lam * p1
    residual = np.abs(lam[:, None] * p[None, :] + t[:, None] - q[None, :])
    counts = (residual < params.ransac_tolerance).sum(axis=1)
    counts[~valid] = -1
    best = int(np.argmax(counts))
    if counts[best] < 2:
        return SimilarityTransform.identity(), 0
    consensus_mask = residual[best] < params.ransac_tolerance
    consensus = [m for m, keep in zip(matches, consensus_mask) if keep]
    try:
        model = fit_similarity(consensus)
    except ValueError:
        model = _similarity_from_complex(complex(lam[best]), complex(t[best]))
    return model, int(counts[best])


def accumulate_motion(history, m_c):
    """Compose per-frame motions against the center-crop transform:
    ``m_c @ M_t @ ... @ M_1`` (empty history yields ``m_c``)."""
    acc = np.eye(3)
    for m in history:
        acc = m.matrix @ acc
    return SimilarityTransform(m_c.matrix @ acc)
