"""Per-frame orchestration, configuration, frame I/O, and reporting.

The flow for each frame: downsample and matte, estimate sky motion against
the previous frame, render the warped sky template, then harmonize and
composite.  Input and output are numbered image sequences; video containers
are out of scope (transcode externally), which keeps runs bit-exact.
"""

import json
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from . import _kernels
from .blending import HarmonizationParams, WeatherLayer, harmonize_and_compose
from .imaging import (
    _as_image,
    build_pyramid,
    discover_image_sequence,
    frame_to_uint8,
    load_frame,
    resize_bilinear,
    to_gray,
)
from .matting import (
    CoarseMatteWeights,
    GuidedFilterParams,
    MatteSource,
    estimate_coarse_matte,
    load_matte,
    refine_matte,
)
from .motion import (
    MotionParams,
    accumulate_motion,
    detect_sky_features,
    estimate_motion_ransac,
    filter_matches_kde,
    track_lk,
)
from .skybox import (
    SkyBoxTemplate,
    ViewportSpec,
    center_crop_transform,
    render_background,
)
from .transforms import SimilarityTransform

PHASES = ("matting", "motion", "render", "blend")


def _parse_bool(value):
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("true", "yes", "on", "1"):
        return True
    if text in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {value!r}")


# Flat config keys and their types.  Files use 'key = value' lines; the CLI
# passes the same keys with values already typed.
_SCHEMA = {
    "input_dir": str,
    "output_dir": str,
    "template_path": str,
    "crop_factor": float,
    "template_mirror_pad": _parse_bool,
    "matte_source": str,
    "matte_dir": str,
    "matte_pattern": str,
    "matte_blueness": float,
    "matte_smoothness": float,
    "matte_height": float,
    "matte_bias": float,
    "radius": int,
    "epsilon": float,
    "downsample_long_side": int,
    "max_features": int,
    "pyramid_levels": int,
    "lk_window": int,
    "lk_iterations": int,
    "lk_epsilon": float,
    "bandwidth": float,
    "eta": float,
    "ransac_iterations": int,
    "ransac_tolerance": float,
    "min_matches": int,
    "seed": int,
    "alpha": float,
    "beta": float,
    "sky_threshold": float,
    "rain_dir": str,
    "rain_opacity": float,
    "haze_opacity": float,
    "haze_gray": float,
    "threads": int,
}

_REQUIRED_KEYS = ("input_dir", "output_dir", "template_path")


def parse_config_file(path):
    """Read a flat ``key = value`` config file (UTF-8, ``#`` comments) into
    a string mapping.  Later duplicates of a key win."""
    values = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ValueError(
                f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}"
            )
        values[key] = value.strip()
    return values


def _pick(values, mapping):
    """kwargs for a params dataclass from present config keys only, so the
    dataclass defaults stay the single source of truth."""
    return {
        field_name: values[key]
        for key, field_name in mapping.items()
        if key in values
    }


@dataclass(frozen=True)
class PipelineConfig:
    input_dir: str
    output_dir: str
    template_path: str
    crop_factor: float = 0.5
    template_mirror_pad: bool = False
    matte: MatteSource = MatteSource()
    matte_weights: CoarseMatteWeights = CoarseMatteWeights()
    guided: GuidedFilterParams = GuidedFilterParams()
    motion: MotionParams = MotionParams()
    harmonization: HarmonizationParams = HarmonizationParams()
    downsample_long_side: int = 384
    rain_dir: str = ""
    rain_opacity: float = 0.4
    haze_opacity: float = 0.0
    haze_gray: float = 0.8
    threads: int = 1

    def __post_init__(self):
        if self.downsample_long_side < 16:
            raise ValueError(
                f"downsample_long_side must be >= 16, "
                f"got {self.downsample_long_side}"
            )
        if self.threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads}")
        if not 0.0 <= self.rain_opacity <= 1.0:
            raise ValueError(f"rain_opacity must be in [0, 1], got {self.rain_opacity}")
        if not 0.0 <= self.haze_opacity <= 1.0:
            raise ValueError(f"haze_opacity must be in [0, 1], got {self.haze_opacity}")

    @classmethod
    def from_mapping(cls, mapping):
        unknown = sorted(set(mapping) - set(_SCHEMA))
        if unknown:
            raise ValueError(f"unknown config key(s): {', '.join(unknown)}")
        values = {}
        for key, caster in _SCHEMA.items():
            if key in mapping and mapping[key] is not None:
                values[key] = caster(mapping[key])
        missing = [key for key in _REQUIRED_KEYS if key not in values]
        if missing:
            raise ValueError(f"missing required config key(s): {', '.join(missing)}")

        kind = values.get("matte_source")
        if kind is None:
            kind = "file-sequence" if values.get("matte_dir") else "heuristic"
        matte = MatteSource(**{"kind": kind, **_pick(values, {
            "matte_dir": "directory", "matte_pattern": "pattern"})})
        return cls(
            input_dir=values["input_dir"],
            output_dir=values["output_dir"],
            template_path=values["template_path"],
            matte=matte,
            matte_weights=CoarseMatteWeights(**_pick(values, {
                "matte_blueness": "blueness", "matte_smoothness": "smoothness",
                "matte_height": "height", "matte_bias": "bias"})),
            guided=GuidedFilterParams(**_pick(values, {
                "radius": "radius", "epsilon": "epsilon"})),
            motion=MotionParams(**_pick(values, {
                "max_features": "max_features",
                "pyramid_levels": "pyramid_levels",
                "lk_window": "lk_window",
                "lk_iterations": "lk_iterations",
                "lk_epsilon": "lk_epsilon",
                "bandwidth": "kde_bandwidth",
                "eta": "eta",
                "ransac_iterations": "ransac_iterations",
                "ransac_tolerance": "ransac_tolerance",
                "min_matches": "min_matches",
                "seed": "rng_seed"})),
            harmonization=HarmonizationParams(**_pick(values, {
                "alpha": "alpha", "beta": "beta",
                "sky_threshold": "sky_region_threshold"})),
            **_pick(values, {
                "crop_factor": "crop_factor",
                "template_mirror_pad": "template_mirror_pad",
                "downsample_long_side": "downsample_long_side",
                "rain_dir": "rain_dir",
                "rain_opacity": "rain_opacity",
                "haze_opacity": "haze_opacity",
                "haze_gray": "haze_gray",
                "threads": "threads"}),
        )

    @classmethod
    def from_file(cls, path, overrides=None):
        mapping = parse_config_file(path)
        for key, value in (overrides or {}).items():
            if value is not None:
                mapping[key] = value
        return cls.from_mapping(mapping)

    def validate_paths(self):
        """Startup check that every referenced input path exists."""
        if not Path(self.input_dir).is_dir():
            raise FileNotFoundError(f"input directory not found: {self.input_dir}")
        if not Path(self.template_path).is_file():
            raise FileNotFoundError(f"sky template not found: {self.template_path}")
        if self.matte.kind == "file-sequence" and not Path(self.matte.directory).is_dir():
            raise FileNotFoundError(f"matte directory not found: {self.matte.directory}")
        if self.rain_dir and not Path(self.rain_dir).is_dir():
            raise FileNotFoundError(f"rain layer directory not found: {self.rain_dir}")


@dataclass
class PipelineState:
    template: SkyBoxTemplate
    view: ViewportSpec
    m_c: SimilarityTransform
    frame_shape: tuple
    layers: tuple = ()
    t: int = 0
    history: list = field(default_factory=list)
    prev_pyramid: list = None
    prev_matte: np.ndarray = None
    last_motion: SimilarityTransform = None


@dataclass
class FrameReport:
    frame_index: int
    matches: int
    inliers: int
    fallback: bool
    timings: dict

    def to_dict(self):
        return {
            "frame_index": self.frame_index,
            "matches": self.matches,
            "inliers": self.inliers,
            "fallback": self.fallback,
            "timings": {k: self.timings[k] for k in PHASES},
        }


def init_state(config, frame_w, frame_h):
    """Load the template and weather layers and fix the frame geometry."""
    template = SkyBoxTemplate.load(
        config.template_path,
        crop_factor=config.crop_factor,
        mirror_pad=config.template_mirror_pad,
    )
    view = ViewportSpec(out_w=frame_w, out_h=frame_h)
    layers = []
    if config.rain_dir:
        layers.append(WeatherLayer.rain_from_dir(config.rain_dir, config.rain_opacity))
    if config.haze_opacity > 0.0:
        layers.append(WeatherLayer.haze(config.haze_opacity, config.haze_gray))
    return PipelineState(
        template=template,
        view=view,
        m_c=center_crop_transform(template, view),
        frame_shape=(frame_h, frame_w, 3),
        layers=tuple(layers),
    )


def _downsample_for_matting(frame, long_side):
    h, w = frame.shape[:2]
    longest = max(h, w)
    if longest <= long_side:
        return frame
    scale = long_side / longest
    return resize_bilinear(frame, max(1, round(w * scale)), max(1, round(h * scale)))


def process_frame(state, frame, config, source_index=None):
    """Run one frame through all four stages.

    Returns ``(composite, state, report)``.  Motion estimation compares the
    previous frame to this one; its per-frame transform is stored in
    template coordinates so the accumulated product replays exactly.
    ``source_index`` names the frame in errors and selects the matte file
    for file-sequence sources; it defaults to the running counter.
    """
    frame = _as_image(frame, "frame")
    if source_index is None:
        source_index = state.t
    if frame.shape != state.frame_shape:
        raise ValueError(
            f"frame {source_index} dimensions changed mid-sequence: "
            f"got {frame.shape[1]}x{frame.shape[0]}, expected "
            f"{state.frame_shape[1]}x{state.frame_shape[0]}"
        )

    t0 = time.perf_counter()
    low = _downsample_for_matting(frame, config.downsample_long_side)
    if config.matte.kind == "heuristic":
        coarse = estimate_coarse_matte(low, config.matte_weights)
    else:
        coarse = load_matte(config.matte, source_index, low.shape[1], low.shape[0])
    matte = refine_matte(coarse, frame, config.guided)
    t1 = time.perf_counter()

    pyramid = build_pyramid(to_gray(frame), config.motion.pyramid_levels)
    matches_kept = 0
    inliers = 0
    fallback = False
    if state.t > 0:
        features = detect_sky_features(
            state.prev_pyramid[0], state.prev_matte, config.motion
        )
        matches = track_lk(state.prev_pyramid, pyramid, features, config.motion)
        matches = filter_matches_kde(matches, config.motion)
        matches_kept = len(matches)
        estimate, inliers = estimate_motion_ransac(matches, config.motion)
        if inliers == 0:
            fallback = True
            step = state.last_motion or SimilarityTransform.identity()
        else:
            # Conjugate the frame-space estimate into template coordinates;
            # the plain left-to-right product of these steps then equals the
            # frame-space motion applied after the center crop.
            inv_mc = state.m_c.inverse()
            step = SimilarityTransform(
                inv_mc.matrix @ estimate.matrix @ state.m_c.matrix
            )
        state.history.append(step)
        state.last_motion = step
    t2 = time.perf_counter()

    m_tilde = accumulate_motion(state.history, state.m_c)
    background = render_background(state.template, m_tilde, state.view)
    t3 = time.perf_counter()

    composite = harmonize_and_compose(
        frame, background, matte, config.harmonization,
        layers=state.layers, frame_index=state.t,
    )
    t4 = time.perf_counter()

    report = FrameReport(
        frame_index=source_index,
        matches=matches_kept,
        inliers=inliers,
        fallback=fallback,
        timings={
            "matting": t1 - t0,
            "motion": t2 - t1,
            "render": t3 - t2,
            "blend": t4 - t3,
        },
    )
    state.prev_pyramid = pyramid
    state.prev_matte = matte
    state.t += 1
    return composite, state, report


def _iter_loaded_frames(entries, threads):
    """Yield (index, path, frame).  With threads > 1, file reads are
    prefetched on a small worker pool; processing order never changes."""
    def read(entry):
        idx, path = entry
        try:
            return idx, path, load_frame(path)
        except Exception as exc:
            raise RuntimeError(f"cannot read frame {idx} ({path}): {exc}") from exc

    if threads <= 1:
        for entry in entries:
            yield read(entry)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        pending = deque()
        iterator = iter(entries)
        for entry in iterator:
            pending.append(pool.submit(read, entry))
            if len(pending) >= threads * 2:
                break
        while pending:
            yield pending.popleft().result()
            for entry in iterator:
                pending.append(pool.submit(read, entry))
                break


def run(config):
    """Process the whole input sequence and return the run report.

    Output frames are written as ``frame_%06d.png`` numbered by sequence
    position.  The report dict has a ``summary`` (fps overall and per phase,
    fallback count) and a ``frames`` list with per-frame stats.
    """
    config.validate_paths()
    entries = discover_image_sequence(config.input_dir)
    if not entries:
        raise FileNotFoundError(
            f"no numbered input frames found in {config.input_dir}"
        )
    out_dir = Path(config.output_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write_probe"
        probe.touch()
        probe.unlink()
    except OSError as exc:
        raise RuntimeError(f"output directory not writable: {out_dir}: {exc}") from exc

    state = None
    reports = []
    wall_start = time.perf_counter()
    for position, (idx, path, frame) in enumerate(
        _iter_loaded_frames(entries, config.threads)
    ):
        if state is None:
            h, w = frame.shape[:2]
            state = init_state(config, w, h)
        composite, state, report = process_frame(
            state, frame, config, source_index=idx
        )
        reports.append(report)
        out_path = out_dir / f"frame_{position:06d}.png"
        Image.fromarray(frame_to_uint8(composite), mode="RGB").save(out_path)
    wall = time.perf_counter() - wall_start

    n = len(reports)
    phase_totals = {
        phase: sum(r.timings[phase] for r in reports) for phase in PHASES
    }
    processing = sum(phase_totals.values())
    summary = {
        "frames": n,
        "width": state.frame_shape[1],
        "height": state.frame_shape[0],
        "backend": _kernels.BACKEND,
        "fallbacks": sum(1 for r in reports if r.fallback),
        "wall_seconds": wall,
        "fps_overall": n / wall if wall > 0 else float("inf"),
        "fps_processing": n / processing if processing > 0 else float("inf"),
        "phase_seconds": phase_totals,
        "phase_fps": {
            phase: (n / total if total > 0 else float("inf"))
            for phase, total in phase_totals.items()
        },
    }
    return {"summary": summary, "frames": [r.to_dict() for r in reports]}


def write_report(report, path):
    Path(path).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
