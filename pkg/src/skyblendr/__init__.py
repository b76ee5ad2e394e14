"""skyblendr: video sky replacement with motion tracking and harmonization.

Replaces the sky region of a frame sequence with a warped sky template:
per-frame soft matting, sparse-flow background motion estimation, tiled
template rendering, and color-harmonized compositing.
"""

from ._kernels import BACKEND
from .blending import (
    HarmonizationParams,
    WeatherLayer,
    alpha_blend,
    harmonize_and_compose,
    recolor,
    region_means,
    relight,
    screen_blend,
)
from .imaging import (
    box_filter,
    build_pyramid,
    frame_from_uint8,
    frame_to_uint8,
    load_frame,
    resize_bilinear,
    to_gray,
    warp_similarity,
)
from .matting import (
    CoarseMatteWeights,
    GuidedFilterParams,
    MatteSource,
    estimate_coarse_matte,
    guided_filter,
    load_matte,
    refine_matte,
)
from .motion import (
    FeaturePoint,
    MotionParams,
    PointMatch,
    accumulate_motion,
    detect_sky_features,
    estimate_motion_ransac,
    filter_matches_kde,
    fit_similarity,
    track_lk,
)
from .pipeline import (
    FrameReport,
    PipelineConfig,
    PipelineState,
    init_state,
    parse_config_file,
    process_frame,
    run,
    write_report,
)
from .skybox import (
    SkyBoxTemplate,
    ViewportSpec,
    center_crop_transform,
    render_background,
)
from .transforms import SimilarityTransform

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CoarseMatteWeights",
    "FeaturePoint",
    "FrameReport",
    "GuidedFilterParams",
    "HarmonizationParams",
    "MatteSource",
    "MotionParams",
    "PipelineConfig",
    "PipelineState",
    "PointMatch",
    "SimilarityTransform",
    "SkyBoxTemplate",
    "ViewportSpec",
    "WeatherLayer",
    "accumulate_motion",
    "alpha_blend",
    "box_filter",
    "build_pyramid",
    "center_crop_transform",
    "detect_sky_features",
    "estimate_coarse_matte",
    "estimate_motion_ransac",
    "filter_matches_kde",
    "fit_similarity",
    "frame_from_uint8",
    "frame_to_uint8",
    "guided_filter",
    "harmonize_and_compose",
    "init_state",
    "load_frame",
    "load_matte",
    "parse_config_file",
    "process_frame",
    "recolor",
    "refine_matte",
    "region_means",
    "relight",
    "render_background",
    "resize_bilinear",
    "run",
    "screen_blend",
    "to_gray",
    "track_lk",
    "write_report",
    "warp_similarity",
    "__version__",
]
