"""Simulation and joint depth/intensity reconstruction for mask-based
lensless cameras: a depth-dependent separable imaging model plus a greedy
depth-selective pursuit solver."""

from .config import ExperimentConfig, parse_config, serialize_config
from .errors import ConfigError, FormatError, ValidationError
from .fileio import (
    read_mask,
    read_matrix,
    read_volume,
    write_mask,
    write_matrix,
    write_pgm,
    write_reconstruction,
    write_volume,
)
from .model import (
    SeparableOperator,
    adjoint,
    build_operator,
    build_phi_1d,
    build_phi_posed,
    collapse_intensity,
    densify,
    forward,
    is_structured,
    unvec_volume,
    vec_images,
    vec_volume,
    volume_from_depth_intensity,
    volume_to_depth_intensity,
)
from .optics import (
    AngularGrid,
    CameraGeometry,
    CameraPose,
    DepthPlaneSet,
    MaskSpec,
    effective_view,
    generate_mask,
    lightfield_slope,
    mask_transparency,
    sample_depth_planes,
)
from .pursuit import (
    FixedDepthResult,
    LsqResult,
    PursuitConfig,
    ReconstructionResult,
    depth_pursuit,
    fixed_depth_reconstruct,
    init_support,
    merge_supports,
    proxy_select,
    prune_threshold,
    restricted_lsq,
)
from .scenes import (
    NoiseSpec,
    SceneSpec,
    active_pixels,
    depth_accuracy,
    generate_cards_scene,
    psnr,
    simulate_measurements,
)
from .sweep import (
    TrialRecord,
    default_rig_yaws,
    records_to_csv,
    run_sweep,
    run_trial,
    summarize_psnr,
    trial_seed,
)

__version__ = "0.1.0"
