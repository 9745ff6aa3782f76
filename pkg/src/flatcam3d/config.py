"""Experiment configuration: flat `section.key = value` text format.

The format is line oriented: blank lines and full-line `#` comments are
ignored, every other line must read `section.key = value`. Booleans are 0/1,
angles are degrees in the file (radians internally), lists are
comma-separated. Unknown keys, duplicates, and constraint violations are
rejected with the offending line number. An empty file yields the default
experiment: d = 1 mm, 256x256 sensor, 128x128 scene, K = 10 planes over
100 mm..3000 mm, +-20 deg field of view.

Derived defaults (filled by ``resolved()`` when left unset). The paper-style
constants (d = 1 mm, D in [100, 3000] mm, +-20 deg) say nothing about sensor
or mask pitch, so those derive from three documented design rules:

* geometry.sensor_pitch_mm — the sensor half-width is 16x the chief-ray
  footprint ``F = d sin(theta)/(1 - d/D_max)`` of the field of view. Depth
  only enters the model through the shadow-magnification term ``(d/D) s``,
  so a sensor several millimetres wide (like real mask-based cameras) is
  what makes nearby depth planes produce measurably different patterns.
* mask.pitch_mm — about half the mask shift of one angular step, so every
  scene pixel lands on a fresh stretch of the pattern; snapped so that one
  sensor-pixel step advances the mask-sampling phase by the golden ratio
  (mod 1). An integer ratio of sensor pitch to mask pitch makes whole
  matrix columns coincide across nearby depth planes and the
  depth-restricted systems exactly singular.
* mask.features — enough to cover the sensor's oblique view of the field
  plus yawed cameras up to ~25 deg.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

from .errors import ConfigError, ValidationError
from .model import build_operator
from .optics import AngularGrid, CameraGeometry, CameraPose, generate_mask, sample_depth_planes
from .pursuit import PursuitConfig
from .scenes import NoiseSpec, SceneSpec
from .sweep import default_rig_yaws

__all__ = [
    "ExperimentConfig",
    "parse_config",
    "parse_config_values",
    "override_value",
    "serialize_config",
]


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully describes one experiment; attribute names mirror `section_key`."""

    d_mm: float = 1.0
    sensor_M: int = 256
    sensor_pitch_mm: float = None
    theta_min_deg: float = -20.0
    theta_max_deg: float = 20.0
    mask_features: int = None
    mask_pitch_mm: float = None
    mask_seed: int = 1
    mask_symmetric: bool = False
    depth_min_mm: float = 100.0
    depth_max_mm: float = 3000.0
    depth_K: int = 10
    scene_N: int = 128
    scene_cards: int = 3
    scene_size_min: float = 0.2
    scene_size_max: float = 0.4
    scene_intensity_min: float = 0.25
    scene_intensity_max: float = 1.0
    scene_seed: int = 0
    noise_snr_db: float = 40.0
    noise_seed: int = 0
    solver_max_outer_iters: int = 20
    solver_residual_rel_tol: float = 1e-4
    solver_cg_max_iters: int = 200
    solver_cg_tol: float = 1e-8
    solver_nonneg_clamp: bool = True
    rig_yaws_deg: tuple = (0.0,)
    rig_tx_mm: tuple = (0.0,)
    rig_tz_mm: tuple = (0.0,)
    output_dir: str = "out"

    _SENSOR_WIDTH_FACTOR = 16.0  # sensor half-width in chief-ray footprints
    _FEATURES_PER_STEP = 2.0  # mask features per angular-step shift
    _GOLDEN_FRAC = (math.sqrt(5.0) - 1.0) / 2.0

    def resolved(self):
        """Copy with derived defaults filled in and all constraints checked."""
        cfg = self
        if None in (cfg.sensor_pitch_mm, cfg.mask_pitch_mm, cfg.mask_features):
            _check(cfg.depth_max_mm > cfg.d_mm > 0, "geometry.d_mm", "0 < d < D_max")
            _check(
                -90.0 < cfg.theta_min_deg < cfg.theta_max_deg < 90.0,
                "geometry.theta_min_deg",
                "-90 < θ_min < θ_max < 90",
            )
            d = cfg.d_mm
            theta_big = math.radians(max(abs(cfg.theta_min_deg), abs(cfg.theta_max_deg)))
            q_min = d / cfg.depth_max_mm
            q_mid = (q_min + d / cfg.depth_min_mm) / 2.0
            half_width = self._SENSOR_WIDTH_FACTOR * d * math.sin(theta_big) / (1.0 - q_min)
            if cfg.sensor_pitch_mm is None:
                cfg = replace(cfg, sensor_pitch_mm=2.0 * half_width / cfg.sensor_M)
            if cfg.mask_pitch_mm is None:
                step = (
                    d
                    * (math.sin(math.radians(cfg.theta_max_deg)) - math.sin(math.radians(cfg.theta_min_deg)))
                    / max(cfg.scene_N - 1, 1)
                )
                ratio = (1.0 - q_mid) * cfg.sensor_pitch_mm * self._FEATURES_PER_STEP / step
                ratio = max(math.floor(ratio), 1) + self._GOLDEN_FRAC
                cfg = replace(cfg, mask_pitch_mm=(1.0 - q_mid) * cfg.sensor_pitch_mm / ratio)
            if cfg.mask_features is None:
                oblique = min(math.radians(89.0), theta_big + math.radians(25.0))
                cover = (1.0 - q_min) * cfg.sensor_M * cfg.sensor_pitch_mm / 2.0 + d * math.sin(oblique)
                cfg = replace(cfg, mask_features=int(math.ceil(2.0 * cover / cfg.mask_pitch_mm)))
        _validate(cfg)
        return cfg

    # --- builders -----------------------------------------------------------

    def camera(self):
        cfg = self.resolved()
        return CameraGeometry(
            n_sensor=cfg.sensor_M,
            sensor_pitch=cfg.sensor_pitch_mm,
            mask_distance=cfg.d_mm,
        )

    def angular_grid(self):
        cfg = self.resolved()
        return AngularGrid(
            n_angles=cfg.scene_N,
            theta_min=math.radians(cfg.theta_min_deg),
            theta_max=math.radians(cfg.theta_max_deg),
        )

    def depth_planes(self, k=None):
        cfg = self.resolved()
        return sample_depth_planes(
            cfg.d_mm, cfg.depth_min_mm, cfg.depth_max_mm, cfg.depth_K if k is None else k
        )

    def mask_spec(self):
        cfg = self.resolved()
        return generate_mask(
            cfg.mask_features, cfg.mask_pitch_mm, cfg.mask_seed, cfg.mask_symmetric
        )

    def rig(self):
        """(CameraGeometry, CameraPose) pairs from the rig block."""
        cfg = self.resolved()
        cam = cfg.camera()
        return tuple(
            (cam, CameraPose(yaw=math.radians(y), translation=(tx, tz)))
            for y, tx, tz in zip(cfg.rig_yaws_deg, cfg.rig_tx_mm, cfg.rig_tz_mm)
        )

    def scene_spec(self):
        cfg = self.resolved()
        return SceneSpec(
            n_pixels=cfg.scene_N,
            n_cards=cfg.scene_cards,
            size_range=(cfg.scene_size_min, cfg.scene_size_max),
            intensity_range=(cfg.scene_intensity_min, cfg.scene_intensity_max),
            seed=cfg.scene_seed,
        )

    def noise_spec(self):
        return NoiseSpec(snr_db=self.noise_snr_db, seed=self.noise_seed)

    def pursuit_config(self):
        return PursuitConfig(
            max_outer_iters=self.solver_max_outer_iters,
            residual_rel_tol=self.solver_residual_rel_tol,
            cg_max_iters=self.solver_cg_max_iters,
            cg_tol=self.solver_cg_tol,
            nonneg_clamp=self.solver_nonneg_clamp,
        )

    def build_rig_operator(self, n_cameras=None, mask=None, depths=None, grid=None):
        """Operator for the config rig, or for a default n-camera rig."""
        cfg = self.resolved()
        if n_cameras is None:
            cameras = cfg.rig()
        else:
            cam = cfg.camera()
            cameras = tuple(
                (cam, CameraPose(yaw=y)) for y in default_rig_yaws(n_cameras)
            )
        return build_operator(
            cameras,
            cfg.mask_spec() if mask is None else mask,
            cfg.depth_planes() if depths is None else depths,
            cfg.angular_grid() if grid is None else grid,
        )


# --- schema ------------------------------------------------------------------

_INT, _FLOAT, _BOOL, _FLOATS, _STR = "int", "float", "bool", "floats", "str"

# config key -> (attribute, type)
_SCHEMA = {
    "geometry.d_mm": ("d_mm", _FLOAT),
    "geometry.M": ("sensor_M", _INT),
    "geometry.sensor_pitch_mm": ("sensor_pitch_mm", _FLOAT),
    "geometry.theta_min_deg": ("theta_min_deg", _FLOAT),
    "geometry.theta_max_deg": ("theta_max_deg", _FLOAT),
    "mask.features": ("mask_features", _INT),
    "mask.pitch_mm": ("mask_pitch_mm", _FLOAT),
    "mask.seed": ("mask_seed", _INT),
    "mask.symmetric": ("mask_symmetric", _BOOL),
    "depth.D_min_mm": ("depth_min_mm", _FLOAT),
    "depth.D_max_mm": ("depth_max_mm", _FLOAT),
    "depth.K": ("depth_K", _INT),
    "scene.N": ("scene_N", _INT),
    "scene.cards": ("scene_cards", _INT),
    "scene.size_min": ("scene_size_min", _FLOAT),
    "scene.size_max": ("scene_size_max", _FLOAT),
    "scene.intensity_min": ("scene_intensity_min", _FLOAT),
    "scene.intensity_max": ("scene_intensity_max", _FLOAT),
    "scene.seed": ("scene_seed", _INT),
    "noise.snr_db": ("noise_snr_db", _FLOAT),
    "noise.seed": ("noise_seed", _INT),
    "solver.max_outer_iters": ("solver_max_outer_iters", _INT),
    "solver.residual_rel_tol": ("solver_residual_rel_tol", _FLOAT),
    "solver.cg_max_iters": ("solver_cg_max_iters", _INT),
    "solver.cg_tol": ("solver_cg_tol", _FLOAT),
    "solver.nonneg_clamp": ("solver_nonneg_clamp", _BOOL),
    "rig.yaws_deg": ("rig_yaws_deg", _FLOATS),
    "rig.tx_mm": ("rig_tx_mm", _FLOATS),
    "rig.tz_mm": ("rig_tz_mm", _FLOATS),
    "output.dir": ("output_dir", _STR),
}

_ATTR_TO_KEY = {attr: key for key, (attr, _) in _SCHEMA.items()}


def _parse_value(kind, text, lineno):
    text = text.strip()
    try:
        if kind == _INT:
            return int(text)
        if kind == _FLOAT:
            return float(text)
        if kind == _BOOL:
            if text not in ("0", "1"):
                raise ValueError
            return text == "1"
        if kind == _FLOATS:
            return tuple(float(tok) for tok in text.split(","))
        return text
    except ValueError:
        raise ConfigError(f"expected a {kind} value, got {text!r}", line=lineno) from None


def parse_config_values(text):
    """Raw `attribute -> value` dict from configuration text (no defaults)."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        name, eq, value = line.partition("=")
        if not eq:
            raise ConfigError(
                "expected 'section.key = value'", line=lineno, column=len(raw.rstrip()) + 1
            )
        key = name.strip()
        if "." not in key:
            raise ConfigError(
                f"key {key!r} is missing its section", line=lineno, column=raw.find(key) + 1
            )
        if key not in _SCHEMA:
            raise ConfigError(f"unknown key {key!r}", line=lineno)
        attr, kind = _SCHEMA[key]
        if attr in values:
            raise ConfigError(f"duplicate key {key!r}", line=lineno)
        values[attr] = _parse_value(kind, value, lineno)
    return values


def override_value(values, key, text):
    """Apply one `section.key` override (command-line style, last wins)."""
    key = key.strip()
    if key not in _SCHEMA:
        raise ConfigError(f"unknown key {key!r}")
    attr, kind = _SCHEMA[key]
    values[attr] = _parse_value(kind, text, None)
    return values


def parse_config(text):
    """Parse and validate configuration text; defaults fill anything omitted."""
    return ExperimentConfig(**parse_config_values(text)).resolved()


def serialize_config(cfg):
    """Canonical text for a config; parse_config round-trips it exactly."""
    cfg = cfg.resolved()
    lines = []
    for f in fields(cfg):
        key = _ATTR_TO_KEY[f.name]
        value = getattr(cfg, f.name)
        if isinstance(value, bool):
            text = "1" if value else "0"
        elif isinstance(value, tuple):
            text = ",".join(repr(float(v)) for v in value)
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


def _check(cond, key, constraint):
    if not cond:
        raise ConfigError(f"{key}: constraint violated: {constraint}")


def _validate(cfg):
    _check(cfg.d_mm > 0, "geometry.d_mm", "d > 0")
    _check(cfg.sensor_M >= 1, "geometry.M", "M ≥ 1")
    _check(cfg.sensor_pitch_mm > 0, "geometry.sensor_pitch_mm", "pitch > 0")
    _check(
        -90.0 < cfg.theta_min_deg < cfg.theta_max_deg < 90.0,
        "geometry.theta_min_deg",
        "-90 < θ_min < θ_max < 90",
    )
    _check(cfg.mask_features >= 1, "mask.features", "features ≥ 1")
    _check(cfg.mask_pitch_mm > 0, "mask.pitch_mm", "pitch > 0")
    _check(
        cfg.d_mm < cfg.depth_min_mm < cfg.depth_max_mm,
        "depth.D_min_mm",
        "d < D_min < D_max",
    )
    _check(cfg.depth_K >= 1, "depth.K", "K ≥ 1")
    _check(cfg.scene_N >= 2, "scene.N", "N ≥ 2")
    _check(cfg.scene_cards >= 0, "scene.cards", "cards ≥ 0")
    _check(cfg.scene_cards <= cfg.depth_K, "scene.cards", "cards ≤ K")
    _check(
        0 < cfg.scene_size_min <= cfg.scene_size_max <= 1,
        "scene.size_min",
        "0 < size_min ≤ size_max ≤ 1",
    )
    _check(
        0 < cfg.scene_intensity_min <= cfg.scene_intensity_max,
        "scene.intensity_min",
        "0 < intensity_min ≤ intensity_max",
    )
    _check(not math.isnan(cfg.noise_snr_db), "noise.snr_db", "snr_db must not be NaN")
    _check(cfg.solver_max_outer_iters >= 1, "solver.max_outer_iters", "iters ≥ 1")
    _check(cfg.solver_residual_rel_tol > 0, "solver.residual_rel_tol", "tol > 0")
    _check(cfg.solver_cg_max_iters >= 1, "solver.cg_max_iters", "iters ≥ 1")
    _check(cfg.solver_cg_tol > 0, "solver.cg_tol", "tol > 0")
    n_rig = len(cfg.rig_yaws_deg)
    _check(n_rig >= 1, "rig.yaws_deg", "at least one camera")
    _check(
        len(cfg.rig_tx_mm) == n_rig and len(cfg.rig_tz_mm) == n_rig,
        "rig.tx_mm",
        "rig lists must have equal length",
    )
    _check(all(abs(y) < 90.0 for y in cfg.rig_yaws_deg), "rig.yaws_deg", "|yaw| < 90")
    _check(bool(cfg.output_dir), "output.dir", "must not be empty")
