"""Physical mask, camera geometry, angular grid, and depth-plane sampling.

Conventions used throughout the package: lengths are millimetres, angles are
radians. The reference sensor plane is centred at the origin and the mask
plane sits ``mask_distance`` mm in front of it, toward the scene. Sensor
pixel ``i`` of ``M`` is centred at ``s_i = (i - (M-1)/2) * sensor_pitch``.
A scene point at angle ``theta`` and depth ``z > d`` illuminates sensor
coordinate ``s`` through the mask coordinate

    u = (1 - d/z) * s + d * sin(theta)

so ``q = d/z`` is the lightfield slope of the point and ``1 - q`` the
magnification of its mask shadow. Depth planes are indexed farthest first:
index 0 is the deepest plane.

Mask bit sequences come from a frozen, explicitly documented generator so
identical seeds give identical masks on any platform: the seed is mixed once
with splitmix64 to produce a nonzero 64-bit state, then each feature takes
the top bit of successive xorshift64* outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

__all__ = [
    "MaskSpec",
    "CameraGeometry",
    "CameraPose",
    "AngularGrid",
    "DepthPlaneSet",
    "mask_transparency",
    "generate_mask",
    "lightfield_slope",
    "sample_depth_planes",
    "effective_view",
]

_MASK64 = (1 << 64) - 1


def _splitmix64(seed):
    """One splitmix64 step: returns the mixed 64-bit output for `seed + gamma`."""
    z = (seed + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _bernoulli_bits(seed, count):
    """`count` fair bits: top bit of successive xorshift64* words.

    State is the splitmix64 mix of the seed (forced nonzero, as xorshift
    requires). Frozen algorithm; do not change without versioning mask files.
    """
    state = _splitmix64(int(seed) & _MASK64) or 0x9E3779B97F4A7C15
    bits = np.empty(count, dtype=np.uint8)
    for i in range(count):
        state ^= state >> 12
        state = (state ^ (state << 25)) & _MASK64
        state ^= state >> 27
        word = (state * 0x2545F4914F6CDD1D) & _MASK64
        bits[i] = word >> 63
    return bits


@dataclass(frozen=True, eq=False)
class MaskSpec:
    """A 1D binary mask pattern; the 2D mask is its separable outer product.

    Parameters
    ----------
    bits : array_like
        Transparency of each feature, 0 (opaque) or 1 (transparent).
    pitch : float
        Feature width (mm).
    offset : float
        Position (mm) of the left edge of feature 0 in the mask plane.
    seed : int
        Seed the bit sequence was generated from (provenance only).
    symmetric : bool
        Whether the sequence was mirrored about its centre at generation.
    """

    bits: np.ndarray
    pitch: float
    offset: float
    seed: int = 0
    symmetric: bool = False

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.uint8)
        if bits.ndim != 1 or bits.size < 1:
            raise ValidationError("mask bits must be a nonempty 1D sequence")
        if not np.isin(bits, (0, 1)).all():
            raise ValidationError("mask bits must be 0 or 1")
        if not (self.pitch > 0 and math.isfinite(self.pitch)):
            raise ValidationError("mask pitch must be positive and finite")
        if not math.isfinite(self.offset):
            raise ValidationError("mask offset must be finite")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "pitch", float(self.pitch))
        object.__setattr__(self, "offset", float(self.offset))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "symmetric", bool(self.symmetric))

    @property
    def n_features(self):
        return int(self.bits.size)

    @property
    def extent(self):
        """Total width (mm); transparency is 0 outside [offset, offset+extent)."""
        return self.bits.size * self.pitch


@dataclass(frozen=True)
class CameraGeometry:
    """Sensor pixel count/pitch and the mask-to-sensor distance (all per axis).

    Pixel ``i`` is centred at ``(i - (n_sensor - 1)/2) * sensor_pitch``.
    """

    n_sensor: int
    sensor_pitch: float
    mask_distance: float

    def __post_init__(self):
        if self.n_sensor < 1:
            raise ValidationError("n_sensor must be >= 1")
        if not self.sensor_pitch > 0:
            raise ValidationError("sensor_pitch must be positive")
        if not self.mask_distance > 0:
            raise ValidationError("mask_distance must be positive")

    def pixel_coords(self):
        """Sensor pixel centre coordinates (mm), shape (n_sensor,)."""
        i = np.arange(self.n_sensor, dtype=float)
        return (i - (self.n_sensor - 1) / 2.0) * self.sensor_pitch


@dataclass(frozen=True)
class CameraPose:
    """Camera pose relative to the reference frame: yaw about the vertical
    axis plus an (x, z) translation in mm."""

    yaw: float = 0.0
    translation: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not abs(self.yaw) < math.pi / 2:
            raise ValidationError("|yaw| must be < pi/2 (camera must face the scene)")
        if len(self.translation) != 2:
            raise ValidationError("translation must be (x, z)")
        object.__setattr__(
            self, "translation", (float(self.translation[0]), float(self.translation[1]))
        )

    @property
    def is_identity(self):
        return self.yaw == 0.0 and self.translation == (0.0, 0.0)


@dataclass(frozen=True)
class AngularGrid:
    """Uniform angular sampling of one scene axis over [theta_min, theta_max]."""

    n_angles: int
    theta_min: float
    theta_max: float

    def __post_init__(self):
        if self.n_angles < 2:
            raise ValidationError("n_angles must be >= 2")
        if not (-math.pi / 2 < self.theta_min < self.theta_max < math.pi / 2):
            raise ValidationError("need -pi/2 < theta_min < theta_max < pi/2")

    def angles(self):
        """Grid angles (radians), shape (n_angles,)."""
        return np.linspace(self.theta_min, self.theta_max, self.n_angles)


@dataclass(frozen=True, eq=False)
class DepthPlaneSet:
    """Model depths D_1..D_K ordered farthest first, with the mask distance
    they were derived from. Slopes d/D_k must be uniformly spaced."""

    depths: np.ndarray
    mask_distance: float

    def __post_init__(self):
        depths = np.asarray(self.depths, dtype=float)
        if depths.ndim != 1 or depths.size < 1:
            raise ValidationError("depths must be a nonempty 1D sequence")
        if not (depths > self.mask_distance).all():
            raise ValidationError("every depth must exceed the mask distance")
        if depths.size > 1:
            if not (np.diff(depths) < 0).all():
                raise ValidationError("depths must be strictly decreasing (farthest first)")
            q = self.mask_distance / depths
            dq = np.diff(q)
            if np.abs(dq - dq[0]).max() > 1e-9 * (q[-1] - q[0]):
                raise ValidationError("slopes d/D must be uniformly spaced")
        depths.setflags(write=False)
        object.__setattr__(self, "depths", depths)
        object.__setattr__(self, "mask_distance", float(self.mask_distance))

    def __len__(self):
        return int(self.depths.size)

    def slopes(self):
        """Lightfield slopes q_k = d / D_k, ascending, shape (K,)."""
        return self.mask_distance / self.depths


def mask_transparency(mask, u):
    """Transparency of the mask at mask-plane coordinate `u` (mm).

    Piecewise constant over features; 0 everywhere outside the extent (the
    mask sits in an opaque mount). Accepts scalars or arrays.
    """
    u = np.asarray(u, dtype=float)
    inside = (u >= mask.offset) & (u < mask.offset + mask.bits.size * mask.pitch)
    out = np.zeros(u.shape, dtype=np.uint8)
    if inside.any():
        idx = np.floor((u[inside] - mask.offset) / mask.pitch).astype(np.intp)
        out[inside] = mask.bits[np.clip(idx, 0, mask.bits.size - 1)]
    if out.ndim == 0:
        return int(out)
    return out


def generate_mask(n_features, pitch, seed, symmetric=False):
    """Generate a centred pseudorandom binary mask.

    Bits are fair coin flips from the frozen splitmix64/xorshift64* generator
    (see module docstring); with ``symmetric`` the first ceil(n/2) bits are
    generated and mirrored about the centre. The offset is chosen so the mask
    is centred on the optical axis.
    """
    n_features = int(n_features)
    if n_features < 1:
        raise ValidationError("n_features must be >= 1")
    if symmetric:
        half = _bernoulli_bits(seed, (n_features + 1) // 2)
        bits = np.concatenate([half, half[: n_features // 2][::-1]])
    else:
        bits = _bernoulli_bits(seed, n_features)
    offset = -n_features * pitch / 2.0
    return MaskSpec(bits=bits, pitch=pitch, offset=offset, seed=int(seed), symmetric=symmetric)


def lightfield_slope(d, depth):
    """Lightfield slope q = d / depth of a source at the given depth.

    The shadow magnification of the source is 1 - q; q -> 0 for collimated
    (infinitely far) light.
    """
    if not d > 0:
        raise ValidationError("mask distance d must be positive")
    if not depth > d:
        raise ValidationError("depth must exceed the mask distance")
    return d / depth


def sample_depth_planes(d, depth_min, depth_max, count):
    """Choose `count` model depths by uniform sampling in lightfield slope.

    Slopes run from d/depth_max to d/depth_min in equal steps; the returned
    plane depths d/q_k are therefore non-uniform in depth, densest near the
    camera, and ordered farthest first with exact endpoints. ``count == 1``
    returns just the farthest plane.
    """
    count = int(count)
    if count < 1:
        raise ValidationError("count must be >= 1")
    if not (0 < d < depth_min < depth_max):
        raise ValidationError("need 0 < d < depth_min < depth_max")
    if count == 1:
        return DepthPlaneSet(np.array([depth_max], dtype=float), d)
    q_min = d / depth_max
    q_max = d / depth_min
    q = q_min + np.arange(count, dtype=float) * (q_max - q_min) / (count - 1)
    depths = d / q
    depths[0] = depth_max
    depths[-1] = depth_min
    return DepthPlaneSet(depths, d)


def effective_view(pose, theta_ref, depth_ref, mask_distance=0.0):
    """Angle and depth at which a posed camera sees a reference-plane point.

    The point at angle ``theta_ref`` on the reference plane at ``depth_ref``
    is mapped into the camera frame (translate, then undo the yaw) and
    returned as ``(theta_cam, z_cam)`` where ``z_cam`` is the perpendicular
    distance to the camera's mask plane. Raises if the point lands on or
    behind the mask plane (``z_cam <= mask_distance``).
    """
    theta, z = _effective_views(pose, np.float64(theta_ref), float(depth_ref), mask_distance)
    return float(theta), float(z)


def _effective_views(pose, thetas, depth_ref, mask_distance):
    """Vectorized effective_view over an array of reference angles."""
    x = depth_ref * np.tan(thetas) - pose.translation[0]
    z = depth_ref - pose.translation[1]
    c, s = math.cos(pose.yaw), math.sin(pose.yaw)
    x_cam = c * x - s * z
    z_cam = s * x + c * z
    if not (z_cam > mask_distance).all():
        raise ValidationError(
            "scene point lies on or behind the camera mask plane "
            f"(min z' = {np.min(z_cam):.6g} mm, mask at {mask_distance:.6g} mm)"
        )
    return np.arctan2(x_cam, z_cam), z_cam
