"""Depth-indexed system matrices and the multi-camera separable operator.

A scene volume is an (N, N, K) nonnegative array: axis 0 is the horizontal
angular coordinate, axis 1 the vertical one, axis 2 the depth-plane index
(farthest first). A sensor image is an (M, M) array; multi-camera
measurements are a list of sensor images ordered by camera index.

The forward model per camera is ``I_c = sum_k PhiX[c][k] @ L_k @ PhiY[c][k].T``
with the sum taken in ascending depth order (and cameras in ascending order
in the adjoint) so reruns are bit-identical. The dense test oracle uses the
column-major vec convention: ``vec(PhiX L PhiY^T) = (PhiY kron PhiX) vec(L)``,
and a volume is vectorised as its K per-depth column-major vecs concatenated
in ascending depth order (numpy ``reshape(-1, order="F")``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .optics import (
    AngularGrid,
    CameraGeometry,
    CameraPose,
    DepthPlaneSet,
    MaskSpec,
    _effective_views,
    mask_transparency,
)

__all__ = [
    "SeparableOperator",
    "build_phi_1d",
    "build_phi_posed",
    "build_operator",
    "forward",
    "adjoint",
    "densify",
    "vec_volume",
    "vec_images",
    "unvec_volume",
    "is_structured",
    "volume_from_depth_intensity",
    "volume_to_depth_intensity",
    "collapse_intensity",
]


def _grid_angles(grid):
    """Accept an AngularGrid or a plain 1D array of angles."""
    if isinstance(grid, AngularGrid):
        return grid.angles()
    angles = np.asarray(grid, dtype=float)
    if angles.ndim != 1 or angles.size < 1:
        raise ValidationError("angle grid must be a 1D sequence")
    return angles


def build_phi_1d(cam, mask, depth, grid):
    """System matrix of one axis for a fronto-parallel plane at `depth`.

    Entry (i, j) is the mask transparency at ``(1 - d/depth)*s_i + d*sin(theta_j)``
    for sensor pixel i and grid angle j; shape (M, N).
    """
    if not depth > cam.mask_distance:
        raise ValidationError("depth must exceed the camera mask distance")
    d = cam.mask_distance
    s = cam.pixel_coords()
    theta = _grid_angles(grid)
    u = (1.0 - d / depth) * s[:, None] + d * np.sin(theta)[None, :]
    return mask_transparency(mask, u).astype(float)


def build_phi_posed(cam, pose, mask, depth, grid):
    """System matrix of the horizontal axis for a posed (yawed/translated) camera.

    The reference plane at `depth` is seen by the posed camera as a tilted
    plane: each grid angle j maps to its own effective angle and depth
    (theta'_j, z'_j), and column j samples the mask at
    ``(1 - d/z'_j)*s_i + d*sin(theta'_j)``.
    """
    d = cam.mask_distance
    s = cam.pixel_coords()
    theta = _grid_angles(grid)
    theta_c, z_c = _effective_views(pose, theta, depth, d)
    u = (1.0 - d / z_c)[None, :] * s[:, None] + d * np.sin(theta_c)[None, :]
    return mask_transparency(mask, u).astype(float)


@dataclass(eq=False)
class SeparableOperator:
    """Multi-camera, multi-depth separable measurement operator.

    ``phi_x[c][k]`` / ``phi_y[c][k]`` are the (M_c, N) horizontal/vertical
    system matrices of camera c for depth plane k. Immutable after build.
    """

    phi_x: tuple
    phi_y: tuple
    depths: DepthPlaneSet
    grid: AngularGrid
    cameras: tuple

    @property
    def n_cameras(self):
        return len(self.phi_x)

    @property
    def n_depths(self):
        return len(self.depths)

    @property
    def n_scene(self):
        return self.phi_x[0][0].shape[1]

    def sensor_pixels(self, c):
        return self.phi_x[c][0].shape[0]

    @property
    def volume_shape(self):
        return (self.n_scene, self.n_scene, self.n_depths)


def build_operator(cameras, mask, depths, grid):
    """Assemble the separable operator for a camera rig.

    `cameras` is a list of (CameraGeometry, CameraPose) sharing the depth set
    and angular grid. The reference camera (identity pose) uses the same
    matrix on both axes. A posed camera models the tilt exactly on the
    horizontal axis (per-column effective depths) while its vertical-axis
    matrix uses one effective depth per plane, the mean of the per-angle
    effective depths; this keeps the separable form at the cost of a
    documented approximation.
    """
    if len(cameras) < 1:
        raise ValidationError("need at least one camera")
    phi_x = []
    phi_y = []
    for cam, pose in cameras:
        px = []
        py = []
        for depth in depths.depths:
            if pose.is_identity:
                phi = build_phi_1d(cam, mask, depth, grid)
                px.append(phi)
                py.append(phi)
            else:
                px.append(build_phi_posed(cam, pose, mask, depth, grid))
                _, z_c = _effective_views(pose, _grid_angles(grid), depth, cam.mask_distance)
                py.append(build_phi_1d(cam, mask, float(z_c.mean()), grid))
        for m in px + py:
            m.setflags(write=False)
        phi_x.append(tuple(px))
        phi_y.append(tuple(py))
    return SeparableOperator(
        phi_x=tuple(phi_x),
        phi_y=tuple(phi_y),
        depths=depths,
        grid=grid,
        cameras=tuple((cam, pose) for cam, pose in cameras),
    )


def _check_volume(op, volume):
    v = np.asarray(volume, dtype=float)
    if v.shape != op.volume_shape:
        raise ValidationError(f"volume shape {v.shape} != operator shape {op.volume_shape}")
    return v


def _check_images(op, images):
    if len(images) != op.n_cameras:
        raise ValidationError(f"got {len(images)} images for {op.n_cameras} cameras")
    out = []
    for c, im in enumerate(images):
        a = np.asarray(im, dtype=float)
        m = op.sensor_pixels(c)
        if a.shape != (m, m):
            raise ValidationError(f"camera {c}: image shape {a.shape} != ({m}, {m})")
        out.append(a)
    return out


def forward(op, volume):
    """Apply the measurement operator: one (M, M) sensor image per camera."""
    v = _check_volume(op, volume)
    images = []
    for c in range(op.n_cameras):
        m = op.sensor_pixels(c)
        acc = np.zeros((m, m))
        for k in range(op.n_depths):
            acc += op.phi_x[c][k] @ v[:, :, k] @ op.phi_y[c][k].T
        images.append(acc)
    return images


def adjoint(op, images):
    """Apply the adjoint to per-camera images; returns an (N, N, K) volume."""
    ims = _check_images(op, images)
    n = op.n_scene
    out = np.zeros((n, n, op.n_depths))
    for k in range(op.n_depths):
        acc = np.zeros((n, n))
        for c in range(op.n_cameras):
            acc += op.phi_x[c][k].T @ ims[c] @ op.phi_y[c][k]
        out[:, :, k] = acc
    return out


def vec_volume(volume):
    """Column-major vectorisation of an (N, N, K) volume."""
    return np.asarray(volume, dtype=float).reshape(-1, order="F")


def unvec_volume(x, shape):
    """Inverse of vec_volume."""
    return np.asarray(x, dtype=float).reshape(shape, order="F")


def vec_images(images):
    """Column-major vecs of the per-camera images, concatenated in camera order."""
    return np.concatenate([np.asarray(im, dtype=float).reshape(-1, order="F") for im in images])


def densify(op, max_entries=10_000_000):
    """Explicit dense matrix A with A @ vec_volume(L) == vec_images(forward(L)).

    Intended as a test oracle; guarded so it cannot be misused at scale.
    Block (c, k) of A is ``phi_y[c][k] kron phi_x[c][k]`` (column-major vec).
    """
    n_cols = op.n_scene * op.n_scene * op.n_depths
    row_sizes = [op.sensor_pixels(c) ** 2 for c in range(op.n_cameras)]
    n_rows = sum(row_sizes)
    if n_rows * n_cols > max_entries:
        raise ValidationError(
            f"dense operator would hold {n_rows * n_cols} entries (guard: {max_entries})"
        )
    a = np.zeros((n_rows, n_cols))
    nn = op.n_scene * op.n_scene
    row0 = 0
    for c in range(op.n_cameras):
        for k in range(op.n_depths):
            a[row0 : row0 + row_sizes[c], k * nn : (k + 1) * nn] = np.kron(
                op.phi_y[c][k], op.phi_x[c][k]
            )
        row0 += row_sizes[c]
    return a


def is_structured(volume):
    """True iff the volume is nonnegative with at most one active depth per pixel."""
    v = np.asarray(volume)
    if (v < 0).any():
        return False
    return (np.count_nonzero(v, axis=2) <= 1).all()


def volume_from_depth_intensity(depth_map, intensity, n_depths):
    """Build the (N, N, K) volume that carries `intensity` at `depth_map`."""
    depth_map = np.asarray(depth_map)
    intensity = np.asarray(intensity, dtype=float)
    if depth_map.shape != intensity.shape:
        raise ValidationError("depth map and intensity shapes differ")
    if depth_map.min() < 0 or depth_map.max() >= n_depths:
        raise ValidationError("depth index out of range")
    volume = np.zeros(depth_map.shape + (n_depths,))
    np.put_along_axis(volume, depth_map[..., None], intensity[..., None], axis=2)
    return volume


def volume_to_depth_intensity(volume):
    """Structured view (depth_map, intensity) of a one-depth-per-pixel volume.

    Pixels with no active depth get index 0 and intensity 0. Raises if some
    pixel is active at more than one depth.
    """
    v = np.asarray(volume, dtype=float)
    active = v != 0
    if (active.sum(axis=2) > 1).any():
        raise ValidationError("volume has a pixel with more than one active depth")
    depth_map = np.argmax(active, axis=2)
    intensity = np.take_along_axis(v, depth_map[..., None], axis=2)[..., 0]
    return depth_map, intensity


def collapse_intensity(volume):
    """Depth-collapsed intensity image (sum over the depth axis)."""
    return np.asarray(volume, dtype=float).sum(axis=2)
