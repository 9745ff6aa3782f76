"""Greedy depth-selective pursuit and the fixed-depth baseline.

The pursuit alternates three steps: nominate a new depth per pixel from the
proxy map (adjoint of the residual), solve a least-squares problem over the
merged one-or-two-depth support per pixel, then prune back to one depth per
pixel by magnitude. Depth maps are (N, N) integer arrays of plane indices
(farthest first); supports are (N, N, K) boolean arrays with one or two True
entries per pixel.

Least-squares subproblems run conjugate gradient on the support-masked
normal equations, warm-started from the current estimate. Ties are always
broken toward the smaller (farther) depth index, matching the farthest-plane
initialization.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ValidationError
from .model import adjoint, forward, volume_from_depth_intensity

__all__ = [
    "PursuitConfig",
    "ReconstructionResult",
    "LsqResult",
    "FixedDepthResult",
    "init_support",
    "proxy_select",
    "argmax_magnitude",
    "merge_supports",
    "restricted_lsq",
    "prune_threshold",
    "depth_pursuit",
    "fixed_depth_reconstruct",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PursuitConfig:
    """Stopping and solver parameters for depth_pursuit."""

    max_outer_iters: int = 20
    residual_rel_tol: float = 1e-4
    cg_max_iters: int = 200
    cg_tol: float = 1e-8
    nonneg_clamp: bool = True

    def __post_init__(self):
        if self.max_outer_iters < 1 or self.cg_max_iters < 1:
            raise ValidationError("iteration limits must be positive")
        if self.residual_rel_tol <= 0 or self.cg_tol <= 0:
            raise ValidationError("tolerances must be positive")


@dataclass
class ReconstructionResult:
    """Structured estimate plus solver diagnostics.

    `residuals[t]` is the measurement-space residual norm after the
    least-squares solve of outer iteration t (all cameras, Frobenius).
    """

    depth_map: np.ndarray
    intensity: np.ndarray
    residuals: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


class LsqResult(NamedTuple):
    volume: np.ndarray
    converged: bool
    iterations: int


class FixedDepthResult(NamedTuple):
    image: np.ndarray
    converged: bool
    iterations: int


def init_support(n_pixels, n_depths):
    """Initial depth map: every pixel on the farthest plane (index 0)."""
    if n_pixels < 1 or n_depths < 1:
        raise ValidationError("n_pixels and n_depths must be positive")
    return np.zeros((n_pixels, n_pixels), dtype=np.intp)


def argmax_magnitude(volume):
    """Per-pixel depth index of the largest |value|; ties go to the smaller index."""
    return np.argmax(np.abs(volume), axis=2)


def proxy_select(op, measurements, current):
    """Nominate a depth per pixel from the proxy map adjoint(residual)."""
    residual = [m - f for m, f in zip(measurements, forward(op, current))]
    return argmax_magnitude(adjoint(op, residual))


def merge_supports(depth_map_a, depth_map_b, n_depths):
    """Boolean (N, N, K) support containing both per-pixel depth choices."""
    a = np.asarray(depth_map_a)
    b = np.asarray(depth_map_b)
    if a.shape != b.shape:
        raise ValidationError("depth map shapes differ")
    for m in (a, b):
        if m.size and (m.min() < 0 or m.max() >= n_depths):
            raise ValidationError("depth index out of range")
    support = np.zeros(a.shape + (n_depths,), dtype=bool)
    np.put_along_axis(support, a[..., None], True, axis=2)
    np.put_along_axis(support, b[..., None], True, axis=2)
    return support


def _residual_norm(measurements, predicted):
    return float(
        np.sqrt(sum(np.sum((m - p) ** 2) for m, p in zip(measurements, predicted)))
    )


def _images_norm(images):
    return float(np.sqrt(sum(np.sum(c**2) for c in images)))


def _cgls(apply_fwd, apply_adj, measurements, x0, rhs_norm, tol, max_iters, noise_floor=0.0):
    """CGLS on min ||measurements - A x||; equivalent to CG on the normal
    equations but tracks the measurement-space residual, enabling the
    discrepancy stop ||r|| <= noise_floor (Morozov) on noisy data.

    Converges when the normal-equation residual ||A^T r|| falls below
    tol * rhs_norm, or at the noise floor; returns (x, converged, iters).
    """
    x = x0.copy()
    r = [m - f for m, f in zip(measurements, apply_fwd(x))]
    s = apply_adj(r)
    p = s.copy()
    gamma = float(np.vdot(s, s))
    stop = tol * rhs_norm

    def done():
        if np.sqrt(gamma) <= stop:
            return True
        return noise_floor > 0.0 and _images_norm(r) <= noise_floor

    for iterations in range(max_iters):
        if done():
            return x, True, iterations
        q = apply_fwd(p)
        qq = float(sum(np.vdot(c, c) for c in q))
        if qq <= 0.0:
            return x, done(), iterations
        alpha = gamma / qq
        x += alpha * p
        r = [c - alpha * d for c, d in zip(r, q)]
        s = apply_adj(r)
        gamma_new = float(np.vdot(s, s))
        p = s + (gamma_new / gamma) * p
        gamma = gamma_new
    return x, done(), max_iters


def restricted_lsq(op, measurements, support, cfg=None, start=None, noise_floor=0.0):
    """Least squares for the measurements over a support-restricted volume.

    Minimises the squared Frobenius misfit over all cameras among volumes
    vanishing outside `support`, by conjugate gradient on the normal
    equations (CGLS form) with the support mask applied after every adjoint
    and before every forward application. Warm-starts from `start`
    (restricted to the support) when given. A positive `noise_floor` enables
    the discrepancy stop: iteration ends once the measurement residual drops
    to the expected noise norm, the standard guard against fitting noise on
    an ill-conditioned system. Non-convergence within cg_max_iters is
    reported via the result flag, not an error.
    """
    cfg = cfg or PursuitConfig()
    support = np.asarray(support, dtype=bool)
    if support.shape != op.volume_shape:
        raise ValidationError(f"support shape {support.shape} != {op.volume_shape}")

    rhs = adjoint(op, measurements)
    rhs[~support] = 0.0
    rhs_norm = float(np.linalg.norm(rhs))
    if rhs_norm == 0.0:
        return LsqResult(np.zeros(op.volume_shape), True, 0)

    def apply_fwd(x):
        return forward(op, np.where(support, x, 0.0))

    def apply_adj(r):
        g = adjoint(op, r)
        g[~support] = 0.0
        return g

    x0 = np.zeros(op.volume_shape) if start is None else np.where(support, start, 0.0)
    x, converged, iterations = _cgls(
        apply_fwd, apply_adj, measurements, x0, rhs_norm, cfg.cg_tol, cfg.cg_max_iters, noise_floor
    )
    if not converged:
        log.warning("restricted_lsq: CG hit the iteration cap (%d)", cfg.cg_max_iters)
    x[~support] = 0.0
    return LsqResult(x, converged, iterations)


def prune_threshold(l_hat, support, nonneg=True):
    """Keep one depth per pixel: the supported depth with the larger |value|.

    Returns the pruned depth map and the intensity image (clamped to >= 0
    when `nonneg`); ties go to the smaller depth index.
    """
    l_hat = np.asarray(l_hat, dtype=float)
    support = np.asarray(support, dtype=bool)
    if not support.any(axis=2).all():
        raise ValidationError("every pixel needs at least one supported depth")
    score = np.where(support, np.abs(l_hat), -np.inf)
    depth_map = np.argmax(score, axis=2)
    intensity = np.take_along_axis(l_hat, depth_map[..., None], axis=2)[..., 0]
    if nonneg:
        intensity = np.maximum(intensity, 0.0)
    return depth_map, intensity


def depth_pursuit(op, measurements, cfg=None, noise_floor=0.0):
    """Jointly estimate a depth map and intensity image from measurements.

    Starting from the farthest plane everywhere and zero intensity, each
    outer iteration (1) nominates a depth per pixel from the proxy map,
    (2) solves least squares over the merged <=2-depth support, warm-started
    from the pruned estimate, and (3) prunes back to one depth per pixel.

    The proxy is evaluated on the residual of the most recent least-squares
    estimate (not the pruned one): that misfit is orthogonal to the merged
    support, so every nomination explores a depth the pixel does not already
    carry. Feeding the pruned estimate's residual back instead re-nominates
    exactly the depth pruning just discarded and locks the loop in a
    two-cycle whenever the depth planes are correlated.

    Stops when the relative improvement of the post-solve residual drops
    below residual_rel_tol or after max_outer_iters; the residual history is
    always returned. Before returning, the intensity is re-fit on the final
    one-depth-per-pixel support (a debias pass: values estimated jointly
    with a second candidate depth carry avoidable cancellation noise).

    `noise_floor` is the expected measurement-noise norm (see
    scenes.expected_noise_norm). It is applied only to the final debias
    pass, which then restarts from zero and stops once its misfit reaches
    the floor, so early-stopped CG acts as the regulariser for the reported
    intensity. The support search itself always runs CG to cg_tol: the
    nominations rely on the least-squares residual being orthogonal to the
    current support, which a floor-stopped solve does not deliver.
    """
    cfg = cfg or PursuitConfig()
    n, k = op.n_scene, op.n_depths
    omega = init_support(n, k)
    intensity = np.zeros((n, n))
    current = np.zeros(op.volume_shape)
    proxy_source = np.zeros(op.volume_shape)
    residuals = []
    converged = False
    iterations = 0
    for iterations in range(1, cfg.max_outer_iters + 1):
        omega_new = proxy_select(op, measurements, proxy_source)
        support = merge_supports(omega, omega_new, k)
        solution = restricted_lsq(op, measurements, support, cfg, start=current)
        omega, intensity = prune_threshold(solution.volume, support, cfg.nonneg_clamp)
        current = volume_from_depth_intensity(omega, intensity, k)
        proxy_source = solution.volume
        residuals.append(_residual_norm(measurements, forward(op, solution.volume)))
        if residuals[-1] == 0.0:
            converged = True
            break
        if len(residuals) > 1:
            prev, last = residuals[-2], residuals[-1]
            if prev > 0 and (prev - last) / prev < cfg.residual_rel_tol:
                converged = True
                break
    final_support = merge_supports(omega, omega, k)
    debias = restricted_lsq(
        op,
        measurements,
        final_support,
        cfg,
        start=None if noise_floor > 0.0 else current,
        noise_floor=noise_floor,
    )
    omega, intensity = prune_threshold(debias.volume, final_support, cfg.nonneg_clamp)
    return ReconstructionResult(
        depth_map=omega,
        intensity=intensity,
        residuals=residuals,
        iterations=iterations,
        converged=converged,
    )


def fixed_depth_reconstruct(op, measurements, depth_index, ridge=1e-6, cfg=None, noise_floor=0.0):
    """Reconstruct assuming the whole scene lies on one model depth plane.

    Solves the ridge-regularised single-plane least squares by CGLS.
    `ridge` is relative: the absolute Tikhonov weight is ridge times the
    squared spectral norm of the single-plane operator (sum over cameras of
    ||PhiX||_2^2 * ||PhiY||_2^2). A positive `noise_floor` additionally
    stops iteration at the expected noise misfit, as in restricted_lsq.
    """
    cfg = cfg or PursuitConfig()
    if not 0 <= depth_index < op.n_depths:
        raise ValidationError("depth_index out of range")
    gx = [op.phi_x[c][depth_index] for c in range(op.n_cameras)]
    gy = [op.phi_y[c][depth_index] for c in range(op.n_cameras)]
    ims = [np.asarray(m, dtype=float) for m in measurements]

    lam = 0.0
    if ridge:
        lam = ridge * sum(
            np.linalg.norm(x, 2) ** 2 * np.linalg.norm(y, 2) ** 2 for x, y in zip(gx, gy)
        )
    root_lam = np.sqrt(lam)

    rhs = sum(x.T @ m @ y for x, y, m in zip(gx, gy, ims))
    if not np.any(rhs):
        return FixedDepthResult(np.zeros((op.n_scene, op.n_scene)), True, 0)

    # ridge as an extra stacked equation block: [A; sqrt(lam) I] v = [I_c; 0]
    def apply_fwd(v):
        out = [x @ v @ y.T for x, y in zip(gx, gy)]
        if lam:
            out.append(root_lam * v)
        return out

    def apply_adj(r):
        out = sum(x.T @ c @ y for x, y, c in zip(gx, gy, r))
        if lam:
            out = out + root_lam * r[-1]
        return out

    meas = ims + [np.zeros_like(rhs)] if lam else list(ims)
    image, converged, iterations = _cgls(
        apply_fwd,
        apply_adj,
        meas,
        np.zeros_like(rhs),
        float(np.linalg.norm(rhs)),
        cfg.cg_tol,
        cfg.cg_max_iters,
        noise_floor,
    )
    if not converged:
        log.warning("fixed_depth_reconstruct: CG hit the iteration cap (%d)", cfg.cg_max_iters)
    return FixedDepthResult(image, converged, iterations)
