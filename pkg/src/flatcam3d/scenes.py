"""Synthetic card scenes, measurement simulation, and evaluation metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .model import forward

__all__ = [
    "SceneSpec",
    "NoiseSpec",
    "generate_cards_scene",
    "simulate_measurements",
    "psnr",
    "depth_accuracy",
    "active_pixels",
]


@dataclass(frozen=True)
class SceneSpec:
    """Random multi-card test scene: axis-aligned constant-intensity
    rectangles, each living wholly on one distinct depth plane."""

    n_pixels: int
    n_cards: int = 3
    size_range: tuple = (0.2, 0.4)
    intensity_range: tuple = (0.25, 1.0)
    seed: int = 0

    def __post_init__(self):
        if self.n_pixels < 1:
            raise ValidationError("n_pixels must be >= 1")
        if self.n_cards < 0:
            raise ValidationError("n_cards must be >= 0")
        lo, hi = self.size_range
        if not (0 < lo <= hi <= 1):
            raise ValidationError("size_range must satisfy 0 < lo <= hi <= 1")
        lo, hi = self.intensity_range
        if not (0 < lo <= hi):
            raise ValidationError("intensity_range must satisfy 0 < lo <= hi")


@dataclass(frozen=True)
class NoiseSpec:
    """Additive white Gaussian measurement noise at a given SNR.

    The per-camera noise standard deviation is rms(clean) * 10^(-snr_db/20);
    snr_db = inf means noiseless.
    """

    snr_db: float = 40.0
    seed: int = 0

    def __post_init__(self):
        if math.isnan(self.snr_db):
            raise ValidationError("snr_db must not be NaN")


def generate_cards_scene(spec, depths):
    """Draw a card scene as an (N, N, K) volume.

    Cards are painted in draw order, so a later card overwrites earlier ones
    where they overlap in (x, y) and the one-depth-per-pixel structure always
    holds. Card depth indices are distinct; a draw in which some card ends up
    fully hidden is rejected and redrawn so exactly n_cards depth planes stay
    occupied. Deterministic in the seed.
    """
    k = len(depths)
    n = spec.n_pixels
    if spec.n_cards > k:
        raise ValidationError("n_cards must not exceed the number of depth planes")
    volume = np.zeros((n, n, k))
    if spec.n_cards == 0:
        return volume
    rng = np.random.default_rng(spec.seed)
    for _ in range(100):
        volume[:] = 0.0
        card_depths = rng.choice(k, size=spec.n_cards, replace=False)
        for depth_index in card_depths:
            w = max(1, round(rng.uniform(*spec.size_range) * n))
            h = max(1, round(rng.uniform(*spec.size_range) * n))
            if w > n or h > n:
                raise ValidationError("card size exceeds the frame")
            x0 = rng.integers(0, n - w + 1)
            y0 = rng.integers(0, n - h + 1)
            value = rng.uniform(*spec.intensity_range)
            volume[x0 : x0 + w, y0 : y0 + h, :] = 0.0
            volume[x0 : x0 + w, y0 : y0 + h, depth_index] = value
        occupied = np.unique(np.nonzero(volume)[2])
        if occupied.size == spec.n_cards:
            return volume
    raise ValidationError("could not place cards without full occlusion in 100 draws")


def simulate_measurements(op, scene, noise):
    """Clean forward measurements plus seeded white Gaussian noise per camera."""
    clean = forward(op, scene)
    if math.isinf(noise.snr_db):
        return clean
    rng = np.random.default_rng(noise.seed)
    factor = 10.0 ** (-noise.snr_db / 20.0)
    noisy = []
    for image in clean:
        sigma = factor * float(np.sqrt(np.mean(image**2)))
        noisy.append(image + rng.normal(0.0, 1.0, size=image.shape) * sigma)
    return noisy


def expected_noise_norm(measurements, snr_db):
    """Expected Frobenius norm of the measurement noise at the given SNR.

    Uses rms(measurement) per camera in place of rms(clean); at the SNRs of
    interest they differ by O(10^(-snr/10)). Returns 0.0 for infinite SNR.
    Feed this to the solvers' `noise_floor` for discrepancy stopping.
    """
    if math.isinf(snr_db):
        return 0.0
    factor = 10.0 ** (-snr_db / 20.0)
    total = 0.0
    for image in measurements:
        image = np.asarray(image, dtype=float)
        total += image.size * factor**2 * float(np.mean(image**2))
    return float(np.sqrt(total))


def psnr(reference, estimate, peak=None):
    """Peak signal-to-noise ratio 10*log10(peak^2 / MSE) in dB.

    `peak` defaults to the maximum of the reference; an exact match returns
    math.inf.
    """
    reference = np.asarray(reference, dtype=float)
    estimate = np.asarray(estimate, dtype=float)
    if reference.shape != estimate.shape:
        raise ValidationError("reference and estimate shapes differ")
    if peak is None:
        peak = float(reference.max())
    if not peak > 0:
        raise ValidationError("peak must be positive")
    mse = float(np.mean((reference - estimate) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def active_pixels(intensity, rel_threshold=0.01):
    """Mask of pixels whose intensity exceeds rel_threshold * max(intensity)."""
    intensity = np.asarray(intensity, dtype=float)
    return intensity > rel_threshold * intensity.max()


def depth_accuracy(true_map, est_map, active):
    """Fraction of active pixels whose depth index matches; 1.0 when no pixel
    is active (vacuous truth)."""
    true_map = np.asarray(true_map)
    est_map = np.asarray(est_map)
    active = np.asarray(active, dtype=bool)
    if not (true_map.shape == est_map.shape == active.shape):
        raise ValidationError("map shapes differ")
    total = int(active.sum())
    if total == 0:
        return 1.0
    return float((true_map[active] == est_map[active]).sum() / total)
