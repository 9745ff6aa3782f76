"""Trial harness sweeping depth-plane counts and camera counts.

Every trial is reproducible from one recorded integer: the per-trial seed is
SeedSequence([master_seed, K, trial]), and the scene / noise seeds derive
from it with stream tags 0 / 1. The camera count is deliberately left out of
the seed path so single- and multi-camera trials see identical scenes and
can be compared pairwise.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import collapse_intensity, volume_to_depth_intensity
from .pursuit import depth_pursuit
from .scenes import NoiseSpec, SceneSpec, active_pixels, depth_accuracy, generate_cards_scene, psnr, simulate_measurements

__all__ = [
    "TrialRecord",
    "default_rig_yaws",
    "trial_seed",
    "run_trial",
    "run_sweep",
    "records_to_csv",
    "summarize_psnr",
]

log = logging.getLogger(__name__)

CSV_HEADER = "K,cameras,trial,psnr_db,depth_accuracy,runtime_s,seed"


@dataclass(frozen=True)
class TrialRecord:
    """One reconstruction trial of the sweep."""

    K: int
    n_cameras: int
    trial: int
    psnr_db: float
    depth_accuracy: float
    runtime_s: float
    seed: int


def default_rig_yaws(n_cameras):
    """Rig yaws (radians) for an n-camera convex arrangement.

    One camera is the reference at yaw 0; for n > 1 the yaws span
    [-20 deg, +20 deg] uniformly (n = 3 gives -20/0/+20).
    """
    if n_cameras < 1:
        raise ValueError("n_cameras must be >= 1")
    if n_cameras == 1:
        return (0.0,)
    half = math.radians(20.0)
    return tuple(np.linspace(-half, half, n_cameras))


def trial_seed(master_seed, k, trial):
    """The single integer every per-trial generator derives from."""
    return int(np.random.SeedSequence([int(master_seed), int(k), int(trial)]).generate_state(1)[0])


def _stream_seed(base, tag):
    return int(np.random.SeedSequence([int(base), int(tag)]).generate_state(1)[0])


def run_trial(op, config, k, n_cameras, trial, master_seed):
    """One scene/simulate/reconstruct trial on a prebuilt operator."""
    base = trial_seed(master_seed, k, trial)
    scene_spec = SceneSpec(
        n_pixels=config.scene_N,
        n_cards=config.scene_cards,
        size_range=(config.scene_size_min, config.scene_size_max),
        intensity_range=(config.scene_intensity_min, config.scene_intensity_max),
        seed=_stream_seed(base, 0),
    )
    noise = NoiseSpec(snr_db=config.noise_snr_db, seed=_stream_seed(base, 1))
    scene = generate_cards_scene(scene_spec, op.depths)
    measurements = simulate_measurements(op, scene, noise)

    t0 = time.perf_counter()
    result = depth_pursuit(op, measurements, config.pursuit_config())
    runtime = time.perf_counter() - t0

    true_intensity = collapse_intensity(scene)
    true_map, _ = volume_to_depth_intensity(scene)
    active = active_pixels(true_intensity)
    return TrialRecord(
        K=k,
        n_cameras=n_cameras,
        trial=trial,
        psnr_db=psnr(true_intensity, result.intensity),
        depth_accuracy=depth_accuracy(true_map, result.depth_map, active),
        runtime_s=runtime,
        seed=base,
    )


def run_sweep(k_values, camera_counts, n_trials, config, master_seed=0, n_workers=1):
    """Run the full (K, cameras, trial) grid; returns records sorted by cell.

    The operator of each (K, cameras) cell is built once and shared by its
    trials, which may run on a thread pool (n_workers > 1; results are
    identical either way). A failed trial is recorded with NaN metrics and
    the sweep continues.
    """
    records = []
    for k in k_values:
        depths = config.depth_planes(k)
        mask = config.mask_spec()
        grid = config.angular_grid()
        for n_cameras in camera_counts:
            op = config.build_rig_operator(n_cameras, mask=mask, depths=depths, grid=grid)

            def one(trial, _op=op, _k=k, _nc=n_cameras):
                try:
                    return run_trial(_op, config, _k, _nc, trial, master_seed)
                except Exception:
                    log.exception("trial failed: K=%d cameras=%d trial=%d", _k, _nc, trial)
                    return TrialRecord(
                        K=_k,
                        n_cameras=_nc,
                        trial=trial,
                        psnr_db=math.nan,
                        depth_accuracy=math.nan,
                        runtime_s=math.nan,
                        seed=trial_seed(master_seed, _k, trial),
                    )

            if n_workers > 1:
                with ThreadPoolExecutor(max_workers=n_workers) as pool:
                    records.extend(pool.map(one, range(n_trials)))
            else:
                records.extend(one(t) for t in range(n_trials))
    records.sort(key=lambda r: (r.K, r.n_cameras, r.trial))
    return records


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return str(x)


def records_to_csv(records):
    """Sweep records as CSV text (floats in shortest round-trip form)."""
    lines = [CSV_HEADER]
    for r in records:
        lines.append(
            ",".join(
                _fmt(v)
                for v in (r.K, r.n_cameras, r.trial, r.psnr_db, r.depth_accuracy, r.runtime_s, r.seed)
            )
        )
    return "\n".join(lines) + "\n"


def summarize_psnr(records):
    """Markdown table of mean PSNR (dB) per (cameras, K) cell.

    Failed trials (NaN) are excluded from the means.
    """
    ks = sorted({r.K for r in records})
    cams = sorted({r.n_cameras for r in records})
    lines = ["| cameras \\ K | " + " | ".join(str(k) for k in ks) + " |"]
    lines.append("| --- |" + " --- |" * len(ks))
    for c in cams:
        cells = []
        for k in ks:
            vals = [r.psnr_db for r in records if r.K == k and r.n_cameras == c]
            vals = [v for v in vals if not math.isnan(v)]
            cells.append(f"{np.mean(vals):.2f}" if vals else "n/a")
        lines.append(f"| {c} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"
