"""Desk-scale synthetic reading sessions.

Images carry 0-3 Gaussian-blob lesions over a structured chest-like
background (two bright elliptical fields on a gradient). Each sample gets
a simulated reading trajectory: one survey dwell, one dwell near every
lesion, and a distractor dwell with probability 0.2. Ground-truth
attention maps are derived by running the trajectory through the trace
pipeline, and lesion masks are kept so attention/lesion overlap can be
scored.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .trace import (
    AttentionMap,
    I2MCParams,
    StayPointSet,
    Trajectory,
    extract_stay_points,
    render_soft_attention,
    threshold_hard,
)

SAMPLE_PERIOD_MS = 20  # 50 Hz pointer sampling
DISTRACTOR_PROB = 0.2


@dataclass
class SyntheticSample:
    image: np.ndarray  # (H, W) float32 in [0, 1]
    trajectory: Trajectory
    label: int  # 1 = lesion present
    lesion_mask: np.ndarray  # (H, W) bool
    y_soft: np.ndarray  # (H, W) float32
    y_hard: np.ndarray  # (H, W) float32
    image_id: str


def render_params_for(size: int) -> tuple[float, float]:
    """Gaussian radius/sigma scaled from full-image defaults to `size`."""
    return max(8.0, size * 0.25), max(2.0, size * 0.08)


def _lung_fields(size: int):
    y, x = np.mgrid[0:size, 0:size].astype(np.float64)
    cy, ry = 0.48 * size, 0.32 * size
    lungs = np.zeros((size, size))
    for cx in (0.32 * size, 0.68 * size):
        rx = 0.16 * size
        lungs += np.exp(-(((x - cx) / rx) ** 2 + ((y - cy) / ry) ** 2) ** 2)
    return np.clip(lungs, 0.0, 1.0)


def _background(size: int, rng: np.random.Generator) -> np.ndarray:
    y = np.linspace(0.0, 1.0, size)[:, None]
    base = 0.18 + 0.10 * y + 0.22 * _lung_fields(size)
    texture = gaussian_filter(rng.standard_normal((size, size)), sigma=size / 10.0)
    base = base + 0.05 * texture / max(np.abs(texture).max(), 1e-9)
    base = base + 0.01 * rng.standard_normal((size, size))
    return np.clip(base, 0.0, 1.0)


def _random_lung_point(size: int, rng: np.random.Generator) -> tuple[float, float]:
    cx = rng.choice([0.32, 0.68]) * size
    cy = 0.48 * size
    x = cx + rng.uniform(-0.10, 0.10) * size
    y = cy + rng.uniform(-0.22, 0.22) * size
    return float(np.clip(x, 2, size - 3)), float(np.clip(y, 2, size - 3))


def _dwell(points, t_ms, x, y, duration_ms, size, rng):
    """Append jittered samples holding near (x, y) for duration_ms."""
    steps = max(2, int(duration_ms / SAMPLE_PERIOD_MS))
    for _ in range(steps):
        jx = np.clip(round(x + rng.uniform(-1.0, 1.0)), 0, size - 1)
        jy = np.clip(round(y + rng.uniform(-1.0, 1.0)), 0, size - 1)
        points.append((t_ms, jx, jy))
        t_ms += SAMPLE_PERIOD_MS
    return t_ms


def _transit(points, t_ms, x0, y0, x1, y1, size, rng):
    """Append a fast linear move between dwell sites (~3 samples)."""
    for frac in (0.25, 0.5, 0.75):
        x = np.clip(round(x0 + frac * (x1 - x0)), 0, size - 1)
        y = np.clip(round(y0 + frac * (y1 - y0)), 0, size - 1)
        points.append((t_ms, x, y))
        t_ms += SAMPLE_PERIOD_MS
    return t_ms


def make_synthetic_sample(size: int, rng: np.random.Generator, image_id: str) -> SyntheticSample:
    image = _background(size, rng)
    label = int(rng.random() < 0.5)
    mask = np.zeros((size, size), dtype=bool)
    lesion_centers = []
    if label:
        yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
        for _ in range(int(rng.integers(1, 4))):
            cx, cy = _random_lung_point(size, rng)
            sigma = rng.uniform(0.05, 0.09) * size
            amp = rng.uniform(0.35, 0.55)
            blob = amp * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * sigma**2))
            image = image + blob
            mask |= blob > amp / 2.0
            lesion_centers.append((cx, cy))
    image = np.clip(image, 0.0, 1.0)

    # Reading path: survey dwell, then a dwell per lesion, maybe a distractor.
    sites = [_random_lung_point(size, rng)]
    for cx, cy in lesion_centers:
        jx = float(np.clip(cx + rng.uniform(-2, 2), 2, size - 3))
        jy = float(np.clip(cy + rng.uniform(-2, 2), 2, size - 3))
        sites.append((jx, jy))
    if rng.random() < DISTRACTOR_PROB:
        sites.append(_random_lung_point(size, rng))

    points = []
    t = 0
    prev = None
    for x, y in sites:
        if prev is not None:
            t = _transit(points, t, prev[0], prev[1], x, y, size, rng)
        t = _dwell(points, t, x, y, rng.uniform(400, 650), size, rng)
        prev = (x, y)

    traj = Trajectory(
        points=np.array(points, dtype=np.float64),
        viewport=(size, size),
        image_id=image_id,
        source="mouse",
    )
    radius, sigma = render_params_for(size)
    stays = extract_stay_points(traj, I2MCParams.for_source("mouse"))
    y_soft = render_soft_attention(stays, size, size, radius=radius, sigma=sigma, image_id=image_id)
    y_hard = threshold_hard(y_soft, 0.5)
    return SyntheticSample(
        image=image.astype(np.float32),
        trajectory=traj,
        label=label,
        lesion_mask=mask,
        y_soft=y_soft.grid,
        y_hard=y_hard.grid,
        image_id=image_id,
    )


def make_synthetic_dataset(n: int, size: int = 64, seed: int = 0) -> list[SyntheticSample]:
    """Generate n samples deterministically from the seed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    return [make_synthetic_sample(size, rng, f"synth-{seed}-{i:04d}") for i in range(n)]


def split_dataset(samples, fractions=(0.70, 0.15, 0.15), seed: int = 0):
    """Seeded shuffle then split into train/val/test lists."""
    idx = np.random.default_rng(seed).permutation(len(samples))
    n_train = int(round(fractions[0] * len(samples)))
    n_val = int(round(fractions[1] * len(samples)))
    train = [samples[i] for i in idx[:n_train]]
    val = [samples[i] for i in idx[n_train : n_train + n_val]]
    test = [samples[i] for i in idx[n_train + n_val :]]
    return train, val, test


def random_attention_map(size: int, image_id: str, seed: int) -> AttentionMap:
    """Attention sampled with no knowledge of the image: 3 random blobs.

    Keyed by image_id so results do not depend on evaluation order.
    """
    import zlib

    rng = np.random.default_rng((zlib.crc32(image_id.encode()) << 16) ^ seed)
    stays = StayPointSet(
        points=np.array(
            [
                (rng.uniform(0, size - 1), rng.uniform(0, size - 1), 400.0)
                for _ in range(3)
            ]
        )
    )
    radius, sigma = render_params_for(size)
    return render_soft_attention(stays, size, size, radius=radius, sigma=sigma, image_id=image_id)
