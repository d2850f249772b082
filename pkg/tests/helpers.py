"""Shared builders for synthetic trajectories used across test modules."""

from __future__ import annotations

import numpy as np

from cogcad.trace import Trajectory

SAMPLE_MS = 20


def dwell_trajectory(
    sites,
    viewport=(1000, 1000),
    travel_ms=40,
    jitter=0.0,
    seed=0,
    image_id="img-test",
    source="mouse",
):
    """Trajectory dwelling at each (x, y, duration_ms) site in turn.

    Dwells are sampled at 50 Hz with optional uniform jitter; transitions
    between sites are linear and take travel_ms.
    """
    rng = np.random.default_rng(seed)
    pts = []
    t = 0
    prev = None
    for x, y, dur in sites:
        if prev is not None:
            steps = max(1, int(travel_ms / SAMPLE_MS))
            for s in range(1, steps + 1):
                frac = s / (steps + 1)
                pts.append(
                    (t, prev[0] + frac * (x - prev[0]), prev[1] + frac * (y - prev[1]))
                )
                t += SAMPLE_MS
        for _ in range(int(dur / SAMPLE_MS) + 1):
            jx = x + (rng.uniform(-jitter, jitter) if jitter else 0.0)
            jy = y + (rng.uniform(-jitter, jitter) if jitter else 0.0)
            pts.append((t, jx, jy))
            t += SAMPLE_MS
        prev = (x, y)
    return Trajectory(
        points=np.array(pts, dtype=np.float64),
        viewport=viewport,
        image_id=image_id,
        source=source,
    )


def sweep_trajectory(speed_px_s=2000.0, viewport=(1000, 1000)):
    """Constant-speed diagonal sweep corner to corner, no pauses."""
    w, h = viewport
    length = np.hypot(w - 1, h - 1)
    total_ms = 1000.0 * length / speed_px_s
    n = max(3, int(total_ms / SAMPLE_MS))
    pts = []
    for i in range(n + 1):
        frac = i / n
        pts.append((i * SAMPLE_MS, frac * (w - 1), frac * (h - 1)))
    return Trajectory(
        points=np.array(pts, dtype=np.float64),
        viewport=viewport,
        image_id="sweep",
    )
