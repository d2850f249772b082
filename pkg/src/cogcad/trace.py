"""Interaction traces to attention maps.

A reading session is recorded as a timestamped 2-D trajectory (mouse or
gaze). Dwell regions are extracted with sliding-window two-means
clustering, turned into a soft attention map by summing truncated
Gaussian kernels, and optionally binarized by thresholding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadThreshold, EmptyTrajectory, ValidationError, WindowTooLong

DEFAULT_GAUSS_RADIUS = 150.0
DEFAULT_GAUSS_SIGMA = 25.0


@dataclass(frozen=True)
class Trajectory:
    """Ordered (t_ms, x_px, y_px) samples for one reading session."""

    points: np.ndarray  # (n, 3) float64 rows of (t, x, y)
    viewport: tuple[int, int]  # (width, height)
    image_id: str
    source: str = "mouse"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        object.__setattr__(self, "points", pts)

    def validate(self):
        """Check invariants; raises ValidationError naming the first bad index."""
        if self.points.shape[0] == 0:
            raise EmptyTrajectory("trajectory has no samples")
        w, h = self.viewport
        t, x, y = self.points[:, 0], self.points[:, 1], self.points[:, 2]
        bad_t = np.nonzero(np.diff(t) <= 0)[0]
        if bad_t.size:
            raise ValidationError(
                f"timestamps not strictly increasing at index {bad_t[0] + 1}",
                index=int(bad_t[0] + 1),
            )
        bad_xy = np.nonzero((x < 0) | (x >= w) | (y < 0) | (y >= h))[0]
        if bad_xy.size:
            raise ValidationError(
                f"point outside viewport at index {bad_xy[0]}", index=int(bad_xy[0])
            )

    @property
    def span_ms(self) -> float:
        return float(self.points[-1, 0] - self.points[0, 0])


@dataclass(frozen=True)
class StayPointSet:
    """Dwell centroids with durations, ordered by onset time."""

    points: np.ndarray  # (n, 3) rows of (x, y, duration_ms)
    source: str = "mouse"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]


@dataclass(frozen=True)
class AttentionMap:
    """Dense H x W attention grid, soft (values in [0,1]) or hard ({0,1})."""

    grid: np.ndarray
    kind: str  # "soft" | "hard"
    image_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "grid", np.asarray(self.grid, dtype=np.float32))


@dataclass(frozen=True)
class I2MCParams:
    """Sliding-window two-means clustering parameters for dwell detection.

    The per-window cluster-transition weight is averaged over all windows
    covering a sample; samples at or below the cutoff (mean + cutoff_sd *
    std of all weights) form candidate dwell segments. Segments shorter
    than min_duration_ms, or wider than max_dispersion_px RMS about their
    centroid, are dropped; neighbors closer than merge_max_dist_px with a
    gap under merge_gap_ms are merged.
    """

    window_ms: float = 200.0
    step_ms: float = 20.0
    cutoff_sd: float = 2.0
    min_duration_ms: float = 150.0
    merge_gap_ms: float = 75.0
    merge_max_dist_px: float = 50.0
    max_dispersion_px: float = 75.0

    @classmethod
    def for_source(cls, source: str) -> "I2MCParams":
        # Gaze fixations are shorter than mouse dwells; everything else shared.
        if source == "gaze":
            return cls(min_duration_ms=100.0)
        return cls()


def _two_means_labels(xy: np.ndarray, max_iter: int = 25) -> np.ndarray:
    """Lloyd's algorithm with k=2, seeded by the temporal halves.

    Deterministic: initial assignment splits the window in half by time,
    ties in distance go to cluster 0.
    """
    n = xy.shape[0]
    labels = np.zeros(n, dtype=np.int64)
    labels[n // 2 :] = 1
    for _ in range(max_iter):
        c0 = xy[labels == 0].mean(axis=0) if np.any(labels == 0) else xy.mean(axis=0)
        c1 = xy[labels == 1].mean(axis=0) if np.any(labels == 1) else xy.mean(axis=0)
        d0 = ((xy - c0) ** 2).sum(axis=1)
        d1 = ((xy - c1) ** 2).sum(axis=1)
        new = (d1 < d0).astype(np.int64)
        if np.array_equal(new, labels):
            break
        labels = new
    return labels


def _trim_segment_edges(xy: np.ndarray, i: int, j: int, max_dist: float):
    """Shed boundary samples beyond max_dist from the running centroid.

    Travel samples adjacent to a transition can slip under the weight
    cutoff; trimming keeps them from dragging the dwell centroid.
    """
    while j > i:
        c = xy[i : j + 1].mean(axis=0)
        di = np.linalg.norm(xy[i] - c)
        dj = np.linalg.norm(xy[j] - c)
        if di <= max_dist and dj <= max_dist:
            break
        if di >= dj:
            i += 1
        else:
            j -= 1
    return i, j


def extract_stay_points(traj: Trajectory, params: I2MCParams | None = None) -> StayPointSet:
    """Identify dwell regions in a trajectory via two-means transition weights.

    Returns centroids and durations of dwell clusters, ordered by onset
    time. Deterministic for fixed params.
    """
    if params is None:
        params = I2MCParams.for_source(traj.source)
    if traj.points.shape[0] == 0:
        raise EmptyTrajectory("trajectory has no samples")
    if traj.points.shape[0] < 2:
        raise WindowTooLong("need at least 2 samples spanning one window")
    t = traj.points[:, 0]
    xy = traj.points[:, 1:3]
    span = traj.span_ms
    if params.window_ms > span:
        raise WindowTooLong(
            f"window {params.window_ms} ms exceeds trajectory span {span} ms"
        )

    n = t.shape[0]
    weight = np.zeros(n)
    coverage = np.zeros(n)
    starts = np.arange(t[0], t[-1] - params.window_ms + 1e-9, params.step_ms)
    if starts.size == 0:
        starts = np.array([t[0]])
    for t0 in starts:
        sel = np.nonzero((t >= t0) & (t <= t0 + params.window_ms))[0]
        if sel.size < 2:
            continue
        coverage[sel] += 1.0
        win = xy[sel]
        if np.allclose(win, win[0]):
            continue  # stationary window: no transitions, no weight
        labels = _two_means_labels(win)
        trans = np.nonzero(np.diff(labels) != 0)[0]
        if trans.size:
            weight[sel[trans + 1]] += 1.0 / trans.size

    weight = weight / np.maximum(coverage, 1.0)
    cutoff = weight.mean() + params.cutoff_sd * weight.std()
    is_stay = weight <= cutoff

    # Contiguous below-cutoff runs become candidate segments.
    segments = []
    i = 0
    while i < n:
        if not is_stay[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and is_stay[j + 1]:
            j += 1
        segments.append((i, j))
        i = j + 1

    # Merge close-in-time, close-in-space neighbors before filtering.
    merged = []
    for seg in segments:
        if merged:
            pi, pj = merged[-1]
            gap = t[seg[0]] - t[pj]
            d = np.linalg.norm(xy[pi : pj + 1].mean(axis=0) - xy[seg[0] : seg[1] + 1].mean(axis=0))
            if gap < params.merge_gap_ms and d <= params.merge_max_dist_px:
                merged[-1] = (pi, seg[1])
                continue
        merged.append(seg)

    stays = []
    for i, j in merged:
        i, j = _trim_segment_edges(xy, i, j, params.max_dispersion_px)
        dur = t[j] - t[i]
        if dur < params.min_duration_ms:
            continue
        seg_xy = xy[i : j + 1]
        centroid = seg_xy.mean(axis=0)
        rms = np.sqrt(((seg_xy - centroid) ** 2).sum(axis=1).mean())
        if rms > params.max_dispersion_px:
            continue
        stays.append((centroid[0], centroid[1], dur))

    return StayPointSet(points=np.array(stays, dtype=np.float64).reshape(-1, 3), source=traj.source)


def render_soft_attention(
    stays: StayPointSet,
    h: int,
    w: int,
    radius: float = DEFAULT_GAUSS_RADIUS,
    sigma: float = DEFAULT_GAUSS_SIGMA,
    image_id: str = "",
) -> AttentionMap:
    """Sum one truncated isotropic Gaussian per stay point, rescale max to 1.

    The kernel is cut off hard at `radius` (no renormalization). An empty
    stay set yields an all-zero map.
    """
    if h <= 0 or w <= 0:
        raise ValueError("map dimensions must be positive")
    if radius <= 0 or sigma <= 0:
        raise ValueError("radius and sigma must be positive")
    grid = np.zeros((h, w), dtype=np.float64)
    ys = np.arange(h, dtype=np.float64)
    xs = np.arange(w, dtype=np.float64)
    for x0, y0, _dur in stays.points:
        # Only touch the bounding box of the truncation disk.
        r0 = max(0, int(np.floor(y0 - radius)))
        r1 = min(h, int(np.ceil(y0 + radius)) + 1)
        c0 = max(0, int(np.floor(x0 - radius)))
        c1 = min(w, int(np.ceil(x0 + radius)) + 1)
        if r0 >= r1 or c0 >= c1:
            continue
        dy = ys[r0:r1, None] - y0
        dx = xs[None, c0:c1] - x0
        d2 = dx * dx + dy * dy
        patch = np.exp(-d2 / (2.0 * sigma * sigma))
        patch[d2 > radius * radius] = 0.0
        grid[r0:r1, c0:c1] += patch
    m = grid.max()
    if m > 0:
        grid /= m
    return AttentionMap(grid=grid, kind="soft", image_id=image_id)


def threshold_hard(soft: AttentionMap, threshold: float = 0.5) -> AttentionMap:
    """Binarize a soft map: 1 where value > threshold, else 0."""
    if soft.kind != "soft":
        raise ValueError("threshold_hard expects a soft map")
    if not (0.0 < threshold < 1.0):
        raise BadThreshold(f"threshold {threshold} outside (0, 1)")
    hard = (soft.grid > threshold).astype(np.float32)
    return AttentionMap(grid=hard, kind="hard", image_id=soft.image_id)
