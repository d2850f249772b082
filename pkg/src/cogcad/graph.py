"""Distance matrices, graph construction, and shared network blocks.

Feature grids are treated as node sets (one node per spatial position).
Pairwise feature and attention distances are min-max normalized, fused as
df_hat + alpha * da_hat, and turned into a directed k-nearest-neighbor
edge set. Node features are transformed by max-relative graph
convolution blocks and 3x3 convolution blocks, both residual.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import KTooLarge, ShapeMismatch

_EPS_SQ = 1e-24  # keeps sqrt differentiable at coincident rows


@dataclass(frozen=True)
class PatchGraph:
    """Directed k-NN edges over a spatial node grid.

    edges[i] lists the k in-neighbors of node i; grid_shape recovers the
    (H_f, W_f) layout of the flattened node order.
    """

    edges: np.ndarray  # (N, k) int64
    k: int
    grid_shape: tuple[int, int]

    def neighbor_export(self, center: int, distances: np.ndarray) -> dict:
        """JSON-ready dump of one node's neighborhood with distances."""
        neigh = [(int(j), float(distances[center, j])) for j in self.edges[center]]
        return {
            "center_node": int(center),
            "neighbors": neigh,
            "grid_shape": list(self.grid_shape),
        }


def pairwise_feature_distance(x: torch.Tensor) -> torch.Tensor:
    """Euclidean distance between all row pairs of an (N, C) feature array.

    Coincident rows map to exactly 0 (the sqrt(eps) offset cancels), so
    degenerate all-equal node sets normalize to zero matrices.
    """
    sq = ((x.unsqueeze(1) - x.unsqueeze(0)) ** 2).sum(-1)
    d = torch.sqrt(sq + _EPS_SQ) - np.sqrt(_EPS_SQ)
    eye = torch.eye(x.shape[0], dtype=x.dtype, device=x.device)
    return d * (1.0 - eye)


def pairwise_attention_distance(a: torch.Tensor) -> torch.Tensor:
    """Absolute difference between all pairs of per-node attention scalars."""
    a = a.reshape(-1)
    return (a.unsqueeze(1) - a.unsqueeze(0)).abs()


def minmax_normalize(d: torch.Tensor) -> torch.Tensor:
    """Rescale to [0, 1]; a constant matrix maps to all zeros."""
    lo = d.min()
    hi = d.max()
    if float((hi - lo).detach()) == 0.0:
        return torch.zeros_like(d)
    return (d - lo) / (hi - lo)


def fuse_distances(df: torch.Tensor, da: torch.Tensor, alpha: float) -> torch.Tensor:
    """Combine normalized feature and attention distances: df + alpha * da."""
    if df.shape != da.shape:
        raise ShapeMismatch(f"distance shapes differ: {tuple(df.shape)} vs {tuple(da.shape)}")
    return df + alpha * da


def knn_edges(d: torch.Tensor, k: int) -> np.ndarray:
    """k smallest-distance neighbors per row, self excluded.

    Ties break toward the smaller index. Returns an (N, k) int64 array;
    aggregation treats listed neighbors as in-neighbors.
    """
    n = d.shape[0]
    if not 1 <= k <= n - 1:
        raise KTooLarge(f"k={k} outside [1, {n - 1}] for {n} nodes")
    vals = d.detach().cpu().numpy().astype(np.float64, copy=True)
    np.fill_diagonal(vals, np.inf)
    order = np.argsort(vals, axis=1, kind="stable")  # stable sort = smaller index wins ties
    return np.ascontiguousarray(order[:, :k]).astype(np.int64)


def batched_knn_edges(d: torch.Tensor, k: int) -> np.ndarray:
    """knn_edges over a stack of (N, N) distance matrices; returns (B, N, k)."""
    return np.stack([knn_edges(d[b], k) for b in range(d.shape[0])])


class _ContiguousGrad(torch.autograd.Function):
    # torch 2.13 CPU returns wrong batch-norm eval input-gradients when
    # grad_output carries the strides left behind by the flatten/transpose
    # token views; forcing the backward tensor contiguous sidesteps the
    # kernel without touching values.
    @staticmethod
    def forward(ctx, x):
        return x

    @staticmethod
    def backward(ctx, grad):
        return grad.contiguous()


def contiguous_grad(x: torch.Tensor) -> torch.Tensor:
    """Identity whose backward re-lays the gradient contiguously.

    Placed where feature grids leave conv/norm territory and become node
    tokens, so upstream norm layers always receive densely laid-out
    gradients.
    """
    return _ContiguousGrad.apply(x)


def max_relative_aggregate(x: torch.Tensor, edges) -> torch.Tensor:
    """Elementwise max over neighbors j of (x_j - x_i); zero when neighborless.

    Accepts (N, C) nodes with (N, k) edges, or batched (B, N, C) with
    (B, N, k).
    """
    e = torch.as_tensor(np.asarray(edges), dtype=torch.long, device=x.device)
    if x.dim() == 2:
        n, _ = x.shape
        e = e.reshape(n, -1)
        if e.shape[1] == 0:
            return torch.zeros_like(x)
        rel = x[e] - x.unsqueeze(1)  # (N, k, C)
        return rel.max(dim=1).values
    b, n, c = x.shape
    e = e.reshape(b, n, -1)
    if e.shape[2] == 0:
        return torch.zeros_like(x)
    flat = x.reshape(b * n, c)
    idx = e + (torch.arange(b, device=x.device) * n).view(b, 1, 1)
    rel = flat[idx.reshape(-1)].reshape(b, n, e.shape[2], c) - x.unsqueeze(2)
    return rel.max(dim=2).values


class MaxRelativeGraphConv(nn.Module):
    """Graph convolution: linear map of concat(x_i, max_j(x_j - x_i))."""

    def __init__(self, channels: int):
        super().__init__()
        self.fc = nn.Linear(2 * channels, channels)

    def forward(self, x: torch.Tensor, edges) -> torch.Tensor:
        m = max_relative_aggregate(x, edges)
        return self.fc(torch.cat([x, m], dim=-1))


class GnnBlock(nn.Module):
    """Two residual sub-blocks: graph aggregation then a feed-forward pair.

    x1 = fc2(gc(fc1(x))) + x
    y  = fc4(fc3(x1)) + x1

    fc1/fc3 carry the GELU nonlinearity; fc2/fc4 are plain projections.
    The feed-forward hidden width is 2x the channel count.
    """

    def __init__(self, channels: int):
        super().__init__()
        self.fc1 = nn.Linear(channels, channels)
        self.gc = MaxRelativeGraphConv(channels)
        self.fc2 = nn.Linear(channels, channels)
        self.fc3 = nn.Linear(channels, 2 * channels)
        self.fc4 = nn.Linear(2 * channels, channels)

    def forward(self, x: torch.Tensor, edges) -> torch.Tensor:
        h = F.gelu(self.fc1(x))
        h = self.gc(h, edges)
        x1 = self.fc2(h) + x
        h = F.gelu(self.fc3(x1))
        return self.fc4(h) + x1


class CnnBlock(nn.Module):
    """Residual pair of (3x3 conv, batch norm, ReLU) stages, same shape."""

    def __init__(self, channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1)
        self.bn1 = nn.BatchNorm2d(channels, eps=1e-5, momentum=0.1)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1)
        self.bn2 = nn.BatchNorm2d(channels, eps=1e-5, momentum=0.1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        y = F.relu(self.bn1(self.conv1(x)))
        y = F.relu(self.bn2(self.conv2(y)))
        return y + x
