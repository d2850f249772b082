"""Cognition-guided graph classifier (VCC).

Each stage re-derives a patch graph by fusing normalized feature
distances with normalized attention distances (the cognition-graph
co-editing step), penalizing their mean squared disagreement, and
classifying from the pooled deepest features. Attention enters as a
constant supervisory signal: gradients flow through the feature-distance
branch only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn as nn

from .errors import ShapeMismatch
from .graph import (
    GnnBlock,
    contiguous_grad,
    PatchGraph,
    fuse_distances,
    knn_edges,
    minmax_normalize,
    pairwise_attention_distance,
    pairwise_feature_distance,
)
from .attention_gen import Downsample, Stem, _as_batch


@dataclass(frozen=True)
class VccConfig:
    input_size: tuple[int, int] = (224, 224)
    stem_channels: int = 32
    stage_depths: tuple[int, ...] = (1, 1, 1, 1)
    k: int = 9
    num_classes: int = 2
    alpha: float = 2.0

    def __post_init__(self):
        h, w = self.input_size
        if h % 32 or w % 32:
            raise ValueError("input size must be divisible by 32")
        if len(self.stage_depths) != 4 or any(d < 1 for d in self.stage_depths):
            raise ValueError("need 4 stage depths, each >= 1")

    @property
    def stage_channels(self) -> tuple[int, ...]:
        c = self.stem_channels
        return (c, 2 * c, 4 * c, 8 * c)

    def to_dict(self) -> dict:
        return {
            "input_size": list(self.input_size),
            "stem_channels": self.stem_channels,
            "stage_depths": list(self.stage_depths),
            "k": self.k,
            "num_classes": self.num_classes,
            "alpha": self.alpha,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VccConfig":
        return cls(
            input_size=tuple(d["input_size"]),
            stem_channels=int(d["stem_channels"]),
            stage_depths=tuple(d["stage_depths"]),
            k=int(d["k"]),
            num_classes=int(d["num_classes"]),
            alpha=float(d["alpha"]),
        )


@dataclass
class CgcmState:
    """Artifacts of one co-editing step over one node set."""

    df_hat: torch.Tensor
    da_hat: torch.Tensor
    fused: torch.Tensor
    align_loss_value: torch.Tensor  # scalar, mean squared df_hat/da_hat gap


@dataclass
class VccOutput:
    p_cls: torch.Tensor  # (B, num_classes), rows sum to 1
    cls_logits: torch.Tensor
    per_layer_align: list  # 4 scalar tensors, each >= 0
    graphs: list = field(default_factory=list)  # per layer: list of PatchGraph per sample


def downsample_attention(p_soft: torch.Tensor, target: tuple[int, int]) -> torch.Tensor:
    """Area-average pool an attention map onto a coarser aligned grid."""
    squeeze = p_soft.dim() == 2
    x = p_soft.unsqueeze(0) if squeeze else p_soft
    b, h, w = x.shape
    th, tw = target
    if h % th or w % tw:
        raise ShapeMismatch(f"target {target} does not tile map {(h, w)}")
    x = x.reshape(b, th, h // th, tw, w // tw).mean(dim=(2, 4))
    return x.squeeze(0) if squeeze else x


def cgcm(
    features: torch.Tensor,
    attention: torch.Tensor,
    alpha: float,
    k: int,
    grid_shape: tuple[int, int] | None = None,
) -> tuple[PatchGraph, CgcmState]:
    """Co-edit one node set: align and fuse feature/attention distances.

    features: (N, C); attention: (N,) scalars from the downsampled soft
    map. The attention distance matrix is treated as a constant (no
    gradient into the attention source).
    """
    n = features.shape[0]
    if attention.reshape(-1).shape[0] != n:
        raise ShapeMismatch("attention length must match node count")
    df_hat = minmax_normalize(pairwise_feature_distance(features))
    da_hat = minmax_normalize(pairwise_attention_distance(attention.detach()))
    align = ((df_hat - da_hat) ** 2).mean()
    fused = fuse_distances(df_hat, da_hat, alpha)
    k_eff = min(k, n - 1)
    if k_eff >= 1:
        edges = knn_edges(fused, k_eff)
    else:
        edges = np.zeros((n, 0), dtype=np.int64)
    if grid_shape is None:
        grid_shape = (1, n)
    graph = PatchGraph(edges=edges, k=k_eff, grid_shape=grid_shape)
    state = CgcmState(df_hat=df_hat, da_hat=da_hat, fused=fused, align_loss_value=align)
    return graph, state


class CgcmStage(nn.Module):
    """Co-editing graph construction followed by GNN blocks, per sample."""

    def __init__(self, channels: int, depth: int, k: int, alpha: float):
        super().__init__()
        self.k = k
        self.alpha = alpha
        self.blocks = nn.ModuleList(GnnBlock(channels) for _ in range(depth))

    def forward(self, x: torch.Tensor, att: torch.Tensor, collect_graphs: bool):
        b, c, h, w = x.shape
        tokens = contiguous_grad(x).flatten(2).transpose(1, 2)  # (B, N, C)
        att_nodes = att.reshape(b, -1)
        aligns = []
        graphs = []
        edge_stack = []
        for i in range(b):
            graph, state = cgcm(
                tokens[i], att_nodes[i], self.alpha, self.k, grid_shape=(h, w)
            )
            aligns.append(state.align_loss_value)
            edge_stack.append(graph.edges)
            if collect_graphs:
                graphs.append(graph)
        edges = np.stack(edge_stack)
        for blk in self.blocks:
            tokens = blk(tokens, edges)
        out = tokens.transpose(1, 2).reshape(b, c, h, w)
        return out, torch.stack(aligns).mean(), graphs


class CognitionGuidedClassifier(nn.Module):
    """Stem, four co-editing stages, and a pooled diagnosis head."""

    def __init__(self, cfg: VccConfig):
        super().__init__()
        self.cfg = cfg
        chans = cfg.stage_channels
        self.stem = Stem(chans[0])
        self.stages = nn.ModuleList(
            CgcmStage(chans[i], cfg.stage_depths[i], cfg.k, cfg.alpha) for i in range(4)
        )
        self.downs = nn.ModuleList(Downsample(chans[i], chans[i + 1]) for i in range(3))
        self.head = nn.Linear(chans[3], cfg.num_classes)

    def forward(
        self,
        image: torch.Tensor,
        p_soft: torch.Tensor,
        collect_graphs: bool = True,
        capture: dict | None = None,
    ) -> VccOutput:
        x = _as_batch(image)
        hh, ww = self.cfg.input_size
        if x.shape[-2:] != (hh, ww):
            raise ShapeMismatch(f"image is {tuple(x.shape[-2:])}, expected {(hh, ww)}")
        att = p_soft.reshape(x.shape[0], hh, ww).to(x.dtype)
        if att.shape[-2:] != x.shape[-2:]:
            raise ShapeMismatch("attention map must match the image size")

        h = self.stem(x)
        aligns = []
        graphs = []
        for i, stage in enumerate(self.stages):
            att_s = downsample_attention(att, tuple(h.shape[-2:]))
            h, align, g = stage(h, att_s, collect_graphs)
            aligns.append(align)
            graphs.append(g)
            if capture is not None and capture.get("layer") == i:
                capture["features"] = h
            if i < 3:
                h = self.downs[i](h)
        pooled = h.mean(dim=(2, 3))
        logits = self.head(pooled)
        return VccOutput(
            p_cls=torch.softmax(logits, dim=-1),
            cls_logits=logits,
            per_layer_align=aligns,
            graphs=graphs,
        )


def vcc_loss(out: VccOutput, y_cls, lambda_align: float = 0.5):
    """Cross-entropy plus the mean per-layer alignment penalty.

    Returns (total, ce_term, align_term).
    """
    y = torch.as_tensor(y_cls, dtype=torch.long).reshape(-1)
    picked = out.p_cls[torch.arange(out.p_cls.shape[0]), y]
    ce = (-torch.log(picked)).mean()
    align = torch.stack(list(out.per_layer_align)).mean()
    return ce + lambda_align * align, ce, align
