"""Visual attention generator (VAG).

A graph-convolution encoder pyramid paired with two convolutional
decoders. The soft head regresses a continuous attention map, the hard
head predicts the binarized high-attention mask, and an auxiliary head
classifies the image; all three supervise the shared trunk.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ShapeMismatch
from .graph import (
    CnnBlock,
    GnnBlock,
    batched_knn_edges,
    contiguous_grad,
    pairwise_feature_distance,
)

BACKBONES = ("gnn+cnn", "gnn", "cnn")


@dataclass(frozen=True)
class VagConfig:
    input_size: tuple[int, int] = (224, 224)
    stem_channels: int = 32
    stage_depths: tuple[int, ...] = (1, 1, 1, 1)
    decoder_depth: int = 4
    k: int = 9
    num_classes: int = 2
    backbone: str = "gnn+cnn"  # ablation switch: which blocks build the trunk

    def __post_init__(self):
        h, w = self.input_size
        if h % 32 or w % 32:
            raise ValueError("input size must be divisible by 32")
        if len(self.stage_depths) != 4 or any(d < 1 for d in self.stage_depths):
            raise ValueError("need 4 stage depths, each >= 1")
        if self.backbone not in BACKBONES:
            raise ValueError(f"backbone must be one of {BACKBONES}")

    @property
    def stage_channels(self) -> tuple[int, ...]:
        c = self.stem_channels
        return (c, 2 * c, 4 * c, 8 * c)

    def to_dict(self) -> dict:
        return {
            "input_size": list(self.input_size),
            "stem_channels": self.stem_channels,
            "stage_depths": list(self.stage_depths),
            "decoder_depth": self.decoder_depth,
            "k": self.k,
            "num_classes": self.num_classes,
            "backbone": self.backbone,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VagConfig":
        return cls(
            input_size=tuple(d["input_size"]),
            stem_channels=int(d["stem_channels"]),
            stage_depths=tuple(d["stage_depths"]),
            decoder_depth=int(d["decoder_depth"]),
            k=int(d["k"]),
            num_classes=int(d["num_classes"]),
            backbone=d.get("backbone", "gnn+cnn"),
        )


@dataclass
class VagOutput:
    p_soft: torch.Tensor  # (B, H, W) in [0, 1]
    p_hard_logits: torch.Tensor  # (B, H, W)
    p_aux: torch.Tensor  # (B, num_classes), rows sum to 1
    aux_logits: torch.Tensor  # (B, num_classes)
    encoder_feats: list = field(default_factory=list)  # per-stage (B, C_s, H_s, W_s)


def _as_batch(image: torch.Tensor) -> torch.Tensor:
    if image.dim() == 2:
        return image.unsqueeze(0).unsqueeze(0)
    if image.dim() == 3:
        return image.unsqueeze(1) if image.shape[0] != 1 else image.unsqueeze(0)
    return image


class Stem(nn.Module):
    """Two stride-2 conv stages: H x W x 1 down to H/4 x W/4 x C.

    GELU instead of ReLU: the stem feeds max-relative aggregation, and a
    clamping activation would plant exact zero ties right where the
    neighbor max makes the loss non-differentiable.
    """

    def __init__(self, channels: int):
        super().__init__()
        self.net = nn.Sequential(
            nn.Conv2d(1, channels, 3, stride=2, padding=1),
            nn.BatchNorm2d(channels),
            nn.GELU(),
            nn.Conv2d(channels, channels, 3, stride=2, padding=1),
            nn.BatchNorm2d(channels),
            nn.GELU(),
        )

    def forward(self, x):
        return self.net(x)


class Downsample(nn.Module):
    """Stride-2 conv halving the grid and doubling the channels."""

    def __init__(self, c_in: int, c_out: int):
        super().__init__()
        self.conv = nn.Conv2d(c_in, c_out, 3, stride=2, padding=1)
        self.bn = nn.BatchNorm2d(c_out)

    def forward(self, x):
        return self.bn(self.conv(x))


class GridGnnStage(nn.Module):
    """Graph construction over a feature grid followed by GNN blocks.

    The k-NN graph is rebuilt from the incoming features of every call
    (dynamic graph); k is clamped to the node count minus one, and a
    single-node grid falls back to the neighborless path.
    """

    def __init__(self, channels: int, depth: int, k: int):
        super().__init__()
        self.k = k
        self.blocks = nn.ModuleList(GnnBlock(channels) for _ in range(depth))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, c, h, w = x.shape
        tokens = contiguous_grad(x).flatten(2).transpose(1, 2)  # (B, N, C)
        n = h * w
        k_eff = min(self.k, n - 1)
        if k_eff >= 1:
            d = pairwise_feature_distance_batch(tokens)
            edges = batched_knn_edges(d, k_eff)
        else:
            edges = np.zeros((b, n, 0), dtype=np.int64)
        for blk in self.blocks:
            tokens = blk(tokens, edges)
        return tokens.transpose(1, 2).reshape(b, c, h, w)


def pairwise_feature_distance_batch(x: torch.Tensor) -> torch.Tensor:
    """pairwise_feature_distance over a (B, N, C) stack, one matrix per item."""
    return torch.stack([pairwise_feature_distance(x[i]) for i in range(x.shape[0])])


class CnnStage(nn.Module):
    def __init__(self, channels: int, depth: int):
        super().__init__()
        self.blocks = nn.Sequential(*(CnnBlock(channels) for _ in range(depth)))

    def forward(self, x):
        return self.blocks(x)


class Decoder(nn.Module):
    """Four blocks walking back up the pyramid with additive skips.

    The deepest block refines the bottom encoder stage in place; each
    later block upsamples (nearest, x2), projects the channel count down,
    adds the same-scale encoder feature, and applies its block.
    """

    def __init__(self, stage_channels, kind: str = "cnn", k: int = 9):
        super().__init__()
        c1, c2, c3, c4 = stage_channels

        def make_block(c):
            return GridGnnStage(c, 1, k) if kind == "gnn" else CnnBlock(c)

        self.block4 = make_block(c4)
        self.proj3 = nn.Conv2d(c4, c3, 1)
        self.block3 = make_block(c3)
        self.proj2 = nn.Conv2d(c3, c2, 1)
        self.block2 = make_block(c2)
        self.proj1 = nn.Conv2d(c2, c1, 1)
        self.block1 = make_block(c1)

    def forward(self, feats):
        e1, e2, e3, e4 = feats
        d = self.block4(e4)
        d = self.block3(self.proj3(F.interpolate(d, scale_factor=2, mode="nearest")) + e3)
        d = self.block2(self.proj2(F.interpolate(d, scale_factor=2, mode="nearest")) + e2)
        d = self.block1(self.proj1(F.interpolate(d, scale_factor=2, mode="nearest")) + e1)
        return d


class VisualAttentionGenerator(nn.Module):
    """Encoder plus soft/hard decoders and an auxiliary diagnosis head."""

    def __init__(self, cfg: VagConfig):
        super().__init__()
        self.cfg = cfg
        chans = cfg.stage_channels
        self.stem = Stem(chans[0])

        def make_stage(c, depth):
            if cfg.backbone == "cnn":
                return CnnStage(c, depth)
            return GridGnnStage(c, depth, cfg.k)

        self.stages = nn.ModuleList(
            make_stage(chans[i], cfg.stage_depths[i]) for i in range(4)
        )
        self.downs = nn.ModuleList(
            Downsample(chans[i], chans[i + 1]) for i in range(3)
        )
        dec_kind = "gnn" if cfg.backbone == "gnn" else "cnn"
        self.dec_soft = Decoder(chans, kind=dec_kind, k=cfg.k)
        self.dec_hard = Decoder(chans, kind=dec_kind, k=cfg.k)
        self.soft_head = nn.Conv2d(chans[0], 1, 1)
        self.hard_head = nn.Conv2d(chans[0], 1, 1)
        self.diag_head = nn.Linear(chans[3], cfg.num_classes)

    def encode(self, x: torch.Tensor) -> list:
        feats = []
        h = self.stem(x)
        for i, stage in enumerate(self.stages):
            h = stage(h)
            feats.append(h)
            if i < 3:
                h = self.downs[i](h)
        return feats

    def forward(self, image: torch.Tensor) -> VagOutput:
        x = _as_batch(image)
        hh, ww = self.cfg.input_size
        if x.shape[-2:] != (hh, ww):
            raise ShapeMismatch(
                f"image is {tuple(x.shape[-2:])}, expected {(hh, ww)}"
            )
        feats = self.encode(x)
        soft = self.dec_soft(feats)
        hard = self.dec_hard(feats)
        soft = self.soft_head(F.interpolate(soft, scale_factor=4, mode="nearest"))
        hard = self.hard_head(F.interpolate(hard, scale_factor=4, mode="nearest"))
        p_soft = torch.sigmoid(soft.squeeze(1))
        p_hard_logits = hard.squeeze(1)
        pooled = feats[-1].mean(dim=(2, 3))
        aux_logits = self.diag_head(pooled)
        p_aux = torch.softmax(aux_logits, dim=-1)
        return VagOutput(
            p_soft=p_soft,
            p_hard_logits=p_hard_logits,
            p_aux=p_aux,
            aux_logits=aux_logits,
            encoder_feats=feats,
        )


def dice_loss(p: torch.Tensor, y: torch.Tensor, eps: float = 1.0) -> torch.Tensor:
    """Per-sample soft Dice loss, averaged over the batch."""
    p2 = p.reshape(p.shape[0], -1)
    y2 = y.reshape(y.shape[0], -1)
    inter = (p2 * y2).sum(dim=1)
    denom = p2.sum(dim=1) + y2.sum(dim=1)
    return (1.0 - (2.0 * inter + eps) / (denom + eps)).mean()


def vag_loss(
    out: VagOutput,
    y_soft: torch.Tensor,
    y_hard: torch.Tensor,
    y_cls: torch.Tensor,
    toggles: tuple[bool, bool, bool] = (True, True, True),
):
    """Sum of soft-map MSE, hard-mask Dice, and auxiliary cross-entropy.

    Returns (total, soft_term, hard_term, aux_term). `toggles` zeroes
    individual terms for ablation runs without touching the heads.
    """
    y_soft = y_soft.reshape(out.p_soft.shape).to(out.p_soft.dtype)
    y_hard = y_hard.reshape(out.p_hard_logits.shape).to(out.p_hard_logits.dtype)
    y_cls = torch.as_tensor(y_cls, dtype=torch.long).reshape(-1)

    soft = ((out.p_soft - y_soft) ** 2).mean()
    hard = dice_loss(torch.sigmoid(out.p_hard_logits), y_hard)
    picked = out.p_aux[torch.arange(out.p_aux.shape[0]), y_cls]
    aux = (-torch.log(picked)).mean()

    zero = soft.new_zeros(())
    soft = soft if toggles[0] else zero
    hard = hard if toggles[1] else zero
    aux = aux if toggles[2] else zero
    return soft + hard + aux, soft, hard, aux
