"""Gradient-weighted class activation maps for the guided classifier."""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F

from .errors import BadLayer
from .training import ModelBundle

LAYER_IDS = ("stage1", "stage2", "stage3", "stage4")


def gradcam(
    bundle: ModelBundle,
    image: np.ndarray,
    target_class: int,
    layer_id: str = "stage4",
    attention: np.ndarray | None = None,
) -> np.ndarray:
    """Heat grid in [0, 1]: ReLU of gradient-weighted channel sum at a stage.

    The class logit is differentiated against the chosen stage's feature
    map; channel weights are the spatially pooled gradients. The weighted
    sum is upsampled to the input size and rescaled to peak at 1.
    """
    if layer_id not in LAYER_IDS:
        raise BadLayer(f"layer_id must be one of {LAYER_IDS}")
    layer = LAYER_IDS.index(layer_id)
    vcc = bundle.vcc
    vcc.eval()

    x = torch.from_numpy(np.asarray(image, dtype=np.float32))
    h, w = vcc.cfg.input_size
    if attention is None:
        with torch.no_grad():
            att = bundle.vag(x).p_soft
    else:
        att = torch.from_numpy(np.asarray(attention, dtype=np.float32)).reshape(1, h, w)

    capture = {"layer": layer}
    with torch.enable_grad():
        out = vcc(x, att, collect_graphs=False, capture=capture)
        feats = capture["features"]  # (1, C, Hs, Ws)
        score = out.cls_logits[0, int(target_class)]
        grads = torch.autograd.grad(score, feats)[0]

    weights = grads.mean(dim=(2, 3), keepdim=True)
    cam = F.relu((weights * feats).sum(dim=1, keepdim=True))
    cam = F.interpolate(cam, size=(h, w), mode="bilinear", align_corners=False)
    cam = cam[0, 0].detach().numpy()
    peak = cam.max()
    if peak > 0:
        cam = cam / peak
    return cam.astype(np.float32)
