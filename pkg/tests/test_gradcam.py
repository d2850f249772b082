"""Gradient-weighted activation maps over the classifier stages."""

import numpy as np
import pytest
import torch
import torch.nn.functional as F

from cogcad.errors import BadLayer
from cogcad.gradcam import gradcam
from cogcad.training import TrainConfig, build_bundle


def tiny_bundle(seed=0):
    return build_bundle(
        TrainConfig(input_size=(64, 64), stem_channels=8, seed=seed)
    ).eval()


def test_rejects_unknown_layer():
    bundle = tiny_bundle()
    with pytest.raises(BadLayer):
        gradcam(bundle, np.zeros((64, 64), dtype=np.float32), 0, layer_id="stage9")


def test_zero_gradients_zero_map():
    bundle = tiny_bundle()
    with torch.no_grad():
        bundle.vcc.head.weight.zero_()
        bundle.vcc.head.bias.zero_()
    cam = gradcam(bundle, np.random.default_rng(0).random((64, 64)).astype(np.float32), 1)
    assert cam.shape == (64, 64)
    np.testing.assert_array_equal(cam, np.zeros((64, 64), dtype=np.float32))


def test_single_channel_positive_gradient_tracks_activation():
    bundle = tiny_bundle(seed=1)
    vcc = bundle.vcc
    with torch.no_grad():
        vcc.head.weight.zero_()
        vcc.head.bias.zero_()
        vcc.head.weight[1, 0] = 1.0  # class-1 logit = channel 0 pooled activation
    image = np.random.default_rng(1).random((64, 64)).astype(np.float32)

    capture = {"layer": 3}
    with torch.no_grad():
        att = bundle.vag(torch.from_numpy(image)).p_soft
    out = vcc(torch.from_numpy(image), att, collect_graphs=False, capture=capture)
    feats = capture["features"].detach()

    cam = gradcam(bundle, image, 1, layer_id="stage4")
    # stage4 is the deepest stage: its features feed the head directly,
    # so the expected map is relu(channel 0) rescaled
    expected = F.relu(feats[0, 0])
    expected = F.interpolate(
        expected[None, None], size=(64, 64), mode="bilinear", align_corners=False
    )[0, 0].numpy()
    if expected.max() > 0:
        expected = expected / expected.max()
    np.testing.assert_allclose(cam, expected, atol=1e-5)


def test_matches_hand_composed_pool_grad_times_activation():
    bundle = tiny_bundle(seed=2)
    image = np.random.default_rng(2).random((64, 64)).astype(np.float32)
    layer = 2

    with torch.no_grad():
        att = bundle.vag(torch.from_numpy(image)).p_soft
    capture = {"layer": layer}
    with torch.enable_grad():
        out = bundle.vcc(torch.from_numpy(image), att, collect_graphs=False, capture=capture)
        feats = capture["features"]
        score = out.cls_logits[0, 1]
        grads = torch.autograd.grad(score, feats)[0]

    weights = grads.mean(dim=(2, 3), keepdim=True)
    cam_manual = F.relu((weights * feats).sum(dim=1, keepdim=True))
    cam_manual = F.interpolate(cam_manual, size=(64, 64), mode="bilinear", align_corners=False)
    cam_manual = cam_manual[0, 0].detach().numpy()
    if cam_manual.max() > 0:
        cam_manual = cam_manual / cam_manual.max()

    cam = gradcam(bundle, image, 1, layer_id="stage3")
    np.testing.assert_allclose(cam, cam_manual, atol=1e-6)


def test_values_in_unit_range_all_layers():
    bundle = tiny_bundle(seed=3)
    image = np.random.default_rng(3).random((64, 64)).astype(np.float32)
    for layer_id in ("stage1", "stage2", "stage3", "stage4"):
        cam = gradcam(bundle, image, 0, layer_id=layer_id)
        assert cam.shape == (64, 64)
        assert cam.min() >= 0.0 and cam.max() <= 1.0
