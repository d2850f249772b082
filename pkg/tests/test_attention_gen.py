"""Attention generator: architecture contracts and the three-term loss."""

import math

import numpy as np
import pytest
import torch

from cogcad.attention_gen import (
    VagConfig,
    VagOutput,
    VisualAttentionGenerator,
    vag_loss,
)
from cogcad.errors import ShapeMismatch

from oracles import ce_oracle, dice_oracle, fd_gradient, mse_oracle

SMALL = VagConfig(input_size=(64, 64), stem_channels=8, num_classes=2)


def build(cfg=SMALL, seed=0):
    torch.manual_seed(seed)
    return VisualAttentionGenerator(cfg)


class TestVagConfig:
    def test_rejects_indivisible_size(self):
        with pytest.raises(ValueError):
            VagConfig(input_size=(60, 64))

    def test_rejects_bad_depths(self):
        with pytest.raises(ValueError):
            VagConfig(stage_depths=(1, 1, 1))

    def test_stage_channels_double(self):
        assert VagConfig(stem_channels=16).stage_channels == (16, 32, 64, 128)

    def test_roundtrip_dict(self):
        cfg = VagConfig(input_size=(64, 64), stem_channels=8, k=5)
        assert VagConfig.from_dict(cfg.to_dict()) == cfg


class TestForwardContracts:
    def test_full_resolution_output_shapes(self):
        cfg = VagConfig(input_size=(224, 224), stem_channels=4, num_classes=3)
        vag = build(cfg)
        vag.eval()
        with torch.no_grad():
            out = vag(torch.rand(1, 1, 224, 224))
        assert out.p_soft.shape == (1, 224, 224)
        assert out.p_hard_logits.shape == (1, 224, 224)
        assert out.p_aux.shape == (1, 3)

    def test_zero_image_zero_head_uniform_aux(self):
        vag = build()
        with torch.no_grad():
            vag.diag_head.weight.zero_()
            vag.diag_head.bias.zero_()
        vag.eval()
        out = vag(torch.zeros(1, 1, 64, 64))
        np.testing.assert_allclose(out.p_aux.detach().numpy(), [[0.5, 0.5]], atol=1e-7)

    def test_outputs_finite_and_bounded(self):
        vag = build(seed=5).eval()
        torch.manual_seed(5)
        img = torch.rand(2, 1, 64, 64)
        with torch.no_grad():
            out = vag(img)
        assert torch.isfinite(out.p_soft).all()
        assert torch.isfinite(out.p_hard_logits).all()
        assert (out.p_soft >= 0).all() and (out.p_soft <= 1).all()
        sums = out.p_aux.sum(dim=1).detach().numpy()
        np.testing.assert_allclose(sums, 1.0, atol=1e-5)

    def test_bit_reproducible_under_seed(self):
        torch.manual_seed(7)
        img = torch.rand(1, 1, 64, 64)
        outs = []
        for _ in range(2):
            vag = build(seed=42).eval()
            with torch.no_grad():
                outs.append(vag(img))
        assert torch.equal(outs[0].p_soft, outs[1].p_soft)
        assert torch.equal(outs[0].p_hard_logits, outs[1].p_hard_logits)
        assert torch.equal(outs[0].p_aux, outs[1].p_aux)

    def test_encoder_grid_sizes_for_two_input_sizes(self):
        for size in (64, 128):
            cfg = VagConfig(input_size=(size, size), stem_channels=8)
            vag = build(cfg).eval()
            with torch.no_grad():
                out = vag(torch.rand(1, 1, size, size))
            for s, feat in enumerate(out.encoder_feats, start=1):
                expected = size // 2 ** (s + 1)
                assert feat.shape[-2:] == (expected, expected)

    def test_rejects_wrong_size(self):
        vag = build()
        with pytest.raises(ShapeMismatch):
            vag(torch.rand(1, 1, 32, 32))

    def test_backbone_variants_run(self):
        for backbone in ("cnn", "gnn", "gnn+cnn"):
            cfg = VagConfig(input_size=(64, 64), stem_channels=8, backbone=backbone)
            vag = build(cfg, seed=1).eval()
            with torch.no_grad():
                out = vag(torch.rand(1, 1, 64, 64))
            assert out.p_soft.shape == (1, 64, 64)


def manual_output(p_soft, p_hard_logits, p_aux):
    p_soft = torch.as_tensor(p_soft, dtype=torch.float64)
    p_hard_logits = torch.as_tensor(p_hard_logits, dtype=torch.float64)
    p_aux = torch.as_tensor(p_aux, dtype=torch.float64)
    return VagOutput(
        p_soft=p_soft,
        p_hard_logits=p_hard_logits,
        p_aux=p_aux,
        aux_logits=torch.log(p_aux.clamp_min(1e-30)),
    )


class TestVagLoss:
    def test_perfect_prediction_zero_terms(self):
        rng = np.random.default_rng(0)
        y_soft = rng.random((1, 64, 64))
        yy, xx = np.mgrid[0:64, 0:64]
        y_hard = ((xx - 32) ** 2 + (yy - 32) ** 2 <= 10**2).astype(float)[None]
        assert y_hard.sum() >= 100
        logits = np.where(y_hard > 0, 50.0, -50.0)
        out = manual_output(y_soft, logits, [[1.0, 0.0]])
        total, soft, hard, aux = vag_loss(
            out, torch.tensor(y_soft), torch.tensor(y_hard), [0]
        )
        assert float(soft) == 0.0
        assert float(hard) <= 1e-3
        assert float(aux) == 0.0
        assert float(total) <= 1e-3

    def test_uniform_aux_is_log2(self):
        out = manual_output(
            np.zeros((1, 8, 8)), np.zeros((1, 8, 8)) - 50.0, [[0.5, 0.5]]
        )
        _, _, _, aux = vag_loss(
            out, torch.zeros(1, 8, 8), torch.zeros(1, 8, 8), [1]
        )
        assert float(aux) == pytest.approx(math.log(2.0), abs=1e-12)

    def test_terms_match_scalar_loop_oracles(self):
        rng = np.random.default_rng(1)
        for _ in range(5):
            p_soft = rng.random((1, 6, 6))
            logits = rng.standard_normal((1, 6, 6))
            probs = rng.random(3)
            probs /= probs.sum()
            y_soft = rng.random((1, 6, 6))
            y_hard = (rng.random((1, 6, 6)) > 0.5).astype(float)
            label = int(rng.integers(0, 3))
            out = manual_output(p_soft, logits, probs[None])
            total, soft, hard, aux = vag_loss(
                out, torch.tensor(y_soft), torch.tensor(y_hard), [label]
            )
            p_sig = 1.0 / (1.0 + np.exp(-logits))
            assert float(soft) == pytest.approx(mse_oracle(p_soft, y_soft), abs=1e-6)
            assert float(hard) == pytest.approx(dice_oracle(p_sig, y_hard), abs=1e-6)
            assert float(aux) == pytest.approx(ce_oracle(probs, label), abs=1e-6)
            assert float(total) == pytest.approx(
                float(soft) + float(hard) + float(aux), abs=1e-9
            )

    def test_loss_nonnegative(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            probs = rng.random(2)
            probs /= probs.sum()
            out = manual_output(
                rng.random((1, 5, 5)), rng.standard_normal((1, 5, 5)), probs[None]
            )
            total, *_ = vag_loss(
                out,
                torch.tensor(rng.random((1, 5, 5))),
                torch.tensor((rng.random((1, 5, 5)) > 0.5).astype(float)),
                [int(rng.integers(0, 2))],
            )
            assert float(total) >= 0.0

    def test_duplicated_batch_mean_loss_unchanged(self):
        vag = build(seed=3).eval()
        torch.manual_seed(3)
        img = torch.rand(1, 1, 64, 64)
        y_soft = torch.rand(1, 64, 64)
        y_hard = (torch.rand(1, 64, 64) > 0.5).float()
        with torch.no_grad():
            single = vag(img)
            double = vag(img.repeat(2, 1, 1, 1))
        t1, *_ = vag_loss(single, y_soft, y_hard, [1])
        t2, *_ = vag_loss(
            double, y_soft.repeat(2, 1, 1), y_hard.repeat(2, 1, 1), [1, 1]
        )
        assert float(t1) == pytest.approx(float(t2), abs=1e-6)

    def test_toggles_zero_terms(self):
        out = manual_output(
            np.full((1, 4, 4), 0.3), np.zeros((1, 4, 4)), [[0.25, 0.75]]
        )
        total, soft, hard, aux = vag_loss(
            out,
            torch.zeros(1, 4, 4),
            torch.zeros(1, 4, 4),
            [0],
            toggles=(False, False, True),
        )
        assert float(soft) == 0.0 and float(hard) == 0.0
        assert float(total) == pytest.approx(float(aux))


class TestHeadGradients:
    def test_head_parameter_gradients_match_finite_differences(self):
        cfg = VagConfig(input_size=(32, 32), stem_channels=4, num_classes=2)
        vag = build(cfg, seed=11).double().eval()
        torch.manual_seed(11)
        img = torch.rand(1, 1, 32, 32, dtype=torch.float64)
        y_soft = torch.rand(1, 32, 32, dtype=torch.float64)
        y_hard = (torch.rand(1, 32, 32) > 0.6).double()
        y_cls = [1]

        heads = {
            "soft_head.weight": vag.soft_head.weight,
            "soft_head.bias": vag.soft_head.bias,
            "hard_head.weight": vag.hard_head.weight,
            "hard_head.bias": vag.hard_head.bias,
            "diag_head.weight": vag.diag_head.weight,
            "diag_head.bias": vag.diag_head.bias,
        }

        def loss_value():
            total, *_ = vag_loss(vag(img), y_soft, y_hard, y_cls)
            return total

        for name, param in heads.items():
            for p in vag.parameters():
                p.grad = None
            total = loss_value()
            total.backward()
            analytic = param.grad.detach().numpy().copy()

            flat0 = param.detach().numpy().copy()

            def fd_fn(values, _param=param, _shape=flat0.shape):
                with torch.no_grad():
                    _param.copy_(torch.from_numpy(values.reshape(_shape)))
                val = float(loss_value().detach())
                with torch.no_grad():
                    _param.copy_(torch.from_numpy(flat0))
                return val

            numeric = fd_gradient(fd_fn, flat0.ravel(), step=1e-4).reshape(flat0.shape)
            denom = np.maximum(np.abs(numeric), 1e-6)
            rel = np.abs(analytic - numeric) / denom
            mask = np.abs(numeric) > 1e-6
            if mask.any():
                assert rel[mask].max() < 1e-3, name
