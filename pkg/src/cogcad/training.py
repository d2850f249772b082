"""Joint training of the attention generator and the guided classifier.

One optimizer drives both networks on the weighted sum of their losses;
the generator's soft attention feeds the classifier's graph construction
every step. Runs are deterministic under a fixed seed.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, fields

import numpy as np
import torch

from .attention_gen import VagConfig, VisualAttentionGenerator, vag_loss
from .classifier import CognitionGuidedClassifier, VccConfig, vcc_loss
from .errors import DivergenceDetected, ValidationError
from .gridio import load_checkpoint, save_checkpoint
from .metrics import MetricsReport, compute_metrics
from .synthetic import random_attention_map

LOG_FIELDS = ("epoch", "l_soft", "l_hard", "l_aux", "l_align", "l_ce", "total", "acc")
ATTENTION_MODES = ("generated", "radiologist", "fused", "random")

# Core hyperparameters every config file must spell out explicitly.
REQUIRED_CONFIG_KEYS = (
    "lr",
    "batch_size",
    "epochs",
    "lambda_align",
    "lambda_vag",
    "alpha",
    "seed",
)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 2e-4
    batch_size: int = 8
    epochs: int = 200
    lambda_align: float = 0.5
    lambda_vag: float = 0.5
    alpha: float = 2.0
    seed: int = 0
    optimizer: str = "adam"
    input_size: tuple[int, int] = (64, 64)
    stem_channels: int = 16
    stage_depths: tuple[int, ...] = (1, 1, 1, 1)
    k: int = 9
    num_classes: int = 2
    backbone: str = "gnn+cnn"
    # Ablation switches: zero a loss term without removing its head.
    use_soft: bool = True
    use_hard: bool = True
    use_aux: bool = True
    use_align: bool = True

    def __post_init__(self):
        for name in ("lr", "batch_size", "epochs", "lambda_align", "lambda_vag", "alpha"):
            if getattr(self, name) < 0:
                raise ValidationError(f"config key {name!r} must be nonnegative")

    def to_dict(self) -> dict:
        d = {}
        for f in fields(self):
            v = getattr(self, f.name)
            d[f.name] = list(v) if isinstance(v, tuple) else v
        return d

    @classmethod
    def from_dict(cls, d: dict, require_core: bool = False) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown config key {sorted(unknown)[0]!r}")
        if require_core:
            for key in REQUIRED_CONFIG_KEYS:
                if key not in d:
                    raise ValidationError(f"missing config key {key!r}")
        kw = dict(d)
        for name in ("input_size", "stage_depths"):
            if name in kw:
                kw[name] = tuple(kw[name])
        return cls(**kw)


@dataclass
class ModelBundle:
    vag: VisualAttentionGenerator
    vcc: CognitionGuidedClassifier
    train_cfg: TrainConfig

    def eval(self):
        self.vag.eval()
        self.vcc.eval()
        return self


def total_loss(vag_total, vcc_total, lambda_vag: float):
    """Joint objective: classifier loss plus weighted generator loss."""
    return vcc_total + lambda_vag * vag_total


def build_bundle(cfg: TrainConfig) -> ModelBundle:
    """Seeded construction of both networks."""
    torch.manual_seed(cfg.seed)
    vag = VisualAttentionGenerator(
        VagConfig(
            input_size=cfg.input_size,
            stem_channels=cfg.stem_channels,
            stage_depths=cfg.stage_depths,
            k=cfg.k,
            num_classes=cfg.num_classes,
            backbone=cfg.backbone,
        )
    )
    vcc = CognitionGuidedClassifier(
        VccConfig(
            input_size=cfg.input_size,
            stem_channels=cfg.stem_channels,
            stage_depths=cfg.stage_depths,
            k=cfg.k,
            num_classes=cfg.num_classes,
            alpha=cfg.alpha,
        )
    )
    return ModelBundle(vag=vag, vcc=vcc, train_cfg=cfg)


def _batch_tensors(samples, idx):
    images = torch.from_numpy(np.stack([samples[i].image for i in idx])).unsqueeze(1)
    y_soft = torch.from_numpy(np.stack([samples[i].y_soft for i in idx]))
    y_hard = torch.from_numpy(np.stack([samples[i].y_hard for i in idx]))
    y_cls = torch.tensor([samples[i].label for i in idx], dtype=torch.long)
    return images.float(), y_soft.float(), y_hard.float(), y_cls


def train(cfg: TrainConfig, dataset) -> tuple[ModelBundle, list[dict]]:
    """Optimize the joint objective; returns the bundle and per-epoch log rows.

    Raises DivergenceDetected if the total loss goes non-finite.
    """
    if cfg.optimizer.lower() != "adam":
        raise ValidationError(f"unsupported optimizer {cfg.optimizer!r}")
    bundle = build_bundle(cfg)
    vag, vcc = bundle.vag, bundle.vcc
    params = list(vag.parameters()) + list(vcc.parameters())
    opt = torch.optim.Adam(params, lr=cfg.lr)
    shuffle_rng = np.random.default_rng(cfg.seed)
    toggles = (cfg.use_soft, cfg.use_hard, cfg.use_aux)
    lam_align = cfg.lambda_align if cfg.use_align else 0.0

    log = []
    n = len(dataset)
    for epoch in range(cfg.epochs):
        vag.train()
        vcc.train()
        order = shuffle_rng.permutation(n)
        sums = np.zeros(6)
        batches = 0
        correct = 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            images, y_soft, y_hard, y_cls = _batch_tensors(dataset, idx)
            vag_out = vag(images)
            vag_total, l_soft, l_hard, l_aux = vag_loss(vag_out, y_soft, y_hard, y_cls, toggles)
            vcc_out = vcc(images, vag_out.p_soft, collect_graphs=False)
            vcc_total, l_ce, l_align = vcc_loss(vcc_out, y_cls, lam_align)
            loss = total_loss(vag_total, vcc_total, cfg.lambda_vag)
            if not torch.isfinite(loss):
                raise DivergenceDetected(f"non-finite loss at epoch {epoch}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            sums += np.array(
                [t.item() for t in (l_soft, l_hard, l_aux, l_align, l_ce, loss)]
            )
            batches += 1
            correct += int((vcc_out.p_cls.argmax(dim=1) == y_cls).sum())
        means = sums / max(batches, 1)
        acc = 100.0 * correct / n
        log.append(
            {
                "epoch": epoch,
                "l_soft": means[0],
                "l_hard": means[1],
                "l_aux": means[2],
                "l_align": means[3],
                "l_ce": means[4],
                "total": means[5],
                "acc": acc,
            }
        )
    bundle.eval()
    return bundle, log


def _attention_for(bundle: ModelBundle, sample, mode: str, seed: int) -> torch.Tensor:
    size = sample.image.shape[0]
    if mode == "generated":
        image = torch.from_numpy(sample.image).float()
        return bundle.vag(image).p_soft[0]
    if mode == "radiologist":
        return torch.from_numpy(sample.y_soft).float()
    if mode == "fused":
        image = torch.from_numpy(sample.image).float()
        gen = bundle.vag(image).p_soft[0]
        mix = 0.5 * (gen + torch.from_numpy(sample.y_soft).float())
        peak = mix.max()
        return mix / peak if peak > 0 else mix
    if mode == "random":
        return torch.from_numpy(
            random_attention_map(size, sample.image_id, seed).grid
        ).float()
    raise ValidationError(f"unknown attention mode {mode!r}")


def predict_probs(bundle: ModelBundle, dataset, attention_mode: str, seed: int = 0):
    """Class probabilities for every sample under the chosen attention source."""
    bundle.eval()
    probs = []
    labels = []
    with torch.no_grad():
        for sample in dataset:
            image = torch.from_numpy(sample.image).float()
            att = _attention_for(bundle, sample, attention_mode, seed)
            out = bundle.vcc(image, att.unsqueeze(0), collect_graphs=False)
            probs.append(out.p_cls[0].numpy())
            labels.append(sample.label)
    return np.array(probs), np.array(labels)


def evaluate(
    bundle: ModelBundle, dataset, attention_mode: str = "generated", seed: int = 0
) -> MetricsReport:
    """Accuracy, macro F1, and rank AUC under the chosen attention source."""
    probs, labels = predict_probs(bundle, dataset, attention_mode, seed)
    return compute_metrics(probs, labels, bundle.train_cfg.num_classes)


# ---------------------------------------------------------------------------
# Checkpoints


def save_bundle(path, bundle: ModelBundle) -> None:
    config = {
        "train": bundle.train_cfg.to_dict(),
        "vag": bundle.vag.cfg.to_dict(),
        "vcc": bundle.vcc.cfg.to_dict(),
    }
    params = {}
    for prefix, model in (("vag", bundle.vag), ("vcc", bundle.vcc)):
        for name, tensor in model.state_dict().items():
            params[f"{prefix}.{name}"] = tensor.detach().cpu().numpy()
    save_checkpoint(path, config, params)


def load_bundle(path) -> ModelBundle:
    config, params = load_checkpoint(path)
    cfg = TrainConfig.from_dict(config["train"])
    bundle = build_bundle(cfg)
    for prefix, model in (("vag", bundle.vag), ("vcc", bundle.vcc)):
        state = model.state_dict()
        for name, tensor in state.items():
            arr = params[f"{prefix}.{name}"].reshape(tuple(tensor.shape))
            state[name] = torch.from_numpy(arr).to(tensor.dtype)
        model.load_state_dict(state)
    return bundle.eval()


def log_to_csv(log: list[dict]) -> str:
    buf = io.StringIO()
    buf.write(",".join(LOG_FIELDS) + "\n")
    for row in log:
        buf.write(
            ",".join(
                str(row[k]) if k == "epoch" else repr(float(row[k])) for k in LOG_FIELDS
            )
            + "\n"
        )
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Ablation harness


def ablation_grid(base: TrainConfig) -> list[tuple[str, TrainConfig, str]]:
    """Named variants mirroring the structural ablation axes.

    Rows toggle loss terms, swap the generator backbone, and switch the
    attention source used at evaluation.
    """
    import dataclasses

    def variant(**kw):
        return dataclasses.replace(base, **kw)

    rows = [
        ("loss/soft", variant(use_hard=False, use_aux=False, use_align=False), "generated"),
        ("loss/soft+hard", variant(use_aux=False, use_align=False), "generated"),
        ("loss/soft+aux", variant(use_hard=False, use_align=False), "generated"),
        ("loss/soft+hard+aux", variant(use_align=False), "generated"),
        ("loss/soft+align", variant(use_hard=False, use_aux=False), "generated"),
        ("loss/all", base, "generated"),
        ("backbone/cnn", variant(backbone="cnn"), "generated"),
        ("backbone/gnn", variant(backbone="gnn"), "generated"),
        ("backbone/gnn+cnn", base, "generated"),
        ("attention/random", base, "random"),
        ("attention/radiologist", base, "radiologist"),
        ("attention/generated", base, "generated"),
        ("attention/fused", base, "fused"),
    ]
    return rows


def run_ablation(base: TrainConfig, train_set, test_set, rows=None):
    """Train/evaluate each ablation row; returns [(name, MetricsReport)]."""
    results = []
    cache = {}
    for name, cfg, mode in rows or ablation_grid(base):
        key = tuple(sorted(cfg.to_dict().items(), key=lambda kv: kv[0]))
        key = str(key)
        if key not in cache:
            cache[key], _ = train(cfg, train_set)
        results.append((name, evaluate(cache[key], test_set, attention_mode=mode)))
    return results
