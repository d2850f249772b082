"""Command-line front door.

Every command writes its artifacts into --out together with a
manifest.json listing each file and its sha256, so a run can be
re-verified (and two same-seed runs compared) by checksum. Failures
print a machine-readable JSON error to stderr: exit 2 for validation
problems, exit 1 for I/O.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from pathlib import Path

import click
import numpy as np

from .errors import CogcadError, EmptyTrajectory, ValidationError
from . import gridio
from .trace import I2MCParams, extract_stay_points, render_soft_attention, threshold_hard

EXIT_IO = 1
EXIT_VALIDATION = 2


def _fail(status: int, code: str, message: str, **extra):
    payload = {"error": {"code": code, "message": message, **extra}}
    click.echo(json.dumps(payload), err=True)
    sys.exit(status)


def _write_manifest(out_dir: Path, files: list[Path]) -> Path:
    entries = {}
    for f in sorted(files):
        entries[str(f.relative_to(out_dir))] = hashlib.sha256(f.read_bytes()).hexdigest()
    path = out_dir / "manifest.json"
    path.write_text(json.dumps({"files": entries}, indent=1, sort_keys=True))
    return path


def _load_config(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        _fail(EXIT_IO, "IO", f"cannot read config: {exc}")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        _fail(EXIT_VALIDATION, "VALIDATION", f"config is not valid JSON: {exc}")


def _train_config(raw: dict, seed=None, alpha=None, k=None):
    from .training import TrainConfig

    cfg_dict = {key: val for key, val in raw.items() if key not in ("dataset", "eval_dataset")}
    try:
        cfg = TrainConfig.from_dict(cfg_dict, require_core=True)
    except (ValidationError, TypeError) as exc:
        _fail(EXIT_VALIDATION, "VALIDATION", str(exc))
    overrides = {}
    if seed is not None:
        overrides["seed"] = seed
    if alpha is not None:
        overrides["alpha"] = alpha
    if k is not None:
        overrides["k"] = k
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def _dataset_from(raw: dict, key: str = "dataset"):
    from .synthetic import make_synthetic_dataset

    spec = raw.get(key) or raw.get("dataset")
    if not isinstance(spec, dict):
        _fail(EXIT_VALIDATION, "VALIDATION", f"missing config key {key!r}")
    for field in ("n", "size", "seed"):
        if field not in spec:
            _fail(EXIT_VALIDATION, "VALIDATION", f"missing config key {key}.{field!r}")
    return make_synthetic_dataset(int(spec["n"]), int(spec["size"]), int(spec["seed"]))


@click.group()
def main():
    """Interaction traces to attention maps to cognition-guided diagnosis."""


@main.command()
@click.argument("traj_file", type=str)
@click.option("--out", required=True, type=str, help="Output directory.")
@click.option("--threshold", default=0.5, show_default=True, help="Hard-mask threshold.")
@click.option("--radius", default=150.0, show_default=True, help="Gaussian truncation radius, px.")
@click.option("--sigma", default=25.0, show_default=True, help="Gaussian sigma, px.")
@click.option("--window", default=None, type=float, help="Dwell window override, ms.")
@click.option("--min-duration", default=None, type=float, help="Minimum dwell duration, ms.")
def extract(traj_file, out, threshold, radius, sigma, window, min_duration):
    """Derive soft and hard attention maps from a trajectory JSON file."""
    try:
        traj = gridio.load_trajectory(traj_file)
    except OSError as exc:
        _fail(EXIT_IO, "IO", f"cannot read trajectory: {exc}")
    except json.JSONDecodeError as exc:
        _fail(EXIT_VALIDATION, "VALIDATION", f"not valid JSON: {exc}")
    except ValidationError as exc:
        extra = {"index": exc.index} if exc.index is not None else {}
        _fail(EXIT_VALIDATION, exc.code, str(exc), **extra)

    params = I2MCParams.for_source(traj.source)
    if window is not None:
        params = dataclasses.replace(params, window_ms=window)
    if min_duration is not None:
        params = dataclasses.replace(params, min_duration_ms=min_duration)
    try:
        stays = extract_stay_points(traj, params)
    except EmptyTrajectory as exc:
        _fail(EXIT_VALIDATION, exc.code, str(exc))
    except CogcadError as exc:
        _fail(EXIT_VALIDATION, exc.code, str(exc))

    w, h = traj.viewport
    soft = render_soft_attention(stays, h, w, radius=radius, sigma=sigma, image_id=traj.image_id)
    hard = threshold_hard(soft, threshold)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(traj_file).stem
    files = [out_dir / f"{stem}_soft.vcca", out_dir / f"{stem}_hard.vcca"]
    gridio.write_map(files[0], soft)
    gridio.write_map(files[1], hard)
    stays_json = out_dir / f"{stem}_stays.json"
    stays_json.write_text(
        json.dumps(
            {"stay_points": [[x, y, d] for x, y, d in stays.points], "count": len(stays)},
            indent=1,
        )
    )
    files.append(stays_json)
    _write_manifest(out_dir, files)
    click.echo(f"stay points: {len(stays)}")


@main.command()
@click.option("--config", "config_path", required=True, type=str)
@click.option("--out", required=True, type=str)
@click.option("--seed", default=None, type=int, help="Override the config seed.")
@click.option("--alpha", default=None, type=float, help="Override distance-fusion alpha.")
@click.option("--k", default=None, type=int, help="Override neighbor count.")
def train(config_path, out, seed, alpha, k):
    """Train the joint model on the synthetic dataset named in the config."""
    from .training import log_to_csv, save_bundle, train as run_train

    raw = _load_config(config_path)
    cfg = _train_config(raw, seed=seed, alpha=alpha, k=k)
    dataset = _dataset_from(raw, "dataset")
    try:
        bundle, log = run_train(cfg, dataset)
    except CogcadError as exc:
        _fail(EXIT_VALIDATION, exc.code, str(exc))
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt = out_dir / "checkpoint.vccz"
    save_bundle(ckpt, bundle)
    log_path = out_dir / "train_log.csv"
    log_path.write_text(log_to_csv(log))
    resolved = out_dir / "config.json"
    resolved.write_text(json.dumps({**cfg.to_dict(), "dataset": raw.get("dataset")}, indent=1, sort_keys=True))
    _write_manifest(out_dir, [ckpt, log_path, resolved])
    final = log[-1] if log else {"total": float("nan"), "acc": float("nan")}
    click.echo(f"epochs: {len(log)}  final total: {final['total']:.6f}  train acc: {final['acc']:.2f}")


@main.command("eval")
@click.option("--config", "config_path", required=True, type=str)
@click.option("--checkpoint", required=True, type=str)
@click.option("--out", required=True, type=str)
@click.option(
    "--attention-mode",
    default="generated",
    show_default=True,
    type=click.Choice(["generated", "radiologist", "fused", "random"]),
)
@click.option("--seed", default=0, show_default=True, help="Seed for random attention.")
def eval_cmd(config_path, checkpoint, out, attention_mode, seed):
    """Evaluate a checkpoint; writes metrics.json."""
    from .training import evaluate, load_bundle

    raw = _load_config(config_path)
    dataset = _dataset_from(raw, "eval_dataset")
    try:
        bundle = load_bundle(checkpoint)
    except OSError as exc:
        _fail(EXIT_IO, "IO", f"cannot read checkpoint: {exc}")
    report = evaluate(bundle, dataset, attention_mode=attention_mode, seed=seed)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics = out_dir / "metrics.json"
    metrics.write_text(json.dumps({**report.to_dict(), "attention_mode": attention_mode}, indent=1, sort_keys=True))
    _write_manifest(out_dir, [metrics])
    click.echo(f"acc: {report.acc:.2f}  auc: {report.auc:.2f}  f1: {report.f1:.2f}")


@main.command()
@click.option("--checkpoint", required=True, type=str)
@click.option("--image", "image_path", required=True, type=str, help="Grayscale PNG or VCCA grid.")
@click.option("--target-class", default=1, show_default=True, type=int)
@click.option("--layer", default="stage4", show_default=True)
@click.option("--out", required=True, type=str)
def gradcam(checkpoint, image_path, target_class, layer, out):
    """Write a gradient-weighted activation heatmap for one image."""
    from .gradcam import gradcam as compute_cam
    from .training import load_bundle

    try:
        image = gridio.load_gray(image_path)
    except OSError as exc:
        _fail(EXIT_IO, "IO", f"cannot read image: {exc}")
    try:
        bundle = load_bundle(checkpoint)
        cam = compute_cam(bundle, image, target_class, layer_id=layer)
    except CogcadError as exc:
        _fail(EXIT_VALIDATION, exc.code, str(exc))
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = [out_dir / "cam.vcca", out_dir / "cam.png"]
    gridio.write_grid(files[0], cam)
    gridio.save_gray_png(files[1], cam)
    _write_manifest(out_dir, files)
    click.echo(f"cam peak at {np.unravel_index(int(cam.argmax()), cam.shape)}")


@main.command()
@click.option("--checkpoint", required=True, type=str)
@click.option("--image", "image_path", required=True, type=str)
@click.option("--layer", default=3, show_default=True, type=int, help="Stage index, 0-3.")
@click.option("--center", default=None, type=int, help="Center node; default = strongest attention node.")
@click.option("--out", required=True, type=str)
def graphdump(checkpoint, image_path, layer, center, out):
    """Export one node's fused-graph neighborhood as JSON."""
    import torch

    from .classifier import downsample_attention
    from .training import load_bundle

    try:
        image = gridio.load_gray(image_path)
    except OSError as exc:
        _fail(EXIT_IO, "IO", f"cannot read image: {exc}")
    try:
        bundle = load_bundle(checkpoint)
    except OSError as exc:
        _fail(EXIT_IO, "IO", f"cannot read checkpoint: {exc}")
    if not 0 <= layer <= 3:
        _fail(EXIT_VALIDATION, "VALIDATION", "layer must be in [0, 3]")
    x = torch.from_numpy(np.asarray(image, dtype=np.float32))
    with torch.no_grad():
        p_soft = bundle.vag(x).p_soft
        vout = bundle.vcc(x, p_soft, collect_graphs=True)
    graph = vout.graphs[layer][0]
    att = downsample_attention(p_soft[0], graph.grid_shape).reshape(-1)
    if center is None:
        center = int(att.argmax())
    # recompute the fused distances for the dumped layer
    from .classifier import cgcm as run_cgcm

    feats = _stage_features(bundle.vcc, x, p_soft, layer)
    _, state = run_cgcm(feats, att, bundle.vcc.cfg.alpha, bundle.vcc.cfg.k, graph.grid_shape)
    dump = graph.neighbor_export(center, state.fused.detach().numpy())
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "graph.json"
    path.write_text(json.dumps(dump, indent=1))
    files = [path]
    for name, matrix, space in (
        ("feature_distances", state.df_hat, "feature"),
        ("visual_distances", state.da_hat, "visual"),
        ("fused_distances", state.fused, "fused"),
    ):
        mpath = out_dir / f"{name}.vcca"
        values = matrix.detach().numpy()
        gridio.save_distance_matrix(mpath, values, space)
        files += [mpath, mpath.with_suffix(".json")]
        # per-center proximity view: darker = closer to the center node
        row = values[dump["center_node"]].reshape(graph.grid_shape)
        peak = row.max()
        img_path = out_dir / f"{name}_from_center.png"
        gridio.save_gray_png(img_path, row / peak if peak > 0 else row)
        files.append(img_path)
    _write_manifest(out_dir, files)
    click.echo(f"center {dump['center_node']}: {len(dump['neighbors'])} neighbors")


def _stage_features(vcc, x, p_soft, layer):
    """Node features entering the chosen stage's graph construction."""
    import torch

    from .classifier import downsample_attention

    with torch.no_grad():
        h = vcc.stem(x.reshape(1, 1, *vcc.cfg.input_size))
        att = p_soft.reshape(1, *vcc.cfg.input_size)
        for i, stage in enumerate(vcc.stages):
            if i == layer:
                return h.flatten(2).transpose(1, 2)[0]
            att_s = downsample_attention(att, tuple(h.shape[-2:]))
            h, _, _ = stage(h, att_s, False)
            if i < 3:
                h = vcc.downs[i](h)
    raise ValidationError("layer out of range")


@main.command()
@click.option("--out", required=True, type=str)
@click.option("--n", default=16, show_default=True, type=int)
@click.option("--size", default=64, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
def synth(out, n, size, seed):
    """Write a synthetic dataset: PNG images plus trajectory JSON files."""
    from .synthetic import make_synthetic_dataset

    samples = make_synthetic_dataset(n, size, seed)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    labels = {}
    for s in samples:
        img = out_dir / f"{s.image_id}.png"
        gridio.save_gray_png(img, s.image)
        traj = out_dir / f"{s.image_id}_trajectory.json"
        gridio.save_trajectory(traj, s.trajectory)
        labels[s.image_id] = s.label
        files += [img, traj]
    labels_path = out_dir / "labels.json"
    labels_path.write_text(json.dumps(labels, indent=1, sort_keys=True))
    files.append(labels_path)
    _write_manifest(out_dir, files)
    click.echo(f"wrote {n} samples to {out_dir}")


@main.command()
@click.option("--store", "store_dir", required=True, type=str)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8008, show_default=True, type=int)
def serve(store_dir, host, port):
    """Run the trace ingestion service."""
    import uvicorn

    from .service import create_app
    from .store import SessionStore

    app = create_app(SessionStore(store_dir))
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
