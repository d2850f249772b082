"""File formats: binary attention grids, trajectory JSON, checkpoints.

Grid format ("VCCA"): magic bytes b"VCCA", uint32 height, uint32 width
(little-endian), then H*W float32 values little-endian, row-major.

Checkpoints are zip archives holding a JSON config, a manifest of
parameter names and shapes, and one VCCA grid per parameter (flattened
to a single row). Zip entries carry a fixed timestamp so identical
states produce identical bytes.
"""

from __future__ import annotations

import json
import struct
import zipfile
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .trace import AttentionMap, Trajectory

MAGIC = b"VCCA"
_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)


def write_grid(path, grid: np.ndarray) -> None:
    grid = np.asarray(grid, dtype=np.float32)
    if grid.ndim != 2:
        raise ValueError(f"grid must be 2-D, got shape {grid.shape}")
    with open(path, "wb") as f:
        f.write(grid_bytes(grid))


def grid_bytes(grid: np.ndarray) -> bytes:
    grid = np.ascontiguousarray(grid, dtype=np.float32)
    h, w = grid.shape
    header = MAGIC + struct.pack("<II", h, w)
    return header + grid.astype("<f4").tobytes()


def read_grid(path) -> np.ndarray:
    with open(path, "rb") as f:
        return grid_from_bytes(f.read())


def grid_from_bytes(data: bytes) -> np.ndarray:
    if data[:4] != MAGIC:
        raise ValueError("not a VCCA grid: bad magic bytes")
    h, w = struct.unpack("<II", data[4:12])
    body = np.frombuffer(data[12:], dtype="<f4")
    if body.size != h * w:
        raise ValueError(f"grid payload has {body.size} values, expected {h * w}")
    return body.reshape(h, w).copy()


def write_map(path, amap: AttentionMap) -> None:
    write_grid(path, amap.grid)


# ---------------------------------------------------------------------------
# Trajectory JSON


def trajectory_to_dict(traj: Trajectory) -> dict:
    return {
        "image_id": traj.image_id,
        "viewport": {"w": int(traj.viewport[0]), "h": int(traj.viewport[1])},
        "source": traj.source,
        "points": [
            {"t": int(t), "x": int(x), "y": int(y)} for t, x, y in traj.points
        ],
    }


def trajectory_from_dict(obj: dict) -> Trajectory:
    """Parse and validate a trajectory record.

    Raises ValidationError naming the first offending point index.
    """
    if not isinstance(obj, dict):
        raise ValidationError("trajectory record must be a JSON object")
    for key in ("image_id", "viewport", "points"):
        if key not in obj:
            raise ValidationError(f"missing field {key!r}")
    vp = obj["viewport"]
    if not isinstance(vp, dict) or "w" not in vp or "h" not in vp:
        raise ValidationError("viewport must be an object with w and h")
    raw = obj["points"]
    if not isinstance(raw, list):
        raise ValidationError("points must be a list")
    pts = np.zeros((len(raw), 3))
    for i, p in enumerate(raw):
        if not isinstance(p, dict) or not {"t", "x", "y"} <= set(p):
            raise ValidationError(f"bad point at index {i}", index=i)
        try:
            pts[i] = (float(p["t"]), float(p["x"]), float(p["y"]))
        except (TypeError, ValueError):
            raise ValidationError(f"non-numeric point at index {i}", index=i)
    traj = Trajectory(
        points=pts,
        viewport=(int(vp["w"]), int(vp["h"])),
        image_id=str(obj["image_id"]),
        source=str(obj.get("source", "mouse")),
    )
    if len(raw) > 0:
        traj.validate()
    return traj


def load_trajectory(path) -> Trajectory:
    with open(path, "r", encoding="utf-8") as f:
        return trajectory_from_dict(json.load(f))


def save_trajectory(path, traj: Trajectory) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(trajectory_to_dict(traj), f, indent=1)


# ---------------------------------------------------------------------------
# Distance-matrix debug dumps: VCCA grid plus a JSON sidecar naming the space


def save_distance_matrix(path, values: np.ndarray, space: str) -> None:
    if space not in ("feature", "visual", "fused"):
        raise ValueError(f"unknown distance space {space!r}")
    path = Path(path)
    write_grid(path, values)
    sidecar = {"space": space, "n": int(np.asarray(values).shape[0])}
    path.with_suffix(".json").write_text(json.dumps(sidecar, sort_keys=True))


def load_distance_matrix(path) -> tuple[np.ndarray, str]:
    path = Path(path)
    values = read_grid(path)
    sidecar = json.loads(path.with_suffix(".json").read_text())
    return values, sidecar["space"]


# ---------------------------------------------------------------------------
# Checkpoint archives


def _write_zip_entry(zf: zipfile.ZipFile, name: str, payload: bytes) -> None:
    info = zipfile.ZipInfo(name, date_time=_ZIP_EPOCH)
    info.compress_type = zipfile.ZIP_DEFLATED
    zf.writestr(info, payload)


def save_checkpoint(path, config: dict, params: dict[str, np.ndarray]) -> None:
    """Write config JSON plus named arrays as single-row VCCA grids."""
    manifest = {}
    with zipfile.ZipFile(path, "w") as zf:
        _write_zip_entry(zf, "config.json", json.dumps(config, sort_keys=True).encode())
        for name in sorted(params):
            arr = np.asarray(params[name], dtype=np.float32)
            manifest[name] = {"shape": list(arr.shape), "file": f"params/{name}.vcca"}
            flat = arr.reshape(1, -1) if arr.size else arr.reshape(1, 0)
            _write_zip_entry(zf, f"params/{name}.vcca", grid_bytes(flat))
        _write_zip_entry(zf, "manifest.json", json.dumps(manifest, sort_keys=True).encode())


def load_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    with zipfile.ZipFile(path, "r") as zf:
        config = json.loads(zf.read("config.json"))
        manifest = json.loads(zf.read("manifest.json"))
        params = {}
        for name, meta in manifest.items():
            flat = grid_from_bytes(zf.read(meta["file"]))
            params[name] = flat.reshape(meta["shape"])
    return config, params


# ---------------------------------------------------------------------------
# 8-bit grayscale export


def save_gray_png(path, grid: np.ndarray) -> None:
    from PIL import Image

    arr = np.clip(np.asarray(grid, dtype=np.float64), 0.0, 1.0)
    Image.fromarray((arr * 255.0 + 0.5).astype(np.uint8), mode="L").save(path)


def load_gray(path) -> np.ndarray:
    """Read an 8/16-bit grayscale PNG or a VCCA grid as floats in [0, 1]."""
    path = Path(path)
    if path.suffix == ".vcca":
        return read_grid(path)
    from PIL import Image

    img = Image.open(path)
    arr = np.asarray(img, dtype=np.float64)
    if img.mode == "I;16" or arr.max() > 255:
        return (arr / 65535.0).astype(np.float32)
    if arr.ndim == 3:
        arr = arr[..., :3].mean(axis=2)
    return (arr / 255.0).astype(np.float32)
