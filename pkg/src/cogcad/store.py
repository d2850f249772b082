"""Append-only session store: flat JSON records plus binary attention maps.

Layout under the store root:
    sessions/<session_id>.json   ingested records (never mutated)
    maps/<session_id>.vcca       derived soft attention
    images/<image_id>.png|.vcca  base images served to the capture UI
    index.jsonl                  append-only ingestion log

Writes are serialized per session id; reads need no locks because stored
records are immutable.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path

import numpy as np

from .errors import CogcadError, ValidationError
from .gridio import (
    load_gray,
    read_grid,
    trajectory_from_dict,
    trajectory_to_dict,
    write_grid,
)
from .trace import I2MCParams, extract_stay_points, render_soft_attention


class DuplicateConflict(CogcadError):
    """Same session id ingested twice with a different payload."""

    code = "CONFLICT"


class NotFound(CogcadError):
    code = "NOT_FOUND"


def _canonical(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


class SessionStore:
    def __init__(self, root):
        self.root = Path(root)
        for sub in ("sessions", "maps", "images", "labels"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    def _lock_for(self, session_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._locks.setdefault(session_id, threading.Lock())

    def _session_path(self, session_id: str) -> Path:
        safe = session_id.replace("/", "_")
        return self.root / "sessions" / f"{safe}.json"

    # -- ingestion ----------------------------------------------------------

    def ingest(self, request: dict, radius: float = 150.0, sigma: float = 25.0) -> dict:
        """Validate, persist, and synchronously derive the soft map.

        Idempotent: re-posting an identical payload returns the stored
        response; a differing payload under the same id raises
        DuplicateConflict.
        """
        if not isinstance(request, dict) or "session_id" not in request:
            raise ValidationError("missing field 'session_id'")
        if "trajectory" not in request:
            raise ValidationError("missing field 'trajectory'")
        session_id = str(request["session_id"])
        traj_dict = dict(request["trajectory"])
        traj_dict.setdefault("image_id", request.get("image_id", ""))
        traj = trajectory_from_dict(traj_dict)
        if traj.points.shape[0] == 0:
            raise ValidationError("trajectory has no points")
        payload = {
            "session_id": session_id,
            "image_id": traj.image_id,
            "label": request.get("label"),
            "trajectory": trajectory_to_dict(traj),
        }

        with self._lock_for(session_id):
            path = self._session_path(session_id)
            if path.exists():
                stored = json.loads(path.read_text())
                if _canonical(stored["payload"]) != _canonical(payload):
                    raise DuplicateConflict(f"session {session_id!r} already stored with a different payload")
                return stored["response"]

            try:
                stays = extract_stay_points(traj, I2MCParams.for_source(traj.source))
            except CogcadError as exc:
                raise ValidationError(f"trajectory not processable: {exc}")
            w, h = traj.viewport
            soft = render_soft_attention(stays, h, w, radius=radius, sigma=sigma, image_id=traj.image_id)
            safe = session_id.replace("/", "_")
            write_grid(self.root / "maps" / f"{safe}.vcca", soft.grid)

            response = {
                "session_id": session_id,
                "image_id": traj.image_id,
                "stay_points": int(len(stays)),
                "stays": [[float(x), float(y), float(d)] for x, y, d in stays.points],
                "map_path": f"/maps/{session_id}",
            }
            record = {"payload": payload, "response": response}
            path.write_text(json.dumps(record, indent=1))
            with self._registry_lock:
                with open(self.root / "index.jsonl", "a", encoding="utf-8") as f:
                    f.write(_canonical({"session_id": session_id, "image_id": traj.image_id}) + "\n")
            return response

    def set_label(self, session_id: str, label) -> dict:
        """Write-once label for a stored session; conflicting relabel fails."""
        if not self._session_path(session_id).exists():
            raise NotFound(f"unknown session {session_id!r}")
        with self._lock_for(session_id):
            safe = session_id.replace("/", "_")
            path = self.root / "labels" / f"{safe}.json"
            record = {"session_id": session_id, "label": label}
            if path.exists():
                stored = json.loads(path.read_text())
                if stored != record:
                    raise DuplicateConflict(
                        f"session {session_id!r} already labeled {stored['label']!r}"
                    )
                return stored
            path.write_text(json.dumps(record))
            return record

    # -- reads --------------------------------------------------------------

    def get_session(self, session_id: str) -> dict:
        path = self._session_path(session_id)
        if not path.exists():
            raise NotFound(f"unknown session {session_id!r}")
        record = json.loads(path.read_text())
        merged = {**record["payload"], **record["response"]}
        safe = session_id.replace("/", "_")
        label_path = self.root / "labels" / f"{safe}.json"
        if label_path.exists():
            merged["label"] = json.loads(label_path.read_text())["label"]
        return merged

    def get_map(self, session_id: str) -> np.ndarray:
        safe = session_id.replace("/", "_")
        path = self.root / "maps" / f"{safe}.vcca"
        if not path.exists():
            raise NotFound(f"no map for session {session_id!r}")
        return read_grid(path)

    def image_path(self, image_id: str) -> Path:
        safe = image_id.replace("/", "_")
        for ext in (".png", ".vcca"):
            path = self.root / "images" / f"{safe}{ext}"
            if path.exists():
                return path
        raise NotFound(f"unknown image {image_id!r}")

    def get_image(self, image_id: str) -> np.ndarray:
        return load_gray(self.image_path(image_id))

    def put_image(self, image_id: str, data: bytes, ext: str = ".png") -> Path:
        safe = image_id.replace("/", "_")
        path = self.root / "images" / f"{safe}{ext}"
        path.write_bytes(data)
        return path
