"""Content-addressed response cache.

One file per cache key under the cache root. Writes race safely: the first
completed write wins and later writes to the same key are no-ops, so
concurrent workers can share a cache directory without coordination.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

from ..model import InferenceParams, serialize


def cache_key(
    capability: str,
    backend_id: str,
    model_id: str,
    params: InferenceParams | None,
    payload: dict,
    template_version: str = "",
) -> str:
    """Digest identifying one logical request; identical requests collide by design."""
    material = {
        "capability": capability,
        "backend_id": backend_id,
        "model_id": model_id,
        "params": serialize(params) if params is not None else None,
        "payload": payload,
        "template_version": template_version,
    }
    canon = json.dumps(material, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


class ResponseCache:
    """File-backed key -> document store; pass root=None to disable."""

    def __init__(self, root: Path | None):
        self.root = Path(root) if root is not None else None

    def _path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.json"

    def get(self, key: str) -> dict | None:
        if self.root is None:
            return None
        path = self._path(key)
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            return None

    def put(self, key: str, doc: dict) -> bool:
        """Store *doc* under *key*; False when an earlier write already won."""
        if self.root is None:
            return False
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        if path.exists():
            return False
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as handle:
                json.dump(doc, handle, sort_keys=True, ensure_ascii=False)
            try:
                os.link(tmp, path)
            except FileExistsError:
                return False
            return True
        finally:
            try:
                os.unlink(tmp)
            except FileNotFoundError:
                pass
