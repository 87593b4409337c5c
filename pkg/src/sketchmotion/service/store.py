"""Content-addressed file store with a JSON session index.

Objects are immutable files named by their sha256; the index is the
only mutable state and every change goes through one lock, so
concurrent plan runs never interleave partial writes.
"""

import hashlib
import json
import threading
from pathlib import Path


class Store:
    def __init__(self, root):
        self.root = Path(root)
        self.objects = self.root / "objects"
        self.index_path = self.root / "index.json"
        self.objects.mkdir(parents=True, exist_ok=True)
        self._lock = threading.RLock()
        if not self.index_path.exists():
            self._write_index({"sessions": [], "scenes": {}, "instructions": {}})

    def put_object(self, data: bytes) -> str:
        digest = hashlib.sha256(data).hexdigest()
        path = self.objects / digest
        if not path.exists():
            tmp = path.with_suffix(".tmp")
            tmp.write_bytes(data)
            tmp.replace(path)
        return digest

    def object_path(self, digest: str) -> Path:
        return self.objects / digest

    def has_object(self, digest: str) -> bool:
        return self.object_path(digest).exists()

    def get_object(self, digest: str) -> bytes:
        path = self.object_path(digest)
        if not path.exists():
            raise KeyError(digest)
        return path.read_bytes()

    def _write_index(self, index: dict):
        tmp = self.index_path.with_suffix(".tmp")
        tmp.write_text(json.dumps(index, indent=2, sort_keys=True), encoding="utf-8")
        tmp.replace(self.index_path)

    def read_index(self) -> dict:
        with self._lock:
            return json.loads(self.index_path.read_text(encoding="utf-8"))

    def update_index(self, fn):
        """Locked read-modify-write; fn mutates and returns the index."""
        with self._lock:
            index = json.loads(self.index_path.read_text(encoding="utf-8"))
            index = fn(index) or index
            self._write_index(index)
            return index

    def session(self, session_id: str):
        for record in self.read_index()["sessions"]:
            if record["id"] == session_id:
                return record
        return None
