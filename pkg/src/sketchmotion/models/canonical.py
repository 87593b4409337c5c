"""Canonical request encoding: the replay key for record/replay backends.

Digests must be identical across processes and platforms for the same
semantic request, so the encoding sorts object keys, renders floats with
9 significant digits, and replaces image arrays and raw bytes with
content hashes instead of trusting any particular codec to be
deterministic.
"""

import hashlib
import json

import numpy as np

from ..errors import ValidationError


def _hash_array(arr: np.ndarray) -> str:
    arr = np.ascontiguousarray(arr)
    h = hashlib.sha256()
    h.update(str(arr.dtype).encode("ascii"))
    h.update(str(arr.shape).encode("ascii"))
    h.update(arr.tobytes())
    return h.hexdigest()


def canonical_form(obj):
    """Rewrite a payload into a JSON-stable structure."""
    if obj is None or isinstance(obj, (bool, str)):
        return obj
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if not np.isfinite(f):
            raise ValidationError("payload floats must be finite", field="payload")
        return "%.9g" % f
    if isinstance(obj, np.ndarray):
        if obj.dtype == np.uint8:
            return {"__image_sha256__": _hash_array(obj)}
        return [canonical_form(v) for v in obj.tolist()]
    if isinstance(obj, (bytes, bytearray)):
        return {"__bytes_sha256__": hashlib.sha256(bytes(obj)).hexdigest()}
    if isinstance(obj, dict):
        return {str(k): canonical_form(obj[k]) for k in sorted(obj, key=str)}
    if isinstance(obj, (list, tuple)):
        return [canonical_form(v) for v in obj]
    raise ValidationError(f"payload value of type {type(obj).__name__} is not canonicalizable")


def canonical_json(kind: str, payload: dict) -> str:
    doc = {"kind": kind, "payload": canonical_form(payload)}
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def request_digest(kind: str, payload: dict) -> str:
    return hashlib.sha256(canonical_json(kind, payload).encode("utf-8")).hexdigest()
