"""Deterministic rasterization of instruction overlays.

All drawing is plain numpy: polyline coverage by exact point-to-segment
distance, alpha blending with round-to-nearest, and the embedded 5x7
bitmap face for labels. No platform font or AA library touches the
output, so identical inputs produce bit-identical rasters everywhere.
"""

import numpy as np
from PIL import Image

from . import glyphs
from .errors import InvalidInputError, ValidationError
from .instruction import CrossModalInstruction, Stroke

LABEL_RGBA = (255, 0, 0, 255)
ARROWHEAD_ANGLE_DEG = 30.0


def load_image(path) -> np.ndarray:
    """Read a PNG (or other raster) file as (H, W, 3) uint8 RGB."""
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


def save_image(path, image: np.ndarray):
    arr = np.asarray(image, dtype=np.uint8)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValidationError("image must be (H, W, 3) uint8", field="image")
    Image.fromarray(arr, mode="RGB").save(path, format="PNG")


def encode_png(image: np.ndarray) -> bytes:
    import io

    buf = io.BytesIO()
    save_image(buf, image)
    return buf.getvalue()


def decode_png(data: bytes) -> np.ndarray:
    import io

    try:
        return load_image(io.BytesIO(data))
    except (OSError, ValueError) as e:
        raise InvalidInputError("bytes do not decode as an image") from e


def _arrowhead_segments(pts: np.ndarray, width: float):
    """Two wing segments at the tip of the last nondegenerate segment."""
    tip = pts[-1]
    shaft = None
    for i in range(len(pts) - 2, -1, -1):
        d = tip - pts[i]
        n = np.linalg.norm(d)
        if n > 1e-12:
            shaft = d / n
            break
    if shaft is None:
        return []
    head_len = max(4.0, 2.5 * width)
    theta = np.radians(ARROWHEAD_ANGLE_DEG)
    segs = []
    for sign in (1.0, -1.0):
        c, s = np.cos(sign * theta), np.sin(sign * theta)
        back = np.array([c * shaft[0] - s * shaft[1], s * shaft[0] + c * shaft[1]])
        segs.append((tip, tip - head_len * back))
    return segs


def stroke_segments(stroke: Stroke):
    """All line segments the stroke renders: polyline, closure, arrowhead."""
    pts = stroke.points_array
    segs = [(pts[i], pts[i + 1]) for i in range(len(pts) - 1)]
    if stroke.kind == "boundary" and len(pts) > 2 and np.linalg.norm(pts[-1] - pts[0]) > 1e-12:
        segs.append((pts[-1], pts[0]))
    if stroke.kind == "arrow":
        segs.extend(_arrowhead_segments(pts, stroke.style.width))
    return segs


def stroke_render_bounds(stroke: Stroke):
    """(umin, vmin, umax, vmax) of everything the stroke may touch."""
    segs = stroke_segments(stroke)
    pts = np.array([p for seg in segs for p in seg])
    half = stroke.style.width / 2.0
    return (
        float(pts[:, 0].min() - half),
        float(pts[:, 1].min() - half),
        float(pts[:, 0].max() + half),
        float(pts[:, 1].max() + half),
    )


def label_render_bounds(label):
    w, h = glyphs.text_extent(label.text)
    u0 = float(np.floor(label.anchor[0] + 0.5))
    v0 = float(np.floor(label.anchor[1] + 0.5))
    return (u0, v0, u0 + w, v0 + h)


def _blend_region(region, covered, rgba):
    r, g, b, alpha = rgba
    if alpha == 0:
        return
    a = alpha / 255.0
    color = np.array([r, g, b], dtype=float)
    src = region[covered].astype(float)
    region[covered] = np.rint((1.0 - a) * src + a * color).astype(np.uint8)


def _draw_stroke(image: np.ndarray, stroke: Stroke):
    segs = stroke_segments(stroke)
    if not segs:
        return
    height, width_px = image.shape[:2]
    half = stroke.style.width / 2.0
    pts = np.array([p for seg in segs for p in seg])
    u0 = max(int(np.floor(pts[:, 0].min() - half)) - 1, 0)
    v0 = max(int(np.floor(pts[:, 1].min() - half)) - 1, 0)
    u1 = min(int(np.ceil(pts[:, 0].max() + half)) + 1, width_px - 1)
    v1 = min(int(np.ceil(pts[:, 1].max() + half)) + 1, height - 1)
    if u1 < u0 or v1 < v0:
        return
    us = np.arange(u0, u1 + 1, dtype=float)
    vs = np.arange(v0, v1 + 1, dtype=float)
    px = np.broadcast_to(us[None, :], (vs.size, us.size))
    py = np.broadcast_to(vs[:, None], (vs.size, us.size))
    mind2 = np.full((vs.size, us.size), np.inf)
    for a, b in segs:
        ab = b - a
        denom = float(ab @ ab)
        dx = px - a[0]
        dy = py - a[1]
        if denom < 1e-24:
            d2 = dx * dx + dy * dy
        else:
            t = np.clip((dx * ab[0] + dy * ab[1]) / denom, 0.0, 1.0)
            ex = dx - t * ab[0]
            ey = dy - t * ab[1]
            d2 = ex * ex + ey * ey
        np.minimum(mind2, d2, out=mind2)
    covered = mind2 <= half * half
    _blend_region(image[v0 : v1 + 1, u0 : u1 + 1], covered, stroke.style.rgba)


def _draw_label(image: np.ndarray, label):
    mask = glyphs.text_mask(label.text)
    if mask.size == 0:
        return
    height, width_px = image.shape[:2]
    u0 = int(np.floor(label.anchor[0] + 0.5))
    v0 = int(np.floor(label.anchor[1] + 0.5))
    mu0, mv0 = max(-u0, 0), max(-v0, 0)
    u0c, v0c = max(u0, 0), max(v0, 0)
    u1c = min(u0 + mask.shape[1], width_px)
    v1c = min(v0 + mask.shape[0], height)
    if u1c <= u0c or v1c <= v0c:
        return
    sub = mask[mv0 : mv0 + (v1c - v0c), mu0 : mu0 + (u1c - u0c)]
    _blend_region(image[v0c:v1c, u0c:u1c], sub, LABEL_RGBA)


def rasterize_overlay(image: np.ndarray, instr: CrossModalInstruction) -> np.ndarray:
    """Draw the instruction over a copy of the image and return the copy.

    The input raster must be the instruction's referenced image: every
    stroke point and label anchor has to fall inside it.
    """
    arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
        raise ValidationError("image must be (H, W, 3) uint8", field="image")
    height, width_px = arr.shape[:2]
    instr.check_bounds(width_px, height)
    out = arr.copy()
    for stroke in instr.strokes:
        _draw_stroke(out, stroke)
    for label in instr.labels:
        _draw_label(out, label)
    return out
