"""Binary mask synthesis: box-covering instance masks and AVID-style random
masks. Arrays are ``[f, w, h]`` with x along axis 1 and y along axis 2."""
from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import numpy as np
from skimage.draw import disk, polygon

from .._io import atomic_write_bytes
from ..errors import FormatError, InvalidArgumentError
from .annotation import Box

INSTANCE_STYLES = ("box", "dilated", "random_shape")
RANDOM_KINDS = ("static_rect", "moving_rect", "stroke")
DEFAULT_AREA = (0.05, 0.60)


def box_footprint(box: Box, size: tuple[int, int]) -> tuple[int, int, int, int]:
    """Pixel index ranges ``[px0, px1) x [py0, py1)`` touched by a normalized box."""
    w, h = size
    x0, y0, x1, y1 = box
    px0, px1 = max(0, math.floor(x0 * w)), min(w, math.ceil(x1 * w))
    py0, py1 = max(0, math.floor(y0 * h)), min(h, math.ceil(y1 * h))
    return px0, px1, py0, py1


def rasterize_box(box: Box, size: tuple[int, int]) -> np.ndarray:
    w, h = size
    out = np.zeros((w, h), dtype=bool)
    px0, px1, py0, py1 = box_footprint(box, size)
    if px1 > px0 and py1 > py0:
        out[px0:px1, py0:py1] = True
    else:
        # degenerate after rasterization: keep the center pixel
        cx = min(w - 1, int((box[0] + box[2]) / 2 * w))
        cy = min(h - 1, int((box[1] + box[3]) / 2 * h))
        out[cx, cy] = True
    return out


def _check_size(size) -> tuple[int, int]:
    w, h = (int(v) for v in size)
    if w < 1 or h < 1:
        raise InvalidArgumentError(f"frame size must be positive, got {size}")
    return w, h


def synthesize_instance_mask(
    boxes: Sequence[Box],
    size: tuple[int, int],
    rng: np.random.Generator,
    style: str = "random_shape",
    n_vertices: int = 16,
) -> np.ndarray:
    """Per-frame masks that contain every pixel of the frame's box.

    ``dilated`` grows the box by a seeded margin; ``random_shape`` pushes
    points on the box outline outward by seeded amounts and fills the
    polygon. The box itself is always unioned in, so coverage holds by
    construction. One shape is drawn per call and follows the box.
    """
    if style not in INSTANCE_STYLES:
        raise InvalidArgumentError(f"style must be one of {INSTANCE_STYLES}, got {style!r}")
    w, h = _check_size(size)
    out = np.zeros((len(boxes), w, h), dtype=bool)
    if style == "dilated":
        margin = int(rng.integers(1, max(1, math.ceil(0.1 * max(w, h))) + 1))
    elif style == "random_shape":
        theta = np.sort(rng.uniform(0, 2 * np.pi, n_vertices))
        push = rng.uniform(0.0, 0.5, n_vertices)
    for i, box in enumerate(boxes):
        base = rasterize_box(box, (w, h))
        if style == "box":
            out[i] = base
        elif style == "dilated":
            px0, px1, py0, py1 = box_footprint(box, (w, h))
            out[i, max(0, px0 - margin):min(w, px1 + margin), max(0, py0 - margin):min(h, py1 + margin)] = True
            out[i] |= base
        else:
            px0, px1, py0, py1 = box_footprint(box, (w, h))
            cx, cy = (px0 + px1 - 1) / 2, (py0 + py1 - 1) / 2
            hx, hy = max(px1 - px0, 1) / 2, max(py1 - py0, 1) / 2
            # point on the box outline in direction theta, then outward
            c, s = np.cos(theta), np.sin(theta)
            reach = 1.0 / np.maximum(np.abs(c) / hx, np.abs(s) / hy)
            radius = reach * (1.0 + push) + 0.5
            rr, cc = polygon(cx + radius * c, cy + radius * s, shape=(w, h))
            out[i, rr, cc] = True
            out[i] |= base
    return out


def _rect_dims(w: int, h: int, rng, area) -> tuple[int, int]:
    lo, hi = area[0] * w * h, area[1] * w * h
    widths = rng.permutation(np.arange(1, w + 1))
    for rw in widths:
        min_h, max_h = max(1, math.ceil(lo / rw)), min(h, math.floor(hi / rw))
        if min_h <= max_h:
            return int(rw), int(rng.integers(min_h, max_h + 1))
    return 1, 1  # frame too small for the bounds


def _bounce(start: int, vel: int, span: int, t: int) -> int:
    if span <= 0:
        return 0
    p = (start + vel * t) % (2 * span)
    return p if p <= span else 2 * span - p


def _stroke(w: int, h: int, rng, area) -> np.ndarray:
    total = w * h
    radius = max(1.0, 0.5 * math.sqrt((area[1] - area[0]) * total / math.pi))
    disk_frac = min(1.0, (math.pi * radius ** 2 + 4 * radius + 1) / total)
    hi = max(area[0], area[1] - disk_frac)
    target = max(1, math.ceil(rng.uniform(area[0], hi) * total))
    out = np.zeros((w, h), dtype=bool)
    x, y = rng.uniform(0, w), rng.uniform(0, h)
    heading = rng.uniform(0, 2 * np.pi)
    for _ in range(100 * total):
        rr, cc = disk((x, y), radius, shape=(w, h))
        out[rr, cc] = True
        if out.sum() >= target:
            break
        heading += rng.normal(0.0, 0.6)
        x, y = x + radius * math.cos(heading), y + radius * math.sin(heading)
        if not 0 <= x < w:
            heading = np.pi - heading
            x = min(max(x, 0.0), w - 1.0)
        if not 0 <= y < h:
            heading = -heading
            y = min(max(y, 0.0), h - 1.0)
    return out


def synthesize_random_mask(
    size: tuple[int, int],
    frames: int,
    rng: np.random.Generator,
    kind: str | None = None,
    area: tuple[float, float] = DEFAULT_AREA,
) -> np.ndarray:
    """A static rectangle, a bouncing rectangle or a free-form brush stroke,
    covering a fraction of each frame within ``area``."""
    w, h = _check_size(size)
    if frames < 1:
        raise InvalidArgumentError("frames must be >= 1")
    if not 0.0 < area[0] <= area[1] <= 1.0:
        raise InvalidArgumentError(f"bad area bounds {area}")
    kind = kind or RANDOM_KINDS[int(rng.integers(len(RANDOM_KINDS)))]
    if kind not in RANDOM_KINDS:
        raise InvalidArgumentError(f"kind must be one of {RANDOM_KINDS}, got {kind!r}")
    out = np.zeros((frames, w, h), dtype=bool)
    if kind == "stroke":
        out[:] = _stroke(w, h, rng, area)
        return out
    rw, rh = _rect_dims(w, h, rng, area)
    x0, y0 = int(rng.integers(0, w - rw + 1)), int(rng.integers(0, h - rh + 1))
    if kind == "static_rect":
        out[:, x0:x0 + rw, y0:y0 + rh] = True
        return out
    vmax = max(1, max(w, h) // 8)
    vx, vy = (int(v) for v in rng.integers(-vmax, vmax + 1, size=2))
    for t in range(frames):
        xt, yt = _bounce(x0, vx, w - rw, t), _bounce(y0, vy, h - rh, t)
        out[t, xt:xt + rw, yt:yt + rh] = True
    return out


# PGM (P5) frame files ------------------------------------------------------

def write_pgm(path, mask: np.ndarray) -> None:
    """One ``[w, h]`` binary frame as an 8-bit PGM (0 or 255), y as rows."""
    img = (np.asarray(mask, dtype=bool).T * 255).astype(np.uint8)
    rows, cols = img.shape
    atomic_write_bytes(path, f"P5\n{cols} {rows}\n255\n".encode() + img.tobytes())


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    parts = raw.split(maxsplit=4)
    if len(parts) < 5 or parts[0] != b"P5":
        raise FormatError("magic", f"{path} is not a binary PGM")
    try:
        cols, rows, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    except ValueError as exc:
        raise FormatError("header", f"{path}: bad PGM header") from exc
    if maxval != 255:
        raise FormatError("maxval", f"expected 255, got {maxval}")
    pixels = raw[len(raw) - rows * cols:]
    return (np.frombuffer(pixels, dtype=np.uint8).reshape(rows, cols).T > 0)


def write_mask_frames(directory, masks: np.ndarray) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, frame in enumerate(masks):
        p = directory / f"mask_{i:04d}.pgm"
        write_pgm(p, frame)
        paths.append(p)
    return paths


def read_mask_frames(directory) -> np.ndarray:
    paths = sorted(Path(directory).glob("mask_*.pgm"))
    if not paths:
        raise FormatError("frames", f"no mask_*.pgm files in {directory}")
    return np.stack([read_pgm(p) for p in paths])
