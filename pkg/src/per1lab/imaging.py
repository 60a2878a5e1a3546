"""8-bit image output: PNG through Pillow, or binary PGM when Pillow is missing or asked for."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

try:
    from PIL import Image
except ImportError:  # pragma: no cover - exercised only without Pillow
    Image = None


def write_pgm(path, gray: np.ndarray) -> Path:
    path = Path(path)
    g = np.ascontiguousarray(gray, dtype=np.uint8)
    h, w = g.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(g.tobytes())
    return path


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h = int(parts[1]), int(parts[2])
    return np.frombuffer(parts[4][: w * h], dtype=np.uint8).reshape(h, w)


def write_image(path, pixels: np.ndarray, palette=None) -> Path:
    """Write row-major 8-bit pixels; a palette of RGB triples makes an indexed image.

    Paths ending in .pgm, or any path when Pillow is unavailable, get a PGM
    (palette indices are then stored as gray levels).
    """
    path = Path(path)
    pixels = np.asarray(pixels)
    if pixels.ndim != 2 or pixels.dtype != np.uint8:
        raise ValueError("expected a 2-D uint8 array")
    if path.suffix.lower() == ".pgm" or Image is None:
        return write_pgm(path.with_suffix(".pgm"), pixels)
    if palette is None:
        img = Image.fromarray(pixels, mode="L")
    else:
        img = Image.fromarray(pixels, mode="P")
        flat = [c for rgb in palette for c in rgb]
        img.putpalette(flat + [0] * (768 - len(flat)))
    img.save(path, format="PNG")
    return path


def write_sidecar(image_path, meta: dict) -> Path:
    side = Path(image_path).with_suffix(".json")
    side.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return side
