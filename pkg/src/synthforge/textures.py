"""Floor textures and backdrop images, from files or generated procedurally.

A reference is either an image path or ``"procedural:<n>"``; the integer
seeds the generator, so a reference always resolves to the same pixels.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from PIL import Image

TEXTURE_SIZE = 256


def _procedural_id(ref: str) -> int | None:
    if ref.startswith("procedural:"):
        return int(ref.split(":", 1)[1])
    return None


def _load_image(path: str) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0


def _value_noise(rng: np.random.Generator, size: int, cells: int) -> np.ndarray:
    grid = rng.random((cells + 1, cells + 1))
    t = np.linspace(0.0, cells, size, endpoint=False)
    i = t.astype(int)
    f = t - i
    f = f * f * (3 - 2 * f)
    a = grid[i][:, i]
    b = grid[i][:, i + 1]
    c = grid[i + 1][:, i]
    d = grid[i + 1][:, i + 1]
    fx = f[None, :]
    fy = f[:, None]
    return (a * (1 - fx) + b * fx) * (1 - fy) + (c * (1 - fx) + d * fx) * fy


@lru_cache(maxsize=64)
def texture(ref: str) -> np.ndarray:
    """(h, w, 3) float texture in [0, 1]."""
    n = _procedural_id(ref)
    if n is None:
        return _load_image(ref)
    rng = np.random.default_rng(n)
    size = TEXTURE_SIZE
    c1, c2 = rng.random(3), rng.random(3)
    style = int(rng.integers(3))
    if style == 0:
        checks = int(rng.integers(4, 17))
        yy, xx = np.mgrid[0:size, 0:size] * checks // size
        mask = ((xx + yy) % 2).astype(float)
    elif style == 1:
        stripes = int(rng.integers(6, 30))
        xx = np.mgrid[0:size, 0:size][1]
        mask = (np.sin(xx * stripes * np.pi / size) > 0).astype(float)
    else:
        mask = _value_noise(rng, size, int(rng.integers(3, 12)))
    grain = 0.15 * (_value_noise(rng, size, 32) - 0.5)
    img = c1 * (1 - mask[..., None]) + c2 * mask[..., None] + grain[..., None]
    out = np.clip(img, 0.0, 1.0)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=64)
def backdrop(ref: str, width: int, height: int) -> np.ndarray:
    """(height, width, 3) float image in [0, 1], scaled to the frame by nearest neighbour."""
    n = _procedural_id(ref)
    if n is None:
        src = _load_image(ref)
    else:
        rng = np.random.default_rng(n)
        size = 128
        top, bottom = rng.random(3), rng.random(3)
        ramp = np.linspace(0.0, 1.0, size)[:, None, None]
        src = top * (1 - ramp) + bottom * ramp
        src = src + 0.35 * (_value_noise(rng, size, int(rng.integers(2, 8)))[..., None] - 0.5) * rng.random(3)
        src = np.broadcast_to(src, (size, size, 3))
        src = np.clip(src, 0.0, 1.0)
    h, w = src.shape[:2]
    rows = (np.arange(height) * h) // height
    cols = (np.arange(width) * w) // width
    out = np.ascontiguousarray(src[rows][:, cols])
    out.setflags(write=False)
    return out
