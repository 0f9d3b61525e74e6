"""Deterministic flat-color rasterizer for symbolic scenes.

Pixel (i, j) covers the point ((j + 0.5) / size, (i + 0.5) / size) in normalized
canvas coordinates; an object paints every pixel whose center satisfies its
shape predicate. Objects are painted in insertion order.
"""

import numpy as np

from ..config import DEFAULT_PALETTE

SUPPORTED_SHAPES = ("square", "circle", "triangle")


def _shape_mask(shape: str, cx: float, cy: float, s: float, px, py):
    if shape == "square":
        return (np.abs(px - cx) <= s) & (np.abs(py - cy) <= s)
    if shape == "circle":
        return (px - cx) ** 2 + (py - cy) ** 2 <= s ** 2
    if shape == "triangle":
        # upward isoceles: apex (cx, cy - s), base corners (cx +- s, cy + s)
        in_rows = (py >= cy - s) & (py <= cy + s)
        half_width = (py - cy + s) / 2.0
        return in_rows & (np.abs(px - cx) <= half_width)
    raise ValueError(f"no rasterizer for shape {shape!r}")


def render_scene(scene, size: int | None = None, palette=None) -> np.ndarray:
    """Rasterize a scene to an (H, W, 3) uint8 array."""
    size = size or scene.canvas_size
    if size < 32:
        raise ValueError(f"render size must be >= 32, got {size}")
    palette = palette or DEFAULT_PALETTE
    img = np.empty((size, size, 3), dtype=np.uint8)
    img[:] = palette["background"]
    coords = (np.arange(size, dtype=np.float64) + 0.5) / size
    py, px = np.meshgrid(coords, coords, indexing="ij")
    for obj in scene.objects:
        mask = _shape_mask(obj.shape, obj.x, obj.y, obj.size, px, py)
        img[mask] = palette[obj.color]
    return img


def empty_canvas(size: int, palette=None) -> np.ndarray:
    palette = palette or DEFAULT_PALETTE
    img = np.empty((size, size, 3), dtype=np.uint8)
    img[:] = palette["background"]
    return img


def to_unit(img_u8: np.ndarray) -> np.ndarray:
    """uint8 (H, W, 3) -> float32 (3, H, W) in [-1, 1]."""
    arr = img_u8.astype(np.float32) / 127.5 - 1.0
    return np.ascontiguousarray(arr.transpose(2, 0, 1))


def from_unit(img: np.ndarray) -> np.ndarray:
    """float (3, H, W) in [-1, 1] -> uint8 (H, W, 3); exact inverse of to_unit on its range."""
    arr = np.clip((img.transpose(1, 2, 0) + 1.0) * 127.5, 0.0, 255.0)
    return np.round(arr).astype(np.uint8)
