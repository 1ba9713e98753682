"""
Windowing module - splits a grayscale frame into an M x N grid of
non-overlapping windows and measures the intensity entropy of each.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.core.errors import OutOfBoundsError
from app.core.imaging import GrayImage

logger = logging.getLogger(__name__)

# Heatmap normalisation guard; matches the reward epsilon.
HEATMAP_EPSILON = 1e-6


class GridConfig(BaseModel):
    """Window geometry. The 50 px default stands in for the tokenizer patch size."""

    model_config = ConfigDict(frozen=True)

    cell_height: int = Field(default=50, ge=1)
    cell_width: int = Field(default=50, ge=1)
    bins: int = Field(default=256, ge=1, le=256)

    @field_validator("bins")
    @classmethod
    def _bins_divide_256(cls, v: int) -> int:
        if 256 % v != 0:
            raise ValueError("bins must divide 256")
        return v

    def grid_shape(self, height: int, width: int) -> Tuple[int, int]:
        """(M, N) = (ceil(H/h), ceil(W/w))."""
        return math.ceil(height / self.cell_height), math.ceil(width / self.cell_width)


@dataclass(frozen=True)
class Rect:
    """Half-open pixel rectangle [x0, x1) x [y0, y1)."""

    x0: int
    y0: int
    x1: int
    y1: int

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0

    @property
    def center(self) -> Tuple[float, float]:
        return (self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0

    def contains(self, x: float, y: float) -> bool:
        return self.x0 <= x < self.x1 and self.y0 <= y < self.y1

    def intersects(self, other: "Rect") -> bool:
        return self.x0 < other.x1 and other.x0 < self.x1 and self.y0 < other.y1 and other.y0 < self.y1

    def as_list(self) -> List[int]:
        return [self.x0, self.y0, self.x1, self.y1]


@dataclass(frozen=True)
class EntropyMap:
    """Per-window entropies in bits, shape (rows, cols)."""

    rows: int
    cols: int
    image_height: int
    image_width: int
    entropies: np.ndarray

    @property
    def max_entropy(self) -> float:
        return float(self.entropies.max())

    def normalized(self, epsilon: float = HEATMAP_EPSILON) -> np.ndarray:
        """H / (max H + eps); the same normalisation the window reward uses."""
        return self.entropies / (self.max_entropy + epsilon)

    def cell_rect(self, i: int, j: int) -> Rect:
        """Pixel rectangle of the 1-indexed cell (i, j)."""
        top, bottom = _edges(self.image_height, self.rows)[i - 1:i + 1]
        left, right = _edges(self.image_width, self.cols)[j - 1:j + 1]
        return Rect(int(left), int(top), int(right), int(bottom))

    def cell_center(self, i: int, j: int) -> Tuple[float, float]:
        return self.cell_rect(i, j).center


def _edges(length: int, parts: int) -> np.ndarray:
    """Floor boundaries floor(k * length / parts) for k = 0..parts."""
    return (np.arange(parts + 1) * length) // parts


def partition_bounds(height: int, width: int, cfg: GridConfig) -> List[Rect]:
    """Row-major list of the M*N window rectangles tiling the image exactly."""
    if height < 1 or width < 1:
        raise ValueError(f"image must be at least 1x1, got {width}x{height}")
    rows, cols = cfg.grid_shape(height, width)
    row_edges = _edges(height, rows)
    col_edges = _edges(width, cols)
    return [
        Rect(int(col_edges[j]), int(row_edges[i]), int(col_edges[j + 1]), int(row_edges[i + 1]))
        for i in range(rows)
        for j in range(cols)
    ]


def window_entropy(levels: np.ndarray, bins: int) -> float:
    """Shannon entropy (bits) of already-quantised intensity levels."""
    counts = np.bincount(levels.ravel(), minlength=bins)
    p = counts[counts > 0] / levels.size
    # 0 log 0 = 0 is handled by dropping empty bins; max() folds -0.0 into 0.0
    return max(0.0, float(-(p * np.log2(p)).sum()))


def entropy_map(img: GrayImage, cfg: GridConfig) -> EntropyMap:
    """Compute the entropy of every window of the grid."""
    rows, cols = cfg.grid_shape(img.height, img.width)
    row_edges = _edges(img.height, rows)
    col_edges = _edges(img.width, cols)
    levels = (img.pixels.astype(np.int64) * cfg.bins) // 256

    entropies = np.zeros((rows, cols), dtype=np.float64)
    for i in range(rows):
        band = levels[row_edges[i]:row_edges[i + 1]]
        for j in range(cols):
            entropies[i, j] = window_entropy(band[:, col_edges[j]:col_edges[j + 1]], cfg.bins)

    return EntropyMap(rows, cols, img.height, img.width, entropies)


def cell_of_point(emap: EntropyMap, x: float, y: float) -> Tuple[int, int]:
    """1-indexed (i*, j*) = (ceil(y M / H), ceil(x N / W)), clamped into the grid."""
    if not (0 <= x <= emap.image_width and 0 <= y <= emap.image_height):
        raise OutOfBoundsError(
            f"point ({x}, {y}) outside image {emap.image_width}x{emap.image_height}"
        )
    i = math.ceil(y * emap.rows / emap.image_height)
    j = math.ceil(x * emap.cols / emap.image_width)
    return min(max(i, 1), emap.rows), min(max(j, 1), emap.cols)


def entropy_map_to_json(emap: EntropyMap) -> dict:
    """Export shape used by the entropy-map command and the HTTP route."""
    return {
        "rows": emap.rows,
        "cols": emap.cols,
        "image_height": emap.image_height,
        "image_width": emap.image_width,
        "max_entropy": emap.max_entropy,
        "entropies": [float(v) for v in emap.entropies.ravel()],
    }


def heatmap(emap: EntropyMap) -> GrayImage:
    """One pixel per window, intensity round(255 * H / max(max H, eps))."""
    denom = max(emap.max_entropy, HEATMAP_EPSILON)
    levels = np.floor(255.0 * emap.entropies / denom + 0.5)
    return GrayImage(emap.cols, emap.rows, np.clip(levels, 0, 255).astype(np.uint8))
