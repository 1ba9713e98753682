"""Builders shared by the test modules."""

import numpy as np

from app.core.actions import CLICK, DRAG, SCROLL
from app.core.imaging import GrayImage
from app.core.policy import PolicyParams
from app.core.windowing import EntropyMap


def make_map(entropies, height=None, width=None) -> EntropyMap:
    """EntropyMap with the given per-cell values; image size defaults to 10 px per cell."""
    h = np.asarray(entropies, dtype=np.float64)
    rows, cols = h.shape
    return EntropyMap(rows, cols, height or rows * 10, width or cols * 10, h)


def gray(pixels) -> GrayImage:
    arr = np.asarray(pixels, dtype=np.uint8)
    return GrayImage(arr.shape[1], arr.shape[0], arr)


def random_params(rng, n_types=2, rows=2, cols=2, scale=1.0) -> PolicyParams:
    types = (CLICK, SCROLL, DRAG)[:n_types]
    return PolicyParams(
        types,
        rng.normal(scale=scale, size=n_types),
        float(rng.normal(scale=scale)),
        rng.normal(scale=scale, size=(rows, cols)),
    )
