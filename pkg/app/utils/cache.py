"""
Caching utilities - decoded screenshots and their entropy maps.

Scoring datasets usually reuse a handful of screenshots across many records,
so each (path, grid, resize) combination is decoded once per process.
"""

import logging
import threading
from pathlib import Path
from typing import Dict, Tuple

from app.core.imaging import GrayImage, load_canonical
from app.core.windowing import EntropyMap, GridConfig, entropy_map

logger = logging.getLogger(__name__)

CacheKey = Tuple[str, int, int, int, bool]
CachedFrame = Tuple[GrayImage, EntropyMap, float]

_FRAME_CACHE: Dict[CacheKey, CachedFrame] = {}
_FRAME_CACHE_MAX = 256
_LOCK = threading.Lock()


def _key(path, grid: GridConfig, resize: bool) -> CacheKey:
    return (str(Path(path).resolve()), grid.cell_height, grid.cell_width, grid.bins, resize)


def get_cached_frame(path, grid: GridConfig, resize: bool):
    """Cached (gray image, entropy map, scale) or None."""
    with _LOCK:
        return _FRAME_CACHE.get(_key(path, grid, resize))


def set_cached_frame(path, grid: GridConfig, resize: bool, frame: CachedFrame) -> None:
    with _LOCK:
        if len(_FRAME_CACHE) >= _FRAME_CACHE_MAX:
            # drop the oldest entry; dicts keep insertion order
            _FRAME_CACHE.pop(next(iter(_FRAME_CACHE)))
        _FRAME_CACHE[_key(path, grid, resize)] = frame


def load_frame(path, grid: GridConfig, resize: bool = True) -> CachedFrame:
    """Decode, resize and grayscale a screenshot and compute its entropy map, cached."""
    cached = get_cached_frame(path, grid, resize)
    if cached is not None:
        return cached

    gray, scale = load_canonical(path, resize=resize)
    frame = (gray, entropy_map(gray, grid), scale)
    set_cached_frame(path, grid, resize, frame)
    logger.debug(f"Cached frame for {path} ({gray.width}x{gray.height}, scale {scale:.4f})")
    return frame


def clear_cache() -> None:
    with _LOCK:
        _FRAME_CACHE.clear()
