"""
API routes module - HTTP endpoints for entropy maps and reward scoring.
"""

import json
import logging
import time
import traceback
from typing import Optional, Tuple

import anyio
from fastapi import APIRouter, File, Form, HTTPException, Query, Response, UploadFile
from pydantic import ValidationError

from app.core.actions import Action
from app.core.errors import PipelineError
from app.core.imaging import ImageFormat, decode, resize_longest_edge, to_gray
from app.core.reward import RewardConfig, score_on_map
from app.core.windowing import EntropyMap, GridConfig, entropy_map, entropy_map_to_json

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/api", tags=["api"])


def _format_for(data: bytes) -> ImageFormat:
    magic = data[:2]
    if magic == b"P5":
        return ImageFormat.PGM
    if magic == b"P6":
        return ImageFormat.PPM
    raise HTTPException(status_code=400, detail="upload must be a binary PGM (P5) or PPM (P6) image")


def _grid(cell_height: int, cell_width: int, bins: int) -> GridConfig:
    try:
        return GridConfig(cell_height=cell_height, cell_width=cell_width, bins=bins)
    except ValidationError as e:
        raise HTTPException(status_code=400, detail=str(e))


def _map_for_upload(data: bytes, fmt: ImageFormat, grid: GridConfig, resize: bool) -> Tuple[EntropyMap, float]:
    shot = decode(data, fmt)
    scale = 1.0
    if resize:
        shot, scale = resize_longest_edge(shot)
    return entropy_map(to_gray(shot), grid), scale


def _parse_action(raw: str, field: str) -> Action:
    try:
        return Action.from_json(json.loads(raw))
    except (json.JSONDecodeError, ValueError) as e:
        raise HTTPException(status_code=400, detail=f"invalid {field}: {e}")


@router.post("/entropy-map")
async def post_entropy_map(
    response: Response,
    image: UploadFile = File(...),
    cell_height: int = Query(50),
    cell_width: int = Query(50),
    bins: int = Query(256),
    resize: bool = Query(True),
):
    """Entropy map of an uploaded screenshot."""
    t0 = time.perf_counter()
    grid = _grid(cell_height, cell_width, bins)
    data = await image.read()
    fmt = _format_for(data)

    try:
        emap, scale = await anyio.to_thread.run_sync(_map_for_upload, data, fmt, grid, resize)
    except (PipelineError, ValueError) as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"Entropy map failed: {e}\n{traceback.format_exc()}")
        raise HTTPException(status_code=500, detail="Entropy map failed")

    total_ms = (time.perf_counter() - t0) * 1000.0
    response.headers["X-Compute-Time-Ms"] = f"{total_ms:.1f}"
    out = entropy_map_to_json(emap)
    out["scale"] = scale
    return out


@router.post("/score")
async def post_score(
    image: UploadFile = File(...),
    predicted: str = Form(...),
    target: str = Form(...),
    coords_frame: str = Form("original"),
    use_rw: bool = Form(True),
    use_rd: bool = Form(True),
    cell_height: int = Form(50),
    cell_width: int = Form(50),
    bins: int = Form(256),
    resize: bool = Form(True),
):
    """Reward breakdown for one predicted/target action pair on an uploaded screenshot."""
    grid = _grid(cell_height, cell_width, bins)
    pred = _parse_action(predicted, "predicted")
    tgt = _parse_action(target, "target")
    if coords_frame not in ("original", "resized"):
        raise HTTPException(status_code=400, detail="coords_frame must be 'original' or 'resized'")
    try:
        cfg = RewardConfig(use_rw=use_rw, use_rd=use_rd)
    except ValidationError as e:
        raise HTTPException(status_code=400, detail=str(e))

    data = await image.read()
    fmt = _format_for(data)

    def _run() -> dict:
        emap, scale = _map_for_upload(data, fmt, grid, resize)
        p, t = pred, tgt
        if coords_frame == "original":
            p = p.rescaled(scale, emap.image_width, emap.image_height)
            t = t.rescaled(scale, emap.image_width, emap.image_height)
        out = score_on_map(emap, p, t, cfg).to_json()
        out["scale"] = scale
        return out

    try:
        return await anyio.to_thread.run_sync(_run)
    except (PipelineError, ValueError) as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"Scoring failed: {e}\n{traceback.format_exc()}")
        raise HTTPException(status_code=500, detail="Scoring failed")
