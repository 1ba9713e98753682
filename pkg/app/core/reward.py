"""
Reward module - window information-density reward, distance reward, and
their product for one (predicted, target) action pair.
"""

import logging
import math
from typing import List, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.core.actions import Action
from app.core.errors import OutOfBoundsError
from app.core.imaging import GrayImage
from app.core.windowing import EntropyMap, GridConfig, cell_of_point, entropy_map

logger = logging.getLogger(__name__)

Point = Tuple[float, float]


class RewardConfig(BaseModel):
    """Reward constants; the toggles reproduce the w/o r_w and w/o r_d ablations."""

    model_config = ConfigDict(frozen=True)

    d_max: float = Field(default=1000.0, gt=0)
    epsilon: float = Field(default=1e-6, gt=0)
    use_rw: bool = True
    use_rd: bool = True

    @model_validator(mode="after")
    def _one_factor_enabled(self) -> "RewardConfig":
        if not (self.use_rw or self.use_rd):
            raise ValueError("at least one of use_rw / use_rd must be enabled")
        return self


class RewardBreakdown(BaseModel):
    r_w: float
    per_point: List[float]
    r_d: float
    combined: float
    type_matched: bool
    distance_px: Optional[float] = None

    def to_json(self) -> dict:
        return {
            "r_w": self.r_w,
            "r_d": self.r_d,
            "r": self.combined,
            "per_point": list(self.per_point),
            "type_matched": self.type_matched,
            "distance_px": self.distance_px,
        }


def window_reward(emap: EntropyMap, point: Point, epsilon: float = 1e-6) -> float:
    """H at the point's window over (max H + eps); a blank map scores 0."""
    i, j = cell_of_point(emap, point[0], point[1])
    return float(emap.entropies[i - 1, j - 1]) / (emap.max_entropy + epsilon)


def point_reward(pred: Point, tgt: Point, cfg: RewardConfig) -> float:
    """max(0, 1 - ||pred - tgt|| / d_max)."""
    dist = math.hypot(pred[0] - tgt[0], pred[1] - tgt[1])
    return max(0.0, 1.0 - dist / cfg.d_max)


def distance_reward(pred: Action, tgt: Action, cfg: RewardConfig) -> Tuple[float, List[float], bool]:
    """
    Mean point reward over the target's K points, gated on type equality.
    Missing predicted points score 0; K = 0 with matching types scores 1.
    """
    if pred.kind != tgt.kind:
        return 0.0, [], False

    k = len(tgt.points)
    if k == 0:
        return 1.0, [], True

    per_point = [
        point_reward(pred.points[idx], tgt.points[idx], cfg) if idx < len(pred.points) else 0.0
        for idx in range(k)
    ]
    if len(pred.points) < k:
        logger.debug(f"Prediction has {len(pred.points)} of {k} target points; missing ones score 0")
    return math.fsum(per_point) / k, per_point, True


def _check_bounds(emap: EntropyMap, points: Sequence[Point], role: str) -> None:
    for x, y in points:
        if not (0 <= x <= emap.image_width and 0 <= y <= emap.image_height):
            raise OutOfBoundsError(
                f"{role} point ({x}, {y}) outside image {emap.image_width}x{emap.image_height}"
            )


def score_on_map(emap: EntropyMap, pred: Action, tgt: Action, cfg: RewardConfig) -> RewardBreakdown:
    """combined_reward against a precomputed entropy map."""
    _check_bounds(emap, pred.points, "predicted")
    _check_bounds(emap, tgt.points, "target")

    if pred.points:
        r_w = window_reward(emap, pred.points[0], cfg.epsilon)
    elif tgt.points:
        r_w = 0.0
    else:
        # nothing to locate on either side
        r_w = 1.0

    r_d, per_point, matched = distance_reward(pred, tgt, cfg)

    distance = None
    if pred.points and tgt.points:
        (px, py), (tx, ty) = pred.points[0], tgt.points[0]
        distance = math.hypot(px - tx, py - ty)

    combined = (r_w if cfg.use_rw else 1.0) * (r_d if cfg.use_rd else 1.0)
    return RewardBreakdown(
        r_w=r_w,
        per_point=per_point,
        r_d=r_d,
        combined=combined,
        type_matched=matched,
        distance_px=distance,
    )


def combined_reward(
    img: GrayImage,
    pred: Action,
    tgt: Action,
    grid: GridConfig,
    cfg: RewardConfig,
) -> RewardBreakdown:
    """r = r_w * r_d on one screenshot; a disabled factor is replaced by 1."""
    return score_on_map(entropy_map(img, grid), pred, tgt, cfg)


def aggregate(breakdowns: Sequence[RewardBreakdown], errors: int = 0) -> dict:
    """Dataset-level summary; fsum keeps the result independent of record order."""
    n = len(breakdowns)

    def _mean(values: List[float]) -> Optional[float]:
        return math.fsum(values) / len(values) if values else None

    distances = [b.distance_px for b in breakdowns if b.distance_px is not None]
    return {
        "count": n,
        "errors": errors,
        "mean_r": _mean([b.combined for b in breakdowns]),
        "mean_r_w": _mean([b.r_w for b in breakdowns]),
        "mean_r_d": _mean([b.r_d for b in breakdowns]),
        "type_match_rate": _mean([1.0 if b.type_matched else 0.0 for b in breakdowns]),
        "mean_distance_px": _mean(distances),
    }
