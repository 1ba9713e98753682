"""
Synthetic GUI environment - seeded screenshots with one target widget.

A task is a flat background with a few widgets, each filled with per-pixel
noise from the task PRNG. The target draws from all 256 levels; distractors
draw from narrow bands laid out as a checkerboard or as stripes, so they are
busy but carry less entropy. Every widget has a 2 px darker border. The
ground-truth action is a Click at the target's center.
"""

import logging
import math
from enum import Enum
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.core.actions import Action, CLICK
from app.core.errors import DimensionMismatchError, PlacementError
from app.core.grpo import TrainingState
from app.core.imaging import Screenshot, read_image, to_gray, write_image
from app.core.policy import Distribution, PolicyParams
from app.core.reward import RewardConfig, score_on_map
from app.core.windowing import GridConfig, Rect, entropy_map
from app.utils.jsonl import read_jsonl, write_jsonl

logger = logging.getLogger(__name__)

BORDER_PX = 2
BORDER_DARKEN = 120
CHECKER_PX = 8
CHECKER_LEVELS = (30, 110)
STRIPE_PX = 4
STRIPE_LEVELS = (20, 60, 100, 140)
# Distractor noise spans this many levels above each pattern level:
# 4 bits for checker, 5 bits for stripes, against 8 for the target.
DISTRACTOR_BAND = 8
DEFAULT_SUITE = "suite"


class Texture(str, Enum):
    NOISE = "noise"
    CHECKER = "checker"
    STRIPES = "stripes"


class EnvSpec(BaseModel):
    """Generator settings; the 500 px default gives a 10x10 map on the 50 px grid."""

    model_config = ConfigDict(frozen=True)

    image_width: int = Field(default=500, ge=1)
    image_height: int = Field(default=500, ge=1)
    min_widgets: int = Field(default=3, ge=1)
    max_widgets: int = Field(default=6, ge=1)
    min_widget_size: int = Field(default=40, ge=2 * BORDER_PX + 1)
    max_widget_size: int = Field(default=120, ge=2 * BORDER_PX + 1)
    background_intensity: int = Field(default=200, ge=0, le=255)
    max_attempts: int = Field(default=2000, ge=1)

    @model_validator(mode="after")
    def _ranges(self) -> "EnvSpec":
        if self.min_widgets > self.max_widgets:
            raise ValueError("min_widgets must not exceed max_widgets")
        if self.min_widget_size > self.max_widget_size:
            raise ValueError("min_widget_size must not exceed max_widget_size")
        if self.max_widget_size > min(self.image_width, self.image_height):
            raise ValueError("widgets must fit inside the image")
        return self


class Widget(BaseModel):
    model_config = ConfigDict(frozen=True)

    rect: Tuple[int, int, int, int]
    texture: Texture
    is_target: bool = False

    @property
    def box(self) -> Rect:
        return Rect(*self.rect)


class SynthTask(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    task_id: str
    seed: int
    screenshot: Screenshot
    target: Action
    widgets: Tuple[Widget, ...]

    @property
    def target_widget(self) -> Widget:
        return next(w for w in self.widgets if w.is_target)

    @property
    def target_rect(self) -> Rect:
        return self.target_widget.box


class EvalReport(BaseModel):
    mean_distance_px: float
    mean_reward: float
    hit_rate: float
    draws: int


def task_id_for(seed: int) -> str:
    return f"task_{seed:06d}"


def _paint(canvas: np.ndarray, box: Rect, texture: Texture, background: int, rng: np.random.Generator) -> None:
    """Fill a widget with per-pixel noise; the texture picks the levels it draws from."""
    h, w = box.height, box.width
    if texture is Texture.NOISE:
        fill = rng.integers(0, 256, size=(h, w), dtype=np.uint8)
    else:
        yy, xx = np.indices((h, w))
        if texture is Texture.CHECKER:
            base = np.where(((yy // CHECKER_PX) + (xx // CHECKER_PX)) % 2 == 0, *CHECKER_LEVELS)
        else:
            base = np.array(STRIPE_LEVELS)[(yy // STRIPE_PX) % len(STRIPE_LEVELS)]
        fill = (base + rng.integers(0, DISTRACTOR_BAND, size=(h, w))).astype(np.uint8)

    region = canvas[box.y0:box.y1, box.x0:box.x1]
    region[:] = max(0, background - BORDER_DARKEN)
    region[BORDER_PX:h - BORDER_PX, BORDER_PX:w - BORDER_PX] = fill[BORDER_PX:h - BORDER_PX, BORDER_PX:w - BORDER_PX]


def _place(spec: EnvSpec, count: int, rng: np.random.Generator) -> List[Rect]:
    """Rejection-sample `count` pairwise-disjoint rectangles inside the image."""
    placed: List[Rect] = []
    attempts = 0
    while len(placed) < count:
        if attempts >= spec.max_attempts:
            raise PlacementError(
                f"cannot place widgets: {len(placed)} of {count} placed after {attempts} attempts"
            )
        attempts += 1
        w = int(rng.integers(spec.min_widget_size, spec.max_widget_size + 1))
        h = int(rng.integers(spec.min_widget_size, spec.max_widget_size + 1))
        x0 = int(rng.integers(0, spec.image_width - w + 1))
        y0 = int(rng.integers(0, spec.image_height - h + 1))
        box = Rect(x0, y0, x0 + w, y0 + h)
        if not any(box.intersects(other) for other in placed):
            placed.append(box)
    return placed


def generate(seed: int, spec: EnvSpec = EnvSpec()) -> SynthTask:
    """Deterministic task for (seed, spec)."""
    rng = np.random.default_rng(seed)
    count = int(rng.integers(spec.min_widgets, spec.max_widgets + 1))
    boxes = _place(spec, count, rng)
    target_index = int(rng.integers(0, count))

    canvas = np.full((spec.image_height, spec.image_width), spec.background_intensity, dtype=np.uint8)
    widgets = []
    for idx, box in enumerate(boxes):
        if idx == target_index:
            texture = Texture.NOISE
        else:
            texture = Texture.CHECKER if rng.random() < 0.5 else Texture.STRIPES
        _paint(canvas, box, texture, spec.background_intensity, rng)
        widgets.append(Widget(rect=tuple(box.as_list()), texture=texture, is_target=idx == target_index))

    cx, cy = boxes[target_index].center
    shot = Screenshot(spec.image_width, spec.image_height, 1, canvas[:, :, None])
    return SynthTask(
        task_id=task_id_for(seed),
        seed=seed,
        screenshot=shot,
        target=Action(kind=CLICK, points=((cx, cy),)),
        widgets=tuple(widgets),
    )


def generate_suite(count: int, seed: int, spec: EnvSpec = EnvSpec()) -> List[SynthTask]:
    """Tasks for seeds seed .. seed + count - 1."""
    return [generate(seed + k, spec) for k in range(count)]


def write_suite(tasks: Sequence[SynthTask], out_dir, suite: str = DEFAULT_SUITE) -> Path:
    """
    Write {out_dir}/{suite}/{task_id}.pgm plus {out_dir}/{suite}.jsonl, one
    scorer-compatible line per task. Rewriting the same tasks is idempotent.
    """
    out_dir = Path(out_dir)
    image_dir = out_dir / suite
    image_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    for task in tasks:
        rel = f"{suite}/{task.task_id}.pgm"
        write_image(out_dir / rel, task.screenshot)
        rows.append({
            "image": rel,
            "task_id": task.task_id,
            "target": task.target.to_json(),
            "seed": task.seed,
            "target_rect": task.target_rect.as_list(),
            "widgets": [
                {"rect": list(w.rect), "texture": w.texture.value, "is_target": w.is_target}
                for w in task.widgets
            ],
        })

    index_path = out_dir / f"{suite}.jsonl"
    write_jsonl(index_path, rows)
    logger.info(f"Wrote {len(rows)} tasks to {index_path}")
    return index_path


def load_suite(index_path) -> List[SynthTask]:
    """Rebuild tasks from a suite index written by write_suite."""
    index_path = Path(index_path)
    tasks = []
    for row in read_jsonl(index_path, strict=True):
        shot = read_image(index_path.parent / row["image"])
        tasks.append(
            SynthTask(
                task_id=row["task_id"],
                seed=int(row.get("seed", 0)),
                screenshot=shot,
                target=Action.from_json(row["target"]),
                widgets=tuple(
                    Widget(rect=tuple(w["rect"]), texture=Texture(w["texture"]), is_target=w["is_target"])
                    for w in row["widgets"]
                ),
            )
        )
    return tasks


def training_states(tasks: Sequence[SynthTask], grid: GridConfig) -> List[TrainingState]:
    """Entropy maps are computed once per task and reused across iterations."""
    return [
        TrainingState(
            state_id=t.task_id,
            emap=entropy_map(to_gray(t.screenshot), grid),
            target=t.target,
            target_rect=t.target_rect,
        )
        for t in tasks
    ]


def evaluate(
    params: PolicyParams,
    suite: Sequence[SynthTask],
    draws_per_task: int,
    seed: int,
    grid: GridConfig = GridConfig(),
    reward_cfg: RewardConfig = RewardConfig(),
    states: Optional[Sequence[TrainingState]] = None,
) -> EvalReport:
    """
    Sample `draws_per_task` actions per task and report mean distance to the
    target, mean combined reward and the fraction landing inside the target.
    """
    if not suite:
        raise ValueError("empty suite")
    if draws_per_task <= 0:
        raise ValueError("draws must be positive")

    states = states if states is not None else training_states(suite, grid)
    rng = np.random.default_rng(seed)
    distances, rewards, hits = [], [], []
    for state in states:
        if (state.emap.rows, state.emap.cols) != (params.rows, params.cols):
            raise DimensionMismatchError(
                f"policy grid {params.rows}x{params.cols} does not match "
                f"task {state.state_id} grid {state.emap.rows}x{state.emap.cols}"
            )
        tx, ty = state.target.points[0]
        for draw in Distribution(params, state.emap).draw(rng, draws_per_task):
            x, y = draw.point
            distances.append(math.hypot(x - tx, y - ty))
            rewards.append(score_on_map(state.emap, draw.to_action(), state.target, reward_cfg).combined)
            hits.append(1.0 if state.target_rect is not None and state.target_rect.contains(x, y) else 0.0)

    n = len(distances)
    return EvalReport(
        mean_distance_px=math.fsum(distances) / n,
        mean_reward=math.fsum(rewards) / n,
        hit_rate=math.fsum(hits) / n,
        draws=n,
    )

