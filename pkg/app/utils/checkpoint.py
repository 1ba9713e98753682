"""
Checkpoint persistence for PolicyParams.
"""

import json
import logging
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field

from app.core.actions import ActionType
from app.core.policy import PolicyParams

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


class Checkpoint(BaseModel):
    version: int = CHECKPOINT_VERSION
    action_types: list[str]
    rows: int = Field(ge=1)
    cols: int = Field(ge=1)
    alpha: list[float]
    beta: float
    gamma: list[list[float]]
    step: int = Field(default=0, ge=0)
    seed: int = 0
    config_digest: str = ""
    grid: Optional[dict] = None

    def to_params(self) -> PolicyParams:
        if self.version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {self.version}")
        gamma = np.array(self.gamma, dtype=np.float64)
        if gamma.shape != (self.rows, self.cols):
            raise ValueError(f"gamma has shape {gamma.shape}, checkpoint declares {self.rows}x{self.cols}")
        types = tuple(ActionType.parse(t) for t in self.action_types)
        return PolicyParams(types, np.array(self.alpha, dtype=np.float64), self.beta, gamma)

    @classmethod
    def from_params(
        cls,
        params: PolicyParams,
        step: int,
        seed: int,
        config_digest: str = "",
        grid: Optional[dict] = None,
    ) -> "Checkpoint":
        return cls(
            action_types=[t.label for t in params.action_types],
            rows=params.rows,
            cols=params.cols,
            alpha=params.alpha.tolist(),
            beta=params.beta,
            gamma=params.gamma.tolist(),
            step=step,
            seed=seed,
            config_digest=config_digest,
            grid=grid,
        )


def save_checkpoint(path, ckpt: Checkpoint) -> Path:
    """Write via a temp file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(ckpt.model_dump(), indent=2) + "\n", encoding="utf-8")
    tmp.replace(path)
    logger.info(f"Saved checkpoint step {ckpt.step} to {path}")
    return path


def load_checkpoint(path) -> Checkpoint:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return Checkpoint.model_validate(data)
