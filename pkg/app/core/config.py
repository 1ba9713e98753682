"""
Run configuration - composes the per-module config blocks, loads them from
JSON and applies dotted command-line overrides.
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, Optional

from pydantic import BaseModel, ConfigDict, Field

from app.core.grpo import TrainConfig
from app.core.reward import RewardConfig
from app.core.synthenv import EnvSpec
from app.core.windowing import GridConfig

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = Path(__file__).resolve().parents[2] / "config" / "default_run.json"


class PathsConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    dataset: Optional[str] = None
    output_dir: str = "runs/default"
    checkpoint: Optional[str] = None


class EvalConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    draws: int = Field(default=64, ge=1)
    seed: int = 1234


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    grid: GridConfig = GridConfig()
    reward: RewardConfig = RewardConfig()
    train: TrainConfig = TrainConfig()
    env: EnvSpec = EnvSpec()
    eval: EvalConfig = EvalConfig()
    suite_size: int = Field(default=32, ge=1)
    suite_seed: int = 0
    paths: PathsConfig = PathsConfig()


def parse_override(text: str) -> tuple:
    """'--train.group_size=16' -> (['train', 'group_size'], 16)."""
    body = text[2:] if text.startswith("--") else text
    if "=" not in body:
        raise ValueError(f"override {text!r} must look like --section.key=value")
    key, raw = body.split("=", 1)
    parts = [p for p in key.split(".") if p]
    if not parts:
        raise ValueError(f"override {text!r} has an empty key")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return parts, value


def apply_overrides(data: Dict[str, Any], overrides: Iterable[str]) -> Dict[str, Any]:
    """Return a copy of `data` with every dotted override applied."""
    out = json.loads(json.dumps(data))
    for text in overrides:
        parts, value = parse_override(text)
        node = out
        for part in parts[:-1]:
            child = node.get(part)
            if not isinstance(child, dict):
                child = {}
                node[part] = child
            node = child
        node[parts[-1]] = value
        logger.debug(f"Override {'.'.join(parts)} = {value!r}")
    return out


def load_run_config(path=None, overrides: Iterable[str] = ()) -> RunConfig:
    """Load a RunConfig from JSON (defaults when `path` is None) and apply overrides."""
    data: Dict[str, Any] = {}
    if path is not None:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data, dict):
            raise ValueError(f"config {path} must contain a JSON object")
    return RunConfig.model_validate(apply_overrides(data, overrides))


def config_digest(cfg: RunConfig) -> str:
    canonical = json.dumps(cfg.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
