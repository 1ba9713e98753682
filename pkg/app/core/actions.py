"""
Actions module - GUI action types, interaction steps and the JSONL record format.

Record schema, one object per line:
    {"image": str, "task_id": str?, "predicted": {"type": str, "points": [[x, y], ...]}?,
     "target": {"type": str, "points": [[x, y], ...]}}
"""

import json
import logging
import math
from enum import Enum
from typing import Any, Iterable, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from app.core.errors import RecordError

logger = logging.getLogger(__name__)


class ActionTag(str, Enum):
    CLICK = "click"
    DRAG = "drag"
    SCROLL = "scroll"
    TYPE_TEXT = "type"
    OTHER = "other"


# Largest overshoot of a rounded resize edge.
RESIZE_SLACK_PX = 0.5

# Required point counts; TypeText and Other are checked separately.
_EXACT_ARITY = {ActionTag.CLICK: 1, ActionTag.SCROLL: 1, ActionTag.DRAG: 2}


class ActionType(BaseModel):
    """Action kind. Other carries its own lowercase name and compares by it."""

    model_config = ConfigDict(frozen=True)

    tag: ActionTag
    name: Optional[str] = None

    @model_validator(mode="before")
    @classmethod
    def _normalize_name(cls, data: Any) -> Any:
        if isinstance(data, dict):
            data = dict(data)
            tag = ActionTag(data.get("tag"))
            if tag is ActionTag.OTHER:
                name = str(data.get("name") or "").strip().lower()
                if not name:
                    raise ValueError("other action types need a nonempty name")
                data["name"] = name
            else:
                data["name"] = None
        return data

    @classmethod
    def parse(cls, label: str) -> "ActionType":
        """Map a record's "type" string onto the enumeration."""
        text = str(label or "").strip().lower()
        if not text:
            raise ValueError("action type must be nonempty")
        try:
            tag = ActionTag(text)
        except ValueError:
            tag = ActionTag.OTHER
        if tag is ActionTag.OTHER:
            return cls(tag=ActionTag.OTHER, name=text)
        return cls(tag=tag)

    @property
    def label(self) -> str:
        return self.name if self.tag is ActionTag.OTHER else self.tag.value


CLICK = ActionType(tag=ActionTag.CLICK)
DRAG = ActionType(tag=ActionTag.DRAG)
SCROLL = ActionType(tag=ActionTag.SCROLL)
TYPE_TEXT = ActionType(tag=ActionTag.TYPE_TEXT)


class Action(BaseModel):
    """An action type plus its ordered interaction coordinates."""

    model_config = ConfigDict(frozen=True)

    kind: ActionType
    points: Tuple[Tuple[float, float], ...] = ()

    @field_validator("points", mode="before")
    @classmethod
    def _check_arity(cls, v: Any) -> Any:
        if v is None:
            return ()
        if not isinstance(v, (list, tuple)):
            raise ValueError("points must be a list")
        out = []
        for p in v:
            if not isinstance(p, (list, tuple)) or len(p) != 2:
                raise ValueError("point must have 2 coordinates")
            out.append(tuple(p))
        return tuple(out)

    @classmethod
    def click(cls, x: float, y: float) -> "Action":
        return cls(kind=CLICK, points=((x, y),))

    @classmethod
    def from_json(cls, obj: Any) -> "Action":
        if not isinstance(obj, dict):
            raise ValueError("action must be an object")
        if "type" not in obj:
            raise ValueError("missing required field 'type'")
        kind = ActionType.parse(obj["type"])
        try:
            return cls(kind=kind, points=obj.get("points") or ())
        except ValidationError as e:
            raise ValueError(_first_error(e))

    def to_json(self) -> dict:
        return {"type": self.kind.label, "points": [[x, y] for x, y in self.points]}

    def rescaled(self, scale: float, width: int, height: int) -> "Action":
        """
        Map original-frame points into a frame resized by `scale` to width x height.

        Resized dimensions are rounded, so a point on the original edge can land up
        to half a pixel past the new edge; such points are pulled back onto it.
        Anything further out is left for the bounds check.
        """
        if scale == 1.0:
            return self
        points = []
        for x, y in self.points:
            sx, sy = x * scale, y * scale
            if width < sx <= width + RESIZE_SLACK_PX:
                sx = float(width)
            if height < sy <= height + RESIZE_SLACK_PX:
                sy = float(height)
            points.append((sx, sy))
        return Action(kind=self.kind, points=tuple(points))


class StepRecord(BaseModel):
    """One (screenshot, predicted, target) step; task_id stands in for the instruction."""

    model_config = ConfigDict(frozen=True)

    image_ref: str
    target: Action
    predicted: Optional[Action] = None
    task_id: Optional[str] = None
    line: int = 0

    def to_json(self) -> dict:
        out: dict = {"image": self.image_ref}
        if self.task_id is not None:
            out["task_id"] = self.task_id
        if self.predicted is not None:
            out["predicted"] = self.predicted.to_json()
        out["target"] = self.target.to_json()
        return out


def _first_error(e: ValidationError) -> str:
    msg = e.errors()[0].get("msg", str(e))
    return msg.removeprefix("Value error, ")


def record_from_json(obj: Any, line: int) -> StepRecord:
    """Build a StepRecord from a decoded JSON object; unknown fields are ignored."""
    if not isinstance(obj, dict):
        raise RecordError(line, "record must be a JSON object")
    for field in ("image", "target"):
        if field not in obj:
            raise RecordError(line, f"missing required field '{field}'")
    if not isinstance(obj["image"], str):
        raise RecordError(line, "field 'image' must be a string")

    try:
        target = Action.from_json(obj["target"])
        predicted = Action.from_json(obj["predicted"]) if obj.get("predicted") is not None else None
    except ValueError as e:
        raise RecordError(line, str(e))

    task_id = obj.get("task_id")
    return StepRecord(
        image_ref=obj["image"],
        target=target,
        predicted=predicted,
        task_id=str(task_id) if task_id is not None else None,
        line=line,
    )


def _iter_lines(stream: Union[str, Iterable[str]]) -> Iterable[Tuple[int, str]]:
    lines = stream.splitlines() if isinstance(stream, str) else stream
    for lineno, raw in enumerate(lines, 1):
        text = raw.strip()
        if text:
            yield lineno, text


def _parse_line(lineno: int, text: str) -> StepRecord:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise RecordError(lineno, f"malformed JSON: {e.msg}")
    return record_from_json(obj, lineno)


def parse_records(stream: Union[str, Iterable[str]]) -> List[StepRecord]:
    """Order-preserving parse of line-delimited records; fails on the first bad line."""
    return [_parse_line(lineno, text) for lineno, text in _iter_lines(stream)]


def parse_records_lenient(stream: Union[str, Iterable[str]]) -> List[Union[StepRecord, RecordError]]:
    """Like parse_records, but every bad line becomes its RecordError in place."""
    out: List[Union[StepRecord, RecordError]] = []
    for lineno, text in _iter_lines(stream):
        try:
            out.append(_parse_line(lineno, text))
        except RecordError as e:
            logger.warning(f"Skipping unparseable record: {e}")
            out.append(e)
    return out


def serialize_records(records: Iterable[StepRecord]) -> str:
    return "".join(json.dumps(r.to_json()) + "\n" for r in records)


def validate_action(a: Action) -> List[str]:
    """Every arity/range violation of the action; an empty list means ok."""
    violations: List[str] = []
    k = len(a.points)
    tag = a.kind.tag

    if tag in _EXACT_ARITY and k != _EXACT_ARITY[tag]:
        need = _EXACT_ARITY[tag]
        violations.append(f"{tag.value} requires {need} point{'s' if need > 1 else ''}")
    elif tag is ActionTag.TYPE_TEXT and k > 1:
        violations.append("type allows at most 1 point")

    for x, y in a.points:
        if not (math.isfinite(x) and math.isfinite(y)):
            violations.append("point not finite")
        elif x < 0 or y < 0:
            violations.append("point out of range")
    return violations
